// Copyright 2026 The LVCC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lvcc/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "lvcc/bytes.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/log.hpp"

namespace lvcc::eval {

Bpp bpp(const codec::Bitstream& bitstream) {
  if (bitstream.orig_h == 0 || bitstream.orig_w == 0) throw FormatError("zero image size in header");
  return Bpp{8ull * bitstream.total_bytes(),
             static_cast<uint64_t>(bitstream.orig_h) * bitstream.orig_w};
}

Bpp bpp(std::span<const uint8_t> container) {
  if (container.size() < codec::Bitstream::kHeaderSize) throw FormatError("container shorter than header");
  return bpp(codec::Bitstream::parse(container));
}

std::vector<RAPoint> pareto_front(std::vector<RAPoint> points) {
  if (points.empty()) throw ConfigError("pareto_front needs at least one point");
  std::stable_sort(points.begin(), points.end(), [](const RAPoint& a, const RAPoint& b) {
    return a.rate < b.rate || (a.rate == b.rate && a.metric > b.metric);
  });
  std::vector<RAPoint> front;
  for (const auto& p : points) {
    if (front.empty() || p.metric > front.back().metric) {
      front.push_back(p);
    } else if (p == front.back()) {
      front.push_back(p);  // exact duplicates do not dominate each other
    }
  }
  return front;
}

namespace {

// Least-squares cubic of log10(rate) in the metric; coefficients low to high.
Eigen::Vector4d fit_cubic(const std::vector<RAPoint>& pts) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = pts[i].metric;
    a(i, 0) = 1;
    a(i, 1) = m;
    a(i, 2) = m * m;
    a(i, 3) = m * m * m;
    b(i) = std::log10(pts[i].rate);
  }
  return a.colPivHouseholderQr().solve(b);
}

double integrate(const Eigen::Vector4d& c, double lo, double hi) {
  auto prim = [&](double x) {
    return c(0) * x + c(1) * x * x / 2 + c(2) * x * x * x / 3 + c(3) * x * x * x * x / 4;
  };
  return prim(hi) - prim(lo);
}

std::vector<RAPoint> usable(const std::vector<RAPoint>& curve, const char* which) {
  for (const auto& p : curve) {
    if (!(p.rate > 0) || !std::isfinite(p.rate) || !std::isfinite(p.metric)) {
      throw ConfigError(std::string(which) + " curve has a non-positive or non-finite point");
    }
  }
  if (curve.empty()) throw ConfigError(std::string(which) + " curve is empty");
  auto front = pareto_front(curve);
  front.erase(std::unique(front.begin(), front.end(),
                          [](const RAPoint& a, const RAPoint& b) { return a.metric == b.metric; }),
              front.end());
  if (front.size() < 4) {
    throw ConfigError(std::string(which) + " curve has " + std::to_string(front.size()) +
                      " usable points, need 4");
  }
  return front;
}

}  // namespace

double bd_rate(const std::vector<RAPoint>& anchor, const std::vector<RAPoint>& test) {
  const auto a = usable(anchor, "anchor");
  const auto t = usable(test, "test");
  const double lo = std::max(a.front().metric, t.front().metric);
  const double hi = std::min(a.back().metric, t.back().metric);
  if (!(hi > lo)) throw ConfigError("anchor and test metric ranges do not overlap");

  // Center and scale the metric before fitting; the fit is affine-invariant
  // so this only improves conditioning.
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  auto normalize = [&](std::vector<RAPoint> pts) {
    for (auto& p : pts) p.metric = (p.metric - mid) / half;
    return pts;
  };
  const auto ca = fit_cubic(normalize(a));
  const auto ct = fit_cubic(normalize(t));
  const double avg = (integrate(ct, -1, 1) - integrate(ca, -1, 1)) / 2.0;
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

double psnr(const torch::Tensor& original, const torch::Tensor& decoded) {
  if (original.sizes() != decoded.sizes()) {
    throw DimensionError("psnr: shape mismatch");
  }
  const double mse = (original.to(torch::kFloat64) - decoded.to(torch::kFloat64)).pow(2).mean().item<double>();
  if (!std::isfinite(mse)) throw NumericError("psnr: non-finite error");
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

MetricFn metric_by_name(const std::string& name) {
  if (name == "psnr") return psnr;
  throw ConfigError("unknown metric '" + name + "' (built-in: psnr)");
}

RoundTripFn pipeline_round_trip(Pipeline& pipeline, bool use_preedit) {
  return [&pipeline, use_preedit](const torch::Tensor& image, QIndex q) {
    auto encoded = pipeline.encode(image, q, use_preedit);
    const auto bytes = encoded.bitstream.serialize();
    auto decoded = pipeline.decode(codec::Bitstream::parse(bytes));
    return RoundTrip{bpp(bytes), decoded.image};
  };
}

std::vector<CurvePoint> sweep_curve(const std::vector<torch::Tensor>& images, int q_levels,
                                    const RoundTripFn& round_trip, const MetricFn& metric) {
  std::vector<CurvePoint> curve;
  for (int q = 0; q < q_levels; ++q) {
    double rate = 0, value = 0;
    int64_t n = 0;
    for (size_t i = 0; i < images.size(); ++i) {
      try {
        auto rt = round_trip(images[i], QIndex(q));
        const double m = metric(images[i], rt.decoded);
        if (!std::isfinite(m)) throw NumericError("metric is not finite");
        rate += rt.rate.value();
        value += m;
        ++n;
      } catch (const std::exception& e) {
        log::warn("q=" + std::to_string(q) + " image " + std::to_string(i) + " excluded: " + e.what());
      }
    }
    if (n == 0) {
      log::warn("q=" + std::to_string(q) + " has no usable images; point dropped");
      continue;
    }
    curve.push_back(CurvePoint{q, rate / n, value / n, n});
  }
  return curve;
}

std::vector<RAPoint> to_ra_points(const std::vector<CurvePoint>& curve) {
  std::vector<RAPoint> out;
  for (const auto& c : curve) out.push_back({c.bpp, c.metric});
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::string text = "q,bpp,metric,n_images\n";
  char line[128];
  for (const auto& c : curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%lld\n", c.q, c.bpp, c.metric,
                  static_cast<long long>(c.n_images));
    text += line;
  }
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const bool full = header == "q,bpp,metric,n_images";
  if (!full && header != "bpp,metric") {
    throw FormatError(path.string() + ": expected header 'q,bpp,metric,n_images' or 'bpp,metric'");
  }
  std::vector<CurvePoint> curve;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    try {
      CurvePoint c;
      if (full) {
        if (cells.size() != 4) throw FormatError("wrong column count");
        c.q = std::stoi(cells[0]);
        c.bpp = std::stod(cells[1]);
        c.metric = std::stod(cells[2]);
        c.n_images = std::stoll(cells[3]);
      } else {
        if (cells.size() != 2) throw FormatError("wrong column count");
        c.q = row;
        c.bpp = std::stod(cells[0]);
        c.metric = std::stod(cells[1]);
        c.n_images = 0;
      }
      curve.push_back(c);
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": bad row '" + line + "'");
    }
    ++row;
  }
  return curve;
}

void write_curve_svg(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                     const std::string& metric_label) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& [name, pts] : curves) {
    for (const auto& p : pts) {
      x0 = std::min(x0, p.bpp), x1 = std::max(x1, p.bpp);
      y0 = std::min(y0, p.metric), y1 = std::max(y1, p.metric);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double W = 640, H = 480, m = 60;
  auto sx = [&](double x) { return m + (x - x0) / (x1 - x0) * (W - 2 * m); };
  auto sy = [&](double y) { return H - m - (y - y0) / (y1 - y0) * (H - 2 * m); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">bpp ("
      << x0 << " to " << x1 << ")</text>\n"
      << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
      << ")\" text-anchor=\"middle\">" << metric_label << " (" << y0 << " to " << y1 << ")</text>\n";
  size_t k = 0;
  for (const auto& [name, pts] : curves) {
    const char* color = colors[k % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) svg << sx(p.bpp) << ',' << sy(p.metric) << ' ';
    svg << "\"/>\n";
    for (const auto& p : pts) {
      svg << "<circle cx=\"" << sx(p.bpp) << "\" cy=\"" << sy(p.metric) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    svg << "<text x=\"" << W - m - 120 << "\" y=\"" << m + 18 * k << "\" fill=\"" << color << "\">" << name
        << "</text>\n";
    ++k;
  }
  svg << "</svg>\n";
  const std::string text = svg.str();
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

double median_runtime(const std::function<void()>& fn, int runs) {
  runs = std::max(runs, 1);
  fn();
  std::vector<double> t;
  for (int i = 0; i < runs; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return runs % 2 ? t[runs / 2] : 0.5 * (t[runs / 2 - 1] + t[runs / 2]);
}

std::vector<ModuleComplexity> complexity_report(Model& model, int64_t probe, int runs) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(0);
  const QIndex q(0);
  auto& codec = *model.codec();
  auto x = torch::rand({1, 3, probe, probe});
  auto tokens = model.tokens(x);
  auto y = torch::round(codec.g_enc(x, q));
  auto z = torch::round(codec.h_enc(y, q));

  auto measure = [&](std::string name, int64_t params, const std::function<void()>& fn) {
    ModuleComplexity row;
    row.name = std::move(name);
    row.mparams = params / 1e6;
    {
      profile::FlopCounter counter;
      fn();
      row.gflops = counter.flops() / 1e9;
    }
    row.seconds = median_runtime(fn, runs);
    return row;
  };
  const int64_t p_prior = count_parameters(*codec.prior());
  const int64_t p_hs = count_parameters(*codec.hyper_synthesis());

  std::vector<ModuleComplexity> rows;
  rows.push_back(measure("pre-edit", count_parameters(*model.preedit()),
                         [&] { model.preedit()->forward(x, tokens, q); }));
  rows.back().ref_gflops = 2.420;
  rows.back().ref_mparams = 23.51;
  rows.push_back(measure("encoder",
                         count_parameters(*codec.analysis()) + count_parameters(*codec.hyper_analysis()) +
                             p_hs + p_prior,
                         [&] {
                           auto yy = codec.g_enc(x, q);
                           auto zz = codec.h_enc(torch::round(yy), q);
                           codec.h_dec(torch::round(zz), q);
                         }));
  rows.back().ref_mparams = 30.97;
  rows.push_back(measure("decoder", count_parameters(*codec.synthesis()) + p_hs + p_prior, [&] {
    codec.h_dec(z, q);
    codec.g_dec(y, q);
  }));
  rows.back().ref_mparams = 30.45;
  return rows;
}

std::string format_complexity(const std::vector<ModuleComplexity>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %12s %12s %12s %14s %14s\n", "module", "GFLOPs", "params(M)",
                "time(s)", "ref GFLOPs", "ref params(M)");
  out << line;
  auto ref = [](double v) {
    if (std::isnan(v)) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", v);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %12.3f %12.3f %12.4f %14s %14s\n", r.name.c_str(), r.gflops,
                  r.mparams, r.seconds, ref(r.ref_gflops).c_str(), ref(r.ref_mparams).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace lvcc::eval
