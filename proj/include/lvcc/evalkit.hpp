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

#ifndef LVCC_EVALKIT_HPP_
#define LVCC_EVALKIT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "lvcc/codec.hpp"
#include "lvcc/layers.hpp"
#include "lvcc/pipeline.hpp"

namespace lvcc::eval {

// One point of a rate-accuracy curve: rate in bits per pixel.
struct RAPoint {
  double rate = 0;
  double metric = 0;
  bool operator==(const RAPoint&) const = default;
};

// Exact bits and pixel count; value() is the only rounding step.
struct Bpp {
  uint64_t bits = 0;
  uint64_t pixels = 0;
  double value() const { return static_cast<double>(bits) / static_cast<double>(pixels); }
};

// Counts every container byte, header included, over the original size.
Bpp bpp(const codec::Bitstream& bitstream);
Bpp bpp(std::span<const uint8_t> container);  // FormatError on a bad header

// Non-dominated subset sorted by rate. Throws ConfigError when empty.
std::vector<RAPoint> pareto_front(std::vector<RAPoint> points);

// Classic Bjontegaard delta rate in percent (negative = savings). Both
// curves are Pareto-filtered first and need >= 4 points with distinct
// metrics and overlapping metric ranges.
double bd_rate(const std::vector<RAPoint>& anchor, const std::vector<RAPoint>& test);

inline constexpr double kPsnrCap = 100.0;

// Metric plugin: original and decoded [3, H, W] in [0, 1].
using MetricFn = std::function<double(const torch::Tensor&, const torch::Tensor&)>;
double psnr(const torch::Tensor& original, const torch::Tensor& decoded);
MetricFn metric_by_name(const std::string& name);  // "psnr"

struct RoundTrip {
  Bpp rate;
  torch::Tensor decoded;
};
using RoundTripFn = std::function<RoundTrip(const torch::Tensor& image, QIndex q)>;
RoundTripFn pipeline_round_trip(Pipeline& pipeline, bool use_preedit = true);

struct CurvePoint {
  int q = 0;
  double bpp = 0;
  double metric = 0;
  int64_t n_images = 0;
  bool operator==(const CurvePoint&) const = default;
};

// One point per q, averaged over images. Images whose round trip or
// metric throws are skipped for that q with a warning.
std::vector<CurvePoint> sweep_curve(const std::vector<torch::Tensor>& images, int q_levels,
                                    const RoundTripFn& round_trip, const MetricFn& metric);

std::vector<RAPoint> to_ra_points(const std::vector<CurvePoint>& curve);

// "q,bpp,metric,n_images" with round-trip exact doubles. The reader also
// accepts two-column "bpp,metric" files from external evaluators.
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);

void write_curve_svg(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                     const std::string& metric_label);

struct ModuleComplexity {
  std::string name;
  double gflops = 0;
  double mparams = 0;
  double seconds = 0;  // median wall clock
  double ref_gflops = std::numeric_limits<double>::quiet_NaN();
  double ref_mparams = std::numeric_limits<double>::quiet_NaN();
};

// Median wall-clock seconds of `runs` calls after one warm-up call.
double median_runtime(const std::function<void()>& fn, int runs);

// Pre-edit network, encoder side (analysis, hyper analysis, hyper synthesis,
// prior) and decoder side (synthesis, hyper synthesis, prior) on one
// probe x probe image.
std::vector<ModuleComplexity> complexity_report(Model& model, int64_t probe = 256, int runs = 10);
std::string format_complexity(const std::vector<ModuleComplexity>& rows);

}  // namespace lvcc::eval

#endif  // LVCC_EVALKIT_HPP_
