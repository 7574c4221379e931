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

#include "lvcc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lvcc/bytes.hpp"
#include "lvcc/errors.hpp"

namespace lvcc::codec {

namespace F = torch::nn::functional;

namespace {

constexpr int kStages = 4;
const std::vector<int64_t> kPriorWidths = {1, 3, 3, 3, 1};

torch::Tensor normal_cdf(const torch::Tensor& x) {
  return 0.5 * torch::erfc(x * (-1.0 / std::sqrt(2.0)));
}


torch::Tensor bits_of(const torch::Tensor& likelihood) {
  return -torch::log2(likelihood.clamp_min(kLikelihoodFloor));
}

int32_t to_symbol(float v) {
  if (!std::isfinite(v) || std::fabs(v) > float(1 << 30)) {
    throw NumericError("latent value out of codable range");
  }
  return static_cast<int32_t>(v);
}

std::vector<int32_t> to_symbols(const torch::Tensor& t) {
  auto flat = t.to(torch::kFloat32).contiguous();
  const float* p = flat.data_ptr<float>();
  std::vector<int32_t> out(static_cast<size_t>(flat.numel()));
  for (size_t i = 0; i < out.size(); ++i) out[i] = to_symbol(p[i]);
  return out;
}

}  // namespace

void CodecConfig::validate() const {
  if (n_channels < 8) throw ConfigError("codec n_channels must be >= 8");
  if (q_levels < 2) throw ConfigError("q_levels must be >= 2");
  if (!(scale_bound > 0.0) || !(scale_max > scale_bound)) {
    throw ConfigError("need 0 < scale_bound < scale_max");
  }
  if (scale_table_size < 2) throw ConfigError("scale table needs >= 2 entries");
}

std::vector<double> CodecConfig::scale_table() const {
  std::vector<double> table(static_cast<size_t>(scale_table_size));
  const double lo = std::log(scale_bound), hi = std::log(scale_max);
  for (int i = 0; i < scale_table_size; ++i) {
    table[i] = std::exp(lo + (hi - lo) * i / (scale_table_size - 1));
  }
  table.front() = scale_bound;
  table.back() = scale_max;
  return table;
}

// ---------------------------------------------------------------------------

torch::Tensor gdn_norm(const torch::Tensor& x, const torch::Tensor& beta,
                       const torch::Tensor& gamma) {
  const int64_t c = x.size(1);
  auto weight = gamma.view({c, c, 1, 1});
  profile::record(2 * c * c * x.size(0) * x.size(2) * x.size(3));
  return torch::sqrt(F::conv2d(x * x, weight, F::Conv2dFuncOptions().bias(beta)));
}

torch::Tensor gdn(const torch::Tensor& x, const torch::Tensor& beta,
                  const torch::Tensor& gamma, bool inverse) {
  auto norm = gdn_norm(x, beta, gamma);
  return inverse ? x * norm : x / norm;
}

GdnImpl::GdnImpl(int64_t channels, bool inverse) : inverse_(inverse) {
  beta_raw_ = register_parameter(
      "beta_raw", torch::full({channels}, std::sqrt(1.0 - kGdnBetaMin)));
  gamma_raw_ = register_parameter(
      "gamma_raw", std::sqrt(0.1) * torch::eye(channels));
}

torch::Tensor GdnImpl::beta() const { return beta_raw_ * beta_raw_ + kGdnBetaMin; }
torch::Tensor GdnImpl::gamma() const { return gamma_raw_ * gamma_raw_; }

torch::Tensor GdnImpl::forward(const torch::Tensor& x) {
  return gdn(x, beta(), gamma(), inverse_);
}

torch::Tensor quantize(const torch::Tensor& x, QuantMode mode) {
  if (mode == QuantMode::kRound) return torch::round(x);
  auto noise = torch::empty_like(x).uniform_(-0.5, 0.5);
  return x + noise;
}

// ---------------------------------------------------------------------------

ResBlockImpl::ResBlockImpl(int64_t channels, int q_levels, bool inverse) {
  conv1_ = register_module("conv1", Conv(channels, channels, 3));
  gdn_ = register_module("gdn", Gdn(channels, inverse));
  conv2_ = register_module("conv2", Conv(channels, channels, 3));
  adapt_ = register_module("adapt", Adaption(channels, q_levels));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, QIndex q) {
  auto r = conv2_->forward(gdn_->forward(conv1_->forward(x)));
  return x + adapt_->forward(r, q);
}

AnalysisImpl::AnalysisImpl(int64_t channels, int q_levels) {
  for (int i = 0; i < kStages; ++i) {
    const auto id = std::to_string(i);
    convs_.push_back(register_module("conv" + id, Conv(i == 0 ? 3 : channels, channels, 3, 2)));
    blocks_.push_back(register_module("block" + id, ResBlock(channels, q_levels, false)));
    gdns_.push_back(register_module("gdn" + id, Gdn(channels, false)));
  }
}

torch::Tensor AnalysisImpl::forward(const torch::Tensor& x, QIndex q) {
  if (x.size(2) % 16 != 0 || x.size(3) % 16 != 0) {
    throw DimensionError("g_enc input must be a multiple of 16");
  }
  auto h = x;
  for (int i = 0; i < kStages; ++i) {
    h = gdns_[i]->forward(blocks_[i]->forward(convs_[i]->forward(h), q));
  }
  return h;
}

SynthesisImpl::SynthesisImpl(int64_t channels, int q_levels) {
  for (int i = 0; i < kStages; ++i) {
    const auto id = std::to_string(i);
    const int64_t out = i + 1 == kStages ? 3 : channels;
    igdns_.push_back(register_module("igdn" + id, Gdn(channels, true)));
    blocks_.push_back(register_module("block" + id, ResBlock(channels, q_levels, true)));
    convs_.push_back(register_module("conv" + id, Conv(channels, out * 4, 3)));
  }
}

torch::Tensor SynthesisImpl::forward(const torch::Tensor& y, QIndex q) {
  auto h = y;
  for (int i = 0; i < kStages; ++i) {
    h = blocks_[i]->forward(igdns_[i]->forward(h), q);
    h = F::pixel_shuffle(convs_[i]->forward(h), 2);
  }
  return h.clamp(0.0, 1.0);
}

HyperAnalysisImpl::HyperAnalysisImpl(int64_t channels, int q_levels) {
  conv1_ = register_module("conv1", Conv(channels, channels, 3, 2));
  adapt1_ = register_module("adapt1", Adaption(channels, q_levels));
  conv2_ = register_module("conv2", Conv(channels, channels, 3, 2));
  adapt2_ = register_module("adapt2", Adaption(channels, q_levels));
}

torch::Tensor HyperAnalysisImpl::forward(const torch::Tensor& y, QIndex q) {
  if (y.size(2) % 4 != 0 || y.size(3) % 4 != 0) {
    throw DimensionError("h_enc input must be a multiple of 4");
  }
  auto h = torch::relu(adapt1_->forward(conv1_->forward(torch::abs(y)), q));
  return adapt2_->forward(conv2_->forward(h), q);
}

HyperSynthesisImpl::HyperSynthesisImpl(int64_t channels, int q_levels,
                                       double scale_bound)
    : scale_bound_(scale_bound) {
  conv1_ = register_module("conv1", Conv(channels, channels * 4, 3));
  adapt1_ = register_module("adapt1", Adaption(channels, q_levels));
  conv2_ = register_module("conv2", Conv(channels, channels * 4, 3));
  adapt2_ = register_module("adapt2", Adaption(channels, q_levels));
  out_ = register_module("out", Conv(channels, channels, 3));
}

torch::Tensor HyperSynthesisImpl::forward(const torch::Tensor& z, QIndex q) {
  auto h = torch::relu(adapt1_->forward(F::pixel_shuffle(conv1_->forward(z), 2), q));
  h = torch::relu(adapt2_->forward(F::pixel_shuffle(conv2_->forward(h), 2), q));
  return F::softplus(out_->forward(h)) + scale_bound_;
}

// ---------------------------------------------------------------------------

FactorizedPriorImpl::FactorizedPriorImpl(int64_t channels, double init_scale)
    : channels_(channels), widths_(kPriorWidths) {
  const auto layers = widths_.size() - 1;
  const double scale = std::pow(init_scale, 1.0 / static_cast<double>(layers));
  for (size_t i = 0; i < layers; ++i) {
    const auto id = std::to_string(i);
    const double init = std::log(std::expm1(1.0 / scale / static_cast<double>(widths_[i + 1])));
    matrices_.push_back(register_parameter(
        "matrix" + id, torch::full({channels, widths_[i + 1], widths_[i]}, init)));
    biases_.push_back(register_parameter(
        "bias" + id, torch::empty({channels, widths_[i + 1], 1}).uniform_(-0.5, 0.5)));
    if (i + 1 < layers) {
      factors_.push_back(register_parameter(
          "factor" + id, torch::zeros({channels, widths_[i + 1], 1})));
    }
  }
}

torch::Tensor FactorizedPriorImpl::logits_cdf(const torch::Tensor& v) {
  auto logits = v;
  for (size_t i = 0; i < matrices_.size(); ++i) {
    logits = torch::matmul(F::softplus(matrices_[i]), logits) + biases_[i];
    if (i < factors_.size()) logits = logits + torch::tanh(factors_[i]) * torch::tanh(logits);
  }
  return logits;
}

torch::Tensor FactorizedPriorImpl::likelihood(const torch::Tensor& v) {
  if (v.dim() != 4 || v.size(1) != channels_) {
    throw DimensionError("prior expects [B, " + std::to_string(channels_) + ", H, W]");
  }
  auto flat = v.permute({1, 0, 2, 3}).reshape({channels_, 1, -1});
  auto lower = logits_cdf(flat - 0.5);
  auto upper = logits_cdf(flat + 0.5);
  // Evaluate on the side of the median where the sigmoids are not saturated.
  auto sign = -torch::sign(lower + upper).detach();
  auto lik = torch::abs(torch::sigmoid(sign * upper) - torch::sigmoid(sign * lower));
  return lik.reshape({channels_, v.size(0), v.size(2), v.size(3)}).permute({1, 0, 2, 3});
}

std::function<double(double)> FactorizedPriorImpl::channel_cdf(int64_t channel) const {
  struct Layer {
    int64_t rows, cols;
    std::vector<double> matrix, bias, factor;
  };
  std::vector<Layer> layers;
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < matrices_.size(); ++i) {
    Layer layer{widths_[i + 1], widths_[i], {}, {}, {}};
    auto m = F::softplus(matrices_[i][channel]).to(torch::kFloat64).contiguous();
    auto b = biases_[i][channel].to(torch::kFloat64).contiguous();
    layer.matrix.assign(m.data_ptr<double>(), m.data_ptr<double>() + m.numel());
    layer.bias.assign(b.data_ptr<double>(), b.data_ptr<double>() + b.numel());
    if (i < factors_.size()) {
      auto f = torch::tanh(factors_[i][channel]).to(torch::kFloat64).contiguous();
      layer.factor.assign(f.data_ptr<double>(), f.data_ptr<double>() + f.numel());
    }
    layers.push_back(std::move(layer));
  }
  return [layers](double x) {
    std::vector<double> h{x}, next;
    for (const auto& layer : layers) {
      next.assign(static_cast<size_t>(layer.rows), 0.0);
      for (int64_t r = 0; r < layer.rows; ++r) {
        double acc = layer.bias[r];
        for (int64_t c = 0; c < layer.cols; ++c) acc += layer.matrix[r * layer.cols + c] * h[c];
        if (!layer.factor.empty()) acc += layer.factor[r] * std::tanh(acc);
        next[r] = acc;
      }
      h.swap(next);
    }
    return 1.0 / (1.0 + std::exp(-h[0]));
  };
}

torch::Tensor gaussian_likelihood(const torch::Tensor& v, const torch::Tensor& scales) {
  auto mag = torch::abs(v);
  auto upper = normal_cdf((0.5 - mag) / scales);
  auto lower = normal_cdf((-0.5 - mag) / scales);
  return upper - lower;
}

RateEstimate rate_estimate(const torch::Tensor& y_hat, const torch::Tensor& scales,
                           const torch::Tensor& z_hat, FactorizedPrior& prior,
                           double scale_bound) {
  if (y_hat.sizes() != scales.sizes()) throw DimensionError("scales must match y_hat");
  // Tolerance for the float32 softplus + bound sum.
  if ((scales < scale_bound * (1.0 - 1e-6)).any().item<bool>()) {
    throw NumericError("scale below bound");
  }
  return {bits_of(gaussian_likelihood(y_hat, scales)).sum(),
          bits_of(prior->likelihood(z_hat)).sum()};
}

// ---------------------------------------------------------------------------

CodecImpl::CodecImpl(const CodecConfig& config) : config_(config) {
  config_.validate();
  const int64_t n = config_.n_channels;
  analysis_ = register_module("g_enc", Analysis(n, config_.q_levels));
  synthesis_ = register_module("g_dec", Synthesis(n, config_.q_levels));
  hyper_analysis_ = register_module("h_enc", HyperAnalysis(n, config_.q_levels));
  hyper_synthesis_ = register_module(
      "h_dec", HyperSynthesis(n, config_.q_levels, config_.scale_bound));
  prior_ = register_module("prior", FactorizedPrior(n));
}

LatentPack CodecImpl::analyze(const torch::Tensor& x, QIndex q) {
  check_q(q, config_.q_levels);
  if (x.size(2) % kPadMultiple != 0 || x.size(3) % kPadMultiple != 0) {
    throw DimensionError("codec input must be padded to a multiple of 64");
  }
  auto y = g_enc(x, q);
  auto z = h_enc(y, q);
  auto scales = h_dec(quantize(z, QuantMode::kRound), q);
  return {y, z, scales};
}

ForwardResult CodecImpl::forward(const torch::Tensor& x, QIndex q, QuantMode mode) {
  check_q(q, config_.q_levels);
  if (x.dim() != 4 || x.size(1) != 3) throw DimensionError("codec expects [B, 3, H, W]");
  if (x.size(2) % kPadMultiple != 0 || x.size(3) % kPadMultiple != 0) {
    throw DimensionError("codec input must be padded to a multiple of 64");
  }
  ForwardResult r;
  auto y = g_enc(x, q);
  auto z = h_enc(y, q);
  r.z_hat = quantize(z, mode);
  r.scales = h_dec(r.z_hat, q);
  r.y_hat = quantize(y, mode);
  r.x_hat = g_dec(r.y_hat, q);
  r.bits_y = bits_of(gaussian_likelihood(r.y_hat, r.scales)).sum({1, 2, 3});
  r.bits_z = bits_of(prior_->likelihood(r.z_hat)).sum({1, 2, 3});
  return r;
}

// ---------------------------------------------------------------------------

uint32_t EntropyTables::scale_index(float scale) const {
  auto it = std::lower_bound(scale_table.begin(), scale_table.end(),
                             static_cast<double>(scale));
  if (it == scale_table.end()) return static_cast<uint32_t>(scale_table.size() - 1);
  return static_cast<uint32_t>(it - scale_table.begin());
}

EntropyTables build_cdf_tables(Codec& codec) {
  EntropyTables t;
  t.scale_table = codec->config().scale_table();
  for (double s : t.scale_table) t.y_tables.push_back(entropy::gaussian_latent_table(s));
  auto& prior = codec->prior();
  for (int64_t c = 0; c < prior->channels(); ++c) {
    t.z_tables.push_back(entropy::cdf_latent_table(prior->channel_cdf(c)));
  }
  return t;
}

std::vector<uint8_t> Bitstream::serialize() const {
  ByteWriter w;
  w.text("LVCC");
  w.u8(kVersion);
  w.u8(q);
  w.u16(orig_h);
  w.u16(orig_w);
  w.u32(static_cast<uint32_t>(z_bytes.size()));
  w.u32(static_cast<uint32_t>(y_bytes.size()));
  w.bytes(z_bytes);
  w.bytes(y_bytes);
  return w.take();
}

Bitstream Bitstream::parse(std::span<const uint8_t> data) {
  if (data.size() < kHeaderSize) throw DecodeError("bitstream shorter than header");
  ByteReader r(data);
  if (r.text(4) != "LVCC") throw FormatError("bad bitstream magic");
  if (auto v = r.u8(); v != kVersion) {
    throw FormatError("unsupported bitstream version " + std::to_string(v));
  }
  Bitstream bs;
  bs.q = r.u8();
  bs.orig_h = r.u16();
  bs.orig_w = r.u16();
  const uint64_t z_len = r.u32();
  const uint64_t y_len = r.u32();
  if (z_len + y_len != r.remaining()) {
    throw DecodeError("payload size " + std::to_string(r.remaining()) +
                      " does not match header lengths " + std::to_string(z_len + y_len));
  }
  auto z = r.bytes(z_len);
  auto y = r.bytes(y_len);
  bs.z_bytes.assign(z.begin(), z.end());
  bs.y_bytes.assign(y.begin(), y.end());
  return bs;
}

torch::Tensor pad_to_multiple(const torch::Tensor& image, int64_t multiple) {
  const int64_t h = image.size(-2), w = image.size(-1);
  const int64_t ph = (multiple - h % multiple) % multiple;
  const int64_t pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return image;
  const bool batched = image.dim() == 4;
  auto x = batched ? image : image.unsqueeze(0);
  x = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReflect));
  return batched ? x : x.squeeze(0);
}

// ---------------------------------------------------------------------------

ImageCodec::ImageCodec(Codec codec, const entropy::CoderBackend& backend)
    : codec_(std::move(codec)), backend_(&backend) {
  refresh_tables();
}

void ImageCodec::refresh_tables() {
  torch::NoGradGuard no_grad;
  tables_ = build_cdf_tables(codec_);
  tables_.z_tables.push_back(entropy::bypass_table());
  tables_.y_tables.push_back(entropy::bypass_table());
}

Encoded ImageCodec::encode(const torch::Tensor& image, QIndex q) {
  check_q(q, codec_->config().q_levels);
  if (image.dim() != 3 || image.size(0) != 3) throw DimensionError("expected [3, H, W] image");
  const int64_t h = image.size(1), w = image.size(2);
  if (h < kPadMultiple || w < kPadMultiple) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " smaller than 64x64");
  }
  if (h > 65535 || w > 65535) throw DimensionError("image larger than 65535 pixels per side");

  torch::NoGradGuard no_grad;
  auto x = pad_to_multiple(image.to(torch::kFloat32)).unsqueeze(0);
  Encoded out;
  auto y = codec_->g_enc(x, q);
  auto z = codec_->h_enc(y, q);
  out.z_hat = quantize(z, QuantMode::kRound);
  out.scales = codec_->h_dec(out.z_hat, q);
  out.y_hat = quantize(y, QuantMode::kRound);

  const auto bypass_z = static_cast<uint32_t>(tables_.z_tables.size() - 1);
  const auto bypass_y = static_cast<uint32_t>(tables_.y_tables.size() - 1);
  std::vector<int32_t> symbols;
  std::vector<uint32_t> indices;

  const auto z_values = to_symbols(out.z_hat);
  const int64_t z_plane = out.z_hat.size(2) * out.z_hat.size(3);
  for (size_t i = 0; i < z_values.size(); ++i) {
    const auto c = static_cast<uint32_t>(static_cast<int64_t>(i) / z_plane);
    entropy::expand_latent(z_values[i], tables_.z_tables[c], c, bypass_z, symbols, indices);
  }
  out.bitstream.z_bytes = backend_->encode(symbols, tables_.z_tables, indices);

  symbols.clear();
  indices.clear();
  const auto y_values = to_symbols(out.y_hat);
  auto scales = out.scales.contiguous();
  const float* s = scales.data_ptr<float>();
  for (size_t i = 0; i < y_values.size(); ++i) {
    const uint32_t t = tables_.scale_index(s[i]);
    entropy::expand_latent(y_values[i], tables_.y_tables[t], t, bypass_y, symbols, indices);
  }
  out.bitstream.y_bytes = backend_->encode(symbols, tables_.y_tables, indices);

  out.bitstream.q = static_cast<uint8_t>(q.value);
  out.bitstream.orig_h = static_cast<uint16_t>(h);
  out.bitstream.orig_w = static_cast<uint16_t>(w);
  return out;
}

Decoded ImageCodec::decompress(const Bitstream& bs) {
  const QIndex q{bs.q};
  check_q(q, codec_->config().q_levels);
  if (bs.orig_h < kPadMultiple || bs.orig_w < kPadMultiple) {
    throw FormatError("header dimensions below 64");
  }
  torch::NoGradGuard no_grad;
  const int64_t n = codec_->config().n_channels;
  const int64_t ph = (bs.orig_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int64_t pw = (bs.orig_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;

  Decoded out;
  out.q = q;
  out.z_hat = torch::empty({1, n, ph / 64, pw / 64}, torch::kFloat32);
  {
    entropy::RangeDecoder decoder(bs.z_bytes);
    float* p = out.z_hat.data_ptr<float>();
    const int64_t plane = out.z_hat.size(2) * out.z_hat.size(3);
    for (int64_t i = 0; i < out.z_hat.numel(); ++i) {
      p[i] = static_cast<float>(entropy::decode_latent(decoder, tables_.z_tables[i / plane]));
    }
  }
  auto scales = codec_->h_dec(out.z_hat, q).contiguous();
  out.y_hat = torch::empty({1, n, ph / 16, pw / 16}, torch::kFloat32);
  {
    entropy::RangeDecoder decoder(bs.y_bytes);
    float* p = out.y_hat.data_ptr<float>();
    const float* s = scales.data_ptr<float>();
    for (int64_t i = 0; i < out.y_hat.numel(); ++i) {
      p[i] = static_cast<float>(
          entropy::decode_latent(decoder, tables_.y_tables[tables_.scale_index(s[i])]));
    }
  }
  auto x_hat = codec_->g_dec(out.y_hat, q);
  using torch::indexing::Slice;
  out.image = x_hat.squeeze(0).index({Slice(), Slice(0, bs.orig_h), Slice(0, bs.orig_w)}).contiguous();
  return out;
}

}  // namespace lvcc::codec
