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

#ifndef LVCC_CODEC_HPP_
#define LVCC_CODEC_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "lvcc/entropy.hpp"
#include "lvcc/layers.hpp"

namespace lvcc::codec {

struct CodecConfig {
  int n_channels = 192;
  int q_levels = 6;
  double scale_bound = 0.11;
  double scale_max = 256.0;
  int scale_table_size = 64;

  static CodecConfig tiny() {
    CodecConfig c;
    c.n_channels = 32;
    return c;
  }
  void validate() const;
  // Log-spaced, strictly increasing, first entry == scale_bound.
  std::vector<double> scale_table() const;
};

inline constexpr double kGdnBetaMin = 1e-6;
inline constexpr double kLikelihoodFloor = 1.0 / (1 << 24);
inline constexpr int64_t kPadMultiple = 64;

// Generalized divisive normalization at every spatial location:
//   forward  y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)
//   inverse  y_i = x_i * sqrt(beta_i + sum_j gamma_ij x_j^2)
// x: [B, C, H, W], beta: [C], gamma: [C, C].
torch::Tensor gdn(const torch::Tensor& x, const torch::Tensor& beta,
                  const torch::Tensor& gamma, bool inverse);
// The denominator term sqrt(beta_i + sum_j gamma_ij x_j^2).
torch::Tensor gdn_norm(const torch::Tensor& x, const torch::Tensor& beta,
                       const torch::Tensor& gamma);

// GDN layer with beta = raw^2 + 1e-6 and gamma = raw^2, so the constraints
// beta >= 1e-6 and gamma >= 0 hold for any raw parameter values.
class GdnImpl : public torch::nn::Module {
 public:
  GdnImpl(int64_t channels, bool inverse);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor beta() const;
  torch::Tensor gamma() const;

 private:
  torch::Tensor beta_raw_, gamma_raw_;
  bool inverse_;
};
TORCH_MODULE(Gdn);

enum class QuantMode { kNoise, kRound };

// kNoise adds U(-0.5, 0.5) noise (training proxy); kRound rounds half to
// even.
torch::Tensor quantize(const torch::Tensor& x, QuantMode mode);

// conv -> (I)GDN -> conv -> adaption, plus identity skip.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t channels, int q_levels, bool inverse);
  torch::Tensor forward(const torch::Tensor& x, QIndex q);

 private:
  Conv conv1_{nullptr}, conv2_{nullptr};
  Gdn gdn_{nullptr};
  Adaption adapt_{nullptr};
};
TORCH_MODULE(ResBlock);

// g_enc: four stages of stride-2 conv, ResBlock and GDN (x16 down).
class AnalysisImpl : public torch::nn::Module {
 public:
  AnalysisImpl(int64_t channels, int q_levels);
  torch::Tensor forward(const torch::Tensor& x, QIndex q);

 private:
  std::vector<Conv> convs_;
  std::vector<ResBlock> blocks_;
  std::vector<Gdn> gdns_;
};
TORCH_MODULE(Analysis);

// g_dec: four stages of IGDN, ResBlock, conv + pixel shuffle (x16 up).
class SynthesisImpl : public torch::nn::Module {
 public:
  SynthesisImpl(int64_t channels, int q_levels);
  torch::Tensor forward(const torch::Tensor& y, QIndex q);

 private:
  std::vector<Gdn> igdns_;
  std::vector<ResBlock> blocks_;
  std::vector<Conv> convs_;
};
TORCH_MODULE(Synthesis);

// h_enc: |y| through two stride-2 conv stages with adaption (x4 down).
class HyperAnalysisImpl : public torch::nn::Module {
 public:
  HyperAnalysisImpl(int64_t channels, int q_levels);
  torch::Tensor forward(const torch::Tensor& y, QIndex q);

 private:
  Conv conv1_{nullptr}, conv2_{nullptr};
  Adaption adapt1_{nullptr}, adapt2_{nullptr};
};
TORCH_MODULE(HyperAnalysis);

// h_dec: two conv + pixel-shuffle stages with adaption, then a conv whose
// softplus output is offset by scale_bound.
class HyperSynthesisImpl : public torch::nn::Module {
 public:
  HyperSynthesisImpl(int64_t channels, int q_levels, double scale_bound);
  torch::Tensor forward(const torch::Tensor& z, QIndex q);

 private:
  Conv conv1_{nullptr}, conv2_{nullptr}, out_{nullptr};
  Adaption adapt1_{nullptr}, adapt2_{nullptr};
  double scale_bound_;
};
TORCH_MODULE(HyperSynthesis);

// Learned per-channel monotone CDF for z: a chain of small affine layers
// with positive weights and tanh-gated nonlinearities (widths 1-3-3-3-1).
class FactorizedPriorImpl : public torch::nn::Module {
 public:
  explicit FactorizedPriorImpl(int64_t channels, double init_scale = 10.0);

  // Interval mass P(v - 0.5 < Z <= v + 0.5) per element of v [B, C, H, W].
  torch::Tensor likelihood(const torch::Tensor& v);
  // Plain-double CDF of one channel, for table construction.
  std::function<double(double)> channel_cdf(int64_t channel) const;
  int64_t channels() const { return channels_; }

 private:
  torch::Tensor logits_cdf(const torch::Tensor& v);  // v: [C, 1, M]

  int64_t channels_;
  std::vector<int64_t> widths_;
  std::vector<torch::Tensor> matrices_, biases_, factors_;
};
TORCH_MODULE(FactorizedPrior);

// P(v - 0.5 < Y <= v + 0.5) for Y ~ N(0, scale).
torch::Tensor gaussian_likelihood(const torch::Tensor& v,
                                  const torch::Tensor& scales);

struct RateEstimate {
  torch::Tensor bits_y;  // scalar, summed over all elements
  torch::Tensor bits_z;
};

// -log2 of the interval masses, each floored at 2^-24. Throws NumericError
// if any scale is below `scale_bound`.
RateEstimate rate_estimate(const torch::Tensor& y_hat,
                           const torch::Tensor& scales,
                           const torch::Tensor& z_hat, FactorizedPrior& prior,
                           double scale_bound);

struct LatentPack {
  torch::Tensor y;       // [B, N, H/16, W/16]
  torch::Tensor z;       // [B, N, H/64, W/64]
  torch::Tensor scales;  // [B, N, H/16, W/16], >= scale_bound
};

struct ForwardResult {
  torch::Tensor x_hat;   // [B, 3, H, W]
  torch::Tensor y_hat;   // quantized (or noisy) latents
  torch::Tensor z_hat;
  torch::Tensor scales;
  torch::Tensor bits_y;  // [B] per-image bits
  torch::Tensor bits_z;  // [B]
};

class CodecImpl : public torch::nn::Module {
 public:
  explicit CodecImpl(const CodecConfig& config);

  torch::Tensor g_enc(const torch::Tensor& x, QIndex q) { return analysis_->forward(x, q); }
  torch::Tensor g_dec(const torch::Tensor& y_hat, QIndex q) { return synthesis_->forward(y_hat, q); }
  torch::Tensor h_enc(const torch::Tensor& y, QIndex q) { return hyper_analysis_->forward(y, q); }
  torch::Tensor h_dec(const torch::Tensor& z_hat, QIndex q) { return hyper_synthesis_->forward(z_hat, q); }

  // x: [B, 3, H, W] with H, W multiples of 64.
  LatentPack analyze(const torch::Tensor& x, QIndex q);
  // Full differentiable pass. kNoise for training, kRound for evaluation.
  ForwardResult forward(const torch::Tensor& x, QIndex q, QuantMode mode);

  const CodecConfig& config() const { return config_; }
  FactorizedPrior& prior() { return prior_; }
  Analysis& analysis() { return analysis_; }
  Synthesis& synthesis() { return synthesis_; }
  HyperAnalysis& hyper_analysis() { return hyper_analysis_; }
  HyperSynthesis& hyper_synthesis() { return hyper_synthesis_; }

 private:
  CodecConfig config_;
  Analysis analysis_{nullptr};
  Synthesis synthesis_{nullptr};
  HyperAnalysis hyper_analysis_{nullptr};
  HyperSynthesis hyper_synthesis_{nullptr};
  FactorizedPrior prior_{nullptr};
};
TORCH_MODULE(Codec);

// Integer CDF tables for coding: one per z channel (factorized prior) and
// one per scale-table entry (Gaussian).
struct EntropyTables {
  std::vector<double> scale_table;
  std::vector<entropy::CdfTable> z_tables;
  std::vector<entropy::CdfTable> y_tables;

  // Index of the first table scale >= scale (the last entry if none).
  uint32_t scale_index(float scale) const;
};

EntropyTables build_cdf_tables(Codec& codec);

// Container: "LVCC", u8 version = 1, u8 q, u16 orig_h, u16 orig_w,
// u32 z_len, u32 y_len, z bytes, y bytes. Little-endian.
struct Bitstream {
  static constexpr size_t kHeaderSize = 18;
  static constexpr uint8_t kVersion = 1;

  uint8_t q = 0;
  uint16_t orig_h = 0;
  uint16_t orig_w = 0;
  std::vector<uint8_t> z_bytes;
  std::vector<uint8_t> y_bytes;

  size_t total_bytes() const { return kHeaderSize + z_bytes.size() + y_bytes.size(); }
  std::vector<uint8_t> serialize() const;
  // FormatError on bad magic/version; DecodeError if lengths disagree with
  // the payload size.
  static Bitstream parse(std::span<const uint8_t> data);
};

struct Decoded {
  torch::Tensor image;  // [3, orig_h, orig_w]
  QIndex q;
  torch::Tensor y_hat;  // decoded integers, [1, N, h, w]
  torch::Tensor z_hat;
};

struct Encoded {
  Bitstream bitstream;
  torch::Tensor y_hat;  // encoder-side rounded latents
  torch::Tensor z_hat;
  torch::Tensor scales;
};

// Reflect-pads [3, H, W] (or [B, 3, H, W]) up to multiples of 64.
torch::Tensor pad_to_multiple(const torch::Tensor& image, int64_t multiple = kPadMultiple);

// Frozen-weight encoder/decoder around a trained codec. Tables are built
// at construction; call refresh_tables() after weights change.
class ImageCodec {
 public:
  explicit ImageCodec(Codec codec,
                      const entropy::CoderBackend& backend = entropy::default_backend());

  void refresh_tables();
  const EntropyTables& tables() const { return tables_; }

  // image: [3, H, W] in [0, 1], H, W >= 64.
  Encoded encode(const torch::Tensor& image, QIndex q);
  Bitstream compress(const torch::Tensor& image, QIndex q) { return encode(image, q).bitstream; }
  Decoded decompress(const Bitstream& bitstream);

  Codec& model() { return codec_; }

 private:
  Codec codec_;
  const entropy::CoderBackend* backend_;
  EntropyTables tables_;
};

}  // namespace lvcc::codec

#endif  // LVCC_CODEC_HPP_
