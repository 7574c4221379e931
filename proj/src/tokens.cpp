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

#include "lvcc/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lvcc/bytes.hpp"
#include "lvcc/errors.hpp"

namespace lvcc::tokens {

namespace F = torch::nn::functional;
using torch::autograd::AutogradContext;
using torch::autograd::variable_list;

namespace {

constexpr double kMinSingularValueForGradient = 1e-6;

int64_t exact_sqrt(int64_t n) {
  auto r = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : -1;
}

void check_finite(const torch::Tensor& t, const char* what) {
  if (!torch::isfinite(t).all().item<bool>()) {
    throw NumericError(std::string(what) + " has non-finite entries");
  }
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw DimensionError("token shapes differ");
  }
}

torch::Generator seeded(uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return gen;
}

// d/dT sum_i sigmoid(s_i) = U diag(sigmoid'(s)) V^T.
class SoftRankFunction
    : public torch::autograd::Function<SoftRankFunction> {
 public:
  static torch::Tensor forward(AutogradContext* ctx,
                               const torch::Tensor& tokens) {
    auto [u, s, vh] = torch::linalg_svd(tokens, /*full_matrices=*/false);
    ctx->save_for_backward({u, s, vh});
    return torch::sigmoid(s).sum(-1);
  }

  static variable_list backward(AutogradContext* ctx,
                                variable_list grad_outputs) {
    auto saved = ctx->get_saved_variables();
    const auto& u = saved[0];
    const auto& s = saved[1];
    const auto& vh = saved[2];
    auto sig = torch::sigmoid(s);
    auto weight = grad_outputs[0].unsqueeze(-1) * sig * (1 - sig) *
                  (s >= kMinSingularValueForGradient).to(s.dtype());
    return {torch::matmul(u * weight.unsqueeze(-2), vh)};
  }
};

}  // namespace

TokenGrid::TokenGrid(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 2) {
    throw DimensionError("token grid must be 2-D [dim, num], got " +
                         std::to_string(data_.dim()) + "-D");
  }
  if (exact_sqrt(data_.size(1)) < 0) {
    throw DimensionError("token count " + std::to_string(data_.size(1)) +
                         " is not a perfect square");
  }
  check_finite(data_, "token grid");
}

int64_t TokenGrid::side() const { return exact_sqrt(num()); }

torch::Tensor TokenExtractor::extract(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw DimensionError("extractor expects [B, 3, H, W] images");
  }
  const int64_t p = patch_size();
  if (images.size(2) % p != 0 || images.size(3) % p != 0) {
    throw DimensionError("image " + std::to_string(images.size(2)) + "x" +
                         std::to_string(images.size(3)) +
                         " not divisible by patch size " + std::to_string(p));
  }
  return extract_impl(images);
}

ToyExtractor::ToyExtractor(int64_t dim, int64_t patch, uint64_t seed)
    : dim_(dim), patch_(patch) {
  if (dim < 1 || patch < 1) throw ConfigError("toy extractor needs dim, patch >= 1");
  auto gen = seeded(seed);
  projection_ = torch::randn({dim, 3}, gen, torch::kFloat64) / std::sqrt(3.0);
}

torch::Tensor ToyExtractor::extract_impl(const torch::Tensor& images) const {
  auto pooled = F::avg_pool2d(images, F::AvgPool2dFuncOptions(patch_));
  auto flat = pooled.flatten(2);  // [B, 3, N]
  return torch::matmul(projection_.to(images.dtype()), flat);
}

PatchEmbedExtractor::PatchEmbedExtractor(int64_t dim, int64_t patch,
                                         uint64_t seed)
    : dim_(dim), patch_(patch) {
  if (dim < 1 || patch < 1) throw ConfigError("patch-embed extractor needs dim, patch >= 1");
  auto gen = seeded(seed);
  weight_ = torch::randn({dim, 3, patch, patch}, gen, torch::kFloat64) /
            std::sqrt(static_cast<double>(3 * patch * patch));
}

torch::Tensor PatchEmbedExtractor::extract_impl(
    const torch::Tensor& images) const {
  auto out = F::conv2d(images, weight_.to(images.dtype()),
                       F::Conv2dFuncOptions().stride(patch_));
  return out.flatten(2);
}

std::unique_ptr<TokenExtractor> make_extractor(const ExtractorSpec& spec) {
  if (spec.name == "toy") {
    return std::make_unique<ToyExtractor>(spec.dim, spec.patch, spec.seed);
  }
  if (spec.name == "patch-embed") {
    return std::make_unique<PatchEmbedExtractor>(spec.dim, spec.patch,
                                                 spec.seed);
  }
  throw ConfigError("unknown token extractor '" + spec.name + "'");
}

torch::Tensor extract_square(const TokenExtractor& extractor, const torch::Tensor& images) {
  if (images.dim() != 4) throw DimensionError("expected [B, 3, H, W] images");
  const int64_t h = images.size(2), w = images.size(3);
  if (h == w) return extractor.extract(images);
  const int64_t p = extractor.patch_size();
  const int64_t side = (std::max(h, w) + p - 1) / p * p;
  auto x = F::interpolate(images, F::InterpolateFuncOptions()
                                      .size(std::vector<int64_t>{side, side})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
  return extractor.extract(x);
}

TokenGrid extract_tokens(const torch::Tensor& image,
                         const TokenExtractor& extractor) {
  if (image.dim() != 3) throw DimensionError("expected [3, H, W] image");
  torch::NoGradGuard no_grad;
  return TokenGrid(extractor.extract(image.unsqueeze(0)).squeeze(0));
}

torch::Tensor tokens_to_spatial(const torch::Tensor& tokens, int64_t h,
                                int64_t w) {
  if (tokens.dim() != 2 && tokens.dim() != 3) {
    throw DimensionError("tokens must be [dim, num] or [B, dim, num]");
  }
  const bool batched = tokens.dim() == 3;
  auto t = batched ? tokens : tokens.unsqueeze(0);
  const int64_t side = exact_sqrt(t.size(2));
  if (side < 0) {
    throw DimensionError("token count " + std::to_string(t.size(2)) +
                         " is not a perfect square");
  }
  auto grid = t.reshape({t.size(0), t.size(1), side, side});
  if (h != side || w != side) {
    grid = F::interpolate(grid, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{h, w})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
  }
  return batched ? grid : grid.squeeze(0);
}

torch::Tensor soft_rank(const torch::Tensor& tokens) {
  if (tokens.dim() < 2) throw DimensionError("soft_rank needs a matrix");
  check_finite(tokens, "token matrix");
  return SoftRankFunction::apply(tokens);
}

double soft_rank(const TokenGrid& tokens) {
  return soft_rank(tokens.data().to(torch::kFloat64)).item<double>();
}

torch::Tensor rank_loss(const torch::Tensor& t_gt, const torch::Tensor& t_d) {
  check_same_shape(t_gt, t_d);
  return (soft_rank(t_gt) - soft_rank(t_d)).pow(2).mean();
}

torch::Tensor token_mse(const torch::Tensor& t_gt, const torch::Tensor& t_d) {
  check_same_shape(t_gt, t_d);
  return (t_gt - t_d).pow(2).mean();
}

void write_token_file(const std::filesystem::path& path,
                      const TokenGrid& tokens) {
  ByteWriter w;
  w.text("TOKG");
  w.u8(1);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<uint32_t>(tokens.dim()));
  w.u32(static_cast<uint32_t>(tokens.num()));
  auto data = tokens.data().to(torch::kFloat32).contiguous();
  const float* p = data.data_ptr<float>();
  for (int64_t i = 0; i < data.numel(); ++i) w.f32(p[i]);
  write_file_atomic(path, w.data());
}

TokenGrid read_token_file(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  ByteReader r(bytes);
  if (r.remaining() < 16 || r.text(4) != "TOKG") {
    throw FormatError("not a token file: " + path.string());
  }
  if (auto version = r.u8(); version != 1) {
    throw FormatError("unsupported token file version " +
                      std::to_string(version));
  }
  r.bytes(3);
  const uint32_t dim = r.u32();
  const uint32_t num = r.u32();
  if (uint64_t{dim} * num * 4 != r.remaining()) {
    throw FormatError("token payload size does not match header");
  }
  auto data = torch::empty({dim, num}, torch::kFloat32);
  float* p = data.data_ptr<float>();
  for (int64_t i = 0; i < data.numel(); ++i) p[i] = r.f32();
  return TokenGrid(data);
}

}  // namespace lvcc::tokens
