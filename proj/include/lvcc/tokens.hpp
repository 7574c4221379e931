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

#ifndef LVCC_TOKENS_HPP_
#define LVCC_TOKENS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <torch/torch.h>

namespace lvcc::tokens {

// Semantic token matrix of shape [dim, num]; num is a perfect square so the
// tokens reshape exactly onto a sqrt(num) x sqrt(num) grid.
class TokenGrid {
 public:
  // Throws DimensionError for non-2D or non-square token counts and
  // NumericError for non-finite entries.
  explicit TokenGrid(torch::Tensor data);

  const torch::Tensor& data() const { return data_; }
  int64_t dim() const { return data_.size(0); }
  int64_t num() const { return data_.size(1); }
  int64_t side() const;

 private:
  torch::Tensor data_;
};

// A frozen backbone that maps images to tokens. Implementations are
// immutable after construction and differentiable w.r.t. the input.
class TokenExtractor {
 public:
  virtual ~TokenExtractor() = default;

  virtual std::string name() const = 0;
  virtual int64_t output_dim() const = 0;
  virtual int64_t patch_size() const = 0;

  // images: [B, 3, H, W] -> tokens [B, dim, (H/patch)*(W/patch)].
  torch::Tensor extract(const torch::Tensor& images) const;

 protected:
  virtual torch::Tensor extract_impl(const torch::Tensor& images) const = 0;
};

// Mean-pools non-overlapping patches, then applies a fixed random linear
// projection from the 3 pooled colour values to `dim` features.
class ToyExtractor final : public TokenExtractor {
 public:
  ToyExtractor(int64_t dim = 64, int64_t patch = 16, uint64_t seed = 0);

  std::string name() const override { return "toy"; }
  int64_t output_dim() const override { return dim_; }
  int64_t patch_size() const override { return patch_; }
  const torch::Tensor& projection() const { return projection_; }

 protected:
  torch::Tensor extract_impl(const torch::Tensor& images) const override;

 private:
  int64_t dim_, patch_;
  torch::Tensor projection_;  // [dim, 3]
};

// ViT-style linear patch embedding: each flattened 3*patch*patch patch is
// projected by a fixed random matrix.
class PatchEmbedExtractor final : public TokenExtractor {
 public:
  PatchEmbedExtractor(int64_t dim = 768, int64_t patch = 16,
                      uint64_t seed = 0);

  std::string name() const override { return "patch-embed"; }
  int64_t output_dim() const override { return dim_; }
  int64_t patch_size() const override { return patch_; }

 protected:
  torch::Tensor extract_impl(const torch::Tensor& images) const override;

 private:
  int64_t dim_, patch_;
  torch::Tensor weight_;  // [dim, 3, patch, patch]
};

struct ExtractorSpec {
  std::string name = "toy";
  int64_t dim = 64;
  int64_t patch = 16;
  uint64_t seed = 0;
};

// Throws ConfigError for an unknown extractor name.
std::unique_ptr<TokenExtractor> make_extractor(const ExtractorSpec& spec);

// Like extractor.extract(), but non-square batches are first resized to a
// square whose side is the larger dimension rounded up to the patch size,
// so the token count is always a perfect square.
torch::Tensor extract_square(const TokenExtractor& extractor, const torch::Tensor& images);

// image: [3, H, W]. H and W must be divisible by the patch size.
TokenGrid extract_tokens(const torch::Tensor& image,
                         const TokenExtractor& extractor);

// tokens: [dim, num] or [B, dim, num] -> [B, dim, h, w] (batch dim kept
// only if present). Reshape onto the sqrt(num) grid, then bilinear resize.
torch::Tensor tokens_to_spatial(const torch::Tensor& tokens, int64_t h,
                                int64_t w);

// Sum of sigmoid over the singular values of each token matrix.
// tokens: [..., dim, num] -> [...]. Singular values below 1e-6 do not
// contribute gradient.
torch::Tensor soft_rank(const torch::Tensor& tokens);
double soft_rank(const TokenGrid& tokens);

// Squared difference of soft ranks, averaged over any batch dims.
torch::Tensor rank_loss(const torch::Tensor& t_gt, const torch::Tensor& t_d);
// Mean of squared elementwise differences.
torch::Tensor token_mse(const torch::Tensor& t_gt, const torch::Tensor& t_d);

// ".tok" interchange: "TOKG", u8 version=1, 3 reserved bytes, u32 dim,
// u32 num, then dim*num float32 values, dimension-major. Little-endian.
void write_token_file(const std::filesystem::path& path,
                      const TokenGrid& tokens);
TokenGrid read_token_file(const std::filesystem::path& path);

}  // namespace lvcc::tokens

#endif  // LVCC_TOKENS_HPP_
