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

#ifndef LVCC_PREEDIT_HPP_
#define LVCC_PREEDIT_HPP_

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "lvcc/layers.hpp"

namespace lvcc::preedit {

struct PreEditConfig {
  int scales = 4;
  int base_channels = 32;  // doubled at every coarser scale
  int q_levels = 6;
  int64_t token_dim = 768;

  // Throws ConfigError unless scales >= 2, base_channels >= 8, q_levels >= 2.
  void validate() const;
  int64_t channels_at(int scale) const {
    return int64_t{base_channels} << scale;
  }
};

// tokens -> spatial resize -> 1x1 conv -> layer norm -> base block.
class TokenBlockImpl : public torch::nn::Module {
 public:
  TokenBlockImpl(int64_t token_dim, int64_t channels);
  torch::Tensor forward(const torch::Tensor& tokens, int64_t h, int64_t w);

 private:
  Conv project_{nullptr};
  LayerNorm2d norm_{nullptr};
  BaseBlock refine_{nullptr};
};
TORCH_MODULE(TokenBlock);

// Channel-reducing conv, base block, then q adaption.
class FusionBlockImpl : public torch::nn::Module {
 public:
  FusionBlockImpl(int64_t in_channels, int64_t out_channels, int q_levels);
  torch::Tensor forward(const torch::Tensor& x, QIndex q);

 private:
  Conv reduce_{nullptr};
  BaseBlock enhance_{nullptr};
  Adaption adapt_{nullptr};
};
TORCH_MODULE(FusionBlock);

// Token-guided U-Net. The output is the input plus a scaled residual; the
// residual scale starts at zero so an untrained network is the identity.
class PreEditNetImpl : public torch::nn::Module {
 public:
  explicit PreEditNetImpl(const PreEditConfig& config);

  // image: [B, 3, H, W] in [0, 1]; tokens: [B, token_dim, num].
  // Returns [B, 3, H, W] clamped to [0, 1].
  torch::Tensor forward(const torch::Tensor& image,
                        const torch::Tensor& tokens, QIndex q);

  // Refined token features for one scale, [B, C_scale, h, w].
  torch::Tensor token_features(int scale, const torch::Tensor& tokens,
                               int64_t h, int64_t w);

  const PreEditConfig& config() const { return config_; }
  torch::Tensor& residual_scale() { return residual_scale_; }

 private:
  PreEditConfig config_;
  Conv stem_{nullptr}, head_{nullptr};
  std::vector<TokenBlock> token_blocks_;
  std::vector<FusionBlock> down_fusion_, up_fusion_;
  std::vector<Conv> up_convs_;
  torch::Tensor residual_scale_;
};
TORCH_MODULE(PreEditNet);

}  // namespace lvcc::preedit

#endif  // LVCC_PREEDIT_HPP_
