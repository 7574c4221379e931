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

#include "lvcc/preedit.hpp"

#include <string>

#include "lvcc/errors.hpp"
#include "lvcc/tokens.hpp"

namespace lvcc::preedit {

namespace F = torch::nn::functional;

void PreEditConfig::validate() const {
  if (scales < 2) throw ConfigError("pre-edit scales must be >= 2");
  if (base_channels < 8) throw ConfigError("pre-edit base_channels must be >= 8");
  if (q_levels < 2) throw ConfigError("q_levels must be >= 2");
  if (token_dim < 1) throw ConfigError("token_dim must be positive");
}

TokenBlockImpl::TokenBlockImpl(int64_t token_dim, int64_t channels) {
  project_ = register_module("project", Conv(token_dim, channels, 1));
  norm_ = register_module("norm", LayerNorm2d(channels));
  refine_ = register_module("refine", BaseBlock(channels));
}

torch::Tensor TokenBlockImpl::forward(const torch::Tensor& tokens, int64_t h,
                                      int64_t w) {
  auto x = tokens::tokens_to_spatial(tokens, h, w);
  return refine_->forward(norm_->forward(project_->forward(x)));
}

FusionBlockImpl::FusionBlockImpl(int64_t in_channels, int64_t out_channels,
                                 int q_levels) {
  reduce_ = register_module("reduce", Conv(in_channels, out_channels, 3));
  enhance_ = register_module("enhance", BaseBlock(out_channels));
  adapt_ = register_module("adapt", Adaption(out_channels, q_levels));
}

torch::Tensor FusionBlockImpl::forward(const torch::Tensor& x, QIndex q) {
  return adapt_->forward(enhance_->forward(reduce_->forward(x)), q);
}

PreEditNetImpl::PreEditNetImpl(const PreEditConfig& config) : config_(config) {
  config_.validate();
  const int s = config_.scales;
  stem_ = register_module("stem", Conv(3, config_.channels_at(0), 3));
  for (int i = 0; i < s; ++i) {
    const int64_t c = config_.channels_at(i);
    const int64_t c_in = i == 0 ? c : config_.channels_at(i - 1);
    token_blocks_.push_back(register_module(
        "token_block" + std::to_string(i), TokenBlock(config_.token_dim, c)));
    down_fusion_.push_back(register_module(
        "down_fusion" + std::to_string(i),
        FusionBlock(c_in + c, c, config_.q_levels)));
  }
  for (int i = 0; i + 1 < s; ++i) {
    const int64_t c = config_.channels_at(i);
    up_convs_.push_back(register_module("up_conv" + std::to_string(i),
                                        Conv(config_.channels_at(i + 1), c, 3)));
    up_fusion_.push_back(register_module(
        "up_fusion" + std::to_string(i), FusionBlock(3 * c, c, config_.q_levels)));
  }
  head_ = register_module("head", Conv(config_.channels_at(0), 3, 3));
  residual_scale_ = register_parameter("residual_scale", torch::zeros({1}));
}

torch::Tensor PreEditNetImpl::token_features(int scale,
                                             const torch::Tensor& tokens,
                                             int64_t h, int64_t w) {
  return token_blocks_.at(static_cast<size_t>(scale))->forward(tokens, h, w);
}

torch::Tensor PreEditNetImpl::forward(const torch::Tensor& image,
                                      const torch::Tensor& tokens, QIndex q) {
  check_q(q, config_.q_levels);
  if (image.dim() != 4 || image.size(1) != 3) {
    throw DimensionError("pre-edit expects [B, 3, H, W] images");
  }
  const int s = config_.scales;
  const int64_t align = int64_t{1} << (s - 1);
  const int64_t h = image.size(2), w = image.size(3);
  if (h % align != 0 || w % align != 0) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by " + std::to_string(align));
  }
  if (tokens.dim() != 3 || tokens.size(0) != image.size(0)) {
    throw DimensionError("tokens must be [B, token_dim, num] matching the image batch");
  }
  if (tokens.size(1) != config_.token_dim) {
    throw ConfigError("token dim " + std::to_string(tokens.size(1)) +
                      " does not match configured " +
                      std::to_string(config_.token_dim));
  }

  std::vector<torch::Tensor> token_feats, skips;
  auto feature = stem_->forward(image);
  for (int i = 0; i < s; ++i) {
    if (i > 0) feature = F::max_pool2d(skips.back(), F::MaxPool2dFuncOptions(2));
    token_feats.push_back(
        token_blocks_[i]->forward(tokens, feature.size(2), feature.size(3)));
    skips.push_back(
        down_fusion_[i]->forward(torch::cat({feature, token_feats[i]}, 1), q));
  }

  auto up = skips.back();
  for (int i = s - 2; i >= 0; --i) {
    auto upsampled = F::interpolate(
        up, F::InterpolateFuncOptions()
                .scale_factor(std::vector<double>{2.0, 2.0})
                .mode(torch::kNearest));
    upsampled = up_convs_[i]->forward(upsampled);
    up = up_fusion_[i]->forward(
        torch::cat({upsampled, token_feats[i], skips[i]}, 1), q);
  }

  auto residual = head_->forward(up) * residual_scale_;
  return (image + residual).clamp(0.0, 1.0);
}

}  // namespace lvcc::preedit
