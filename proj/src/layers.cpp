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

#include "lvcc/layers.hpp"

#include <cmath>
#include <string>

#include "lvcc/errors.hpp"

namespace lvcc {

namespace F = torch::nn::functional;

void check_q(QIndex q, int q_levels) {
  if (q.value < 0 || q.value >= q_levels) {
    throw ConfigError("q index " + std::to_string(q.value) +
                      " outside [0, " + std::to_string(q_levels) + ")");
  }
}

namespace profile {
namespace {
thread_local FlopCounter* active_counter = nullptr;
}  // namespace

FlopCounter::FlopCounter() : previous_(active_counter) {
  active_counter = this;
}

FlopCounter::~FlopCounter() { active_counter = previous_; }

void record(int64_t flops) {
  if (active_counter != nullptr) active_counter->add(flops);
}

}  // namespace profile

ConvImpl::ConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel,
                   int64_t stride, int64_t groups, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      groups_(groups) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels,
                                                         out_channels, kernel)
                                    .stride(stride)
                                    .padding(kernel / 2)
                                    .groups(groups)
                                    .bias(bias)));
}

torch::Tensor ConvImpl::forward(const torch::Tensor& x) {
  auto y = conv->forward(x);
  profile::record(2 * kernel_ * kernel_ * (in_channels_ / groups_) *
                  out_channels_ * y.size(0) * y.size(2) * y.size(3));
  return y;
}

LinearImpl::LinearImpl(int64_t in_features, int64_t out_features) {
  linear = register_module("linear",
                           torch::nn::Linear(in_features, out_features));
}

torch::Tensor LinearImpl::forward(const torch::Tensor& x) {
  auto y = linear->forward(x);
  const auto& opts = linear->options;
  profile::record(2 * opts.in_features() * opts.out_features() *
                  (x.numel() / opts.in_features()));
  return y;
}

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : eps_(eps) {
  weight_ = register_parameter("weight", torch::ones({channels}));
  bias_ = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  auto mean = x.mean(1, /*keepdim=*/true);
  auto var = (x - mean).pow(2).mean(1, /*keepdim=*/true);
  auto y = (x - mean) * torch::rsqrt(var + eps_);
  return y * weight_.view({1, -1, 1, 1}) + bias_.view({1, -1, 1, 1});
}

AdaptionImpl::AdaptionImpl(int64_t channels, int q_levels)
    : channels_(channels), q_levels_(q_levels) {
  if (q_levels < 2) throw ConfigError("q_levels must be >= 2");
  embedding_ = register_module(
      "embedding", torch::nn::Embedding(q_levels, kEmbeddingDim));
  hidden_ = register_module("hidden", Linear(kEmbeddingDim, kEmbeddingDim));
  out_ = register_module("out", Linear(kEmbeddingDim, channels));
  torch::NoGradGuard no_grad;
  out_->linear->weight.zero_();
  // softplus(log(e - 1)) == 1
  out_->linear->bias.fill_(std::log(std::exp(1.0) - 1.0));
}

torch::Tensor AdaptionImpl::scales(QIndex q) {
  check_q(q, q_levels_);
  auto index = torch::full({1}, q.value,
                           torch::TensorOptions()
                               .dtype(torch::kLong)
                               .device(embedding_->weight.device()));
  auto h = torch::relu(hidden_->forward(embedding_->forward(index)));
  return F::softplus(out_->forward(h)).view({channels_});
}

torch::Tensor AdaptionImpl::forward(const torch::Tensor& x, QIndex q) {
  return x * scales(q).view({1, channels_, 1, 1});
}

BaseBlockImpl::BaseBlockImpl(int64_t channels) {
  const int64_t bottleneck = std::max<int64_t>(channels / 4, 4);
  norm_ = register_module("norm", LayerNorm2d(channels));
  expand_ = register_module("expand", Conv(channels, channels, 1));
  depthwise_ = register_module(
      "depthwise", Conv(channels, channels, 3, 1, /*groups=*/channels));
  squeeze_ = register_module("squeeze", Linear(channels, bottleneck));
  excite_ = register_module("excite", Linear(bottleneck, channels));
  project_ = register_module("project", Conv(channels, channels, 1));
}

torch::Tensor BaseBlockImpl::forward(const torch::Tensor& x) {
  auto y = expand_->forward(norm_->forward(x));
  y = F::gelu(depthwise_->forward(y));
  auto pooled = y.mean({2, 3});
  auto gate = torch::sigmoid(
      excite_->forward(torch::relu(squeeze_->forward(pooled))));
  y = y * gate.unsqueeze(-1).unsqueeze(-1);
  return x + project_->forward(y);
}

int64_t count_parameters(torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

}  // namespace lvcc
