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

#ifndef LVCC_LAYERS_HPP_
#define LVCC_LAYERS_HPP_

#include <cstdint>

#include <torch/torch.h>

namespace lvcc {

// Compression-ratio index. Selects the adaption-layer scales and the
// loss-weight preset; valid range is [0, q_levels).
struct QIndex {
  int value = 0;

  constexpr QIndex() = default;
  constexpr explicit QIndex(int v) : value(v) {}
  friend constexpr bool operator==(QIndex, QIndex) = default;
};

// Throws ConfigError unless 0 <= q < q_levels.
void check_q(QIndex q, int q_levels);

namespace profile {

// While a FlopCounter is alive on the current thread, Conv and Linear
// layers add their analytic multiply-add count (2 ops per MAC) to it.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;

  int64_t flops() const { return flops_; }
  void add(int64_t n) { flops_ += n; }

 private:
  int64_t flops_ = 0;
  FlopCounter* previous_ = nullptr;
};

void record(int64_t flops);

}  // namespace profile

// 2-D convolution with "same" padding for odd kernels. Records FLOPs.
class ConvImpl : public torch::nn::Module {
 public:
  ConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel,
           int64_t stride = 1, int64_t groups = 1, bool bias = true);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};

 private:
  int64_t in_channels_, out_channels_, kernel_, groups_;
};
TORCH_MODULE(Conv);

class LinearImpl : public torch::nn::Module {
 public:
  LinearImpl(int64_t in_features, int64_t out_features);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear linear{nullptr};
};
TORCH_MODULE(Linear);

// Layer normalization over the channel axis of an NCHW tensor, applied
// independently at each spatial location.
class LayerNorm2dImpl : public torch::nn::Module {
 public:
  explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-6);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor weight_, bias_;
  double eps_;
};
TORCH_MODULE(LayerNorm2d);

// Compression-ratio adaption: a q-indexed embedding feeds a two-layer
// perceptron whose softplus output is a positive per-channel scale that
// multiplies the feature map. The last layer starts at zero weight with
// bias softplus^-1(1), so every q begins as the identity.
class AdaptionImpl : public torch::nn::Module {
 public:
  static constexpr int64_t kEmbeddingDim = 64;

  AdaptionImpl(int64_t channels, int q_levels);

  torch::Tensor forward(const torch::Tensor& x, QIndex q);
  // Per-channel scale vector s(q), shape [channels].
  torch::Tensor scales(QIndex q);

  int q_levels() const { return q_levels_; }

 private:
  torch::nn::Embedding embedding_{nullptr};
  Linear hidden_{nullptr}, out_{nullptr};
  int64_t channels_;
  int q_levels_;
};
TORCH_MODULE(Adaption);

// Residual block: layer norm, pointwise conv, depthwise 3x3 conv, GELU,
// squeeze-excitation channel attention, pointwise conv, skip.
class BaseBlockImpl : public torch::nn::Module {
 public:
  explicit BaseBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  LayerNorm2d norm_{nullptr};
  Conv expand_{nullptr}, depthwise_{nullptr}, project_{nullptr};
  Linear squeeze_{nullptr}, excite_{nullptr};
};
TORCH_MODULE(BaseBlock);

int64_t count_parameters(torch::nn::Module& module);

}  // namespace lvcc

#endif  // LVCC_LAYERS_HPP_
