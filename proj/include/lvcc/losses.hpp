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

#ifndef LVCC_LOSSES_HPP_
#define LVCC_LOSSES_HPP_

#include <array>
#include <vector>

#include <torch/torch.h>

#include "lvcc/layers.hpp"

namespace lvcc::losses {

struct LambdaPreset {
  QIndex q;
  double lambda_rate = 1.0;
  double lambda_distortion = 0.0;
  double lambda_token = 1.0;
  double lambda_rank = 0.1;
};

// Default ladder, strictly decreasing distortion weight in q.
inline constexpr std::array<double, 6> kDefaultDistortionWeights = {420, 220, 120, 64, 35, 18};

std::vector<LambdaPreset> default_presets();
// Throws ConfigError on negative weights or a ladder that is not strictly
// decreasing in lambda_distortion.
void validate_presets(const std::vector<LambdaPreset>& presets);

struct LossTerms {
  torch::Tensor total;
  torch::Tensor bpp;   // rate term input (bits per pixel)
  torch::Tensor mse;   // distortion vs. the original image
  torch::Tensor tk;    // token MSE (zero when token terms are off)
  torch::Tensor rk;    // rank loss (zero when token terms are off)
};

struct LossInputs {
  torch::Tensor bits;       // total bits (y + z) over the batch
  double pixels = 0;        // pixel count over the batch
  torch::Tensor original;   // I_o
  torch::Tensor decoded;    // I_d
  torch::Tensor t_gt;       // tokens of I_o (ignored if token terms off)
  torch::Tensor t_d;        // tokens of I_d
};

// lambda_R * bpp + lambda_D * MSE(I_o, I_d) [+ lambda_tk * token_mse +
// lambda_rk * rank_loss].
LossTerms total_loss(const LossInputs& in, const LambdaPreset& preset,
                     bool include_token_terms);

}  // namespace lvcc::losses

#endif  // LVCC_LOSSES_HPP_
