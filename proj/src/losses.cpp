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

#include "lvcc/losses.hpp"

#include "lvcc/errors.hpp"
#include "lvcc/tokens.hpp"

namespace lvcc::losses {

std::vector<LambdaPreset> default_presets() {
  std::vector<LambdaPreset> presets;
  for (size_t q = 0; q < kDefaultDistortionWeights.size(); ++q) {
    LambdaPreset p;
    p.q = QIndex(static_cast<int>(q));
    p.lambda_distortion = kDefaultDistortionWeights[q];
    presets.push_back(p);
  }
  return presets;
}

void validate_presets(const std::vector<LambdaPreset>& presets) {
  if (presets.empty()) throw ConfigError("no lambda presets");
  for (size_t i = 0; i < presets.size(); ++i) {
    const auto& p = presets[i];
    if (p.q.value != static_cast<int>(i)) throw ConfigError("presets must be listed in q order");
    if (p.lambda_rate < 0 || p.lambda_distortion < 0 || p.lambda_token < 0 || p.lambda_rank < 0) {
      throw ConfigError("lambda weights must be nonnegative");
    }
    if (i > 0 && !(p.lambda_distortion < presets[i - 1].lambda_distortion)) {
      throw ConfigError("lambda_distortion must strictly decrease with q");
    }
  }
}

LossTerms total_loss(const LossInputs& in, const LambdaPreset& preset,
                     bool include_token_terms) {
  if (in.original.sizes() != in.decoded.sizes()) {
    throw DimensionError("original and decoded images differ in shape");
  }
  if (!(in.pixels > 0)) throw DimensionError("pixel count must be positive");
  LossTerms t;
  t.bpp = in.bits / in.pixels;
  t.mse = (in.original - in.decoded).pow(2).mean();
  auto zero = torch::zeros({}, in.decoded.options());
  if (include_token_terms) {
    t.tk = tokens::token_mse(in.t_gt, in.t_d);
    t.rk = tokens::rank_loss(in.t_gt, in.t_d);
  } else {
    t.tk = zero;
    t.rk = zero;
  }
  t.total = preset.lambda_rate * t.bpp + preset.lambda_distortion * t.mse;
  if (include_token_terms) {
    t.total = t.total + preset.lambda_token * t.tk + preset.lambda_rank * t.rk;
  }
  return t;
}

}  // namespace lvcc::losses
