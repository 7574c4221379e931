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

#ifndef LVCC_PIPELINE_HPP_
#define LVCC_PIPELINE_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lvcc/codec.hpp"
#include "lvcc/preedit.hpp"
#include "lvcc/tokens.hpp"

namespace lvcc {

struct ModelConfig {
  codec::CodecConfig codec;
  preedit::PreEditConfig preedit;
  tokens::ExtractorSpec extractor;
  // Global token standard deviation; tokens are divided by it before they
  // reach the pre-edit network or the token losses.
  double token_scale = 1.0;

  // Full-size widths: N = 192, pre-edit base 32, ViT-B sized tokens.
  static ModelConfig full();
  // Desk-scale: N = 32, pre-edit base 16, toy extractor (dim 64).
  static ModelConfig tiny();

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Extractor, pre-edit network and codec, built from one config.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  void set_token_scale(double scale) { config_.token_scale = scale; }

  codec::Codec& codec() { return codec_; }
  preedit::PreEditNet& preedit() { return preedit_; }
  const tokens::TokenExtractor& extractor() const { return *extractor_; }

  // Normalized tokens for a batch [B, 3, H, W]. Non-square inputs are
  // resized to a square grid first so the token count is a perfect square.
  torch::Tensor tokens(const torch::Tensor& images) const;

  // Every parameter and buffer, prefixed "codec." or "preedit.".
  std::vector<std::pair<std::string, torch::Tensor>> named_tensors();

 private:
  ModelConfig config_;
  std::unique_ptr<tokens::TokenExtractor> extractor_;
  codec::Codec codec_{nullptr};
  preedit::PreEditNet preedit_{nullptr};
};

// Full encode/decode path: pad, optional pre-edit, codec.
class Pipeline {
 public:
  explicit Pipeline(Model& model);

  // image: [3, H, W]. `tokens` overrides the extractor (raw, unnormalized
  // tokens, e.g. read from a .tok file).
  codec::Encoded encode(const torch::Tensor& image, QIndex q, bool use_preedit = true,
                        const std::optional<tokens::TokenGrid>& tokens = std::nullopt);
  codec::Decoded decode(const codec::Bitstream& bitstream);

  // Pre-edited image I_p for [3, H, W] input, same shape.
  torch::Tensor preedit(const torch::Tensor& image, QIndex q,
                        const std::optional<tokens::TokenGrid>& tokens = std::nullopt);

  codec::ImageCodec& image_codec() { return image_codec_; }

 private:
  Model& model_;
  codec::ImageCodec image_codec_;
};

}  // namespace lvcc

#endif  // LVCC_PIPELINE_HPP_
