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

#include "lvcc/pipeline.hpp"

#include <numeric>

#include "lvcc/errors.hpp"

namespace lvcc {

using nlohmann::json;

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.codec.n_channels = 192;
  c.preedit.base_channels = 32;
  c.extractor = {"patch-embed", 768, 16, 0};
  c.preedit.token_dim = 768;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.codec = codec::CodecConfig::tiny();
  c.preedit.base_channels = 16;
  c.extractor = {"toy", 64, 16, 0};
  c.preedit.token_dim = 64;
  return c;
}

void ModelConfig::validate() const {
  codec.validate();
  preedit.validate();
  if (codec.q_levels != preedit.q_levels) {
    throw ConfigError("codec and pre-edit q_levels differ");
  }
  if (extractor.dim != preedit.token_dim) {
    throw ConfigError("extractor dim does not match pre-edit token_dim");
  }
  if (!(token_scale > 0.0)) throw ConfigError("token_scale must be positive");
}

json ModelConfig::to_json() const {
  return json{
      {"codec",
       {{"n_channels", codec.n_channels},
        {"q_levels", codec.q_levels},
        {"scale_bound", codec.scale_bound},
        {"scale_max", codec.scale_max},
        {"scale_table_size", codec.scale_table_size}}},
      {"preedit",
       {{"scales", preedit.scales},
        {"base_channels", preedit.base_channels},
        {"q_levels", preedit.q_levels},
        {"token_dim", preedit.token_dim}}},
      {"extractor",
       {{"name", extractor.name},
        {"dim", extractor.dim},
        {"patch", extractor.patch},
        {"seed", extractor.seed}}},
      {"token_scale", token_scale}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  try {
    ModelConfig c;
    if (j.contains("codec")) {
      const auto& k = j.at("codec");
      c.codec.n_channels = k.value("n_channels", c.codec.n_channels);
      c.codec.q_levels = k.value("q_levels", c.codec.q_levels);
      c.codec.scale_bound = k.value("scale_bound", c.codec.scale_bound);
      c.codec.scale_max = k.value("scale_max", c.codec.scale_max);
      c.codec.scale_table_size = k.value("scale_table_size", c.codec.scale_table_size);
    }
    if (j.contains("preedit")) {
      const auto& k = j.at("preedit");
      c.preedit.scales = k.value("scales", c.preedit.scales);
      c.preedit.base_channels = k.value("base_channels", c.preedit.base_channels);
      c.preedit.q_levels = k.value("q_levels", c.codec.q_levels);
      c.preedit.token_dim = k.value("token_dim", c.preedit.token_dim);
    } else {
      c.preedit.q_levels = c.codec.q_levels;
    }
    if (j.contains("extractor")) {
      const auto& k = j.at("extractor");
      c.extractor.name = k.value("name", c.extractor.name);
      c.extractor.dim = k.value("dim", c.extractor.dim);
      c.extractor.patch = k.value("patch", c.extractor.patch);
      c.extractor.seed = k.value("seed", c.extractor.seed);
    }
    c.token_scale = j.value("token_scale", 1.0);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  extractor_ = tokens::make_extractor(config_.extractor);
  codec_ = codec::Codec(config_.codec);
  preedit_ = preedit::PreEditNet(config_.preedit);
}

torch::Tensor Model::tokens(const torch::Tensor& images) const {
  return tokens::extract_square(*extractor_, images) / config_.token_scale;
}

std::vector<std::pair<std::string, torch::Tensor>> Model::named_tensors() {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto add = [&out](const std::string& prefix, torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) out.emplace_back(prefix + p.key(), p.value());
    for (const auto& b : m.named_buffers()) out.emplace_back(prefix + b.key(), b.value());
  };
  add("codec.", *codec_);
  add("preedit.", *preedit_);
  return out;
}

Pipeline::Pipeline(Model& model) : model_(model), image_codec_(model.codec()) {}

torch::Tensor Pipeline::preedit(const torch::Tensor& image, QIndex q,
                                const std::optional<tokens::TokenGrid>& tokens) {
  torch::NoGradGuard no_grad;
  using torch::indexing::Slice;
  const int64_t h = image.size(1), w = image.size(2);
  const int64_t align = int64_t{1} << (model_.config().preedit.scales - 1);
  auto padded = codec::pad_to_multiple(image.to(torch::kFloat32),
                                       std::lcm(align, model_.extractor().patch_size()))
                    .unsqueeze(0);
  torch::Tensor t = tokens ? (tokens->data().to(torch::kFloat32) / model_.config().token_scale)
                                 .unsqueeze(0)
                           : model_.tokens(padded);
  auto edited = model_.preedit()->forward(padded, t, q);
  return edited.squeeze(0).index({Slice(), Slice(0, h), Slice(0, w)}).contiguous();
}

codec::Encoded Pipeline::encode(const torch::Tensor& image, QIndex q, bool use_preedit,
                                const std::optional<tokens::TokenGrid>& tokens) {
  if (image.dim() != 3 || image.size(0) != 3) throw DimensionError("expected [3, H, W] image");
  if (image.size(1) < codec::kPadMultiple || image.size(2) < codec::kPadMultiple) {
    throw DimensionError("image smaller than 64x64");
  }
  auto input = use_preedit ? preedit(image, q, tokens) : image.to(torch::kFloat32);
  return image_codec_.encode(input, q);
}

codec::Decoded Pipeline::decode(const codec::Bitstream& bitstream) {
  return image_codec_.decompress(bitstream);
}

}  // namespace lvcc
