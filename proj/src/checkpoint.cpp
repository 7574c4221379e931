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

#include "lvcc/checkpoint.hpp"

#include <bit>
#include <map>
#include <string>

#include "lvcc/bytes.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/log.hpp"

namespace lvcc {

uint64_t tensor_checksum(const torch::Tensor& t) {
  auto data = t.detach().to(torch::kFloat32).contiguous();
  const float* p = data.data_ptr<float>();
  uint64_t h = 0xcbf29ce484222325ull;
  for (int64_t i = 0; i < data.numel(); ++i) {
    const uint32_t bits = std::bit_cast<uint32_t>(p[i]);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, Model& model, int stage,
                     const nlohmann::json& train_config) {
  ByteWriter w;
  w.text("LVCK");
  w.u8(kCheckpointVersion);
  w.u8(static_cast<uint8_t>(stage));
  w.u16(0);
  const std::string meta =
      nlohmann::json{{"model", model.config().to_json()}, {"train", train_config}}.dump();
  w.u32(static_cast<uint32_t>(meta.size()));
  w.text(meta);
  const auto tensors = model.named_tensors();
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    w.u16(static_cast<uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<uint8_t>(tensor.dim()));
    for (int64_t d : tensor.sizes()) w.u32(static_cast<uint32_t>(d));
    w.u64(tensor_checksum(tensor));
    auto data = tensor.detach().to(torch::kFloat32).contiguous();
    const float* p = data.data_ptr<float>();
    for (int64_t i = 0; i < data.numel(); ++i) w.f32(p[i]);
  }
  write_file_atomic(path, w.data());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  if (bytes.size() < 12 || r.text(4) != "LVCK") {
    throw FormatError("not a checkpoint: " + path.string());
  }
  if (auto v = r.u8(); v != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(v) + " not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  LoadedCheckpoint out;
  out.stage = r.u8();
  r.u16();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.text(r.u32()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  out.model = std::make_unique<Model>(ModelConfig::from_json(meta.at("model")));
  out.train_config = meta.value("train", nlohmann::json::object());

  std::map<std::string, torch::Tensor> targets;
  for (auto& [name, tensor] : out.model->named_tensors()) targets.emplace(name, tensor);

  torch::NoGradGuard no_grad;
  const uint32_t count = r.u32();
  if (count != targets.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(targets.size()));
  }
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.text(r.u16());
    std::vector<int64_t> dims(r.u8());
    for (auto& d : dims) d = r.u32();
    const uint64_t checksum = r.u64();
    auto it = targets.find(name);
    if (it == targets.end()) throw FormatError("unexpected tensor " + name);
    auto& target = it->second;
    if (target.sizes() != torch::IntArrayRef(dims)) {
      throw FormatError("shape mismatch for tensor " + name);
    }
    auto data = torch::empty(dims, torch::kFloat32);
    float* p = data.data_ptr<float>();
    for (int64_t k = 0; k < data.numel(); ++k) p[k] = r.f32();
    target.copy_(data);
    if (tensor_checksum(target) != checksum) {
      throw FormatError("checksum mismatch after loading " + name);
    }
  }
  log::info("loaded " + std::to_string(count) + " tensors from " + path.string() +
            " (stage " + std::to_string(out.stage) + "), checksums verified");
  return out;
}

}  // namespace lvcc
