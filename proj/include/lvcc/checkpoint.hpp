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

#ifndef LVCC_CHECKPOINT_HPP_
#define LVCC_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lvcc/pipeline.hpp"

namespace lvcc {

// Checkpoint file, little-endian:
//   "LVCK", u8 version = 1, u8 stage, u16 reserved,
//   u32 json length, json {"model": ModelConfig, "train": config echo},
//   u32 tensor count, then per tensor:
//     u16 name length, name, u8 ndim, u32 dims[ndim], u64 FNV-1a checksum
//     of the payload, float32 payload.
inline constexpr uint8_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  int stage = 0;
  nlohmann::json train_config;
};

// Written atomically (temp file + rename).
void save_checkpoint(const std::filesystem::path& path, Model& model, int stage,
                     const nlohmann::json& train_config = nlohmann::json::object());

// Rebuilds the model from the embedded config and copies every tensor in.
// Throws FormatError on a bad header, version mismatch, missing or
// mis-shaped tensors, or a checksum that differs after loading.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the float32 little-endian bytes of a tensor.
uint64_t tensor_checksum(const torch::Tensor& t);

}  // namespace lvcc

#endif  // LVCC_CHECKPOINT_HPP_
