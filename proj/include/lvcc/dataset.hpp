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

#ifndef LVCC_DATASET_HPP_
#define LVCC_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <torch/torch.h>

namespace lvcc::data {

// [3, H, W] float32 RGB in [0, 1]. Throws IoError if unreadable.
torch::Tensor read_image(const std::filesystem::path& path);
// Writes an 8-bit image; the format follows the extension (png, jpg, ...).
void write_image(const std::filesystem::path& path, const torch::Tensor& image);

// Deterministic procedural scene (gradient sky, shapes, stripes, grain),
// [3, h, w] in [0, 1]. Stands in for photographs in tests.
torch::Tensor synthetic_image(uint64_t seed, int64_t h, int64_t w);
// Writes `count` synthetic PNGs named img_00000.png, ... into `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, int count, int64_t h,
                             int64_t w, uint64_t seed);

// Images of a directory held in memory. Files that cannot be decoded or
// are smaller than the crop size are skipped with a warning.
class Dataset {
 public:
  // Throws ConfigError if no usable image remains.
  static Dataset load(const std::filesystem::path& dir, int64_t crop_size);
  static Dataset from_tensors(std::vector<torch::Tensor> images, int64_t crop_size);

  size_t size() const { return images_.size(); }
  const torch::Tensor& image(size_t i) const { return images_.at(i); }
  int64_t crop_size() const { return crop_size_; }
  int skipped_unreadable() const { return skipped_unreadable_; }
  int skipped_small() const { return skipped_small_; }

 private:
  std::vector<torch::Tensor> images_;
  int64_t crop_size_ = 0;
  int skipped_unreadable_ = 0;
  int skipped_small_ = 0;
};

// Endless stream of [batch, 3, crop, crop] batches: uniformly chosen
// images, random crops, random horizontal flips. Deterministic per seed.
class BatchSampler {
 public:
  BatchSampler(const Dataset& dataset, int64_t batch_size, uint64_t seed);
  torch::Tensor next();

 private:
  const Dataset* dataset_;
  int64_t batch_size_;
  std::mt19937_64 rng_;
};

}  // namespace lvcc::data

#endif  // LVCC_DATASET_HPP_
