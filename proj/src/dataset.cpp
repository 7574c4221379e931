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

#include "lvcc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "lvcc/errors.hpp"
#include "lvcc/log.hpp"

namespace lvcc::data {

namespace fs = std::filesystem;
using torch::indexing::Slice;

torch::Tensor read_image(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  auto t = torch::from_blob(bgr.data, {bgr.rows, bgr.cols, 3}, torch::kUInt8).clone();
  // BGR HWC -> RGB CHW
  return t.permute({2, 0, 1}).flip({0}).to(torch::kFloat32).div(255.0).contiguous();
}

void write_image(const fs::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw DimensionError("expected [3, H, W] image");
  auto hwc = image.detach()
                 .to(torch::kFloat32)
                 .clamp(0.0, 1.0)
                 .mul(255.0)
                 .round()
                 .to(torch::kUInt8)
                 .flip({0})
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat bgr(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3,
              hwc.data_ptr<uint8_t>());
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image " + path.string());
}

torch::Tensor synthetic_image(uint64_t seed, int64_t h, int64_t w) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * torch::rand({1}, gen, torch::kFloat64).item<double>();
  };
  auto ys = torch::linspace(0.0, 1.0, h, torch::kFloat64).view({h, 1}).expand({h, w});
  auto xs = torch::linspace(0.0, 1.0, w, torch::kFloat64).view({1, w}).expand({h, w});

  auto top = torch::rand({3, 1, 1}, gen, torch::kFloat64);
  auto bottom = torch::rand({3, 1, 1}, gen, torch::kFloat64);
  auto img = top * (1 - ys) + bottom * ys;

  const int shapes = 3 + static_cast<int>(uniform(0, 6));
  for (int i = 0; i < shapes; ++i) {
    auto colour = torch::rand({3, 1, 1}, gen, torch::kFloat64);
    const double cy = uniform(0, 1), cx = uniform(0, 1);
    const double ry = uniform(0.05, 0.35), rx = uniform(0.05, 0.35);
    torch::Tensor mask;
    if (uniform(0, 1) < 0.5) {
      mask = ((ys - cy) / ry).pow(2) + ((xs - cx) / rx).pow(2) <= 1.0;
    } else {
      mask = ((ys - cy).abs() <= ry) & ((xs - cx).abs() <= rx);
    }
    // Soft shading inside the shape.
    auto shade = 0.85 + 0.15 * torch::cos(6.0 * (xs - cx) + 4.0 * (ys - cy));
    img = torch::where(mask.unsqueeze(0), colour * shade, img);
  }

  const double freq = uniform(10, 40), angle = uniform(0, M_PI);
  auto stripes = torch::sin(freq * (std::cos(angle) * xs + std::sin(angle) * ys) * 2 * M_PI);
  img = img + uniform(0.0, 0.08) * stripes;
  img = img + 0.02 * torch::randn({3, h, w}, gen, torch::kFloat64);
  return img.clamp(0.0, 1.0).to(torch::kFloat32).contiguous();
}

void write_synthetic_dataset(const fs::path& dir, int count, int64_t h, int64_t w,
                             uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.png", i);
    write_image(dir / name, synthetic_image(seed + static_cast<uint64_t>(i), h, w));
  }
}

Dataset Dataset::load(const fs::path& dir, int64_t crop_size) {
  if (!fs::is_directory(dir)) throw ConfigError("dataset path is not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.crop_size_ = crop_size;
  for (const auto& f : files) {
    torch::Tensor img;
    try {
      img = read_image(f);
    } catch (const IoError&) {
      ++ds.skipped_unreadable_;
      log::warn("skipping unreadable file " + f.string());
      continue;
    }
    if (img.size(1) < crop_size || img.size(2) < crop_size) {
      ++ds.skipped_small_;
      log::warn("skipping " + f.string() + ": smaller than crop " + std::to_string(crop_size));
      continue;
    }
    ds.images_.push_back(img);
  }
  if (ds.skipped_unreadable_ + ds.skipped_small_ > 0) {
    log::info("dataset " + dir.string() + ": " + std::to_string(ds.images_.size()) +
              " images, skipped " + std::to_string(ds.skipped_unreadable_) + " unreadable and " +
              std::to_string(ds.skipped_small_) + " undersized");
  }
  if (ds.images_.empty()) throw ConfigError("dataset " + dir.string() + " has no usable images");
  return ds;
}

Dataset Dataset::from_tensors(std::vector<torch::Tensor> images, int64_t crop_size) {
  Dataset ds;
  ds.crop_size_ = crop_size;
  for (auto& img : images) {
    if (img.size(1) < crop_size || img.size(2) < crop_size) {
      ++ds.skipped_small_;
      continue;
    }
    ds.images_.push_back(std::move(img));
  }
  if (ds.images_.empty()) throw ConfigError("dataset has no usable images");
  return ds;
}

BatchSampler::BatchSampler(const Dataset& dataset, int64_t batch_size, uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), rng_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

torch::Tensor BatchSampler::next() {
  const int64_t crop = dataset_->crop_size();
  std::vector<torch::Tensor> crops;
  crops.reserve(static_cast<size_t>(batch_size_));
  for (int64_t b = 0; b < batch_size_; ++b) {
    const auto& img = dataset_->image(
        std::uniform_int_distribution<size_t>(0, dataset_->size() - 1)(rng_));
    const int64_t top = std::uniform_int_distribution<int64_t>(0, img.size(1) - crop)(rng_);
    const int64_t left = std::uniform_int_distribution<int64_t>(0, img.size(2) - crop)(rng_);
    auto c = img.index({Slice(), Slice(top, top + crop), Slice(left, left + crop)});
    if (std::uniform_int_distribution<int>(0, 1)(rng_) == 1) c = c.flip({2});
    crops.push_back(c);
  }
  return torch::stack(crops);
}

}  // namespace lvcc::data
