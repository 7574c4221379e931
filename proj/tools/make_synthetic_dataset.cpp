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

// Writes a directory of deterministic synthetic PNGs for training smoke runs.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lvcc/dataset.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic training images"};
  std::string out;
  int count = 200;
  int64_t height = 256, width = 256;
  uint64_t seed = 0;
  app.add_option("--output", out, "Output directory")->required();
  app.add_option("--count", count, "Number of images")->check(CLI::Range(1, 1000000));
  app.add_option("--height", height, "Image height")->check(CLI::Range(1, 8192));
  app.add_option("--width", width, "Image width")->check(CLI::Range(1, 8192));
  app.add_option("--seed", seed, "Seed");
  CLI11_PARSE(app, argc, argv);
  try {
    lvcc::data::write_synthetic_dataset(out, count, height, width, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_synthetic_dataset: %s\n", e.what());
    return 1;
  }
  return 0;
}
