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

// Regenerates the normative range-coder test vectors.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lvcc/coder_vectors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write range-coder test vectors"};
  std::string out;
  uint64_t seed = 20240611;
  int cases = 200;
  app.add_option("--output", out, "Output file")->required();
  app.add_option("--seed", seed, "Corpus seed");
  app.add_option("--cases", cases, "Random cases after the fixed edge cases");
  CLI11_PARSE(app, argc, argv);
  try {
    auto vectors = lvcc::entropy::make_coder_vectors(seed, cases);
    lvcc::entropy::write_coder_vectors(out, vectors);
    std::printf("%zu cases\n", vectors.size());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_coder_vectors: %s\n", e.what());
    return 1;
  }
  return 0;
}
