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

#ifndef LVCC_CODER_VECTORS_HPP_
#define LVCC_CODER_VECTORS_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lvcc/entropy.hpp"

namespace lvcc::entropy {

// One normative coder case: tables, symbols, table indices, expected bytes.
struct CoderVector {
  std::vector<CdfTable> tables;
  std::vector<int32_t> symbols;
  std::vector<uint32_t> indices;
  std::vector<uint8_t> bytes;
};

// Seeded corpus: edge cases (empty stream, single symbol, minimum-frequency
// symbols, long carry chains) followed by `random_cases` random cases. The
// expected bytes come from the reference coder.
std::vector<CoderVector> make_coder_vectors(uint64_t seed, int random_cases);

// "CVEC", u8 version = 1, 3 reserved bytes, u32 case count; per case:
// u32 n_tables, per table (i32 offset, u32 len, u32 cdf[len]), u32 count,
// i32 symbols[count], u32 indices[count], u32 n_bytes, bytes.
// Little-endian throughout.
void write_coder_vectors(const std::filesystem::path& path, const std::vector<CoderVector>& cases);
std::vector<CoderVector> read_coder_vectors(const std::filesystem::path& path);

}  // namespace lvcc::entropy

#endif  // LVCC_CODER_VECTORS_HPP_
