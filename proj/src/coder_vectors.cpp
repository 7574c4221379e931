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

#include "lvcc/coder_vectors.hpp"

#include <cmath>
#include <random>

#include "lvcc/bytes.hpp"
#include "lvcc/errors.hpp"

namespace lvcc::entropy {

namespace {

constexpr uint8_t kVersion = 1;

CdfTable random_table(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_dist(1, 40);
  std::uniform_int_distribution<int> offset_dist(-20, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pmf(static_cast<size_t>(len_dist(rng)));
  const double skew = 1.0 + 20.0 * u(rng);
  for (auto& p : pmf) p = std::pow(u(rng), skew);
  pmf[0] += 1e-12;
  return quantize_pmf(pmf, offset_dist(rng));
}

// Symbols drawn from the table's own distribution so skewed tables yield
// the long 0xFF runs that exercise carry propagation.
int32_t sample(const CdfTable& t, std::mt19937_64& rng) {
  const uint32_t r = std::uniform_int_distribution<uint32_t>(0, kTotalMass - 1)(rng);
  size_t k = 0;
  while (t.cdf[k + 1] <= r) ++k;
  return t.offset + static_cast<int32_t>(k);
}

CoderVector finish_case(CoderVector c) {
  c.bytes = reference_backend().encode(c.symbols, c.tables, c.indices);
  return c;
}

}  // namespace

std::vector<CoderVector> make_coder_vectors(uint64_t seed, int random_cases) {
  std::mt19937_64 rng(seed);
  std::vector<CoderVector> out;
  const std::vector<double> uniform4(4, 1.0);

  // Empty stream.
  out.push_back(finish_case({{quantize_pmf(uniform4, 0)}, {}, {}, {}}));
  // Single symbol, single-slot table.
  out.push_back(finish_case({{CdfTable{{0, kTotalMass}, 7}}, {7}, {0}, {}}));
  // Minimum-frequency symbols: every slot but one has a count of 1.
  {
    std::vector<double> pmf(64, 0.0);
    pmf[10] = 1.0;
    CoderVector c{{quantize_pmf(pmf, -10)}, {}, {}, {}};
    for (int i = 0; i < 500; ++i) {
      c.symbols.push_back(i % 7 == 0 ? -10 + (i % 64) : 0);
      c.indices.push_back(0);
    }
    out.push_back(finish_case(std::move(c)));
  }
  // Long run of the near-certain symbol: carry chains.
  {
    std::vector<double> pmf = {1.0, 1e-9, 1e-9};
    CoderVector c{{quantize_pmf(pmf, 0)}, {}, {}, {}};
    for (int i = 0; i < 20000; ++i) {
      c.symbols.push_back(i % 4999 == 4998 ? 2 : 0);
      c.indices.push_back(0);
    }
    out.push_back(finish_case(std::move(c)));
  }
  // Uniform 4-symbol stream.
  {
    CoderVector c{{quantize_pmf(uniform4, 0)}, {}, {}, {}};
    for (int i = 0; i < 1000; ++i) {
      c.symbols.push_back(static_cast<int32_t>(rng() % 4));
      c.indices.push_back(0);
    }
    out.push_back(finish_case(std::move(c)));
  }
  for (int n = 0; n < random_cases; ++n) {
    CoderVector c;
    const int n_tables = 1 + static_cast<int>(rng() % 8);
    for (int t = 0; t < n_tables; ++t) c.tables.push_back(random_table(rng));
    const int count = static_cast<int>(rng() % 2000);
    for (int i = 0; i < count; ++i) {
      const auto idx = static_cast<uint32_t>(rng() % n_tables);
      c.indices.push_back(idx);
      c.symbols.push_back(sample(c.tables[idx], rng));
    }
    out.push_back(finish_case(std::move(c)));
  }
  return out;
}

void write_coder_vectors(const std::filesystem::path& path, const std::vector<CoderVector>& cases) {
  ByteWriter w;
  w.text("CVEC");
  w.u8(kVersion);
  w.u8(0);
  w.u16(0);
  w.u32(static_cast<uint32_t>(cases.size()));
  for (const auto& c : cases) {
    w.u32(static_cast<uint32_t>(c.tables.size()));
    for (const auto& t : c.tables) {
      w.i32(t.offset);
      w.u32(static_cast<uint32_t>(t.cdf.size()));
      for (auto v : t.cdf) w.u32(v);
    }
    w.u32(static_cast<uint32_t>(c.symbols.size()));
    for (auto s : c.symbols) w.i32(s);
    for (auto i : c.indices) w.u32(i);
    w.u32(static_cast<uint32_t>(c.bytes.size()));
    w.bytes(c.bytes);
  }
  write_file_atomic(path, w.take());
}

std::vector<CoderVector> read_coder_vectors(const std::filesystem::path& path) {
  const auto data = read_file(path);
  ByteReader r(data);
  if (r.text(4) != "CVEC") throw FormatError("not a coder vector file");
  if (r.u8() != kVersion) throw FormatError("unsupported coder vector version");
  r.u8();
  r.u16();
  const uint32_t n = r.u32();
  std::vector<CoderVector> out(n);
  for (auto& c : out) {
    c.tables.resize(r.u32());
    for (auto& t : c.tables) {
      t.offset = r.i32();
      t.cdf.resize(r.u32());
      for (auto& v : t.cdf) v = r.u32();
      t.validate();
    }
    const uint32_t count = r.u32();
    c.symbols.resize(count);
    c.indices.resize(count);
    for (auto& s : c.symbols) s = r.i32();
    for (auto& i : c.indices) i = r.u32();
    const auto bytes = r.bytes(r.u32());
    c.bytes.assign(bytes.begin(), bytes.end());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in coder vector file");
  return out;
}

}  // namespace lvcc::entropy
