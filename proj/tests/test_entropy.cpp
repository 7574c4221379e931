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

#include <cmath>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "lvcc/coder_vectors.hpp"
#include "lvcc/entropy.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/rangecoder_abi.h"

using namespace lvcc;
using namespace lvcc::entropy;

namespace {

struct Corpus {
  std::vector<CdfTable> tables;
  std::vector<int32_t> symbols;
  std::vector<uint32_t> indices;
};

Corpus random_corpus(std::mt19937_64& rng, size_t n_tables, size_t count) {
  Corpus c;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (size_t t = 0; t < n_tables; ++t) {
    std::vector<double> pmf(2 + rng() % 30);
    for (auto& p : pmf) p = u(rng) * u(rng);
    c.tables.push_back(quantize_pmf(pmf, static_cast<int32_t>(rng() % 21) - 10));
  }
  for (size_t i = 0; i < count; ++i) {
    const auto t = static_cast<uint32_t>(rng() % n_tables);
    const auto& tb = c.tables[t];
    c.indices.push_back(t);
    c.symbols.push_back(tb.min_symbol() + static_cast<int32_t>(rng() % tb.symbol_count()));
  }
  return c;
}

}  // namespace

TEST_CASE("quantized pmf") {
  const std::vector<double> uniform(4, 1.0);
  CHECK(quantize_pmf(uniform, 0).cdf == std::vector<uint32_t>{0, 16384, 32768, 49152, 65536});

  // Tiny masses still get a nonzero count.
  const std::vector<double> skewed = {1.0, 1e-12, 1e-12, 0.0};
  auto t = quantize_pmf(skewed, -1);
  CHECK_NOTHROW(t.validate());
  CHECK(t.frequency(0) == 1);
  CHECK(t.frequency(2) == 1);
  CHECK(t.min_symbol() == -1);
  CHECK(t.max_symbol() == 2);

  const std::vector<double> zero(3, 0.0);
  CHECK_THROWS_AS(quantize_pmf(zero, 0), NumericError);
  const std::vector<double> neg = {1.0, -0.1};
  CHECK_THROWS_AS(quantize_pmf(neg, 0), NumericError);
}

TEST_CASE("round trip over random tables") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_corpus(rng, 1 + trial % 5, 500 * (trial + 1));
    auto bytes = entropy_encode(c.symbols, c.tables, c.indices);
    CHECK(entropy_decode(bytes, c.tables, c.indices, c.symbols.size()) == c.symbols);
  }
  auto c = random_corpus(rng, 8, 10000);
  auto bytes = entropy_encode(c.symbols, c.tables, c.indices);
  CHECK(entropy_decode(bytes, c.tables, c.indices, c.symbols.size()) == c.symbols);
}

TEST_CASE("empty and uniform streams") {
  const std::vector<double> uniform(4, 1.0);
  std::vector<CdfTable> tables = {quantize_pmf(uniform, 0)};
  auto empty = entropy_encode({}, tables, {});
  CHECK(empty.size() <= 8);
  CHECK(entropy_decode(empty, tables, {}, 0).empty());

  std::mt19937_64 rng(1);
  std::vector<int32_t> s(1000);
  std::vector<uint32_t> idx(1000, 0);
  for (auto& v : s) v = static_cast<int32_t>(rng() % 4);
  auto bytes = entropy_encode(s, tables, idx);
  CHECK(bytes.size() >= 250);
  CHECK(bytes.size() <= 258);
}

TEST_CASE("coding errors") {
  const std::vector<double> uniform(4, 1.0);
  std::vector<CdfTable> tables = {quantize_pmf(uniform, 0)};
  std::vector<int32_t> s = {0, 1, 2, 7, 1};
  std::vector<uint32_t> idx(5, 0);
  try {
    entropy_encode(s, tables, idx);
    FAIL("expected an encode error");
  } catch (const EncodeError& e) {
    CHECK(std::string(e.what()).find("position 3") != std::string::npos);
  }

  std::mt19937_64 rng(3);
  auto c = random_corpus(rng, 3, 2000);
  auto bytes = entropy_encode(c.symbols, c.tables, c.indices);
  for (size_t cut : {size_t{0}, size_t{3}, bytes.size() / 2, bytes.size() - 6}) {
    std::vector<uint8_t> truncated(bytes.begin(), bytes.begin() + cut);
    CHECK_THROWS_AS(entropy_decode(truncated, c.tables, c.indices, c.symbols.size()), DecodeError);
  }
  std::vector<uint32_t> bad_idx = c.indices;
  bad_idx[10] = 99;
  CHECK_THROWS_AS(entropy_encode(c.symbols, c.tables, bad_idx), EncodeError);
}

TEST_CASE("random bytes decode safely") {
  std::mt19937_64 rng(5);
  auto c = random_corpus(rng, 4, 300);
  int errors = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<uint8_t> junk(rng() % 64);
    for (auto& b : junk) b = static_cast<uint8_t>(rng());
    try {
      auto out = entropy_decode(junk, c.tables, c.indices, c.symbols.size());
      CHECK(out.size() == c.symbols.size());
    } catch (const DecodeError&) {
      ++errors;
    }
  }
  CHECK(errors > 0);
}

TEST_CASE("escape coding of out-of-range latents") {
  auto table = gaussian_latent_table(1.0);
  std::vector<CdfTable> tables = {table, bypass_table()};
  const int32_t lo = table.min_symbol(), hi = table.max_symbol() - 1;
  std::vector<int32_t> values = {0, lo, hi, hi + 1, lo - 1, hi + 15, lo - 300, 123456789, -2000000000,
                                 INT32_MAX, INT32_MIN};
  std::vector<int32_t> symbols;
  std::vector<uint32_t> indices;
  for (auto v : values) expand_latent(v, table, 0, 1, symbols, indices);
  CHECK(symbols.size() > values.size());
  auto bytes = entropy_encode(symbols, tables, indices);
  RangeDecoder dec(bytes);
  for (auto v : values) CHECK(decode_latent(dec, table) == v);
}

TEST_CASE("gaussian latent tables") {
  for (double s : {0.11, 0.5, 1.0, 7.3, 256.0}) {
    auto t = gaussian_latent_table(s);
    CHECK_NOTHROW(t.validate());
    CHECK(t.min_symbol() == -(t.max_symbol() - 1));  // symmetric support plus escape
  }
  auto t = gaussian_latent_table(0.11);
  CHECK(t.frequency(0) / 65536.0 >= 0.99);
  // Continuous-cdf tables: a logistic with unit scale.
  auto l = cdf_latent_table([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  CHECK_NOTHROW(l.validate());
  CHECK(l.frequency(0) > l.frequency(3));
}

TEST_CASE("flat-buffer boundary") {
  const uint32_t cdf[] = {0, 16384, 32768, 49152, 65536, 0, 65535, 65536};
  const uint64_t starts[] = {0, 5, 8};
  const int32_t offsets[] = {0, -1};
  const int32_t symbols[] = {3, 0, -1, 0, 2};
  const uint32_t indices[] = {0, 1, 1, 1, 0};
  std::vector<uint8_t> out(lvcc_rc_max_encoded_size(5));
  uint64_t len = 0, pos = 0;
  REQUIRE(lvcc_rc_encode(cdf, starts, offsets, 2, symbols, indices, 5, out.data(), out.size(), &len, &pos) ==
          LVCC_RC_OK);
  int32_t decoded[5];
  REQUIRE(lvcc_rc_decode(cdf, starts, offsets, 2, out.data(), len, indices, 5, decoded, &pos) == LVCC_RC_OK);
  CHECK(std::vector<int32_t>(decoded, decoded + 5) == std::vector<int32_t>(symbols, symbols + 5));

  uint8_t tiny[2];
  CHECK(lvcc_rc_encode(cdf, starts, offsets, 2, symbols, indices, 5, tiny, 2, &len, &pos) ==
        LVCC_RC_BUFFER_TOO_SMALL);
  const int32_t bad[] = {3, 0, 5, 0, 2};
  CHECK(lvcc_rc_encode(cdf, starts, offsets, 2, bad, indices, 5, out.data(), out.size(), &len, &pos) ==
        LVCC_RC_SYMBOL_OUT_OF_RANGE);
  CHECK(pos == 2);
  const uint32_t bad_cdf[] = {0, 16384, 16384, 49152, 65536, 0, 65535, 65536};
  CHECK(lvcc_rc_encode(bad_cdf, starts, offsets, 2, symbols, indices, 5, out.data(), out.size(), &len, &pos) ==
        LVCC_RC_INVALID_TABLE);
  CHECK(pos == 0);
  const uint32_t bad_indices[] = {0, 1, 2, 1, 0};
  CHECK(lvcc_rc_encode(cdf, starts, offsets, 2, symbols, bad_indices, 5, out.data(), out.size(), &len, &pos) ==
        LVCC_RC_BAD_TABLE_INDEX);
  CHECK(lvcc_rc_decode(cdf, starts, offsets, 2, out.data(), 3, indices, 5, decoded, &pos) ==
        LVCC_RC_STREAM_EXHAUSTED);
}

TEST_CASE("normative coder vectors") {
  const auto path = std::filesystem::path(LVCC_TEST_DATA) / "coder_vectors.bin";
  auto cases = read_coder_vectors(path);
  REQUIRE(cases.size() >= 5);
  size_t symbols = 0;
  for (const auto& c : cases) {
    CHECK(reference_backend().encode(c.symbols, c.tables, c.indices) == c.bytes);
    CHECK(reference_backend().decode(c.bytes, c.tables, c.indices, c.symbols.size()) == c.symbols);
    symbols += c.symbols.size();
  }
  MESSAGE(cases.size() << " cases, " << symbols << " symbols");
  // The committed file is exactly what the generator produces.
  const auto regenerated = make_coder_vectors(20240611, static_cast<int>(cases.size()) - 5);
  REQUIRE(regenerated.size() == cases.size());
  for (size_t i = 0; i < cases.size(); ++i) CHECK(regenerated[i].bytes == cases[i].bytes);
}

#ifdef LVCC_RC_SHIM
TEST_CASE("native backend through dlopen") {
  auto native = load_native_backend(LVCC_RC_SHIM);
  const auto cases = read_coder_vectors(std::filesystem::path(LVCC_TEST_DATA) / "coder_vectors.bin");
  for (const auto& c : cases) {
    CHECK(native->encode(c.symbols, c.tables, c.indices) == c.bytes);
    CHECK(native->decode(c.bytes, c.tables, c.indices, c.symbols.size()) == c.symbols);
  }
  CHECK_THROWS_AS(load_native_backend("/nonexistent/librc.so"), ConfigError);
}
#endif
