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

#include "doctest_torch.hpp"

#include "lvcc/codec.hpp"
#include "lvcc/dataset.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/evalkit.hpp"

using namespace lvcc;
using namespace lvcc::codec;
using torch::indexing::Slice;

namespace {

Codec tiny_codec(uint64_t seed = 1) {
  torch::manual_seed(seed);
  Codec c(CodecConfig::tiny());
  c->eval();
  return c;
}

// Standard normal CDF via erfc, independent of the codec's likelihood path.
double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("gdn hand values") {
  auto x = torch::ones({1, 1, 1, 1});
  auto y = gdn(x, torch::full({1}, 0.5), torch::full({1, 1}, 0.5), false);
  CHECK(y.item<float>() == doctest::Approx(1.0));

  auto r = torch::randn({2, 4, 5, 5});
  auto id = gdn(r, torch::ones({4}), torch::zeros({4, 4}), false);
  CHECK(torch::equal(id, r));
}

TEST_CASE("gdn inverse with shared denominators") {
  torch::manual_seed(3);
  auto x = torch::randn({2, 6, 7, 7}, torch::kFloat64);
  auto beta = torch::rand({6}, torch::kFloat64) + 0.1;
  auto gamma = torch::rand({6, 6}, torch::kFloat64) * 0.1;
  auto norm = gdn_norm(x, beta, gamma);
  auto y = gdn(x, beta, gamma, false);
  CHECK(torch::allclose(y * norm, x, 0, 1e-5));
  auto back = gdn(y, beta, gamma, true);
  // IGDN normalizes with its own input; recover x with the forward norm.
  CHECK(torch::allclose(back / gdn_norm(y, beta, gamma) * norm, x, 0, 1e-5));
}

TEST_CASE("gdn layer keeps its constraints") {
  Gdn g(8, false);
  for (auto& p : g->parameters()) {
    torch::NoGradGuard ng;
    p.uniform_(-3, 3);
  }
  CHECK(g->beta().min().item<float>() >= 1e-6f);
  CHECK(g->gamma().min().item<float>() >= 0.0f);
}

TEST_CASE("rounding is half to even") {
  auto x = torch::tensor({1.4f, 2.5f, -1.5f, 3.0f, -2.0f});
  auto r = quantize(x, QuantMode::kRound);
  CHECK(torch::equal(r, torch::tensor({1.0f, 2.0f, -2.0f, 3.0f, -2.0f})));
  auto n = quantize(torch::zeros({1000}), QuantMode::kNoise);
  CHECK(n.abs().max().item<float>() < 0.5f);
}

TEST_CASE("single-symbol rate estimate") {
  const double expected = -std::log2(phi(0.5) - phi(-0.5));
  CHECK(expected == doctest::Approx(1.3851).epsilon(1e-4));
  auto lik = gaussian_likelihood(torch::zeros({1}), torch::ones({1}));
  CHECK(-std::log2(lik.item<float>()) == doctest::Approx(expected).epsilon(1e-5));

  // Bits grow with the scale at zero.
  auto scales = torch::tensor({0.5f, 1.0f, 4.0f, 32.0f, 256.0f});
  auto bits = -torch::log2(gaussian_likelihood(torch::zeros({5}), scales));
  CHECK((bits.slice(0, 1) > bits.slice(0, 0, 4)).all().item<bool>());
}

TEST_CASE("rate estimate rejects scales below the bound") {
  Codec c = tiny_codec();
  auto y = torch::zeros({1, 32, 4, 4});
  auto z = torch::zeros({1, 32, 1, 1});
  CHECK_THROWS_AS(rate_estimate(y, torch::full({1, 32, 4, 4}, 0.05), z, c->prior(), 0.11), NumericError);
}

TEST_CASE("analysis shapes and scale floor") {
  Codec c = tiny_codec();
  torch::NoGradGuard ng;
  auto x = torch::rand({1, 3, 256, 256});
  auto pack = c->analyze(x, QIndex(2));
  CHECK(pack.y.sizes() == torch::IntArrayRef({1, 32, 16, 16}));
  CHECK(pack.z.sizes() == torch::IntArrayRef({1, 32, 4, 4}));
  CHECK(pack.scales.sizes() == torch::IntArrayRef({1, 32, 16, 16}));
  CHECK(pack.scales.min().item<float>() >= 0.11f);
  CHECK(c->g_dec(c->g_enc(x, QIndex(0)), QIndex(0)).sizes() == x.sizes());
  CHECK_THROWS_AS(c->analyze(torch::rand({1, 3, 100, 128}), QIndex(0)), DimensionError);
  CHECK_THROWS_AS(c->analyze(x, QIndex(6)), ConfigError);
}

TEST_CASE("gaussian tables") {
  const std::vector<double> uniform(4, 1.0);
  auto t = entropy::quantize_pmf(uniform, 0);
  CHECK(t.cdf == std::vector<uint32_t>{0, 16384, 32768, 49152, 65536});

  auto narrow = entropy::gaussian_latent_table(0.11);
  CHECK(narrow.cdf.front() == 0);
  CHECK(narrow.cdf.back() == 65536);
  CHECK(narrow.frequency(0) / 65536.0 >= 0.99);

  Codec c = tiny_codec();
  auto tables = build_cdf_tables(c);
  CHECK(tables.y_tables.size() == 64);
  CHECK(tables.z_tables.size() == 32);
  CHECK(tables.scale_table.front() == doctest::Approx(0.11));
  CHECK(tables.scale_table.back() == doctest::Approx(256.0));
  for (const auto& tb : tables.y_tables) CHECK_NOTHROW(tb.validate());
  for (const auto& tb : tables.z_tables) CHECK_NOTHROW(tb.validate());
  CHECK(tables.scale_index(0.11f) == 0);
  CHECK(tables.scale_index(1000.f) == 63);
}

TEST_CASE("compress and decompress") {
  Codec c = tiny_codec();
  ImageCodec ic(c);
  auto image = data::synthetic_image(5, 200, 136);

  auto enc = ic.encode(image, QIndex(3));
  auto bytes = enc.bitstream.serialize();
  auto dec = ic.decompress(Bitstream::parse(bytes));
  CHECK(dec.image.sizes() == image.sizes());
  CHECK(dec.q.value == 3);
  CHECK(torch::equal(dec.y_hat, enc.y_hat));
  CHECK(torch::equal(dec.z_hat, enc.z_hat));

  // Decoded pixels are exactly the synthesis of the rounded latents.
  torch::NoGradGuard ng;
  auto direct = c->g_dec(enc.y_hat, QIndex(3)).squeeze(0).index({Slice(), Slice(0, 200), Slice(0, 136)});
  CHECK(torch::equal(dec.image, direct));

  // Byte-identical on repeat.
  CHECK(ic.compress(image, QIndex(3)).serialize() == bytes);

  // bpp counts the whole container.
  auto tile = data::synthetic_image(6, 256, 256);
  auto b = ic.compress(tile, QIndex(0)).serialize();
  CHECK(eval::bpp(b).value() == 8.0 * b.size() / 65536.0);
}

TEST_CASE("bitstream header errors") {
  Codec c = tiny_codec();
  ImageCodec ic(c);
  auto bytes = ic.compress(data::synthetic_image(1, 64, 64), QIndex(1)).serialize();
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Bitstream::parse(bad), FormatError);
  auto short_stream = std::vector<uint8_t>(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_AS(Bitstream::parse(short_stream), DecodeError);
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(Bitstream::parse(wrong_version), FormatError);
}

TEST_CASE("estimated bits track the stream on an untrained codec") {
  Codec c = tiny_codec();
  ImageCodec ic(c);
  auto image = data::synthetic_image(9, 256, 256);
  torch::NoGradGuard ng;
  auto r = c->forward(image.unsqueeze(0), QIndex(2), QuantMode::kRound);
  const double estimated = (r.bits_y + r.bits_z).sum().item<double>();
  auto bs = ic.compress(image, QIndex(2));
  const double actual = 8.0 * (bs.y_bytes.size() + bs.z_bytes.size());
  MESSAGE("estimated " << estimated << " actual " << actual);
  CHECK(std::abs(estimated - actual) / actual < 0.10);
}
