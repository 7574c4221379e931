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

#include <Eigen/Dense>

#include "doctest_torch.hpp"
#include "lvcc/errors.hpp"
#include "lvcc/tokens.hpp"

using namespace lvcc;
using namespace lvcc::tokens;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Soft rank from the eigenvalues of the Gram matrix, no SVD involved.
double gram_soft_rank(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(c.size(0), c.size(1));
  for (int64_t i = 0; i < c.size(0); ++i)
    for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = c[i][j].item<double>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m * m.transpose());
  double s = 0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    s += sigmoid(std::sqrt(std::max(0.0, es.eigenvalues()(k))));
  }
  return s;
}

}  // namespace

TEST_CASE("token grid validation") {
  CHECK_NOTHROW(TokenGrid(torch::zeros({64, 256})));
  CHECK_THROWS_AS(TokenGrid(torch::zeros({64, 250})), DimensionError);
  CHECK_THROWS_AS(TokenGrid(torch::zeros({64, 16, 16})), DimensionError);
  auto bad = torch::zeros({4, 4});
  bad[1][1] = std::nan("");
  CHECK_THROWS_AS(TokenGrid{bad}, NumericError);
}

TEST_CASE("extractor shapes and determinism") {
  torch::manual_seed(0);
  auto image = torch::rand({3, 256, 256});
  ToyExtractor toy;
  auto a = extract_tokens(image, toy);
  CHECK(a.dim() == 64);
  CHECK(a.num() == 256);
  CHECK(torch::equal(a.data(), extract_tokens(image, toy).data()));

  PatchEmbedExtractor vit;
  auto b = extract_tokens(image, vit);
  CHECK(b.dim() == 768);
  CHECK(b.num() == 256);

  CHECK_THROWS_AS(extract_tokens(torch::rand({3, 100, 256}), toy), DimensionError);
  CHECK_THROWS_AS(make_extractor({"clip", 64, 16, 0}), ConfigError);
  // Toy tokens are the projected patch means.
  auto means = torch::avg_pool2d(image.unsqueeze(0), 16).reshape({3, 256});
  CHECK(torch::allclose(a.data(), toy.projection().to(torch::kFloat32).matmul(means), 1e-5, 1e-5));
}

TEST_CASE("tokens to spatial") {
  auto t = torch::randn({64, 256});
  auto same = tokens_to_spatial(t, 16, 16);
  CHECK(same.sizes() == torch::IntArrayRef({64, 16, 16}));
  CHECK(torch::equal(same.reshape({64, 256}), t));
  CHECK(tokens_to_spatial(t, 32, 32).sizes() == torch::IntArrayRef({64, 32, 32}));
  auto c = tokens_to_spatial(torch::full({64, 256}, 0.37f), 40, 24);
  CHECK(torch::allclose(c, torch::full({64, 40, 24}, 0.37f)));
  CHECK(tokens_to_spatial(torch::randn({2, 8, 16}), 8, 8).sizes() == torch::IntArrayRef({2, 8, 8, 8}));
}

TEST_CASE("soft rank values") {
  CHECK(soft_rank(TokenGrid(torch::zeros({4, 9}))) == doctest::Approx(2.0));  // 4 x 9: wide
  CHECK(soft_rank(torch::zeros({4, 8})).item<double>() == doctest::Approx(2.0));
  CHECK(soft_rank(torch::eye(3)).item<double>() == doctest::Approx(2.1931758).epsilon(1e-7));
  auto d = torch::diag(torch::tensor({20.0, 20.0}, torch::kFloat64));
  CHECK(std::abs(soft_rank(d).item<double>() - 2.0) < 1e-8);
}

TEST_CASE("rank loss and token mse") {
  auto t = torch::randn({8, 16});
  CHECK(rank_loss(t, t).item<double>() == 0.0);
  const double expected = std::pow(3 * sigmoid(1.0) - 1.5, 2);
  CHECK(expected == doctest::Approx(0.480493).epsilon(1e-6));
  CHECK(rank_loss(torch::eye(3), torch::zeros({3, 3})).item<double>() == doctest::Approx(expected).epsilon(1e-6));

  torch::manual_seed(4);
  for (int i = 0; i < 5; ++i) {
    auto a = torch::randn({8, 16}, torch::kFloat64), b = torch::randn({8, 16}, torch::kFloat64);
    const double oracle = std::pow(gram_soft_rank(a) - gram_soft_rank(b), 2);
    CHECK(rank_loss(a, b).item<double>() == doctest::Approx(oracle).epsilon(1e-9));
  }

  CHECK(token_mse(t, t).item<double>() == 0.0);
  CHECK(token_mse(torch::zeros({5, 9}), torch::ones({5, 9})).item<double>() == 1.0);
  auto g = torch::tensor({{1.0, 2.0}, {3.0, 4.0}}), dd = torch::tensor({{1.0, 2.0}, {3.0, 6.0}});
  CHECK(token_mse(g, dd).item<double>() == 1.0);
  CHECK_THROWS_AS(token_mse(g, torch::zeros({3, 2})), DimensionError);
}

TEST_CASE("soft rank gradient matches finite differences") {
  torch::manual_seed(11);
  for (int trial = 0; trial < 3; ++trial) {
    auto gt = torch::randn({8, 16}, torch::kFloat64);
    auto td = torch::randn({8, 16}, torch::kFloat64).requires_grad_(true);
    rank_loss(gt, td).backward();
    auto grad = td.grad().clone();
    auto fd = torch::zeros_like(grad);
    const double h = 1e-6;
    torch::NoGradGuard ng;
    auto base = td.detach().clone();
    for (int64_t k = 0; k < base.numel(); ++k) {
      auto p = base.clone(), m = base.clone();
      p.view(-1)[k] += h;
      m.view(-1)[k] -= h;
      fd.view(-1)[k] = (rank_loss(gt, p) - rank_loss(gt, m)).item<double>() / (2 * h);
    }
    CHECK(((grad - fd).norm() / fd.norm()).item<double>() < 1e-4);
  }
}

TEST_CASE("batched soft rank and ignored tiny singular values") {
  auto batch = torch::randn({3, 8, 16});
  auto r = soft_rank(batch);
  CHECK(r.sizes() == torch::IntArrayRef({3}));
  CHECK(r[1].item<double>() == doctest::Approx(soft_rank(batch[1]).item<double>()).epsilon(1e-6));

  // Rank-deficient input: gradient stays finite.
  auto low = torch::randn({8, 2}, torch::kFloat64).matmul(torch::randn({2, 16}, torch::kFloat64));
  low.requires_grad_(true);
  soft_rank(low).backward();
  CHECK(torch::isfinite(low.grad()).all().item<bool>());
}

TEST_CASE("token file round trip") {
  auto path = std::filesystem::temp_directory_path() / "lvcc_test_tokens.tok";
  TokenGrid g(torch::randn({64, 256}));
  write_token_file(path, g);
  auto back = read_token_file(path);
  CHECK(torch::equal(back.data(), g.data()));

  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite("TOKX", 1, 4, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_token_file(path), FormatError);
  std::filesystem::remove(path);
}
