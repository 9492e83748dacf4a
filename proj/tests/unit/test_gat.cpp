#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "msgaf/gat.hpp"
#include "msgaf/grad_check.hpp"
#include "support.hpp"

using namespace msgaf;
using namespace msgaf::gat;
using msgaf::testing::random_adjacency;
using msgaf::testing::random_matrix;

namespace {

GatParams random_params(std::size_t in, std::size_t h, std::size_t d, std::mt19937_64& rng) {
  return {random_matrix(in, h, rng), random_matrix(h, d, rng), random_matrix(2 * d, 1, rng)};
}

double elu(double v) { return v > 0.0 ? v : std::expm1(v); }

// Explicit per-edge attention from its definition.
Matrix attention_oracle(const Matrix& h, const GatParams& p, const Neighborhood& nbh) {
  const Matrix z = matmul(h, p.transform);
  const std::size_t k = z.rows(), d = z.cols();
  Matrix alpha(k, k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> e(k, -INFINITY);
    double top = -INFINITY;
    for (std::size_t j : nbh.neighbors(i)) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += p.attention(c, 0) * z(i, c) + p.attention(d + c, 0) * z(j, c);
      e[j] = s > 0.0 ? s : 0.2 * s;
      top = std::max(top, e[j]);
    }
    double total = 0.0;
    for (std::size_t j : nbh.neighbors(i)) total += std::exp(e[j] - top);
    for (std::size_t j : nbh.neighbors(i)) alpha(i, j) = std::exp(e[j] - top) / total;
  }
  return alpha;
}

Matrix aggregate_oracle(const Matrix& h, const Matrix& alpha, const GatParams& p) {
  const Matrix z = matmul(h, p.transform);
  Matrix out(alpha.rows(), z.cols(), 0.0);
  for (std::size_t i = 0; i < alpha.rows(); ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < alpha.cols(); ++j) s += alpha(i, j) * z(j, c);
      out(i, c) = elu(s);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("embed examples") {
  std::mt19937_64 rng(1);
  const Matrix xc = random_matrix(3, 9, rng);
  GatParams p = random_params(9, 9, 4, rng);
  p.embed = Matrix::identity(9);
  CHECK(embed(xc, p) == xc);
  CHECK(embed(Matrix(3, 9, 0.0), random_params(9, 5, 4, rng)) == Matrix(3, 5, 0.0));

  const GatParams q = random_params(9, 5, 4, rng);
  const Matrix h = embed(xc, q);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0.0;
      for (std::size_t f = 0; f < 9; ++f) s += xc(i, f) * q.embed(f, c);
      CHECK(std::abs(h(i, c) - s) < 1e-12);
    }
  }
  CHECK_THROWS_AS(embed(Matrix(3, 8, 0.0), q), ShapeError);
}

TEST_CASE("neighbourhoods threshold the coarsened adjacency and always include self") {
  const Matrix a = Matrix::from_rows({{0.0, 2e-6, 5e-7}, {0.0, 0.0, 0.3}, {0.0, 0.0, 0.0}});
  const Neighborhood n = Neighborhood::from_adjacency(a);
  CHECK(n.neighbors(0) == std::vector<std::size_t>{0, 1});
  CHECK(n.neighbors(1) == std::vector<std::size_t>{1, 2});
  CHECK(n.neighbors(2) == std::vector<std::size_t>{2});
}

TEST_CASE("attention examples") {
  std::mt19937_64 rng(2);
  SUBCASE("zero attention vector gives uniform weights over each neighbourhood") {
    GatParams p = random_params(9, 6, 4, rng);
    p.attention = Matrix(8, 1, 0.0);
    const Matrix a = random_adjacency(5, rng);
    const Neighborhood nbh = Neighborhood::from_adjacency(a);
    const Matrix alpha = attention_scores(random_matrix(5, 6, rng), p, nbh);
    for (std::size_t i = 0; i < 5; ++i) {
      const double w = 1.0 / static_cast<double>(nbh.neighbors(i).size());
      for (std::size_t j = 0; j < 5; ++j) CHECK(alpha(i, j) == doctest::Approx(nbh.contains(i, j) ? w : 0.0));
    }
  }
  SUBCASE("single node attends to itself") {
    const Matrix alpha =
        attention_scores(random_matrix(1, 6, rng), random_params(9, 6, 4, rng), Neighborhood::from_adjacency(Matrix(1, 1)));
    CHECK(alpha == Matrix(1, 1, 1.0));
  }
  SUBCASE("mutual pair with identical features splits evenly") {
    const Matrix row = random_matrix(1, 6, rng);
    Matrix h(2, 6);
    for (std::size_t c = 0; c < 6; ++c) h(0, c) = h(1, c) = row(0, c);
    const Matrix alpha = attention_scores(h, random_params(9, 6, 4, rng),
                                          Neighborhood::from_adjacency(Matrix::from_rows({{0, 1}, {1, 0}})));
    CHECK(max_abs_diff(alpha, Matrix(2, 2, 0.5)) < 1e-15);
  }
}

TEST_CASE("attention and aggregation match explicit loop oracles") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 1 + trial % 6;
    const GatParams p = random_params(9, 7, 5, rng);
    const Matrix h = random_matrix(k, 7, rng, -2, 2);
    const Neighborhood nbh = Neighborhood::from_adjacency(random_adjacency(k, rng));
    const Matrix alpha = attention_scores(h, p, nbh);
    CHECK(max_abs_diff(alpha, attention_oracle(h, p, nbh)) < 1e-12);
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (double v : alpha.row(i)) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-10);
    }
    CHECK(max_abs_diff(aggregate(h, alpha, p), aggregate_oracle(h, alpha, p)) < 1e-12);
  }
}

TEST_CASE("aggregate examples") {
  std::mt19937_64 rng(4);
  const GatParams p = random_params(9, 6, 4, rng);
  const Matrix h0 = random_matrix(1, 6, rng);
  const Matrix single = aggregate(h0, Matrix(1, 1, 1.0), p);
  const Matrix z = matmul(h0, p.transform);
  for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(single(0, c) - elu(z(0, c))) < 1e-15);

  Matrix same(3, 6);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 6; ++c) same(i, c) = h0(0, c);
  const Matrix out = aggregate(same, Matrix(3, 3, 1.0 / 3.0), p);
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out(i, c) - out(0, c)) < 1e-15);
}

TEST_CASE("pool examples") {
  const Matrix v = Matrix::from_rows({{0.5, -1, 2}});
  CHECK(pool(v) == v);
  CHECK(pool(Matrix::from_rows({{0.5, -1, 2}, {-0.5, 1, -2}})) == Matrix(1, 3, 0.0));
  CHECK(pool(Matrix::from_rows({{1, 3}, {3, 5}})) == Matrix::from_rows({{2, 4}}));
}

TEST_CASE("node permutations permute H' and leave the pooled embedding unchanged") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + trial % 9;
    const GatParams p = random_params(9, 8, 6, rng);
    const Matrix x = random_matrix(k, 9, rng);
    const Matrix a = random_adjacency(k, rng);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix q = msgaf::testing::permutation_matrix(perm);

    auto run = [&](const Matrix& xc, const Matrix& ac) {
      Tape tape;
      GatVars v{tape.constant(p.embed), tape.constant(p.transform), tape.constant(p.attention)};
      LevelEncoding e = encode_level(tape.constant(xc), tape.constant(ac), v);
      return std::pair{e.node_features.value(), e.embedding.value()};
    };
    const auto [h1, e1] = run(x, a);
    const auto [h2, e2] = run(matmul(q, x), matmul(matmul(q, a), transpose(q)));
    CHECK(max_abs_diff(h2, matmul(q, h1)) < 1e-12);
    CHECK(max_abs_diff(e1, e2) <= 1e-10);
  }
}

TEST_CASE("full level encoding passes a gradient check") {
  std::mt19937_64 rng(6);
  const Matrix x = random_matrix(5, 9, rng);
  const Matrix a = random_adjacency(5, rng);
  const GatParams p = random_params(9, 6, 4, rng);
  const Matrix w = random_matrix(1, 4, rng);
  const Matrix at[] = {p.embed, p.transform, p.attention, x};
  auto f = [&](Tape& t, std::span<const Var> v) {
    LevelEncoding e = encode_level(v[3], t.constant(a), GatVars{v[0], v[1], v[2]});
    return ad::sum(ad::mul(e.embedding, t.constant(w)));
  };
  CHECK(grad_check(f, at, 1e-6).max_relative_error <= 1e-4);
}
