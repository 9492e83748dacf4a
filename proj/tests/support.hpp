#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "msgaf/matrix.hpp"

namespace msgaf::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

/// Random directed 0/1 adjacency without self-loops.
inline Matrix random_adjacency(std::size_t n, std::mt19937_64& rng, double density = 0.4) {
  std::bernoulli_distribution edge(density);
  Matrix a(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && edge(rng)) a(i, j) = 1.0;
    }
  }
  return a;
}

/// Row-stochastic n x k matrix with strictly positive entries.
inline Matrix random_stochastic(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  return row_softmax(random_matrix(n, k, rng, -2.0, 2.0));
}

/// Permutation matrix Q with (Q x)_i = x_{perm[i]}.
inline Matrix permutation_matrix(const std::vector<std::size_t>& perm) {
  Matrix q(perm.size(), perm.size(), 0.0);
  for (std::size_t i = 0; i < perm.size(); ++i) q(i, perm[i]) = 1.0;
  return q;
}

}  // namespace msgaf::testing
