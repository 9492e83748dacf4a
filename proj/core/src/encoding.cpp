#include "msgaf/encoding.hpp"

#include <cmath>
#include <numeric>

namespace msgaf {

void MetricSchema::check(std::string_view version, std::span<const std::string> columns) {
  if (version != kVersion) {
    throw SchemaError("metric schema version '" + std::string(version) + "' does not match '" +
                      std::string(kVersion) + "'");
  }
  if (columns.size() != kCount) {
    throw SchemaError("metric schema has " + std::to_string(columns.size()) + " columns, expected " +
                      std::to_string(kCount));
  }
  for (std::size_t i = 0; i < kCount; ++i) {
    if (columns[i] != kColumns[i]) {
      throw SchemaError("metric column " + std::to_string(i) + " is '" + columns[i] + "', expected '" +
                        std::string(kColumns[i]) + "'");
    }
  }
}

ServiceGraph ServiceGraph::from_edges(std::string name, std::vector<std::string> services,
                                      std::span<const std::pair<std::size_t, std::size_t>> edges) {
  const std::size_t n = services.size();
  Matrix a(n, n);
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) {
      throw SchemaError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range for n=" +
                        std::to_string(n));
    }
    a(i, j) = 1.0;
  }
  return ServiceGraph{std::move(name), std::move(services), std::move(a)};
}

std::vector<std::pair<std::size_t, std::size_t>> ServiceGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = 0; j < size(); ++j)
      if (adjacency(i, j) != 0.0) out.emplace_back(i, j);
  return out;
}

GraphReport validate_graph(const ServiceGraph& g) {
  const Matrix& a = g.adjacency;
  if (a.empty() || a.rows() != a.cols()) throw SchemaError("adjacency must be square and non-empty, got " + shape_str(a));
  if (!g.services.empty() && g.services.size() != a.rows()) {
    throw SchemaError("graph has " + std::to_string(g.services.size()) + " names for " + std::to_string(a.rows()) +
                      " nodes");
  }
  const std::size_t n = a.rows();
  GraphReport report;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = a(i, j);
      if (v != 0.0 && v != 1.0) {
        throw SchemaError("adjacency entry (" + std::to_string(i) + ", " + std::to_string(j) + ") = " +
                          std::to_string(v) + " is not binary");
      }
      if (i == j && v != 0.0) throw SchemaError("self-loop at node " + std::to_string(i));
      if (v != 0.0) ++report.edge_count;
    }
  }
  // Union-find over the undirected view.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<bool> touched(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      touched[i] = touched[j] = true;
      parent[root(i)] = root(j);
    }
  }
  std::size_t components = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (root(i) == i) ++components;
    if (!touched[i] && n > 1) report.isolated.push_back(i);
  }
  report.weakly_connected = components == 1;
  return report;
}

void validate_state(const SystemState& state) {
  const std::size_t n = state.metrics.rows();
  if (state.metrics.cols() != MetricSchema::kCount) {
    throw SchemaError("S must have " + std::to_string(MetricSchema::kCount) + " columns, got " +
                      shape_str(state.metrics));
  }
  if (state.quota.rows() != n || state.quota.cols() != 1) {
    throw SchemaError("C must be " + std::to_string(n) + "x1, got " + shape_str(state.quota));
  }
  if (state.workload.rows() != n || state.workload.cols() != 1) {
    throw SchemaError("W must be " + std::to_string(n) + "x1, got " + shape_str(state.workload));
  }
  auto check_nonneg = [](const Matrix& m, const char* name) {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (!(m(i, j) >= 0.0)) {
          throw SchemaError(std::string(name) + "(" + std::to_string(i) + ", " + std::to_string(j) +
                            ") is negative or non-finite");
        }
  };
  check_nonneg(state.metrics, "S");
  check_nonneg(state.quota, "C");
  check_nonneg(state.workload, "W");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c : {MetricSchema::kCpuUtil, MetricSchema::kMemUtil}) {
      if (state.metrics(i, c) > 1.0) {
        throw SchemaError(std::string(MetricSchema::kColumns[c]) + " of service " + std::to_string(i) +
                          " exceeds 1");
      }
    }
  }
}

Matrix build_feature_matrix(const SystemState& state) {
  const std::size_t n = state.metrics.rows();
  if (state.metrics.cols() != MetricSchema::kCount) {
    throw SchemaError("S has " + std::to_string(state.metrics.cols()) + " columns, expected " +
                      std::to_string(MetricSchema::kCount));
  }
  if (state.quota.rows() != n) {
    throw SchemaError("C has " + std::to_string(state.quota.rows()) + " rows, S has " + std::to_string(n));
  }
  if (state.workload.rows() != n) {
    throw SchemaError("W has " + std::to_string(state.workload.rows()) + " rows, S has " + std::to_string(n));
  }
  Matrix x(n, kFeatureCount);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < MetricSchema::kCount; ++j) x(i, j) = state.metrics(i, j);
    x(i, kQuotaColumn) = state.quota(i, 0);
    x(i, kWorkloadColumn) = state.workload(i, 0);
  }
  return x;
}

Normalizer::Normalizer(Matrix mean, Matrix stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.rows() != 1 || !mean_.same_shape(stddev_)) {
    throw ShapeError("normalizer statistics must be matching row vectors, got " + shape_str(mean_) + " and " +
                     shape_str(stddev_));
  }
  for (double& s : stddev_.data()) s = std::max(s, kStdFloor);
}

Matrix Normalizer::apply(const Matrix& x) const {
  if (x.cols() != mean_.cols()) throw ShapeError("normalizer expects " + std::to_string(mean_.cols()) + " columns");
  Matrix z = x;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = (z(i, j) - mean_(0, j)) / stddev_(0, j);
  return z;
}

Matrix Normalizer::invert(const Matrix& z) const {
  if (z.cols() != mean_.cols()) throw ShapeError("normalizer expects " + std::to_string(mean_.cols()) + " columns");
  Matrix x = z;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = x(i, j) * stddev_(0, j) + mean_(0, j);
  return x;
}

Normalizer fit_normalizer(std::span<const Matrix> train) {
  if (train.size() < 2) {
    throw std::invalid_argument("fit_normalizer needs at least 2 samples, got " + std::to_string(train.size()));
  }
  const std::size_t cols = train.front().cols();
  Matrix mean(1, cols), var(1, cols);
  double rows = 0.0;
  for (const Matrix& x : train) {
    if (x.cols() != cols) throw ShapeError("fit_normalizer: inconsistent column counts");
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) mean(0, j) += x(i, j);
    rows += static_cast<double>(x.rows());
  }
  for (double& m : mean.data()) m /= rows;
  for (const Matrix& x : train)
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = x(i, j) - mean(0, j);
        var(0, j) += d * d;
      }
  for (double& v : var.data()) v = std::sqrt(v / rows);
  return Normalizer(std::move(mean), std::move(var));
}

}  // namespace msgaf
