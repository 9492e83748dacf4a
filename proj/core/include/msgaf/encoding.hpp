#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msgaf/matrix.hpp"

namespace msgaf {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered per-service metric columns of S.
struct MetricSchema {
  static constexpr std::string_view kVersion = "msgaf-metrics/1";
  static constexpr std::size_t kCount = 7;
  static constexpr std::array<std::string_view, kCount> kColumns = {
      "cpu_util", "mem_util", "file_io", "net_in", "net_out", "pod_count", "calls_per_min"};

  enum Column : std::size_t { kCpuUtil, kMemUtil, kFileIo, kNetIn, kNetOut, kPodCount, kCallsPerMin };

  /// Throws SchemaError unless `version` and `columns` match exactly, in order.
  static void check(std::string_view version, std::span<const std::string> columns);
};

/// Width of the feature matrix: metrics, then quota, then workload.
inline constexpr std::size_t kFeatureCount = MetricSchema::kCount + 2;
inline constexpr std::size_t kQuotaColumn = MetricSchema::kCount;
inline constexpr std::size_t kWorkloadColumn = MetricSchema::kCount + 1;

/// Directed call graph. adjacency(i, j) = 1 iff service i calls service j.
struct ServiceGraph {
  std::string name;
  std::vector<std::string> services;
  Matrix adjacency;

  std::size_t size() const noexcept { return adjacency.rows(); }

  static ServiceGraph from_edges(std::string name, std::vector<std::string> services,
                                 std::span<const std::pair<std::size_t, std::size_t>> edges);
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
};

struct GraphReport {
  bool weakly_connected = false;
  std::size_t edge_count = 0;
  std::vector<std::size_t> isolated;
};

/// Checks binary entries, zero diagonal and square shape (throwing SchemaError
/// with coordinates on violation) and reports connectivity.
GraphReport validate_graph(const ServiceGraph& g);

/// Per-window observations: S (n x 7), C (n x 1, cores), W (n x 1, req/min).
struct SystemState {
  Matrix metrics;
  Matrix quota;
  Matrix workload;
};

/// Checks non-negativity and utilization bounds; throws SchemaError.
void validate_state(const SystemState& state);

/// X = [S, C, W], n x 9.
Matrix build_feature_matrix(const SystemState& state);

/// Column z-score statistics over the training split.
class Normalizer {
 public:
  static constexpr double kStdFloor = 1e-8;

  Normalizer() = default;
  Normalizer(Matrix mean, Matrix stddev);

  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& z) const;

  const Matrix& mean() const noexcept { return mean_; }
  const Matrix& stddev() const noexcept { return stddev_; }

  friend bool operator==(const Normalizer&, const Normalizer&) = default;

 private:
  Matrix mean_;
  Matrix stddev_;
};

/// Population mean/std over every row of every matrix; needs >= 2 samples.
Normalizer fit_normalizer(std::span<const Matrix> train);

}  // namespace msgaf
