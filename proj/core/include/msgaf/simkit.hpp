#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "msgaf/encoding.hpp"

namespace msgaf::simkit {

// ---- topologies -----------------------------------------------------------

/// Call DAG plus the metadata the oracle needs.
struct Topology {
  ServiceGraph graph;
  std::vector<std::size_t> entries;
  std::vector<bool> stateful;

  const std::string& name() const noexcept { return graph.name; }
  std::size_t size() const noexcept { return graph.size(); }
};

/// "boutique11" (11 services, entry frontend), "sockshop13" (13 services,
/// entry front-end) or "random" (connected DAG, out-degree <= 4, entry 0).
/// Deterministic per (name, seed, random_nodes).
Topology generate_topology(std::string_view template_name, std::uint64_t seed, std::size_t random_nodes = 12);

/// Number of distinct entry-to-node call paths, the per-request fan-out.
std::vector<double> path_counts(const Topology& topology);

// ---- scenarios and traces ---------------------------------------------------

enum class ScenarioKind { kCpu, kIo, kNetwork, kMixed };
inline constexpr std::array<ScenarioKind, 4> kScenarioKinds = {ScenarioKind::kCpu, ScenarioKind::kIo,
                                                               ScenarioKind::kNetwork, ScenarioKind::kMixed};
std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario(std::string_view name);

/// Stress multipliers (>= 1) applied to per-request CPU demand, disk work and
/// network payload.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kMixed;
  double cpu_stress = 1.0;
  double io_stress = 1.0;
  double net_stress = 1.0;
  double noise = 0.03;

  static ScenarioSpec preset(ScenarioKind kind, double noise = 0.03);
};

/// Categorical weights over cpu, io, network, mixed.
struct ScenarioMix {
  std::array<double, 4> weights = {0.25, 0.25, 0.25, 0.25};
};

enum class TraceShape { kSmooth, kBursty };
std::string_view to_string(TraceShape shape);
TraceShape parse_trace(std::string_view name);

/// Entry request rate per window, requests/second. Smooth profiles keep
/// max/min <= 1.5; bursty ones (with >= 2 windows) have max/min >= 5.
struct TraceProfile {
  TraceShape shape = TraceShape::kSmooth;
  double base_rps = 50.0;
  std::vector<double> rates;
};

TraceProfile make_trace(TraceShape shape, double base_rps, std::size_t windows, std::uint64_t seed);

// ---- queueing oracle --------------------------------------------------------

struct ServiceProfile {
  double cpu_demand = 0.004;  // core-seconds per request
  double io_wait = 0.0005;    // seconds per request
  double io_ops = 0.5;        // disk operations per request
  double net_kb = 5.0;        // KB transferred per request
  double mem_base = 0.3;      // idle memory utilization
};

struct OracleConfig {
  std::array<double, 3> percentile_factors = {1.0, 2.3, 4.6};  // P50, P90, P99
  double max_utilization = 0.99;
  double io_capacity = 4000.0;         // disk ops/s before contention
  double link_capacity = 15000.0;      // KB/s before contention
  double transfer_rate = 5000.0;       // KB/s for an uncontended transfer
  double max_contention = 0.9;
};

/// Index of 50/90/99 into percentile_factors; throws otherwise.
std::size_t percentile_index(int percentile);

/// Probability of waiting in an M/M/c queue with utilization rho < 1.
double erlang_c(std::size_t servers, double rho);

struct OracleResult {
  double latency_ms = 0.0;
  bool saturated = false;
};

/// Analytical end-to-end latency: each service is an M/M/c station
/// (c = pod count, total rate = quota / cpu demand) plus contention-scaled
/// disk and network delays; a request's latency is the longest entry-to-leaf
/// path sum of per-service sojourn times.
class OracleModel {
 public:
  OracleModel(Topology topology, std::vector<ServiceProfile> services, OracleConfig config = {});
  static OracleModel for_topology(const Topology& topology, std::uint64_t seed, OracleConfig config = {});

  const Topology& topology() const noexcept { return topology_; }
  const std::vector<ServiceProfile>& services() const noexcept { return services_; }
  const OracleConfig& config() const noexcept { return config_; }

  /// Mean sojourn time in seconds of one service. `saturated` is set when
  /// the arrival rate reaches capacity before utilization clipping.
  double mean_sojourn(std::size_t service, double arrival_rate, double quota, std::size_t pods,
                      const ScenarioSpec& scenario, bool* saturated = nullptr) const;

  /// Reads arrival rate (calls_per_min / 60), pod count and quota from `state`.
  OracleResult latency(const SystemState& state, const ScenarioSpec& scenario, int percentile) const;

 private:
  Topology topology_;
  std::vector<ServiceProfile> services_;
  OracleConfig config_;
};

// ---- datasets ---------------------------------------------------------------

struct WindowRecord {
  std::size_t window_id = 0;
  ScenarioKind scenario = ScenarioKind::kMixed;
  std::string graph_ref;
  SystemState state;
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
  double latency_p99 = 0.0;

  double latency(int percentile) const;
};

struct DatasetSpec {
  std::string topology = "boutique11";
  std::size_t random_nodes = 12;
  ScenarioMix mix;
  TraceShape trace = TraceShape::kSmooth;
  double base_rps = 50.0;
  std::size_t windows = 100;
  std::uint64_t seed = 1;
  double noise = 0.03;
};

struct Dataset {
  Topology topology;
  std::vector<WindowRecord> records;
  std::vector<std::size_t> saturated_windows;
};

Dataset generate_dataset(const DatasetSpec& spec);

}  // namespace msgaf::simkit
