#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

#include "json.hpp"
#include "msgaf/dataset_io.hpp"
#include "msgaf/simkit.hpp"

using namespace msgaf;
using namespace msgaf::simkit;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("msgaf_simkit_" + name);
  std::filesystem::remove_all(p);
  return p;
}

Topology chain(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("s" + std::to_string(i));
    if (i + 1 < n) edges.emplace_back(i, i + 1);
  }
  Topology t;
  t.graph = ServiceGraph::from_edges("chain", names, edges);
  t.entries = {0};
  t.stateful.assign(n, false);
  return t;
}

SystemState chain_state(std::size_t n, double rps, const std::vector<double>& quota, const std::vector<int>& pods) {
  SystemState s{Matrix(n, MetricSchema::kCount), Matrix(n, 1), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    s.metrics(i, MetricSchema::kCallsPerMin) = rps * 60.0;
    s.metrics(i, MetricSchema::kPodCount) = pods[i];
    s.quota(i, 0) = quota[i];
  }
  s.workload(0, 0) = rps * 60.0;
  return s;
}

// FCFS M/M/c stations in tandem; returns the mean end-to-end time.
double simulate_tandem(double lambda, const std::vector<double>& mu, const std::vector<int>& servers,
                       std::size_t customers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> inter(lambda);
  std::vector<double> times(customers);
  double t = 0.0;
  for (auto& a : times) a = (t += inter(rng));
  double entered = 0.0;
  for (double a : times) entered += a;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    std::exponential_distribution<double> service(mu[s]);
    std::priority_queue<double, std::vector<double>, std::greater<>> free_at;
    for (int k = 0; k < servers[s]; ++k) free_at.push(0.0);
    for (auto& arrival : times) {
      const double start = std::max(arrival, free_at.top());
      free_at.pop();
      arrival = start + service(rng);
      free_at.push(arrival);
    }
    // Customers reach the next station in departure order.
    std::sort(times.begin(), times.end());
  }
  double left = 0.0;
  for (double d : times) left += d;
  return (left - entered) / static_cast<double>(customers);
}

}  // namespace

// ---- topologies -------------------------------------------------------------

TEST_CASE("template topologies") {
  const Topology b = generate_topology("boutique11", 1);
  CHECK(b.size() == 11);
  CHECK(b.entries == std::vector<std::size_t>{0});
  CHECK(b.graph.services[0] == "frontend");
  const Topology s = generate_topology("sockshop13", 1);
  CHECK(s.size() == 13);
  CHECK(validate_graph(s.graph).weakly_connected);
  CHECK_THROWS_AS(generate_topology("bogus", 1), std::invalid_argument);
}

TEST_CASE("random topologies are deterministic connected DAGs with bounded out-degree") {
  const Topology a = generate_topology("random", 7, 6);
  const Topology b = generate_topology("random", 7, 6);
  CHECK(a.graph.adjacency == b.graph.adjacency);
  CHECK(a.name() == b.name());
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Topology t = generate_topology("random", seed, 4 + seed % 20);
    CHECK(validate_graph(t.graph).weakly_connected);
    CHECK_NOTHROW(path_counts(t));
    for (std::size_t i = 0; i < t.size(); ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < t.size(); ++j) {
        out += t.graph.adjacency(i, j);
        if (t.graph.adjacency(i, j) != 0.0) CHECK(i < j);
      }
      CHECK(out <= 4.0);
    }
  }
}

TEST_CASE("path counts follow every call path from the entry") {
  const std::vector<double> p = path_counts(generate_topology("boutique11", 1));
  CHECK(p[0] == 1.0);
  CHECK(p[3] == 3.0);  // frontend, recommendation and checkout each call the catalog
  CHECK(p[4] == 2.0);
  CHECK(p[10] == 2.0);
}

// ---- traces -----------------------------------------------------------------

TEST_CASE("trace shapes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TraceProfile s = make_trace(TraceShape::kSmooth, 50.0, 300, seed);
    const TraceProfile b = make_trace(TraceShape::kBursty, 50.0, 300, seed);
    const auto [smin, smax] = std::minmax_element(s.rates.begin(), s.rates.end());
    const auto [bmin, bmax] = std::minmax_element(b.rates.begin(), b.rates.end());
    CHECK(*smin > 0.0);
    CHECK(*bmin > 0.0);
    CHECK(*smax / *smin <= 1.5);
    CHECK(*bmax / *bmin >= 5.0);
  }
  const TraceProfile two = make_trace(TraceShape::kBursty, 50.0, 2, 3);
  CHECK(std::max(two.rates[0], two.rates[1]) / std::min(two.rates[0], two.rates[1]) >= 5.0);
  CHECK(make_trace(TraceShape::kSmooth, 50.0, 20, 4).rates == make_trace(TraceShape::kSmooth, 50.0, 20, 4).rates);
  CHECK_THROWS_AS(make_trace(TraceShape::kSmooth, 0.0, 20, 4), std::invalid_argument);
  CHECK_THROWS_AS(parse_trace("spiky"), std::invalid_argument);
}

// ---- oracle -----------------------------------------------------------------

TEST_CASE("erlang C reference values") {
  CHECK(erlang_c(1, 0.6) == doctest::Approx(0.6));
  CHECK(erlang_c(2, 0.5) == doctest::Approx(1.0 / 3.0));
  CHECK(erlang_c(3, 0.0) == 0.0);
  CHECK_THROWS_AS(erlang_c(2, 1.0), std::invalid_argument);
}

TEST_CASE("empty-queue limit is the base service time times the percentile factor") {
  ServiceProfile p;
  p.cpu_demand = 0.005;
  p.io_wait = 0.001;
  p.net_kb = 10.0;
  const OracleModel oracle(chain(1), {p});
  const ScenarioSpec calm = ScenarioSpec::preset(ScenarioKind::kCpu);
  const double quota = 0.5;
  const double base = 1000.0 * (p.cpu_demand * calm.cpu_stress / quota + p.io_wait + p.net_kb / 5000.0);
  for (int pct : {50, 90, 99}) {
    const double factor = OracleConfig{}.percentile_factors[percentile_index(pct)];
    const OracleResult r = oracle.latency(chain_state(1, 1e-9, {quota}, {1}), calm, pct);
    CHECK(r.latency_ms == doctest::Approx(factor * base).epsilon(1e-9));
    CHECK_FALSE(r.saturated);
  }
  CHECK_THROWS_AS(oracle.latency(chain_state(1, 1.0, {quota}, {1}), calm, 75), std::invalid_argument);
}

TEST_CASE("oracle is monotone in quota and arrival rate") {
  const Topology topo = generate_topology("boutique11", 1);
  const OracleModel oracle = OracleModel::for_topology(topo, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t svc = trial % topo.size();
    const ScenarioSpec sc = ScenarioSpec::preset(kScenarioKinds[trial % 4]);
    const std::size_t pods = 1 + trial % 3;
    const double lambda = 1.0 + 200.0 * u(rng);
    const double quota = 0.1 + 2.0 * u(rng);
    const double base = oracle.mean_sojourn(svc, lambda, quota, pods, sc);
    CHECK(oracle.mean_sojourn(svc, lambda, quota * (1.0 + u(rng)), pods, sc) <= base);
    CHECK(oracle.mean_sojourn(svc, lambda * (1.0 + u(rng)), quota, pods, sc) >= base);
  }
}

TEST_CASE("doubling a quota in the unsaturated regime strictly lowers latency") {
  const Topology topo = chain(2);
  ServiceProfile p;
  const OracleModel oracle(topo, {p, p});
  const ScenarioSpec sc = ScenarioSpec::preset(ScenarioKind::kMixed);
  const double before = oracle.latency(chain_state(2, 40.0, {0.6, 0.6}, {1, 2}), sc, 90).latency_ms;
  const double after = oracle.latency(chain_state(2, 40.0, {1.2, 0.6}, {1, 2}), sc, 90).latency_ms;
  CHECK(after < before);
}

TEST_CASE("saturation is flagged when arrivals exceed capacity") {
  ServiceProfile p;
  const OracleModel oracle(chain(1), {p});
  const ScenarioSpec sc = ScenarioSpec::preset(ScenarioKind::kCpu);
  // capacity = quota / (demand * stress) = 0.1 / 0.008 = 12.5 req/s
  CHECK(oracle.latency(chain_state(1, 20.0, {0.1}, {1}), sc, 50).saturated);
  CHECK_FALSE(oracle.latency(chain_state(1, 5.0, {0.1}, {1}), sc, 50).saturated);
}

TEST_CASE("two-service chain matches a discrete-event simulation within 10%") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int config = 0; config < 3; ++config) {
    ServiceProfile a, b;
    a.cpu_demand = 0.003 + 0.004 * u(rng);
    b.cpu_demand = 0.003 + 0.004 * u(rng);
    a.io_wait = b.io_wait = 0.0;
    a.net_kb = b.net_kb = 0.0;
    const std::vector<int> pods = {1 + config % 3, 1 + (config + 1) % 3};
    const double rps = 20.0 + 30.0 * u(rng);
    // target utilizations 0.4..0.8
    const std::vector<double> quota = {rps * a.cpu_demand / (0.4 + 0.4 * u(rng)),
                                       rps * b.cpu_demand / (0.4 + 0.4 * u(rng))};
    ScenarioSpec sc;
    const OracleModel oracle(chain(2), {a, b});
    const double analytic = oracle.latency(chain_state(2, rps, quota, pods), sc, 50).latency_ms;
    const std::vector<double> mu = {quota[0] / (pods[0] * a.cpu_demand), quota[1] / (pods[1] * b.cpu_demand)};
    const double simulated = 1000.0 * simulate_tandem(rps, mu, pods, 400000, 100 + config);
    CAPTURE(config);
    CAPTURE(analytic);
    CAPTURE(simulated);
    CHECK(std::abs(analytic - simulated) / simulated <= 0.10);
  }
}

// ---- datasets ---------------------------------------------------------------

TEST_CASE("single-window dataset") {
  DatasetSpec spec;
  spec.windows = 1;
  const Dataset ds = generate_dataset(spec);
  REQUIRE(ds.records.size() == 1);
  CHECK_NOTHROW(validate_state(ds.records[0].state));
  CHECK(ds.records[0].latency_p50 > 0.0);
  spec.windows = 0;
  CHECK_THROWS_AS(generate_dataset(spec), std::invalid_argument);
}

TEST_CASE("records satisfy the state invariants and W is entry-only") {
  DatasetSpec spec;
  spec.windows = 200;
  spec.trace = TraceShape::kBursty;
  const Dataset ds = generate_dataset(spec);
  for (const auto& r : ds.records) {
    CHECK_NOTHROW(validate_state(r.state));
    CHECK(r.state.workload(0, 0) > 0.0);
    for (std::size_t i = 1; i < ds.topology.size(); ++i) CHECK(r.state.workload(i, 0) == 0.0);
    CHECK(r.latency_p50 > 0.0);
    CHECK(r.graph_ref == "boutique11");
  }
}

TEST_CASE("uniform scenario mix over 1000 windows gives 250 +- 50 of each kind") {
  DatasetSpec spec;
  spec.windows = 1000;
  spec.seed = 12;
  const Dataset ds = generate_dataset(spec);
  std::array<int, 4> counts{};
  for (const auto& r : ds.records) ++counts[static_cast<std::size_t>(r.scenario)];
  for (int c : counts) {
    CHECK(c >= 200);
    CHECK(c <= 300);
  }
}

TEST_CASE("cpu scenarios raise mean cpu utilization over io scenarios by at least 0.2") {
  DatasetSpec spec;
  spec.windows = 800;
  const Dataset ds = generate_dataset(spec);
  double cpu = 0.0, io = 0.0;
  std::size_t ncpu = 0, nio = 0;
  for (const auto& r : ds.records) {
    for (std::size_t i = 0; i < ds.topology.size(); ++i) {
      const double u = r.state.metrics(i, MetricSchema::kCpuUtil);
      if (r.scenario == ScenarioKind::kCpu) cpu += u, ++ncpu;
      if (r.scenario == ScenarioKind::kIo) io += u, ++nio;
    }
  }
  MESSAGE("mean cpu_util: cpu " << cpu / ncpu << ", io " << io / nio);
  CHECK(cpu / ncpu - io / nio >= 0.2);
}

TEST_CASE("saturated windows are exactly those the oracle flags") {
  DatasetSpec spec;
  spec.windows = 300;
  spec.mix.weights = {1.0, 0.0, 0.0, 0.0};
  const Dataset ds = generate_dataset(spec);
  const OracleModel oracle = OracleModel::for_topology(ds.topology, spec.seed);
  std::vector<std::size_t> flagged;
  for (const auto& r : ds.records) {
    if (oracle.latency(r.state, ScenarioSpec::preset(r.scenario, spec.noise), 50).saturated) {
      flagged.push_back(r.window_id);
    }
  }
  CHECK(flagged == ds.saturated_windows);
}

TEST_CASE("dataset files are deterministic and round-trip") {
  DatasetSpec spec;
  spec.windows = 50;
  spec.seed = 4;
  const auto d1 = scratch("a"), d2 = scratch("b");
  write_dataset(generate_dataset(spec), d1);
  write_dataset(generate_dataset(spec), d2);
  for (auto f : {kDatasetFile, kTopologyFile, kDatasetMetaFile}) {
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  const Dataset original = generate_dataset(spec);
  const Dataset back = read_dataset(d1);
  CHECK(back.topology.graph.adjacency == original.topology.graph.adjacency);
  CHECK(back.topology.entries == original.topology.entries);
  CHECK(back.saturated_windows == original.saturated_windows);
  REQUIRE(back.records.size() == original.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    CHECK(record_to_json(back.records[i]) == record_to_json(original.records[i]));
    CHECK(back.records[i].state.metrics == original.records[i].state.metrics);
    CHECK(back.records[i].latency_p90 == original.records[i].latency_p90);
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("record parsing names the offending field") {
  DatasetSpec spec;
  spec.windows = 1;
  const WindowRecord r = generate_dataset(spec).records[0];
  const std::string good = record_to_json(r);
  CHECK(record_from_json(good, 11).state.quota == r.state.quota);

  auto error_of = [](const std::string& text, std::size_t n) -> std::string {
    try {
      (void)record_from_json(text, n);
    } catch (const SchemaError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(error_of(good, 12).find("'S'") != std::string::npos);
  CHECK(error_of("{not json", 0).find("malformed") != std::string::npos);
  std::string no_c = good;
  no_c.replace(no_c.find("\"C\""), 3, "\"Q\"");
  CHECK(error_of(no_c, 0).find("'C'") != std::string::npos);
  nlohmann::json bad_kind = nlohmann::json::parse(good);
  bad_kind["scenario_kind"] = "weather";
  CHECK(error_of(bad_kind.dump(), 0).find("scenario_kind") != std::string::npos);
}

TEST_CASE("reading a missing dataset reports the path") {
  try {
    (void)read_dataset("/nonexistent/msgaf");
    FAIL("expected DatasetIoError");
  } catch (const DatasetIoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/msgaf") != std::string::npos);
  }
}

TEST_CASE("topology JSON round-trips") {
  const Topology t = generate_topology("sockshop13", 1);
  const Topology back = topology_from_json(topology_to_json(t));
  CHECK(back.graph.adjacency == t.graph.adjacency);
  CHECK(back.entries == t.entries);
  CHECK(back.name() == t.name());
  CHECK_THROWS_AS(topology_from_json("{\"name\": \"x\", \"n\": 2, \"edges\": [[0, 5]], \"entries\": [0]}"),
                  SchemaError);
}
