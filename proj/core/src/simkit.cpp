#include "msgaf/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace msgaf::simkit {

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

Topology from_edges(std::string name, std::vector<std::string> services, const std::vector<Edge>& edges,
                    std::vector<std::size_t> entries, std::vector<std::size_t> stateful_nodes) {
  Topology t;
  const std::size_t n = services.size();
  t.graph = ServiceGraph::from_edges(std::move(name), std::move(services), edges);
  t.entries = std::move(entries);
  t.stateful.assign(n, false);
  for (std::size_t s : stateful_nodes) t.stateful[s] = true;
  return t;
}

Topology boutique11() {
  // Stand-in for the Online Boutique call graph.
  std::vector<std::string> names = {"frontend",       "adservice",       "recommendationservice",
                                    "productcatalog", "cartservice",     "checkoutservice",
                                    "currencyservice", "shippingservice", "paymentservice",
                                    "emailservice",   "redis-cart"};
  std::vector<Edge> edges = {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}, {0, 7}, {2, 3},
                             {4, 10}, {5, 3}, {5, 4}, {5, 6}, {5, 7}, {5, 8}, {5, 9}};
  return from_edges("boutique11", std::move(names), edges, {0}, {10});
}

Topology sockshop13() {
  std::vector<std::string> names = {"front-end", "catalogue", "catalogue-db", "carts",    "carts-db",
                                    "orders",    "orders-db", "user",         "user-db",  "payment",
                                    "shipping",  "rabbitmq",  "queue-master"};
  std::vector<Edge> edges = {{0, 1}, {0, 3}, {0, 5}, {0, 7}, {1, 2},  {3, 4},   {5, 6},
                             {5, 7}, {5, 3}, {5, 9}, {5, 10}, {7, 8}, {10, 11}, {11, 12}};
  return from_edges("sockshop13", std::move(names), edges, {0}, {2, 4, 6, 8, 11});
}

Topology random_dag(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("random topology needs at least one node");
  constexpr std::size_t kMaxOutDegree = 4;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out_degree(n, 0);
  std::vector<std::vector<bool>> has(n, std::vector<bool>(n, false));
  std::vector<Edge> edges;
  auto pick_parent = [&](std::size_t child) -> std::size_t {
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < child; ++j)
      if (out_degree[j] < kMaxOutDegree && !has[j][child]) open.push_back(j);
    if (open.empty()) return child;
    return open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
  };
  std::bernoulli_distribution extra(0.3);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t p = pick_parent(i);
    edges.emplace_back(p, i);
    has[p][i] = true;
    ++out_degree[p];
    if (i >= 2 && extra(rng)) {
      const std::size_t q = pick_parent(i);
      if (q != i) {
        edges.emplace_back(q, i);
        has[q][i] = true;
        ++out_degree[q];
      }
    }
  }
  std::vector<std::string> names;
  std::vector<std::size_t> stateful;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("svc" + std::to_string(i));
    if (i > 0 && out_degree[i] == 0 && coin(rng)) stateful.push_back(i);
  }
  std::sort(edges.begin(), edges.end());
  return from_edges("random" + std::to_string(n) + "-s" + std::to_string(seed), std::move(names), edges, {0},
                    std::move(stateful));
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Topology generate_topology(std::string_view template_name, std::uint64_t seed, std::size_t random_nodes) {
  if (template_name == "boutique11") return boutique11();
  if (template_name == "sockshop13") return sockshop13();
  if (template_name == "random") return random_dag(random_nodes, seed);
  throw std::invalid_argument("unknown topology template '" + std::string(template_name) +
                              "' (expected boutique11, sockshop13 or random)");
}

std::vector<double> path_counts(const Topology& topology) {
  const std::size_t n = topology.size();
  const Matrix& a = topology.graph.adjacency;
  // Kahn order; templates are DAGs.
  std::vector<std::size_t> indeg(n, 0), order;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(i, j) != 0.0) ++indeg[j];
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) order.push_back(i);
  for (std::size_t h = 0; h < order.size(); ++h)
    for (std::size_t j = 0; j < n; ++j)
      if (a(order[h], j) != 0.0 && --indeg[j] == 0) order.push_back(j);
  if (order.size() != n) throw std::invalid_argument("topology '" + topology.name() + "' has a cycle");
  std::vector<double> paths(n, 0.0);
  for (std::size_t e : topology.entries) paths[e] += 1.0;
  for (std::size_t v : order)
    for (std::size_t j = 0; j < n; ++j)
      if (a(v, j) != 0.0) paths[j] += paths[v];
  return paths;
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kCpu: return "cpu";
    case ScenarioKind::kIo: return "io";
    case ScenarioKind::kNetwork: return "network";
    case ScenarioKind::kMixed: return "mixed";
  }
  return "unknown";
}

ScenarioKind parse_scenario(std::string_view name) {
  for (ScenarioKind k : kScenarioKinds)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown scenario kind '" + std::string(name) + "'");
}

ScenarioSpec ScenarioSpec::preset(ScenarioKind kind, double noise) {
  ScenarioSpec s;
  s.kind = kind;
  s.noise = noise;
  switch (kind) {
    case ScenarioKind::kCpu: s.cpu_stress = 2.0; break;
    case ScenarioKind::kIo: s.io_stress = 3.0; break;
    case ScenarioKind::kNetwork: s.net_stress = 3.0; break;
    case ScenarioKind::kMixed: s.cpu_stress = s.io_stress = s.net_stress = 1.4; break;
  }
  return s;
}

std::string_view to_string(TraceShape shape) { return shape == TraceShape::kSmooth ? "smooth" : "bursty"; }

TraceShape parse_trace(std::string_view name) {
  if (name == "smooth") return TraceShape::kSmooth;
  if (name == "bursty") return TraceShape::kBursty;
  throw std::invalid_argument("unknown trace shape '" + std::string(name) + "' (expected smooth or bursty)");
}

TraceProfile make_trace(TraceShape shape, double base_rps, std::size_t windows, std::uint64_t seed) {
  if (!(base_rps > 0.0)) throw std::invalid_argument("base_rps must be positive");
  TraceProfile t;
  t.shape = shape;
  t.base_rps = base_rps;
  t.rates.resize(windows);
  std::mt19937_64 rng(seed ^ 0x7ace7ace7ace7aceULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (shape == TraceShape::kSmooth) {
    constexpr double kPeriod = 96.0;
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    std::normal_distribution<double> jitter(0.0, 0.02);
    for (std::size_t i = 0; i < windows; ++i) {
      const double wave = 0.15 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / kPeriod + phase);
      t.rates[i] = base_rps * (1.0 + wave + std::clamp(jitter(rng), -0.05, 0.05));
    }
  } else {
    std::bernoulli_distribution burst(0.15);
    std::vector<bool> is_burst(windows);
    for (std::size_t i = 0; i < windows; ++i) is_burst[i] = burst(rng);
    if (windows >= 2) {
      if (std::none_of(is_burst.begin(), is_burst.end(), [](bool b) { return b; })) is_burst[windows / 2] = true;
      if (std::all_of(is_burst.begin(), is_burst.end(), [](bool b) { return b; })) is_burst[0] = false;
    }
    for (std::size_t i = 0; i < windows; ++i) {
      const double level = is_burst[i] ? 2.2 + 0.6 * unit(rng) : 0.36 + 0.08 * unit(rng);
      t.rates[i] = base_rps * level;
    }
  }
  return t;
}

std::size_t percentile_index(int percentile) {
  switch (percentile) {
    case 50: return 0;
    case 90: return 1;
    case 99: return 2;
    default: throw std::invalid_argument("percentile must be 50, 90 or 99, got " + std::to_string(percentile));
  }
}

double erlang_c(std::size_t servers, double rho) {
  if (servers == 0) throw std::invalid_argument("erlang_c: need at least one server");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("erlang_c: utilization must lie in [0, 1)");
  const double offered = rho * static_cast<double>(servers);
  double b = 1.0;  // Erlang B recursion
  for (std::size_t k = 1; k <= servers; ++k) b = offered * b / (static_cast<double>(k) + offered * b);
  return b / (1.0 - rho * (1.0 - b));
}

OracleModel::OracleModel(Topology topology, std::vector<ServiceProfile> services, OracleConfig config)
    : topology_(std::move(topology)), services_(std::move(services)), config_(config) {
  if (services_.size() != topology_.size()) {
    throw std::invalid_argument("oracle needs one service profile per node");
  }
}

OracleModel OracleModel::for_topology(const Topology& topology, std::uint64_t seed, OracleConfig config) {
  std::mt19937_64 rng(seed ^ 0x0dac1e5eedULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ServiceProfile> services(topology.size());
  for (std::size_t i = 0; i < services.size(); ++i) {
    ServiceProfile& s = services[i];
    const bool stateful = topology.stateful[i];
    s.cpu_demand = 0.002 + 0.006 * unit(rng);
    s.io_wait = stateful ? 0.002 + 0.004 * unit(rng) : 0.0001 + 0.0004 * unit(rng);
    s.io_ops = stateful ? 2.0 + 3.0 * unit(rng) : 0.1 + 0.4 * unit(rng);
    s.net_kb = 2.0 + 18.0 * unit(rng);
    s.mem_base = 0.2 + 0.3 * unit(rng);
  }
  return OracleModel(topology, std::move(services), config);
}

double OracleModel::mean_sojourn(std::size_t service, double arrival_rate, double quota, std::size_t pods,
                                 const ScenarioSpec& scenario, bool* saturated) const {
  const ServiceProfile& p = services_.at(service);
  if (!(quota > 0.0)) throw std::invalid_argument("quota of service " + std::to_string(service) + " must be positive");
  const std::size_t c = std::max<std::size_t>(1, pods);
  const double lambda = std::max(0.0, arrival_rate);

  // CPU: c servers sharing the quota.
  const double mu = quota / (static_cast<double>(c) * p.cpu_demand * scenario.cpu_stress);
  const double rho = lambda / (static_cast<double>(c) * mu);
  if (saturated != nullptr && rho >= 1.0) *saturated = true;
  const double rho_q = std::min(rho, config_.max_utilization);
  const double wait = erlang_c(c, rho_q) / (static_cast<double>(c) * mu * (1.0 - rho_q));
  const double cpu = 1.0 / mu + wait;

  const double io_load = std::min(lambda * p.io_ops * scenario.io_stress / config_.io_capacity, config_.max_contention);
  const double io = p.io_wait * scenario.io_stress / (1.0 - io_load);

  const double kb = p.net_kb * scenario.net_stress;
  const double net_load = std::min(lambda * kb / config_.link_capacity, config_.max_contention);
  const double net = (kb / config_.transfer_rate) / (1.0 - net_load);

  return cpu + io + net;
}

OracleResult OracleModel::latency(const SystemState& state, const ScenarioSpec& scenario, int percentile) const {
  const double factor = config_.percentile_factors[percentile_index(percentile)];
  const std::size_t n = topology_.size();
  if (state.metrics.rows() != n) throw std::invalid_argument("oracle: state does not match topology size");
  OracleResult result;
  std::vector<double> sojourn(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = state.metrics(i, MetricSchema::kCallsPerMin) / 60.0;
    const auto pods = static_cast<std::size_t>(std::llround(state.metrics(i, MetricSchema::kPodCount)));
    sojourn[i] = factor * mean_sojourn(i, lambda, state.quota(i, 0), pods, scenario, &result.saturated);
  }
  // Longest path from each node to a leaf, memoised over the DAG.
  const Matrix& a = topology_.graph.adjacency;
  std::vector<double> longest(n, -1.0);
  auto visit = [&](auto&& self, std::size_t v) -> double {
    if (longest[v] >= 0.0) return longest[v];
    double tail = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (a(v, j) != 0.0) tail = std::max(tail, self(self, j));
    return longest[v] = sojourn[v] + tail;
  };
  double worst = 0.0;
  for (std::size_t e : topology_.entries) worst = std::max(worst, visit(visit, e));
  result.latency_ms = 1000.0 * worst;
  return result;
}

double WindowRecord::latency(int percentile) const {
  switch (percentile_index(percentile)) {
    case 0: return latency_p50;
    case 1: return latency_p90;
    default: return latency_p99;
  }
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.windows < 1) throw std::invalid_argument("generate_dataset: need at least one window");
  double mix_total = 0.0;
  for (double w : spec.mix.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("scenario mix weights must be non-negative");
    mix_total += w;
  }
  if (!(mix_total > 0.0)) throw std::invalid_argument("scenario mix weights must not all be zero");

  Dataset ds;
  ds.topology = generate_topology(spec.topology, spec.seed, spec.random_nodes);
  const OracleModel oracle = OracleModel::for_topology(ds.topology, spec.seed);
  const TraceProfile trace = make_trace(spec.trace, spec.base_rps, spec.windows, spec.seed);
  const std::vector<double> paths = path_counts(ds.topology);
  const std::size_t n = ds.topology.size();
  const Matrix& adj = ds.topology.graph.adjacency;

  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<int> pick_scenario(spec.mix.weights.begin(), spec.mix.weights.end());
  std::uniform_real_distribution<double> target_util(0.15, 0.40);
  std::uniform_int_distribution<int> pick_pods(1, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<bool> is_entry(n, false);
  for (std::size_t e : ds.topology.entries) is_entry[e] = true;

  ds.records.reserve(spec.windows);
  for (std::size_t w = 0; w < spec.windows; ++w) {
    const ScenarioKind kind = kScenarioKinds[static_cast<std::size_t>(pick_scenario(rng))];
    const ScenarioSpec scenario = ScenarioSpec::preset(kind, spec.noise);
    const double entry_rps = trace.rates[w];

    WindowRecord rec;
    rec.window_id = w;
    rec.scenario = kind;
    rec.graph_ref = ds.topology.name();
    SystemState& st = rec.state;
    st.metrics = Matrix(n, MetricSchema::kCount);
    st.quota = Matrix(n, 1);
    st.workload = Matrix(n, 1);

    std::vector<double> lambda(n);
    for (std::size_t i = 0; i < n; ++i) lambda[i] = entry_rps * paths[i];
    for (std::size_t i = 0; i < n; ++i) {
      const ServiceProfile& p = oracle.services()[i];
      const int pods = pick_pods(rng);
      // Quotas are provisioned for the unstressed demand; stress pushes utilization up.
      const double raw_quota = lambda[i] * p.cpu_demand / target_util(rng);
      const double quota = std::max(0.1, std::round(raw_quota / 0.05) * 0.05);
      const double cpu_util = lambda[i] * p.cpu_demand * scenario.cpu_stress / quota;
      double out_kb = p.net_kb * 0.5;
      for (std::size_t j = 0; j < n; ++j)
        if (adj(i, j) != 0.0) out_kb += oracle.services()[j].net_kb;
      auto noisy = [&](double v) { return v * std::exp(spec.noise * gauss(rng)); };
      st.metrics(i, MetricSchema::kCpuUtil) = clamp01(noisy(cpu_util));
      st.metrics(i, MetricSchema::kMemUtil) = clamp01(noisy(p.mem_base + 0.3 * std::min(cpu_util, 1.0)));
      st.metrics(i, MetricSchema::kFileIo) = noisy(lambda[i] * p.io_ops * scenario.io_stress);
      st.metrics(i, MetricSchema::kNetIn) = noisy(lambda[i] * p.net_kb * scenario.net_stress);
      st.metrics(i, MetricSchema::kNetOut) = noisy(lambda[i] * out_kb * scenario.net_stress);
      st.metrics(i, MetricSchema::kPodCount) = pods;
      st.metrics(i, MetricSchema::kCallsPerMin) = lambda[i] * 60.0;
      st.quota(i, 0) = quota;
      st.workload(i, 0) = is_entry[i] ? entry_rps * 60.0 : 0.0;
    }

    bool saturated = false;
    for (int pct : {50, 90, 99}) {
      const OracleResult r = oracle.latency(st, scenario, pct);
      saturated = saturated || r.saturated;
      const double observed = r.latency_ms * std::exp(spec.noise * gauss(rng));
      if (pct == 50) rec.latency_p50 = observed;
      if (pct == 90) rec.latency_p90 = observed;
      if (pct == 99) rec.latency_p99 = observed;
    }
    if (saturated) ds.saturated_windows.push_back(w);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace msgaf::simkit
