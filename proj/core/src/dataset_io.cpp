#include "msgaf/dataset_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace msgaf::simkit {

namespace {

using nlohmann::json;

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw SchemaError(std::string("record is missing field '") + name + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError("field '" + where + "' must be a number");
  return v.get<double>();
}

Matrix column_of(const json& obj, const char* name, std::size_t n) {
  const json& arr = field(obj, name);
  if (!arr.is_array() || arr.size() != n) {
    throw SchemaError(std::string("field '") + name + "' must be an array of " + std::to_string(n) + " numbers");
  }
  Matrix m(n, 1);
  for (std::size_t i = 0; i < n; ++i) m(i, 0) = number(arr[i], std::string(name) + "[" + std::to_string(i) + "]");
  return m;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetIoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DatasetIoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetIoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string record_to_json(const WindowRecord& r) {
  const std::size_t n = r.state.metrics.rows();
  json s = json::array();
  json c = json::array();
  json w = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = r.state.metrics.row(i);
    s.push_back(std::vector<double>(row.begin(), row.end()));
    c.push_back(r.state.quota(i, 0));
    w.push_back(r.state.workload(i, 0));
  }
  json obj;
  obj["window_id"] = r.window_id;
  obj["scenario_kind"] = std::string(to_string(r.scenario));
  obj["graph_ref"] = r.graph_ref;
  obj["S"] = std::move(s);
  obj["C"] = std::move(c);
  obj["W"] = std::move(w);
  obj["latency_p50"] = r.latency_p50;
  obj["latency_p90"] = r.latency_p90;
  obj["latency_p99"] = r.latency_p99;
  return obj.dump();
}

WindowRecord record_from_json(std::string_view line, std::size_t expected_nodes) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON record: ") + e.what());
  }
  if (!obj.is_object()) throw SchemaError("record must be a JSON object");
  WindowRecord r;
  const json& id = field(obj, "window_id");
  if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<long long>() >= 0)) {
    throw SchemaError("field 'window_id' must be a non-negative integer");
  }
  r.window_id = id.get<std::size_t>();
  const json& kind = field(obj, "scenario_kind");
  if (!kind.is_string()) throw SchemaError("field 'scenario_kind' must be a string");
  try {
    r.scenario = parse_scenario(kind.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("field 'scenario_kind': ") + e.what());
  }
  const json& ref = field(obj, "graph_ref");
  if (!ref.is_string()) throw SchemaError("field 'graph_ref' must be a string");
  r.graph_ref = ref.get<std::string>();

  const json& s = field(obj, "S");
  if (!s.is_array() || s.empty()) throw SchemaError("field 'S' must be a non-empty array of rows");
  const std::size_t n = s.size();
  if (expected_nodes != 0 && n != expected_nodes) {
    throw SchemaError("field 'S' has " + std::to_string(n) + " rows, topology has " + std::to_string(expected_nodes));
  }
  r.state.metrics = Matrix(n, MetricSchema::kCount);
  for (std::size_t i = 0; i < n; ++i) {
    if (!s[i].is_array() || s[i].size() != MetricSchema::kCount) {
      throw SchemaError("field 'S' row " + std::to_string(i) + " must have " + std::to_string(MetricSchema::kCount) +
                        " values");
    }
    for (std::size_t j = 0; j < MetricSchema::kCount; ++j) {
      r.state.metrics(i, j) = number(s[i][j], "S[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  }
  r.state.quota = column_of(obj, "C", n);
  r.state.workload = column_of(obj, "W", n);
  r.latency_p50 = number(field(obj, "latency_p50"), "latency_p50");
  r.latency_p90 = number(field(obj, "latency_p90"), "latency_p90");
  r.latency_p99 = number(field(obj, "latency_p99"), "latency_p99");
  validate_state(r.state);
  return r;
}

std::string topology_to_json(const Topology& t) {
  json edges = json::array();
  for (auto [i, j] : t.graph.edges()) edges.push_back({i, j});
  json obj;
  obj["name"] = t.name();
  obj["n"] = t.size();
  obj["edges"] = std::move(edges);
  obj["entries"] = t.entries;
  return obj.dump();
}

Topology topology_from_json(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed topology JSON: ") + e.what());
  }
  try {
    const auto n = obj.at("n").get<std::size_t>();
    if (n == 0) throw SchemaError("topology field 'n' must be positive");
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const json& e : obj.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw SchemaError("topology edges must be [i, j] pairs");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("svc" + std::to_string(i));
    Topology t;
    t.graph = ServiceGraph::from_edges(obj.at("name").get<std::string>(), std::move(names), edges);
    t.entries = obj.at("entries").get<std::vector<std::size_t>>();
    for (std::size_t e : t.entries)
      if (e >= n) throw SchemaError("topology entry " + std::to_string(e) + " out of range");
    t.stateful.assign(n, false);
    validate_graph(t.graph);
    return t;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid topology: ") + e.what());
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DatasetIoError("cannot create " + dir.string() + ": " + ec.message());

  std::string lines;
  std::map<std::string, std::size_t> counts;
  for (const WindowRecord& r : dataset.records) {
    lines += record_to_json(r);
    lines += '\n';
    ++counts[std::string(to_string(r.scenario))];
  }
  write_text(dir / kDatasetFile, lines);
  write_text(dir / kTopologyFile, topology_to_json(dataset.topology) + "\n");
  json meta;
  meta["windows"] = dataset.records.size();
  meta["scenario_counts"] = counts;
  meta["saturated_windows"] = dataset.saturated_windows;
  meta["metric_schema"] = std::string(MetricSchema::kVersion);
  write_text(dir / kDatasetMetaFile, meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.topology = topology_from_json(read_text(dir / kTopologyFile));
  std::ifstream in(dir / kDatasetFile);
  if (!in) throw DatasetIoError("cannot open " + (dir / kDatasetFile).string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ds.records.push_back(record_from_json(line, ds.topology.size()));
    } catch (const SchemaError& e) {
      throw SchemaError((dir / kDatasetFile).string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace msgaf::simkit
