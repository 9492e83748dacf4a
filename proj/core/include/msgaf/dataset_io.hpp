#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msgaf/simkit.hpp"

namespace msgaf::simkit {

inline constexpr std::string_view kDatasetFile = "dataset.jsonl";
inline constexpr std::string_view kTopologyFile = "topology.json";
inline constexpr std::string_view kDatasetMetaFile = "dataset.meta.json";

class DatasetIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object: window_id, scenario_kind, graph_ref, S (n rows of 7),
/// C (n), W (n), latency_p50, latency_p90, latency_p99.
std::string record_to_json(const WindowRecord& record);
/// Throws SchemaError naming the offending field. `expected_nodes` of 0
/// accepts any n.
WindowRecord record_from_json(std::string_view line, std::size_t expected_nodes = 0);

/// {name, n, edges: [[i, j], ...], entries: [...]}
std::string topology_to_json(const Topology& topology);
Topology topology_from_json(std::string_view text);

/// Writes dataset.jsonl, topology.json and dataset.meta.json (scenario counts
/// and saturated window ids) into `dir`, creating it if needed.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace msgaf::simkit
