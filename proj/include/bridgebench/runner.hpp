#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bridgebench/broker_counters.hpp"
#include "bridgebench/bridge.hpp"
#include "bridgebench/metrics.hpp"
#include "bridgebench/scenario.hpp"

namespace bridgebench {

/// One point of the architecture x topic-scheme x qos matrix.
struct CellId {
  int aut = 1;
  TopicScheme scheme = TopicScheme::Wildcard;
  uint8_t qos = 0;

  /// e.g. "aut1-w15-qos0", "aut2-e29-qos2"; stable, filesystem-safe.
  std::string label() const;
};

struct RepetitionResult {
  uint32_t repetition = 0;
  bool ok = false;
  std::string error;
  MetricsBundle metrics;
  std::map<std::string, BrokerCounters> broker_counters;  ///< by broker name
  std::vector<std::pair<std::string, BridgeStats>> bridge_stats;
  uint64_t drop_decisions = 0;
  uint64_t drops_dropped = 0;
  double wall_seconds = 0;
  std::vector<std::string> warnings;
};

struct CellResult {
  CellId cell;
  size_t bridge_count = 0;
  size_t bridge_topic_bytes = 0;
  std::vector<RepetitionResult> repetitions;

  bool ok() const;
};

struct RunOptions {
  /// Where results.csv, gateway_loss.csv, results.json, table.txt and raw/
  /// per-repetition artifacts land. Empty path disables artifact output.
  std::filesystem::path out_dir;
  bool quiet = false;
};

struct RunSummary {
  std::string name;
  std::string config_digest;
  std::vector<CellResult> cells;

  bool all_ok() const;
};

/// Executes one repetition in a fresh world: per-provider source brokers, one
/// destination broker, planned bridges, terminal subscriber, gateway load
/// threads sharing one batch epoch; drains until the subscriber has been
/// quiet for the grace period, snapshots counters, then tears down.
/// `raw_dir` (if non-empty) receives records.csv, outcomes.csv, drops.csv and
/// broker_counters.json.
RepetitionResult run_repetition(const ScenarioConfig& cfg, const CellId& cell,
                                uint32_t repetition,
                                const std::filesystem::path& raw_dir);

CellResult run_cell(const ScenarioConfig& cfg, const CellId& cell,
                    const RunOptions& opts);

/// Runs the single cell described by cfg.aut / cfg.scheme / cfg.qos and
/// writes the full artifact set.
RunSummary run_single(const ScenarioConfig& cfg, const RunOptions& opts);

/// The full nine-cell matrix: {AUT1 wildcard, AUT1 explicit list, AUT2} x
/// qos {0,1,2}. Cell failures are recorded and the sweep continues.
RunSummary run_sweep(const ScenarioConfig& cfg, const RunOptions& opts);

std::string run_id_for(const std::string& name, const CellId& cell,
                       uint32_t repetition);

}  // namespace bridgebench
