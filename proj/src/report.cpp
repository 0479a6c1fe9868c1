#include "bridgebench/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace bridgebench {

using nlohmann::json;

namespace {

constexpr const char* kResultsHeader =
    "run_id,config_digest,cell,aut,topic_scheme,topic_bytes,qos,repetition,"
    "status,published,publish_failures,received_source,received_dest,"
    "received_unique,duplicates,lost_e2e,lost_source,unstamped,latency_count,"
    "latency_mean_ms,latency_median_ms,latency_p95_ms,payload_mean_bytes,"
    "bridge_count,wall_seconds,error";

constexpr const char* kGatewayLossHeader =
    "run_id,cell,qos,repetition,provider,gateway,published,received_unique,"
    "lost_e2e,loss_per_1000";

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  size_t col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw MissingData("missing CSV column: " + name);
  }
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line))
    throw MissingData(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split_csv(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    t.rows.push_back(split_csv(line));
  }
  return t;
}

double to_double(const std::string& s) {
  if (s.empty()) return 0;
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

void write_raw_summaries(const std::filesystem::path& dir,
                         const RunSummary& summary) {
  std::filesystem::create_directories(dir);
  std::ofstream results(dir / "results.csv");
  results << kResultsHeader << '\n';
  std::ofstream gateway(dir / "gateway_loss.csv");
  gateway << kGatewayLossHeader << '\n';

  for (const CellResult& cell : summary.cells) {
    for (const RepetitionResult& rep : cell.repetitions) {
      std::string run_id = run_id_for(summary.name, cell.cell, rep.repetition);
      const MetricSet& m = rep.metrics.aggregate;
      results << run_id << ',' << summary.config_digest << ','
              << cell.cell.label() << ',' << cell.cell.aut << ','
              << topic_scheme_config_name(cell.cell.scheme) << ','
              << cell.bridge_topic_bytes << ','
              << static_cast<int>(cell.cell.qos) << ',' << rep.repetition << ','
              << (rep.ok ? "ok" : "failed") << ',' << m.published << ','
              << m.publish_failures << ',' << m.received_source << ','
              << m.received_dest << ',' << m.received_unique << ','
              << m.duplicates << ',' << m.lost_e2e << ',' << m.lost_source
              << ',' << m.unstamped << ',' << m.latency_count << ','
              << fmt(m.latency_mean_ms, 3) << ',' << fmt(m.latency_median_ms, 3)
              << ',' << fmt(m.latency_p95_ms, 3) << ','
              << fmt(m.payload_mean_bytes, 1) << ',' << cell.bridge_count << ','
              << fmt(rep.wall_seconds, 3) << ',' << sanitize(rep.error) << '\n';

      if (!rep.ok) continue;
      for (const auto& [key, gm] : rep.metrics.per_gateway) {
        gateway << run_id << ',' << cell.cell.label() << ','
                << static_cast<int>(cell.cell.qos) << ',' << rep.repetition
                << ',' << key.provider_id << ',' << key.gateway_id << ','
                << gm.published << ',' << gm.received_unique << ','
                << gm.lost_e2e << ',' << fmt(loss_per_1000(gm), 3) << '\n';
      }
    }
  }
}

namespace {

struct CellAccum {
  std::string label;
  int aut = 0;
  std::string scheme;
  size_t topic_bytes = 0;
  int qos = 0;
  size_t bridge_count = 0;
  size_t total_reps = 0;
  size_t ok_reps = 0;
  std::map<std::string, double> sums;  ///< over ok repetitions

  double mean(const std::string& field) const {
    if (ok_reps == 0) return 0;
    auto it = sums.find(field);
    return it == sums.end() ? 0 : it->second / static_cast<double>(ok_reps);
  }
};

struct GatewayAccum {
  double published_sum = 0;
  double loss_sum = 0;
  size_t reps = 0;
};

const char* kMeanFields[] = {
    "published",       "publish_failures", "received_source",
    "received_dest",   "received_unique",  "duplicates",
    "lost_e2e",        "lost_source",      "unstamped",
    "latency_count",   "latency_mean_ms",  "latency_median_ms",
    "latency_p95_ms",  "payload_mean_bytes"};

}  // namespace

void write_report_files(const std::filesystem::path& dir) {
  CsvTable results = read_csv(dir / "results.csv");
  if (results.rows.empty())
    throw MissingData((dir / "results.csv").string() + " has no data rows");
  CsvTable gateway = read_csv(dir / "gateway_loss.csv");

  std::vector<std::string> cell_order;
  std::map<std::string, CellAccum> cells;
  std::string digest;

  for (const auto& row : results.rows) {
    auto field = [&](const char* name) -> const std::string& {
      return row.at(results.col(name));
    };
    if (digest.empty()) digest = field("config_digest");
    const std::string& label = field("cell");
    auto [it, fresh] = cells.try_emplace(label);
    CellAccum& acc = it->second;
    if (fresh) {
      cell_order.push_back(label);
      acc.label = label;
      acc.aut = static_cast<int>(to_double(field("aut")));
      acc.scheme = field("topic_scheme");
      acc.topic_bytes = static_cast<size_t>(to_double(field("topic_bytes")));
      acc.qos = static_cast<int>(to_double(field("qos")));
      acc.bridge_count = static_cast<size_t>(to_double(field("bridge_count")));
    }
    ++acc.total_reps;
    if (field("status") == "ok") {
      ++acc.ok_reps;
      for (const char* name : kMeanFields)
        acc.sums[name] += to_double(field(name));
      double pub = to_double(field("published"));
      acc.sums["loss_per_1000"] +=
          pub > 0 ? to_double(field("lost_e2e")) * 1000.0 / pub : 0;
    }
  }

  // (cell, provider, gateway) -> per-1000 loss averaged over repetitions
  std::map<std::string, std::map<std::pair<std::string, std::string>, GatewayAccum>>
      gw_loss;
  for (const auto& row : gateway.rows) {
    auto field = [&](const char* name) -> const std::string& {
      return row.at(gateway.col(name));
    };
    GatewayAccum& acc =
        gw_loss[field("cell")][{field("provider"), field("gateway")}];
    acc.published_sum += to_double(field("published"));
    acc.loss_sum += to_double(field("loss_per_1000"));
    ++acc.reps;
  }

  // Flag QoS-latency inversions within each architecture/scheme group.
  std::vector<std::string> warnings;
  std::map<std::string, std::map<int, const CellAccum*>> groups;
  for (const auto& label : cell_order) {
    const CellAccum& acc = cells.at(label);
    if (acc.ok_reps)
      groups["aut" + std::to_string(acc.aut) + "-" + acc.scheme][acc.qos] = &acc;
  }
  for (const auto& [group, by_qos] : groups) {
    const CellAccum* prev = nullptr;
    for (const auto& [qos, acc] : by_qos) {
      if (prev && acc->mean("latency_mean_ms") <
                      prev->mean("latency_mean_ms") - 1e-9) {
        warnings.push_back("latency mean decreases from qos" +
                           std::to_string(prev->qos) + " to qos" +
                           std::to_string(qos) + " in " + group);
      }
      prev = acc;
    }
  }

  json out;
  out["config_digest"] = digest;
  json jcells = json::array();
  for (const std::string& label : cell_order) {
    const CellAccum& acc = cells.at(label);
    json jc;
    jc["cell"] = acc.label;
    jc["aut"] = acc.aut;
    jc["topic_scheme"] = acc.scheme;
    jc["topic_bytes"] = acc.topic_bytes;
    jc["qos"] = acc.qos;
    jc["bridge_count"] = acc.bridge_count;
    jc["repetitions"] = acc.total_reps;
    jc["ok_repetitions"] = acc.ok_reps;
    jc["status"] = acc.ok_reps == acc.total_reps
                       ? "ok"
                       : (acc.ok_reps ? "partial" : "failed");
    if (acc.ok_reps) {
      json means;
      for (const char* name : kMeanFields) means[name] = acc.mean(name);
      means["loss_per_1000"] = acc.mean("loss_per_1000");
      jc["means"] = means;
    }
    json jgw = json::array();
    auto it = gw_loss.find(label);
    if (it != gw_loss.end()) {
      for (const auto& [key, g] : it->second) {
        json row;
        row["provider"] = key.first;
        row["gateway"] = key.second;
        row["published"] =
            g.reps ? g.published_sum / static_cast<double>(g.reps) : 0;
        row["loss_per_1000"] =
            g.reps ? g.loss_sum / static_cast<double>(g.reps) : 0;
        jgw.push_back(row);
      }
    }
    jc["per_gateway_loss"] = jgw;
    jcells.push_back(jc);
  }
  out["cells"] = jcells;
  out["warnings"] = warnings;

  {
    std::ofstream os(dir / "results.json");
    os << out.dump(2) << '\n';
  }

  // Fixed-width table: one metric name column plus one column per cell.
  constexpr int kNameW = 26;
  constexpr int kColW = 15;
  std::ostringstream t;
  auto put_name = [&](const std::string& s) {
    t << s << std::string(s.size() < kNameW ? kNameW - s.size() : 1, ' ');
  };
  auto put_val = [&](const std::string& s) {
    t << '|' << std::string(s.size() < kColW ? kColW - s.size() : 1, ' ') << s;
  };

  put_name("metric");
  for (const auto& label : cell_order) put_val(label);
  t << '\n';
  t << std::string(kNameW + cell_order.size() * (kColW + 1), '-') << '\n';

  auto row_of = [&](const std::string& name,
                    auto value_fn) {
    put_name(name);
    for (const auto& label : cell_order) put_val(value_fn(cells.at(label)));
    t << '\n';
  };

  row_of("repetitions ok", [](const CellAccum& a) {
    return std::to_string(a.ok_reps) + "/" + std::to_string(a.total_reps);
  });
  row_of("bridges", [](const CellAccum& a) {
    return std::to_string(a.bridge_count);
  });
  row_of("bridge topic bytes", [](const CellAccum& a) {
    return std::to_string(a.topic_bytes);
  });
  auto mean_row = [&](const std::string& title, const char* field,
                      int decimals) {
    row_of(title, [&](const CellAccum& a) {
      return a.ok_reps ? fmt(a.mean(field), decimals) : std::string("-");
    });
  };
  mean_row("published", "published", 1);
  mean_row("received source", "received_source", 1);
  mean_row("received destination", "received_dest", 1);
  mean_row("received unique", "received_unique", 1);
  mean_row("duplicates", "duplicates", 1);
  mean_row("lost end-to-end", "lost_e2e", 1);
  mean_row("lost on source link", "lost_source", 1);
  mean_row("loss per 1000", "loss_per_1000", 3);
  mean_row("latency mean (ms)", "latency_mean_ms", 3);
  mean_row("latency median (ms)", "latency_median_ms", 3);
  mean_row("latency p95 (ms)", "latency_p95_ms", 3);
  mean_row("payload mean (bytes)", "payload_mean_bytes", 1);
  mean_row("unstamped", "unstamped", 1);

  bool any_gw = false;
  for (const auto& [label, m] : gw_loss) any_gw |= !m.empty();
  if (any_gw) {
    t << '\n' << "per-gateway loss per 1000 (mean over repetitions)" << '\n';
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [label, m] : gw_loss)
      for (const auto& [key, g] : m) keys.insert(key);
    for (const auto& key : keys) {
      put_name(key.first + "/" + key.second);
      for (const auto& label : cell_order) {
        auto it = gw_loss.find(label);
        const GatewayAccum* g = nullptr;
        if (it != gw_loss.end()) {
          auto git = it->second.find(key);
          if (git != it->second.end()) g = &git->second;
        }
        put_val(g && g->reps
                    ? fmt(g->loss_sum / static_cast<double>(g->reps), 3)
                    : std::string("-"));
      }
      t << '\n';
    }
  }

  if (!warnings.empty()) {
    t << '\n';
    for (const auto& w : warnings) t << "warning: " << w << '\n';
  }

  std::ofstream os(dir / "table.txt");
  os << t.str();
}

}  // namespace bridgebench
