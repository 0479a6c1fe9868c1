// Python bindings for the benchmark core. Composite results (plans, run
// summaries) cross the boundary as JSON text; the package wrapper parses
// them into dicts so the long-running entry points can drop the GIL.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridgebench/bridge.hpp"
#include "bridgebench/codec.hpp"
#include "bridgebench/loadgen.hpp"
#include "bridgebench/metrics.hpp"
#include "bridgebench/netem.hpp"
#include "bridgebench/payload.hpp"
#include "bridgebench/report.hpp"
#include "bridgebench/runner.hpp"
#include "bridgebench/scenario.hpp"
#include "bridgebench/topic.hpp"

namespace py = pybind11;
using namespace bridgebench;
using nlohmann::json;

namespace {

ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  return config_from_json(j);
}

TopicScheme parse_scheme(const std::string& name) {
  if (name == "wildcard-15") return TopicScheme::Wildcard;
  if (name == "explicit-29") return TopicScheme::ExplicitList;
  throw ConfigError("unknown topic scheme: " + name);
}

py::bytes to_bytes(const std::vector<uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<uint8_t> from_bytes(const py::bytes& b) {
  std::string_view view = b;
  return {view.begin(), view.end()};
}

const char* status_name(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::NeedMoreBytes: return "need_more_bytes";
    case DecodeStatus::Malformed: return "malformed";
    case DecodeStatus::Unsupported: return "unsupported";
  }
  return "unknown";
}

json rep_json(const RepetitionResult& r) {
  const MetricSet& m = r.metrics.aggregate;
  json jr;
  jr["repetition"] = r.repetition;
  jr["ok"] = r.ok;
  jr["error"] = r.error;
  jr["published"] = m.published;
  jr["publish_failures"] = m.publish_failures;
  jr["received_unique"] = m.received_unique;
  jr["duplicates"] = m.duplicates;
  jr["lost_e2e"] = m.lost_e2e;
  jr["unstamped"] = m.unstamped;
  jr["latency_count"] = m.latency_count;
  jr["latency_mean_ms"] = m.latency_mean_ms;
  jr["latency_median_ms"] = m.latency_median_ms;
  jr["latency_p95_ms"] = m.latency_p95_ms;
  jr["payload_mean_bytes"] = m.payload_mean_bytes;
  jr["loss_per_1000"] = loss_per_1000(m);
  jr["wall_seconds"] = r.wall_seconds;
  json per_gw = json::array();
  for (const auto& [key, gm] : r.metrics.per_gateway) {
    json g;
    g["provider"] = key.provider_id;
    g["gateway"] = key.gateway_id;
    g["published"] = gm.published;
    g["received_unique"] = gm.received_unique;
    g["lost_e2e"] = gm.lost_e2e;
    g["loss_per_1000"] = loss_per_1000(gm);
    per_gw.push_back(std::move(g));
  }
  jr["per_gateway"] = std::move(per_gw);
  return jr;
}

std::string summary_json(const RunSummary& s) {
  json out;
  out["name"] = s.name;
  out["config_digest"] = s.config_digest;
  out["all_ok"] = s.all_ok();
  json cells = json::array();
  for (const CellResult& c : s.cells) {
    json jc;
    jc["cell"] = c.cell.label();
    jc["aut"] = c.cell.aut;
    jc["topic_scheme"] = topic_scheme_config_name(c.cell.scheme);
    jc["qos"] = c.cell.qos;
    jc["bridge_count"] = c.bridge_count;
    jc["bridge_topic_bytes"] = c.bridge_topic_bytes;
    jc["ok"] = c.ok();
    json reps = json::array();
    for (const RepetitionResult& r : c.repetitions) reps.push_back(rep_json(r));
    jc["repetitions"] = std::move(reps);
    cells.push_back(std::move(jc));
  }
  out["cells"] = std::move(cells);
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MQTT 5.0 bridge benchmark core: codec, topic matching, link "
            "impairment math, payload synthesis, deployment planning, and "
            "the scenario runner.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvalidTopology>(m, "InvalidTopology",
                                          PyExc_ValueError);
  py::register_exception<CodecError>(m, "CodecError", PyExc_ValueError);
  py::register_exception<MissingData>(m, "MissingData", PyExc_FileNotFoundError);

  m.def(
      "varint_encode",
      [](uint32_t value) {
        std::vector<uint8_t> out;
        encode_varint(out, value);
        return to_bytes(out);
      },
      py::arg("value"), "Encode a variable byte integer (1..4 bytes).");

  m.def(
      "varint_decode",
      [](const py::bytes& data) {
        std::vector<uint8_t> buf = from_bytes(data);
        VarintResult r = decode_varint(buf);
        if (r.status != DecodeStatus::Ok)
          throw py::value_error(std::string("varint: ") +
                                status_name(r.status));
        return py::make_tuple(r.value, r.length);
      },
      py::arg("data"), "Decode a variable byte integer; returns (value, length).");

  m.def(
      "encode_publish",
      [](const std::string& topic, const py::bytes& payload, uint8_t qos,
         uint16_t packet_id, bool dup, bool retain,
         const std::vector<std::pair<std::string, std::string>>& user_properties,
         std::optional<uint32_t> message_expiry_s) {
        PublishPacket p;
        p.topic = topic;
        p.payload = from_bytes(payload);
        p.qos = qos;
        p.packet_id = packet_id;
        p.dup = dup;
        p.retain = retain;
        p.user_properties = user_properties;
        p.message_expiry_s = message_expiry_s;
        return to_bytes(encode(p));
      },
      py::arg("topic"), py::arg("payload"), py::arg("qos") = 0,
      py::arg("packet_id") = 0, py::arg("dup") = false,
      py::arg("retain") = false,
      py::arg("user_properties") =
          std::vector<std::pair<std::string, std::string>>{},
      py::arg("message_expiry_s") = std::nullopt,
      "Encode a PUBLISH packet to wire bytes.");

  m.def(
      "decode_packet",
      [](const py::bytes& data) {
        std::vector<uint8_t> buf = from_bytes(data);
        DecodeResult r = decode(buf);
        py::dict out;
        out["status"] = status_name(r.status);
        out["consumed"] = r.consumed;
        out["bytes_needed"] = r.bytes_needed;
        out["error"] = r.error;
        if (r.status == DecodeStatus::Ok) {
          out["type"] = packet_type_name(packet_type(r.packet));
          if (const auto* pub = std::get_if<PublishPacket>(&r.packet)) {
            out["topic"] = pub->topic;
            out["qos"] = pub->qos;
            out["packet_id"] = pub->packet_id;
            out["dup"] = pub->dup;
            out["retain"] = pub->retain;
            out["payload"] = to_bytes(pub->payload);
            out["user_properties"] = pub->user_properties;
          }
        }
        return out;
      },
      py::arg("data"),
      "Decode the first packet from wire bytes into a status dict.");

  m.def(
      "topic_matches",
      [](const std::string& filter, const std::string& name) {
        return TopicFilter::require(filter).matches(TopicName::require(name));
      },
      py::arg("filter"), py::arg("name"),
      "Whether a subscription filter matches a topic name.");

  m.def(
      "topic_name_valid",
      [](const std::string& s) { return TopicName::parse(s).has_value(); },
      py::arg("name"));

  m.def(
      "topic_filter_valid",
      [](const std::string& s) { return TopicFilter::parse(s).has_value(); },
      py::arg("filter"));

  m.def(
      "drop_probability",
      [](size_t nbytes, double segment_loss_p, uint32_t segment_size) {
        LinkProfile lp;
        lp.segment_loss_p = segment_loss_p;
        lp.segment_size = segment_size;
        return drop_probability(lp, Direction::ClientToBroker, nbytes);
      },
      py::arg("nbytes"), py::arg("segment_loss_p"),
      py::arg("segment_size") = 1460,
      "Packet loss probability under the per-segment Bernoulli model.");

  m.def(
      "generate_sensor_payload",
      [](size_t target_bytes, const std::string& hub_id, uint64_t seed,
         uint64_t seq) {
        return to_bytes(generate_sensor_payload(target_bytes, hub_id, seed, seq));
      },
      py::arg("target_bytes"), py::arg("hub_id"), py::arg("seed"),
      py::arg("seq"),
      "Deterministic sensor document of exactly target_bytes bytes.");

  m.def(
      "parse_sensor_payload",
      [](const py::bytes& data)
          -> std::optional<std::vector<std::tuple<std::string, std::string,
                                                  std::string>>> {
        std::vector<uint8_t> buf = from_bytes(data);
        auto readings = parse_sensor_payload(buf);
        if (!readings) return std::nullopt;
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        out.reserve(readings->size());
        for (const SensorReading& r : *readings)
          out.emplace_back(r.timestamp, r.parameter, r.value);
        return out;
      },
      py::arg("data"),
      "Parse a sensor document into (timestamp, parameter, value) tuples; "
      "None when malformed.");

  m.def(
      "transform_payload",
      [](const py::bytes& payload, const std::string& mode, double ratio,
         const std::string& provider_id,
         const std::string& hub_id) -> std::optional<py::bytes> {
        TransformSpec spec;
        if (mode == "unify")
          spec.mode = TransformMode::Unify;
        else if (mode == "identity")
          spec.mode = TransformMode::Identity;
        else
          throw py::value_error("mode must be 'unify' or 'identity'");
        spec.ratio = ratio;
        auto out = transform_payload(spec, from_bytes(payload), provider_id,
                                     hub_id);
        if (!out) return std::nullopt;
        return to_bytes(*out);
      },
      py::arg("payload"), py::arg("mode") = "unify", py::arg("ratio") = 1.0,
      py::arg("provider_id") = "provider", py::arg("hub_id") = "hub",
      "Bridge payload transform; None when unify cannot parse the input.");

  m.def(
      "load_config_text",
      [](const std::string& path) {
        return to_json(load_config_file(path)).dump();
      },
      py::arg("path"), "Load and normalize a config file; returns JSON text.");

  m.def(
      "load_preset_text",
      [](const std::string& name, const std::string& presets_dir) {
        return to_json(load_preset(name, presets_dir)).dump();
      },
      py::arg("name"), py::arg("presets_dir"),
      "Load '<presets_dir>/<name>.json'; returns normalized JSON text.");

  m.def(
      "validate_config",
      [](const std::string& config_json) {
        return validate(parse_config(config_json));
      },
      py::arg("config_json"),
      "List of semantic problems; empty means runnable.");

  m.def(
      "config_digest",
      [](const std::string& config_json) {
        return config_digest(parse_config(config_json));
      },
      py::arg("config_json"),
      "Stable 16-hex-digit digest of the normalized config.");

  m.def(
      "plan_deployment_json",
      [](const std::string& config_json, int aut, const std::string& scheme) {
        ScenarioConfig cfg = parse_config(config_json);
        int plan_aut = aut ? aut : cfg.aut;
        TopicScheme plan_scheme =
            scheme.empty() ? cfg.scheme : parse_scheme(scheme);
        DeploymentPlan plan =
            plan_deployment(cfg.providers, plan_aut, plan_scheme);
        json out;
        out["aut"] = plan.aut;
        out["bridge_topic_bytes"] = plan.bridge_topic_bytes;
        json bridges = json::array();
        for (const BridgeSpec& b : plan.bridges) {
          json jb;
          jb["id"] = b.id;
          jb["provider_id"] = b.provider_id;
          json filters = json::array();
          for (const TopicFilter& f : b.subscription) filters.push_back(f.str());
          jb["subscription"] = std::move(filters);
          bridges.push_back(std::move(jb));
        }
        out["bridges"] = std::move(bridges);
        return out.dump();
      },
      py::arg("config_json"), py::arg("aut") = 0, py::arg("scheme") = "",
      "Bridge deployment plan as JSON text; aut=0 / scheme='' take the "
      "config's values.");

  m.def(
      "run_single_json",
      [](const std::string& config_json, const std::string& out_dir,
         bool quiet) {
        ScenarioConfig cfg = parse_config(config_json);
        RunOptions opts{out_dir, quiet};
        return summary_json(run_single(cfg, opts));
      },
      py::arg("config_json"), py::arg("out_dir") = "", py::arg("quiet") = true,
      py::call_guard<py::gil_scoped_release>(),
      "Run the single cell selected by the config; returns a summary as "
      "JSON text.");

  m.def(
      "run_sweep_json",
      [](const std::string& config_json, const std::string& out_dir,
         bool quiet) {
        ScenarioConfig cfg = parse_config(config_json);
        RunOptions opts{out_dir, quiet};
        return summary_json(run_sweep(cfg, opts));
      },
      py::arg("config_json"), py::arg("out_dir") = "", py::arg("quiet") = true,
      py::call_guard<py::gil_scoped_release>(),
      "Run the full nine-cell matrix; returns a summary as JSON text.");

  m.def(
      "write_report",
      [](const std::string& dir) { write_report_files(dir); },
      py::arg("dir"),
      py::call_guard<py::gil_scoped_release>(),
      "Regenerate results.json and table.txt from the CSVs in dir.");
}
