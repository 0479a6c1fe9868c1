#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bridgebench/report.hpp"
#include "bridgebench/runner.hpp"
#include "bridgebench/scenario.hpp"

namespace fs = std::filesystem;
using namespace bridgebench;

namespace {

fs::path find_presets_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("BRIDGEBENCH_PRESETS")) return env;
  if (fs::exists("presets")) return "presets";
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    for (fs::path dir = exe.parent_path(); !dir.empty();
         dir = dir.parent_path()) {
      if (fs::exists(dir / "presets")) return dir / "presets";
      if (dir == dir.root_path()) break;
    }
  }
  return "presets";
}

struct ConfigSource {
  std::string config_file;
  std::string profile;
  std::string presets_dir;
  std::optional<uint64_t> seed;
  std::optional<uint32_t> repetitions;

  ScenarioConfig load() const {
    ScenarioConfig cfg;
    if (!config_file.empty()) {
      cfg = load_config_file(config_file);
    } else if (!profile.empty()) {
      cfg = load_preset(profile, find_presets_dir(presets_dir));
    } else {
      throw ConfigError("provide --config FILE or --profile {desk,paper}");
    }
    if (seed) cfg.seed = *seed;
    if (repetitions) cfg.repetitions = *repetitions;
    return cfg;
  }
};

void add_config_flags(CLI::App* cmd, ConfigSource& src) {
  auto* cfg = cmd->add_option("--config", src.config_file,
                              "Scenario config JSON file");
  auto* prof =
      cmd->add_option("--profile", src.profile,
                      "Named preset (desk, paper, lossless)");
  cfg->excludes(prof);
  cmd->add_option("--presets", src.presets_dir,
                  "Presets directory (default: auto-detect)");
  cmd->add_option("--seed", src.seed, "Override the config's base seed");
  cmd->add_option("--repetitions", src.repetitions,
                  "Override the config's repetition count");
}

int report_outcome(const RunSummary& summary, const fs::path& out_dir) {
  size_t ok = 0, failed = 0;
  for (const auto& cell : summary.cells) (cell.ok() ? ok : failed) += 1;
  std::ifstream table(out_dir / "table.txt");
  if (table) std::cout << table.rdbuf() << '\n';
  std::printf("cells: %zu ok, %zu failed; artifacts in %s\n", ok, failed,
              out_dir.string().c_str());
  return summary.all_ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MQTT bridge-architecture benchmark"};
  app.require_subcommand(1);

  ConfigSource src;
  std::string out_dir = "bench-out";
  bool quiet = false;

  auto* validate_cmd =
      app.add_subcommand("validate", "Check a scenario config and exit");
  add_config_flags(validate_cmd, src);

  auto* run_cmd = app.add_subcommand(
      "run", "Run the single cell selected by the config's aut/scheme/qos");
  add_config_flags(run_cmd, src);
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--quiet,-q", quiet, "Suppress progress lines");

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Run the full architecture x topic-scheme x qos matrix");
  add_config_flags(sweep_cmd, src);
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_flag("--quiet,-q", quiet, "Suppress progress lines");

  auto* report_cmd = app.add_subcommand(
      "report", "Regenerate results.json and table.txt from the CSVs in --out");
  report_cmd->add_option("--out", out_dir, "Directory holding results.csv")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      ScenarioConfig cfg = src.load();
      auto problems = validate(cfg);
      if (problems.empty()) {
        std::printf("ok: %s (digest %s)\n", cfg.name.c_str(),
                    config_digest(cfg).c_str());
        return 0;
      }
      for (const auto& p : problems) std::fprintf(stderr, "problem: %s\n", p.c_str());
      return 1;
    }

    if (report_cmd->parsed()) {
      write_report_files(out_dir);
      std::printf("report regenerated in %s\n", out_dir.c_str());
      return 0;
    }

    ScenarioConfig cfg = src.load();
    auto problems = validate(cfg);
    if (!problems.empty()) {
      for (const auto& p : problems) std::fprintf(stderr, "problem: %s\n", p.c_str());
      return 2;
    }

    RunOptions opts;
    opts.out_dir = out_dir;
    opts.quiet = quiet;
    RunSummary summary = run_cmd->parsed() ? run_single(cfg, opts)
                                           : run_sweep(cfg, opts);
    return report_outcome(summary, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
