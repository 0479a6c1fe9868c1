#pragma once

#include <filesystem>
#include <stdexcept>

#include "bridgebench/runner.hpp"

namespace bridgebench {

class MissingData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes results.csv and gateway_loss.csv (one row per cell-repetition /
/// per gateway) into `dir`.
void write_raw_summaries(const std::filesystem::path& dir,
                         const RunSummary& summary);

/// Regenerates results.json and table.txt in `dir` purely from results.csv
/// and gateway_loss.csv. Running it twice over unchanged CSVs produces
/// byte-identical files. Throws MissingData when the CSVs are absent or hold
/// no data rows.
void write_report_files(const std::filesystem::path& dir);

}  // namespace bridgebench
