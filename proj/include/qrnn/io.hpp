#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "qrnn/datasets.hpp"
#include "qrnn/trainer.hpp"

namespace qrnn {

// One run = one config file. Flags override file values in the CLI.
struct RunConfig {
  char case_tag = 'a';
  AnsatzConfig ansatz;
  TrainConfig train;
  std::uint64_t split_seed = 1;
  std::string output_dir = "out";

  // Reference shapes per case plus the matching convergence threshold.
  static RunConfig for_case(char tag);

  std::string to_json_string() const;
  static RunConfig from_json_string(const std::string& text);

  // FNV-1a over the canonical JSON dump; stamped into every output file.
  std::uint64_t hash() const;
};

std::uint64_t fnv1a64(std::string_view text);

void save_run_config(const RunConfig& config, const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);

// series CSV: provenance header line, then time,input...,target rows with
// 17 significant digits (empty target past the usable range).
void write_series_csv(const MultivariateSeries& series, const RunConfig& config,
                      const std::filesystem::path& path);

// split sidecar: window geometry, usable length and all index lists.
void write_split_json(const WindowedDataset& dataset, const RunConfig& config,
                      const std::filesystem::path& path);

void write_model_json(const TrainedModel& model, const RunConfig& config,
                      const std::filesystem::path& path);
TrainedModel load_model_json(const std::filesystem::path& path);

void write_report_json(const TrainingReport& report, const RunConfig& config,
                       const std::filesystem::path& path);

void write_curve_csv(const std::vector<IterationRecord>& curve, const RunConfig& config,
                     const std::filesystem::path& path);

// Horizon predictions for every train/val/test window plus the stride
// tiling of the test span.
void write_predictions_csv(const TrainedModel& model, const WindowedDataset& dataset,
                           const RunConfig& config, const std::filesystem::path& path);

}  // namespace qrnn
