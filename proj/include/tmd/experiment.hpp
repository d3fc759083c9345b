#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tmd/dataset.hpp"
#include "tmd/models.hpp"

namespace tmd {

// Synthetic data source for desk-scale runs: per user and class,
// `sessions_per_class` recordings of `seconds_per_session` each.
struct SynthDataConfig {
  int users = 4;
  int sessions_per_class = 2;
  double seconds_per_session = 120.0;
  std::vector<SensorKind> sensors{kCoreSensors.begin(), kCoreSensors.end()};
};

// Declarative experiment description, loaded from a flat sectioned
// key-value file. The master seed is mandatory: runs must be replayable,
// so nothing may default to wall-clock entropy.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::filesystem::path output_dir;  // empty = $TMD_OUTPUT_DIR or ./tmd-out
  std::vector<std::string> experiments{"multiclass"};
  int jobs = 1;

  // [data]
  std::optional<std::filesystem::path> manifest;
  std::optional<SynthDataConfig> synthetic;
  bool balance = true;
  bool lenient_parse = false;

  // [windowing]
  WindowingConfig windowing;

  // [sensor_sets]
  std::vector<SensorSet> sensor_sets;  // default D1, D2, D3

  // [split]
  SplitSpec split;  // its seed is derived from the master seed at run time

  // [classifier]
  std::string algorithm = "forest";  // forest | tree
  ForestParams forest;

  // [external]
  std::optional<std::filesystem::path> external_predictions;
};

// Parses and pre-flight-validates; every problem is a ConfigError raised
// before any compute. Relative paths resolve against the config file's
// directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir);
void validate_config(const ExperimentConfig& config);

// Derived seed streams, all fanned out from the master seed and recorded
// in the run manifest.
std::uint64_t split_seed(const ExperimentConfig& config);
std::uint64_t forest_seed(const ExperimentConfig& config);
std::uint64_t synth_seed(const ExperimentConfig& config);

struct RunResult {
  std::vector<std::string> completed;
  std::vector<std::string> failures;  // "cell: reason"

  bool ok() const { return failures.empty(); }
};

// Executes the selected experiments end to end and writes plot-ready
// tables plus a run manifest into the output directory. Outputs are
// written atomically (temp file + rename) and are byte-identical for
// identical config + seed. Per-experiment failures are collected, not
// fatal; the result reports them and the CLI exits nonzero.
RunResult run_experiment(const ExperimentConfig& config);

// The sessions the configured data source yields (manifest or synthetic).
std::vector<RecordingSession> load_config_sessions(
    const ExperimentConfig& config);

}  // namespace tmd
