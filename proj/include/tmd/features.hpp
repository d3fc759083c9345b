#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tmd/types.hpp"

namespace tmd {

enum class Stat : int { Min = 0, Max = 1, Mean = 2, Std = 3 };

inline constexpr int kNumStats = 4;
inline constexpr std::array<Stat, kNumStats> kAllStats = {
    Stat::Min, Stat::Max, Stat::Mean, Stat::Std};

std::string_view stat_name(Stat s);

struct WindowingConfig {
  double window_seconds = 5.0;
  double overlap_fraction = 0.0;  // in [0, 1)

  std::int64_t window_ms() const;
  std::int64_t stride_ms() const;
  void validate() const;  // throws std::invalid_argument
};

// Ordered (sensor x statistic) feature layout. Columns are sensors-major,
// statistics-minor: 4 columns per channel in [min, max, mean, std] order.
// In the default (magnitude) mode each sensor contributes one channel: the
// per-reading Euclidean magnitude. The per-axis mode keeps each axis as
// its own channel, for sensitivity comparisons; it is not the default
// because per-axis features depend on device orientation.
struct FeatureSchema {
  std::vector<SensorKind> sensors;
  bool per_axis = false;

  static FeatureSchema for_sensors(std::vector<SensorKind> sensors,
                                   bool per_axis = false);

  std::size_t channel_count() const;
  std::size_t feature_count() const { return channel_count() * kNumStats; }

  // First column of the sensor's block and the block's width (axes * 4).
  std::size_t sensor_block_begin(SensorKind kind) const;
  std::size_t sensor_block_width(SensorKind kind) const;

  std::size_t column(SensorKind kind, Stat stat) const;  // magnitude mode
  std::size_t column(SensorKind kind, int axis, Stat stat) const;

  std::vector<std::string> column_names() const;

  // Deterministic layout fingerprint; embedded in caches and model files.
  std::uint64_t hash() const;

  bool operator==(const FeatureSchema&) const = default;
};

// One window's features. `missing[i]` marks columns of sensors that
// reported no value inside the window; the value there is a placeholder
// (NaN) until imputation replaces it with the training-set mean.
struct FeatureVector {
  std::vector<double> values;
  std::vector<bool> missing;
  ActivityClass label = ActivityClass::Still;
  std::string user_id;
  std::string session_id;
  std::size_t window_index = 0;

  bool has_missing() const;
};

// A window's slice of a session: span [start_ms, end_ms) and the readings
// of all non-excluded sensors whose timestamp falls inside it.
struct RawWindow {
  std::size_t index = 0;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::vector<SensorReading> readings;
};

// Tumbling windows by default; overlap via config. Trailing data shorter
// than a full window is dropped. A session shorter than one window yields
// an empty list.
std::vector<RawWindow> partition_windows(const RecordingSession& session,
                                         const WindowingConfig& config);

// min/max/mean/std per schema channel. Multi-axis sensors are reduced
// per-reading to Euclidean magnitude before statistics (unless the schema
// is per-axis). Std is the population standard deviation. Sensors with no
// readings in the window get their whole block flagged missing.
FeatureVector window_stats(const RawWindow& window,
                           const FeatureSchema& schema);

// partition + stats + provenance stamping, in window order.
std::vector<FeatureVector> featurize_session(const RecordingSession& session,
                                             const WindowingConfig& config,
                                             const FeatureSchema& schema);

// Per-column training means, computed over non-missing entries only.
// Columns never observed in training carry 0 and are flagged.
struct Imputer {
  std::vector<double> means;
  std::vector<bool> never_observed;

  std::size_t size() const { return means.size(); }
};

Imputer fit_imputer(const std::vector<FeatureVector>& train_vectors);

FeatureVector apply_imputer(const FeatureVector& vector,
                            const Imputer& imputer);

void apply_imputer_in_place(std::vector<FeatureVector>& vectors,
                            const Imputer& imputer);

}  // namespace tmd
