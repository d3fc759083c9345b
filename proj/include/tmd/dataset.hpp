#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tmd/features.hpp"
#include "tmd/types.hpp"

namespace tmd {

// Named sensor subset. Excluded sensors can never be members. D1/D2/D3
// mirror the nested evaluation sets: a minimal low-power trio, an extended
// set without speed, and the full set with speed.
struct SensorSet {
  std::string name;
  std::vector<SensorKind> members;
};

SensorSet make_sensor_set(std::string name, std::vector<SensorKind> members);
SensorSet sensor_set_d1();
SensorSet sensor_set_d2();
SensorSet sensor_set_d3();

// Labeled feature vectors with user/session/class provenance. Vectors all
// share the schema; their order is the ingestion order and every transform
// below preserves it (stable filters), which is what keeps runs
// reproducible.
struct WindowedDataset {
  FeatureSchema schema;
  double window_seconds = 5.0;
  std::vector<FeatureVector> vectors;

  std::size_t size() const { return vectors.size(); }
  bool empty() const { return vectors.empty(); }

  std::set<ActivityClass> classes() const;
  std::vector<std::string> users() const;              // sorted unique
  std::vector<std::string> session_ids() const;        // sorted unique
  std::map<ActivityClass, double> class_durations_seconds() const;
  std::map<ActivityClass, std::size_t> class_window_counts() const;
};

WindowedDataset featurize_sessions(
    const std::vector<RecordingSession>& sessions,
    const WindowingConfig& config, const FeatureSchema& schema);

// Restrict columns to the set's sensors; relative sensor order of the
// input schema is preserved. Throws DatasetError for members outside the
// dataset schema.
WindowedDataset select_sensor_set(const WindowedDataset& dataset,
                                  const SensorSet& set);

// Keep only windows of the given classes (stable).
WindowedDataset filter_classes(const WindowedDataset& dataset,
                               const std::set<ActivityClass>& classes);

enum class BalanceOrder {
  EarliestFirst,  // deterministic, default
  SeededRandom,   // for variance studies
};

// Truncate every class's total window time to the minimum class's total,
// keeping each user's share of the class intact (largest-remainder
// rounding, so per-class totals land within one window of the target and
// per-user shares within one window per user). Windows are kept earliest
// first within each user's sessions unless SeededRandom is requested.
WindowedDataset balance_classes(const WindowedDataset& dataset,
                                BalanceOrder order = BalanceOrder::EarliestFirst,
                                std::uint64_t seed = 0);

struct SplitSpec {
  enum class Mode { GroupedBySession, WindowLevel };

  Mode mode = Mode::GroupedBySession;
  double test_fraction = 0.2;  // in (0, 1)
  std::uint64_t seed = 0;
  bool stratify = true;
};

struct SplitResult {
  WindowedDataset train;
  WindowedDataset test;
};

// Deterministic given the seed. Grouped mode assigns whole sessions, so no
// session's windows leak across the partition boundary; window-level mode
// exists to probe exactly that leak. Stratified grouped mode throws
// DatasetError when a class has a single session (it cannot appear on both
// sides, which would silently skew the split).
SplitResult split(const WindowedDataset& dataset, const SplitSpec& spec);

// Test = every window of `user`; train = all other users, optionally
// filtered to `classes`.
SplitResult leave_user_out(
    const WindowedDataset& dataset, const std::string& user,
    const std::optional<std::set<ActivityClass>>& classes = std::nullopt);

}  // namespace tmd
