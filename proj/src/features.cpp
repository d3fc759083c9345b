#include "tmd/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tmd/error.hpp"
#include "tmd/rng.hpp"

namespace tmd {

std::string_view stat_name(Stat s) {
  switch (s) {
    case Stat::Min: return "min";
    case Stat::Max: return "max";
    case Stat::Mean: return "mean";
    case Stat::Std: return "std";
  }
  return "?";
}

std::int64_t WindowingConfig::window_ms() const {
  return static_cast<std::int64_t>(std::llround(window_seconds * 1000.0));
}

std::int64_t WindowingConfig::stride_ms() const {
  auto stride = static_cast<std::int64_t>(
      std::llround(window_seconds * (1.0 - overlap_fraction) * 1000.0));
  return std::max<std::int64_t>(1, stride);
}

void WindowingConfig::validate() const {
  if (!(window_seconds > 0.0)) {
    throw std::invalid_argument("window length must be positive");
  }
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
    throw std::invalid_argument("overlap fraction must be in [0, 1)");
  }
}

FeatureSchema FeatureSchema::for_sensors(std::vector<SensorKind> sensors,
                                         bool per_axis) {
  if (sensors.empty()) {
    throw std::invalid_argument("feature schema needs at least one sensor");
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (!is_featurizable(sensors[i])) {
      throw std::invalid_argument("sensor '" +
                                  std::string(sensor_name(sensors[i])) +
                                  "' cannot be featurized");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (sensors[j] == sensors[i]) {
        throw std::invalid_argument("duplicate sensor in schema");
      }
    }
  }
  FeatureSchema schema;
  schema.sensors = std::move(sensors);
  schema.per_axis = per_axis;
  return schema;
}

std::size_t FeatureSchema::channel_count() const {
  if (!per_axis) return sensors.size();
  std::size_t n = 0;
  for (SensorKind k : sensors) n += static_cast<std::size_t>(axis_count(k));
  return n;
}

std::size_t FeatureSchema::sensor_block_begin(SensorKind kind) const {
  std::size_t col = 0;
  for (SensorKind k : sensors) {
    if (k == kind) return col;
    col += per_axis ? static_cast<std::size_t>(axis_count(k)) * kNumStats
                    : kNumStats;
  }
  throw SchemaMismatch("sensor '" + std::string(sensor_name(kind)) +
                       "' not in schema");
}

std::size_t FeatureSchema::sensor_block_width(SensorKind kind) const {
  return per_axis ? static_cast<std::size_t>(axis_count(kind)) * kNumStats
                  : kNumStats;
}

std::size_t FeatureSchema::column(SensorKind kind, Stat stat) const {
  return sensor_block_begin(kind) + static_cast<std::size_t>(stat);
}

std::size_t FeatureSchema::column(SensorKind kind, int axis, Stat stat) const {
  if (!per_axis) {
    if (axis != 0) throw SchemaMismatch("schema is not per-axis");
    return column(kind, stat);
  }
  return sensor_block_begin(kind) +
         static_cast<std::size_t>(axis) * kNumStats +
         static_cast<std::size_t>(stat);
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  names.reserve(feature_count());
  static constexpr const char* kAxisNames[3] = {"x", "y", "z"};
  for (SensorKind k : sensors) {
    if (per_axis && axis_count(k) > 1) {
      for (int a = 0; a < axis_count(k); ++a) {
        for (Stat s : kAllStats) {
          names.push_back(std::string(sensor_name(k)) + "_" + kAxisNames[a] +
                          "_" + std::string(stat_name(s)));
        }
      }
    } else {
      for (Stat s : kAllStats) {
        names.push_back(std::string(sensor_name(k)) + "_" +
                        std::string(stat_name(s)));
      }
    }
  }
  return names;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 0x7a3d0b5c91e4f26bULL;
  auto mixin = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(h);
  };
  mixin(per_axis ? 2 : 1);
  mixin(sensors.size());
  for (SensorKind k : sensors) mixin(static_cast<std::uint64_t>(k) + 101);
  return h;
}

bool FeatureVector::has_missing() const {
  return std::find(missing.begin(), missing.end(), true) != missing.end();
}

std::vector<RawWindow> partition_windows(const RecordingSession& session,
                                         const WindowingConfig& config) {
  config.validate();
  std::vector<RawWindow> windows;
  if (session.readings.empty()) return windows;

  const std::int64_t w = config.window_ms();
  const std::int64_t stride = config.stride_ms();
  const std::int64_t t0 = session.readings.front().timestamp_ms;
  const std::int64_t duration = session.duration_ms();
  if (duration < w) return windows;

  for (std::int64_t start = t0, k = 0; start + w <= t0 + duration;
       start += stride, ++k) {
    RawWindow win;
    win.index = static_cast<std::size_t>(k);
    win.start_ms = start;
    win.end_ms = start + w;
    windows.push_back(std::move(win));
  }

  // Readings are time-sorted; sweep once per window over the relevant range.
  auto lower = [&](std::int64_t t) {
    return std::lower_bound(session.readings.begin(), session.readings.end(),
                            t, [](const SensorReading& r, std::int64_t v) {
                              return r.timestamp_ms < v;
                            });
  };
  for (RawWindow& win : windows) {
    auto begin = lower(win.start_ms);
    auto end = lower(win.end_ms);
    for (auto it = begin; it != end; ++it) {
      if (is_excluded(it->sensor) || it->sensor == SensorKind::Unknown) {
        continue;
      }
      win.readings.push_back(*it);
    }
  }
  return windows;
}

namespace {

struct Accumulator {
  std::vector<double> samples;

  void add(double v) { samples.push_back(v); }

  // Population std (divide by N); two-pass for stability.
  void write(std::vector<double>& values, std::vector<bool>& missing,
             std::size_t col) const {
    if (samples.empty()) {
      for (int s = 0; s < kNumStats; ++s) {
        values[col + s] = std::numeric_limits<double>::quiet_NaN();
        missing[col + s] = true;
      }
      return;
    }
    double mn = samples[0], mx = samples[0], sum = 0.0;
    for (double v : samples) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      sum += v;
    }
    double mean = sum / static_cast<double>(samples.size());
    double sq = 0.0;
    for (double v : samples) sq += (v - mean) * (v - mean);
    double sd = std::sqrt(sq / static_cast<double>(samples.size()));
    values[col + static_cast<int>(Stat::Min)] = mn;
    values[col + static_cast<int>(Stat::Max)] = mx;
    values[col + static_cast<int>(Stat::Mean)] = mean;
    values[col + static_cast<int>(Stat::Std)] = sd;
  }
};

}  // namespace

FeatureVector window_stats(const RawWindow& window,
                           const FeatureSchema& schema) {
  FeatureVector out;
  out.values.assign(schema.feature_count(), 0.0);
  out.missing.assign(schema.feature_count(), false);
  out.window_index = window.index;

  std::size_t n_channels = schema.channel_count();
  std::vector<Accumulator> acc(n_channels);

  // channel index per (sensor, axis)
  auto channel_of = [&](SensorKind kind, int axis) -> std::size_t {
    return (schema.sensor_block_begin(kind) +
            (schema.per_axis ? static_cast<std::size_t>(axis) * kNumStats
                             : 0)) /
           kNumStats;
  };

  for (const SensorReading& r : window.readings) {
    bool in_schema =
        std::find(schema.sensors.begin(), schema.sensors.end(), r.sensor) !=
        schema.sensors.end();
    if (!in_schema) continue;

    if (schema.per_axis && r.values.size() > 1) {
      for (std::size_t a = 0; a < r.values.size(); ++a) {
        acc[channel_of(r.sensor, static_cast<int>(a))].add(r.values[a]);
      }
    } else if (r.values.size() == 1) {
      acc[channel_of(r.sensor, 0)].add(r.values[0]);
    } else {
      double sq = 0.0;
      for (double v : r.values) sq += v * v;
      acc[channel_of(r.sensor, 0)].add(std::sqrt(sq));
    }
  }

  for (std::size_t ch = 0; ch < n_channels; ++ch) {
    acc[ch].write(out.values, out.missing, ch * kNumStats);
  }
  return out;
}

std::vector<FeatureVector> featurize_session(const RecordingSession& session,
                                             const WindowingConfig& config,
                                             const FeatureSchema& schema) {
  std::vector<RawWindow> windows = partition_windows(session, config);
  std::vector<FeatureVector> out;
  out.reserve(windows.size());
  for (const RawWindow& w : windows) {
    FeatureVector v = window_stats(w, schema);
    v.label = session.label;
    v.user_id = session.user_id;
    v.session_id = session.session_id;
    out.push_back(std::move(v));
  }
  return out;
}

Imputer fit_imputer(const std::vector<FeatureVector>& train_vectors) {
  if (train_vectors.empty()) {
    throw TrainingError("cannot fit imputer on an empty training set");
  }
  std::size_t width = train_vectors.front().values.size();
  for (const FeatureVector& v : train_vectors) {
    if (v.values.size() != width) {
      throw SchemaMismatch("training vectors disagree on feature count");
    }
  }

  Imputer imp;
  imp.means.assign(width, 0.0);
  imp.never_observed.assign(width, false);
  std::vector<std::size_t> counts(width, 0);
  for (const FeatureVector& v : train_vectors) {
    for (std::size_t i = 0; i < width; ++i) {
      if (!v.missing[i]) {
        imp.means[i] += v.values[i];
        ++counts[i];
      }
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    if (counts[i] == 0) {
      imp.means[i] = 0.0;
      imp.never_observed[i] = true;
    } else {
      imp.means[i] /= static_cast<double>(counts[i]);
    }
  }
  return imp;
}

FeatureVector apply_imputer(const FeatureVector& vector,
                            const Imputer& imputer) {
  if (vector.values.size() != imputer.size()) {
    throw SchemaMismatch("vector width " +
                         std::to_string(vector.values.size()) +
                         " does not match imputer width " +
                         std::to_string(imputer.size()));
  }
  FeatureVector out = vector;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (out.missing[i]) {
      out.values[i] = imputer.means[i];
      out.missing[i] = false;
    }
  }
  return out;
}

void apply_imputer_in_place(std::vector<FeatureVector>& vectors,
                            const Imputer& imputer) {
  for (FeatureVector& v : vectors) v = apply_imputer(v, imputer);
}

}  // namespace tmd
