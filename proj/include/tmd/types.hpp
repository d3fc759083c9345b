#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tmd {

// The five transportation modes, in canonical (alphabetical) order. The
// integer codes are stable and used for every tie-break in the library.
enum class ActivityClass : int { Bus = 0, Car = 1, Still = 2, Train = 3, Walking = 4 };

inline constexpr int kNumClasses = 5;

inline constexpr std::array<ActivityClass, kNumClasses> kAllClasses = {
    ActivityClass::Bus, ActivityClass::Car, ActivityClass::Still,
    ActivityClass::Train, ActivityClass::Walking};

std::string_view to_string(ActivityClass c);
std::optional<ActivityClass> parse_activity_class(std::string_view name);

inline int class_index(ActivityClass c) { return static_cast<int>(c); }

// Sensor channels. The first six are the ones featurization accepts; the
// next five are recorded but excluded from analysis (they encode location,
// not transportation mode); Unknown covers any other name found in a log.
enum class SensorKind : int {
  Accelerometer = 0,
  Gyroscope = 1,
  Sound = 2,
  LinearAcceleration = 3,
  Speed = 4,
  RotationVector = 5,
  Light = 6,
  Pressure = 7,
  MagneticField = 8,
  Gravity = 9,
  Proximity = 10,
  Unknown = 11,
};

inline constexpr std::array<SensorKind, 6> kCoreSensors = {
    SensorKind::Accelerometer,      SensorKind::Gyroscope,
    SensorKind::Sound,              SensorKind::LinearAcceleration,
    SensorKind::Speed,              SensorKind::RotationVector};

// Fixed axis count per kind; 0 means variable (Unknown sensors accept any
// non-empty value vector).
int axis_count(SensorKind kind);
bool is_excluded(SensorKind kind);
bool is_featurizable(SensorKind kind);
std::string_view sensor_name(SensorKind kind);
SensorKind parse_sensor_kind(std::string_view name);

// One timestamped sensor event. `values` length equals the kind's axis
// count for known sensors. `raw_name` keeps the original sensor string for
// Unknown kinds so logs round-trip losslessly.
struct SensorReading {
  std::int64_t timestamp_ms = 0;
  SensorKind sensor = SensorKind::Unknown;
  int accuracy = 0;
  std::vector<double> values;
  std::string raw_name;

  bool operator==(const SensorReading&) const = default;
};

// A labeled, per-user recording. Readings are sorted by timestamp after
// ingest and the whole object is immutable from then on (safe to share
// across threads).
struct RecordingSession {
  std::string session_id;
  std::string user_id;
  ActivityClass label = ActivityClass::Still;
  std::vector<SensorReading> readings;

  std::int64_t duration_ms() const {
    if (readings.size() < 2) return 0;
    return readings.back().timestamp_ms - readings.front().timestamp_ms;
  }

  bool operator==(const RecordingSession&) const = default;
};

}  // namespace tmd
