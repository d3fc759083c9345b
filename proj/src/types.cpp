#include "tmd/types.hpp"

#include <algorithm>
#include <cctype>

namespace tmd {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(ActivityClass c) {
  switch (c) {
    case ActivityClass::Bus: return "bus";
    case ActivityClass::Car: return "car";
    case ActivityClass::Still: return "still";
    case ActivityClass::Train: return "train";
    case ActivityClass::Walking: return "walking";
  }
  return "?";
}

std::optional<ActivityClass> parse_activity_class(std::string_view name) {
  std::string n = lower(name);
  for (ActivityClass c : kAllClasses) {
    if (n == to_string(c)) return c;
  }
  return std::nullopt;
}

int axis_count(SensorKind kind) {
  switch (kind) {
    case SensorKind::Accelerometer: return 3;
    case SensorKind::Gyroscope: return 3;
    case SensorKind::Sound: return 1;
    case SensorKind::LinearAcceleration: return 3;
    case SensorKind::Speed: return 1;
    case SensorKind::RotationVector: return 3;
    case SensorKind::Light: return 1;
    case SensorKind::Pressure: return 1;
    case SensorKind::MagneticField: return 3;
    case SensorKind::Gravity: return 3;
    case SensorKind::Proximity: return 1;
    case SensorKind::Unknown: return 0;
  }
  return 0;
}

bool is_excluded(SensorKind kind) {
  switch (kind) {
    case SensorKind::Light:
    case SensorKind::Pressure:
    case SensorKind::MagneticField:
    case SensorKind::Gravity:
    case SensorKind::Proximity:
      return true;
    default:
      return false;
  }
}

bool is_featurizable(SensorKind kind) {
  switch (kind) {
    case SensorKind::Accelerometer:
    case SensorKind::Gyroscope:
    case SensorKind::Sound:
    case SensorKind::LinearAcceleration:
    case SensorKind::Speed:
    case SensorKind::RotationVector:
      return true;
    default:
      return false;
  }
}

std::string_view sensor_name(SensorKind kind) {
  switch (kind) {
    case SensorKind::Accelerometer: return "accelerometer";
    case SensorKind::Gyroscope: return "gyroscope";
    case SensorKind::Sound: return "sound";
    case SensorKind::LinearAcceleration: return "linear_acceleration";
    case SensorKind::Speed: return "speed";
    case SensorKind::RotationVector: return "rotation_vector";
    case SensorKind::Light: return "light";
    case SensorKind::Pressure: return "pressure";
    case SensorKind::MagneticField: return "magnetic_field";
    case SensorKind::Gravity: return "gravity";
    case SensorKind::Proximity: return "proximity";
    case SensorKind::Unknown: return "unknown";
  }
  return "unknown";
}

SensorKind parse_sensor_kind(std::string_view name) {
  static constexpr std::array<SensorKind, 11> kNamed = {
      SensorKind::Accelerometer, SensorKind::Gyroscope,
      SensorKind::Sound,         SensorKind::LinearAcceleration,
      SensorKind::Speed,         SensorKind::RotationVector,
      SensorKind::Light,         SensorKind::Pressure,
      SensorKind::MagneticField, SensorKind::Gravity,
      SensorKind::Proximity};
  std::string n = lower(name);
  for (SensorKind k : kNamed) {
    if (n == sensor_name(k)) return k;
  }
  return SensorKind::Unknown;
}

}  // namespace tmd
