#include "tmd/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "tmd/error.hpp"
#include "tmd/rng.hpp"

namespace tmd {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    std::size_t b = field.find_first_not_of(" \t");
    std::size_t e = field.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string()
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_int(const std::string& s, int& out) {
  std::int64_t v;
  if (!parse_i64(s, v)) return false;
  out = static_cast<int>(v);
  return true;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

// Fixed unit direction used to expand a magnitude into 3-axis values.
constexpr double kDirX = 1.0 / 3.7416573867739413;  // (1,2,3)/|(1,2,3)|
constexpr double kDirY = 2.0 / 3.7416573867739413;
constexpr double kDirZ = 3.0 / 3.7416573867739413;

}  // namespace

RecordingSession parse_log_stream(std::istream& in, ActivityClass label,
                                  const std::string& user_id,
                                  const std::string& session_id,
                                  const ParseOptions& options,
                                  ParseReport* report) {
  RecordingSession session;
  session.session_id = session_id;
  session.user_id = user_id;
  session.label = label;

  ParseReport local;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;

  auto fail_or_skip = [&](const std::string& reason) {
    if (!options.lenient) throw ParseError(reason, line_no);
    ++local.lines_skipped;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;

    std::vector<std::string> fields = split_fields(line);
    std::int64_t ts = 0;
    if (first_content_line && !fields.empty() && !parse_i64(fields[0], ts)) {
      // optional header
      first_content_line = false;
      continue;
    }
    first_content_line = false;

    if (fields.size() < 4) {
      fail_or_skip("expected at least 4 fields (timestamp,sensor,accuracy,v1)");
      continue;
    }
    if (!parse_i64(fields[0], ts)) {
      fail_or_skip("bad timestamp '" + fields[0] + "'");
      continue;
    }

    SensorReading reading;
    reading.timestamp_ms = ts;
    reading.sensor = parse_sensor_kind(fields[1]);
    if (reading.sensor == SensorKind::Unknown) reading.raw_name = fields[1];

    if (!parse_int(fields[2], reading.accuracy)) {
      fail_or_skip("bad accuracy '" + fields[2] + "'");
      continue;
    }

    std::size_t n_values = fields.size() - 3;
    int expected = axis_count(reading.sensor);
    if (expected > 0 && n_values != static_cast<std::size_t>(expected)) {
      fail_or_skip("sensor '" + fields[1] + "' expects " +
                   std::to_string(expected) + " values, got " +
                   std::to_string(n_values));
      continue;
    }

    bool ok = true;
    reading.values.reserve(n_values);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      double v;
      if (!parse_double(fields[i], v)) {
        fail_or_skip("bad value '" + fields[i] + "'");
        ok = false;
        break;
      }
      if (!std::isfinite(v)) {
        fail_or_skip("non-finite value");
        ok = false;
        break;
      }
      reading.values.push_back(v);
    }
    if (!ok) continue;

    ++local.lines_parsed;
    session.readings.push_back(std::move(reading));
  }

  if (session.readings.empty()) {
    throw ParseError("no well-formed records in '" + session_id + "'");
  }

  // Sensor event queues reorder under load; sort rather than reject.
  std::stable_sort(session.readings.begin(), session.readings.end(),
                   [](const SensorReading& a, const SensorReading& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });

  // Normalize to session-relative milliseconds.
  std::int64_t t0 = session.readings.front().timestamp_ms;
  if (t0 != 0) {
    for (SensorReading& r : session.readings) r.timestamp_ms -= t0;
  }

  if (report) *report = local;
  return session;
}

RecordingSession parse_log(const std::filesystem::path& path,
                           ActivityClass label, const std::string& user_id,
                           const ParseOptions& options, ParseReport* report) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_log_stream(in, label, user_id, path.stem().string(), options,
                          report);
}

void write_log(const RecordingSession& session, std::ostream& out) {
  out << "timestamp_ms,sensor,accuracy,values\n";
  char buf[32];
  for (const SensorReading& r : session.readings) {
    out << r.timestamp_ms << ',';
    if (r.sensor == SensorKind::Unknown && !r.raw_name.empty()) {
      out << r.raw_name;
    } else {
      out << sensor_name(r.sensor);
    }
    out << ',' << r.accuracy;
    for (double v : r.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_log(const RecordingSession& session,
               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_log(session, out);
}

// --- Synthetic sessions ---------------------------------------------------

const SynthChannel& SynthProfile::channel(SensorKind kind) const {
  switch (kind) {
    case SensorKind::Accelerometer: return accelerometer;
    case SensorKind::Gyroscope: return gyroscope;
    case SensorKind::Sound: return sound;
    case SensorKind::LinearAcceleration: return linear_acceleration;
    case SensorKind::Speed: return speed;
    case SensorKind::RotationVector: return rotation_vector;
    default:
      throw std::invalid_argument("no synthetic profile for sensor '" +
                                  std::string(sensor_name(kind)) + "'");
  }
}

const SynthProfile& synth_profile(ActivityClass c) {
  //                    base  noise  wave_amp wave_hz
  static const SynthProfile kStill = {
      {9.81, 0.05, 0.0, 0.0},   // accelerometer magnitude ~ gravity
      {0.02, 0.01, 0.0, 0.0},   // gyroscope
      {0.05, 0.02, 0.0, 0.0},   // sound level
      {0.05, 0.03, 0.0, 0.0},   // linear acceleration
      {0.0, 0.05, 0.0, 0.0},    // speed
      {0.50, 0.02, 0.0, 0.0},   // rotation vector
  };
  static const SynthProfile kWalking = {
      {9.81, 0.80, 3.00, 2.0},  // strong 2 Hz gait oscillation
      {0.80, 0.30, 0.50, 2.0},
      {0.30, 0.10, 0.0, 0.0},
      {2.50, 1.00, 1.50, 2.0},
      {1.40, 0.30, 0.0, 0.0},
      {0.50, 0.15, 0.0, 0.0},
  };
  static const SynthProfile kCar = {
      {9.81, 0.35, 0.40, 0.30},
      {0.15, 0.06, 0.0, 0.0},
      {0.50, 0.08, 0.0, 0.0},
      {0.50, 0.25, 0.0, 0.0},
      {13.0, 4.00, 0.0, 0.0},
      {0.50, 0.06, 0.0, 0.0},
  };
  static const SynthProfile kBus = {
      {9.81, 0.55, 0.60, 0.25},
      {0.25, 0.10, 0.0, 0.0},
      {0.62, 0.10, 0.0, 0.0},
      {0.80, 0.35, 0.0, 0.0},
      {8.00, 2.50, 0.0, 0.0},
      {0.50, 0.09, 0.0, 0.0},
  };
  static const SynthProfile kTrain = {
      {9.81, 0.25, 0.50, 0.15},
      {0.10, 0.04, 0.0, 0.0},
      {0.72, 0.12, 0.0, 0.0},
      {0.40, 0.20, 0.0, 0.0},
      {25.0, 6.00, 0.0, 0.0},
      {0.50, 0.04, 0.0, 0.0},
  };
  switch (c) {
    case ActivityClass::Bus: return kBus;
    case ActivityClass::Car: return kCar;
    case ActivityClass::Still: return kStill;
    case ActivityClass::Train: return kTrain;
    case ActivityClass::Walking: return kWalking;
  }
  return kStill;
}

double expected_channel_std(const SynthChannel& ch) {
  return std::sqrt(ch.wave_amp * ch.wave_amp / 2.0 +
                   ch.noise_std * ch.noise_std);
}

RecordingSession synthesize_session(ActivityClass c, double seconds,
                                    const std::vector<SensorKind>& sensors,
                                    std::uint64_t seed,
                                    const std::string& user_id,
                                    const std::string& session_id) {
  if (!(seconds > 0.0)) {
    throw std::invalid_argument("duration must be positive");
  }
  if (sensors.empty()) {
    throw std::invalid_argument("sensor set must be non-empty");
  }

  std::set<SensorKind> unique(sensors.begin(), sensors.end());
  for (SensorKind k : unique) {
    if (!is_featurizable(k)) {
      throw std::invalid_argument("no synthetic profile for sensor '" +
                                  std::string(sensor_name(k)) + "'");
    }
  }

  const SynthProfile& profile = synth_profile(c);
  std::int64_t n_samples =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                    std::floor(seconds * 20.0 + 1e-9)));

  RecordingSession session;
  session.user_id = user_id;
  session.session_id =
      session_id.empty()
          ? "synth-" + std::string(to_string(c)) + "-" + std::to_string(seed)
          : session_id;
  session.label = c;
  session.readings.reserve(static_cast<std::size_t>(n_samples) *
                           unique.size());

  // One independent stream per sensor, so a sensor's values do not depend
  // on which other sensors were requested.
  struct Stream {
    SensorKind kind;
    const SynthChannel* channel;
    Rng rng;
  };
  std::vector<Stream> streams;
  for (SensorKind k : unique) {
    std::uint64_t stream_seed = mix_seed(
        seed, static_cast<std::uint64_t>(class_index(c)) * 16u +
                  static_cast<std::uint64_t>(k));
    streams.push_back({k, &profile.channel(k), Rng(stream_seed)});
  }

  for (std::int64_t i = 0; i < n_samples; ++i) {
    std::int64_t t_ms = i * kSampleIntervalMs;
    double t = static_cast<double>(t_ms) / 1000.0;
    for (Stream& s : streams) {
      const SynthChannel& ch = *s.channel;
      double m = ch.base +
                 ch.wave_amp *
                     std::sin(2.0 * std::numbers::pi * ch.wave_hz * t) +
                 s.rng.next_gaussian(0.0, ch.noise_std);
      if (m < 0.0) m = 0.0;  // channels are magnitudes

      SensorReading r;
      r.timestamp_ms = t_ms;
      r.sensor = s.kind;
      r.accuracy = 3;
      if (axis_count(s.kind) == 3) {
        r.values = {m * kDirX, m * kDirY, m * kDirZ};
      } else {
        r.values = {m};
      }
      session.readings.push_back(std::move(r));
    }
  }
  return session;
}

// --- Batch ingestion --------------------------------------------------------

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest '" + path.string() + "'");

  std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 3) {
      throw ParseError("manifest line needs 3 fields (path,user_id,label)",
                       line_no);
    }
    if (line_no == 1 && !parse_activity_class(fields[2]).has_value() &&
        fields[2] == "label") {
      continue;  // header
    }
    auto label = parse_activity_class(fields[2]);
    if (!label) {
      throw ParseError("unknown activity class '" + fields[2] + "'", line_no);
    }
    std::filesystem::path p(fields[0]);
    if (p.is_relative()) p = base / p;
    entries.push_back({p, fields[1], *label});
  }
  if (entries.empty()) {
    throw ParseError("manifest '" + path.string() + "' lists no sessions");
  }
  return entries;
}

std::vector<RecordingSession> ingest_manifest(
    const std::filesystem::path& manifest_path, const ParseOptions& options,
    ParseReport* report) {
  std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  std::vector<RecordingSession> sessions;
  sessions.reserve(entries.size());
  ParseReport total;
  std::set<std::string> seen_ids;
  for (const ManifestEntry& e : entries) {
    ParseReport r;
    RecordingSession s = parse_log(e.path, e.label, e.user_id, options, &r);
    if (!seen_ids.insert(s.session_id).second) {
      s.session_id += "-" + std::to_string(sessions.size());
      seen_ids.insert(s.session_id);
    }
    total.lines_parsed += r.lines_parsed;
    total.lines_skipped += r.lines_skipped;
    sessions.push_back(std::move(s));
  }
  if (report) *report = total;
  return sessions;
}

}  // namespace tmd
