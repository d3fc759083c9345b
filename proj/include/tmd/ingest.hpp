#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmd/types.hpp"

namespace tmd {

// Canonical log line: `timestamp_ms,sensor_name,accuracy,v1[,v2[,v3]]`.
// UTF-8, '.' decimal separator, optional header line. One file holds one
// labeled activity; label and user come from the manifest, not the file.

struct ParseOptions {
  // Strict mode (default) throws ParseError on the first malformed record.
  // Lenient mode skips bad lines and reports how many were dropped.
  bool lenient = false;
};

struct ParseReport {
  std::size_t lines_parsed = 0;
  std::size_t lines_skipped = 0;
};

RecordingSession parse_log(const std::filesystem::path& path,
                           ActivityClass label, const std::string& user_id,
                           const ParseOptions& options = {},
                           ParseReport* report = nullptr);

RecordingSession parse_log_stream(std::istream& in, ActivityClass label,
                                  const std::string& user_id,
                                  const std::string& session_id,
                                  const ParseOptions& options = {},
                                  ParseReport* report = nullptr);

void write_log(const RecordingSession& session, std::ostream& out);
void write_log(const RecordingSession& session,
               const std::filesystem::path& path);

// --- Synthetic sessions -------------------------------------------------
//
// Desk-scale surrogate for the real capture campaign. Every channel is a
// non-negative magnitude stream `clamp(base + wave_amp*sin(2*pi*wave_hz*t)
// + N(0, noise_std), 0)` sampled at 20 Hz; 3-axis sensors emit the
// magnitude along a fixed unit direction. The per-class constants below
// are chosen so classes are statistically separable: Walking has a strong
// 2 Hz accelerometer oscillation, Still is near-constant, and the
// motorized classes differ primarily in the speed channel with secondary
// gaps in sound level and vibration noise.

struct SynthChannel {
  double base = 0.0;
  double noise_std = 0.0;
  double wave_amp = 0.0;
  double wave_hz = 0.0;
};

struct SynthProfile {
  SynthChannel accelerometer;
  SynthChannel gyroscope;
  SynthChannel sound;
  SynthChannel linear_acceleration;
  SynthChannel speed;
  SynthChannel rotation_vector;

  const SynthChannel& channel(SensorKind kind) const;
};

const SynthProfile& synth_profile(ActivityClass c);

// Standard deviation the channel converges to over long streams
// (wave contributes amp^2/2, noise contributes noise_std^2).
double expected_channel_std(const SynthChannel& ch);

inline constexpr std::int64_t kSampleIntervalMs = 50;  // 20 Hz ceiling

RecordingSession synthesize_session(ActivityClass c, double seconds,
                                    const std::vector<SensorKind>& sensors,
                                    std::uint64_t seed,
                                    const std::string& user_id = "synth",
                                    const std::string& session_id = "");

// --- Batch ingestion ------------------------------------------------------
//
// Session manifest: CSV `path,user_id,label`, header optional. Relative
// paths resolve against the manifest's directory.

struct ManifestEntry {
  std::filesystem::path path;
  std::string user_id;
  ActivityClass label = ActivityClass::Still;
};

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

std::vector<RecordingSession> ingest_manifest(
    const std::filesystem::path& manifest_path,
    const ParseOptions& options = {}, ParseReport* report = nullptr);

}  // namespace tmd
