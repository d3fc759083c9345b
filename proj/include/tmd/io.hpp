#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tmd/dataset.hpp"
#include "tmd/models.hpp"

namespace tmd {

// --- Feature matrix CSV -------------------------------------------------
//
// Header: one `<sensor>_<stat>` column per feature (per-axis schemas use
// `<sensor>_<axis>_<stat>`), then label,user_id,session_id,window_index.
// Missing entries are empty fields. A `# window_seconds=...` comment line
// precedes the header so windows keep their duration across round-trips.

void write_feature_csv(const WindowedDataset& dataset, std::ostream& out);
void write_feature_csv(const WindowedDataset& dataset,
                       const std::filesystem::path& path);

WindowedDataset read_feature_csv(std::istream& in);
WindowedDataset read_feature_csv(const std::filesystem::path& path);

// Incremental reader for streaming prediction: parse the header once, then
// rows one at a time.
struct FeatureCsvLayout {
  FeatureSchema schema;
  std::vector<std::size_t> feature_cols;  // schema order -> csv position
  std::optional<std::size_t> label_col;
  std::optional<std::size_t> user_col;
  std::optional<std::size_t> session_col;
  std::optional<std::size_t> window_col;

  static FeatureCsvLayout parse_header(const std::string& header_line);
  FeatureVector parse_row(const std::string& line, std::size_t line_no) const;
};

// --- Compact binary cache -------------------------------------------------
//
// Little-endian, versioned, embeds the schema hash; the reader refuses
// files whose magic/version/hash do not check out.

void write_feature_cache(const WindowedDataset& dataset,
                         const std::filesystem::path& path);
WindowedDataset read_feature_cache(const std::filesystem::path& path);

// Reads either format, by sniffing the file's first bytes.
WindowedDataset read_features_auto(const std::filesystem::path& path);

// --- Model files ------------------------------------------------------------
//
// Versioned, self-describing JSON carrying schema hash, params, seed,
// imputer means and the full tree structures.

void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace tmd
