#include "tmd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tmd/error.hpp"

namespace tmd {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

constexpr const char* kLabelCol = "label";
constexpr const char* kUserCol = "user_id";
constexpr const char* kSessionCol = "session_id";
constexpr const char* kWindowCol = "window_index";

}  // namespace

void write_feature_csv(const WindowedDataset& dataset, std::ostream& out) {
  out << "# window_seconds=" << format_double(dataset.window_seconds) << "\n";
  for (const std::string& name : dataset.schema.column_names()) {
    out << name << ',';
  }
  out << kLabelCol << ',' << kUserCol << ',' << kSessionCol << ','
      << kWindowCol << '\n';

  for (const FeatureVector& v : dataset.vectors) {
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      if (!v.missing[i]) out << format_double(v.values[i]);
      out << ',';
    }
    out << to_string(v.label) << ',' << v.user_id << ',' << v.session_id
        << ',' << v.window_index << '\n';
  }
}

void write_feature_csv(const WindowedDataset& dataset,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_feature_csv(dataset, out);
}

FeatureCsvLayout FeatureCsvLayout::parse_header(
    const std::string& header_line) {
  std::vector<std::string> fields = split_csv(header_line);
  if (fields.empty()) throw ParseError("empty feature CSV header");

  FeatureCsvLayout layout;

  struct Channel {
    std::string key;
    std::vector<std::size_t> stat_cols;  // min,max,mean,std positions
  };
  std::vector<Channel> channels;

  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string& f = fields[i];
    if (f == kLabelCol) {
      layout.label_col = i;
    } else if (f == kUserCol) {
      layout.user_col = i;
    } else if (f == kSessionCol) {
      layout.session_col = i;
    } else if (f == kWindowCol) {
      layout.window_col = i;
    } else {
      std::size_t us = f.rfind('_');
      if (us == std::string::npos) {
        throw ParseError("unrecognized feature column '" + f + "'");
      }
      std::string head = f.substr(0, us);
      std::string stat = f.substr(us + 1);
      int stat_idx = -1;
      for (Stat s : kAllStats) {
        if (stat == stat_name(s)) stat_idx = static_cast<int>(s);
      }
      if (stat_idx < 0) {
        throw ParseError("unknown statistic in column '" + f + "'");
      }
      if (channels.empty() || channels.back().key != head) {
        channels.push_back({head, {}});
      }
      if (static_cast<int>(channels.back().stat_cols.size()) != stat_idx) {
        throw ParseError("feature columns out of canonical order at '" + f +
                         "'");
      }
      channels.back().stat_cols.push_back(i);
    }
  }
  if (channels.empty()) throw ParseError("no feature columns in header");

  // Channel keys are either "<sensor>" (magnitude) or "<sensor>_<axis>".
  bool per_axis = false;
  std::vector<SensorKind> sensors;
  for (std::size_t ci = 0; ci < channels.size(); ++ci) {
    const Channel& ch = channels[ci];
    if (ch.stat_cols.size() != kNumStats) {
      throw ParseError("channel '" + ch.key + "' is missing statistics");
    }
    SensorKind kind = parse_sensor_kind(ch.key);
    if (kind != SensorKind::Unknown) {
      if (per_axis) throw ParseError("mixed per-axis and magnitude columns");
      sensors.push_back(kind);
      continue;
    }
    // try per-axis form
    std::size_t us = ch.key.rfind('_');
    if (us == std::string::npos) {
      throw ParseError("unknown sensor in column group '" + ch.key + "'");
    }
    std::string base = ch.key.substr(0, us);
    std::string axis = ch.key.substr(us + 1);
    kind = parse_sensor_kind(base);
    if (kind == SensorKind::Unknown ||
        (axis != "x" && axis != "y" && axis != "z")) {
      throw ParseError("unknown sensor in column group '" + ch.key + "'");
    }
    per_axis = true;
    if (sensors.empty() || sensors.back() != kind) sensors.push_back(kind);
  }

  layout.schema = FeatureSchema::for_sensors(std::move(sensors), per_axis);
  std::size_t expected = layout.schema.feature_count() / kNumStats;
  if (channels.size() != expected) {
    throw ParseError("feature columns do not form complete sensor blocks");
  }
  for (const Channel& ch : channels) {
    for (std::size_t col : ch.stat_cols) layout.feature_cols.push_back(col);
  }
  return layout;
}

FeatureVector FeatureCsvLayout::parse_row(const std::string& line,
                                          std::size_t line_no) const {
  std::vector<std::string> fields = split_csv(line);
  FeatureVector v;
  v.values.assign(schema.feature_count(), 0.0);
  v.missing.assign(schema.feature_count(), false);

  for (std::size_t i = 0; i < feature_cols.size(); ++i) {
    std::size_t col = feature_cols[i];
    if (col >= fields.size() || fields[col].empty()) {
      v.values[i] = std::numeric_limits<double>::quiet_NaN();
      v.missing[i] = true;
      continue;
    }
    try {
      std::size_t pos = 0;
      v.values[i] = std::stod(fields[col], &pos);
      if (pos != fields[col].size()) throw std::invalid_argument("");
    } catch (...) {
      throw ParseError("bad feature value '" + fields[col] + "'", line_no);
    }
  }

  if (label_col && *label_col < fields.size()) {
    auto label = parse_activity_class(fields[*label_col]);
    if (!label) {
      throw ParseError("unknown label '" + fields[*label_col] + "'", line_no);
    }
    v.label = *label;
  }
  if (user_col && *user_col < fields.size()) v.user_id = fields[*user_col];
  if (session_col && *session_col < fields.size()) {
    v.session_id = fields[*session_col];
  }
  if (window_col && *window_col < fields.size()) {
    try {
      v.window_index = std::stoull(fields[*window_col]);
    } catch (...) {
      throw ParseError("bad window index '" + fields[*window_col] + "'",
                       line_no);
    }
  }
  return v;
}

WindowedDataset read_feature_csv(std::istream& in) {
  WindowedDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::optional<FeatureCsvLayout> layout;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t eq = line.find("window_seconds=");
      if (eq != std::string::npos) {
        ds.window_seconds = std::stod(line.substr(eq + 15));
      }
      continue;
    }
    if (!layout) {
      layout = FeatureCsvLayout::parse_header(line);
      ds.schema = layout->schema;
      continue;
    }
    ds.vectors.push_back(layout->parse_row(line, line_no));
  }
  if (!layout) throw ParseError("feature CSV has no header");
  return ds;
}

WindowedDataset read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return read_feature_csv(in);
}

// --- Binary cache -------------------------------------------------------

namespace {

constexpr char kCacheMagic[8] = {'T', 'M', 'D', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated feature cache");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ParseError("truncated feature cache");
  return s;
}

}  // namespace

void write_feature_cache(const WindowedDataset& dataset,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");

  out.write(kCacheMagic, sizeof(kCacheMagic));
  put(out, kCacheVersion);
  put(out, dataset.schema.hash());
  put<std::uint8_t>(out, dataset.schema.per_axis ? 1 : 0);
  put<std::uint32_t>(out,
                     static_cast<std::uint32_t>(dataset.schema.sensors.size()));
  for (SensorKind k : dataset.schema.sensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(k));
  }
  put(out, dataset.window_seconds);
  put<std::uint64_t>(out, dataset.vectors.size());

  const std::size_t width = dataset.schema.feature_count();
  for (const FeatureVector& v : dataset.vectors) {
    put<std::int32_t>(out, class_index(v.label));
    put<std::uint64_t>(out, v.window_index);
    put_string(out, v.user_id);
    put_string(out, v.session_id);
    for (std::size_t i = 0; i < width; ++i) put(out, v.values[i]);
    for (std::size_t i = 0; i < width; ++i) {
      put<std::uint8_t>(out, v.missing[i] ? 1 : 0);
    }
  }
}

WindowedDataset read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw ParseError("'" + path.string() + "' is not a feature cache");
  }
  if (get<std::uint32_t>(in) != kCacheVersion) {
    throw ParseError("unsupported feature cache version");
  }
  auto stored_hash = get<std::uint64_t>(in);
  bool per_axis = get<std::uint8_t>(in) != 0;
  auto n_sensors = get<std::uint32_t>(in);
  std::vector<SensorKind> sensors;
  for (std::uint32_t i = 0; i < n_sensors; ++i) {
    sensors.push_back(static_cast<SensorKind>(get<std::uint32_t>(in)));
  }

  WindowedDataset ds;
  ds.schema = FeatureSchema::for_sensors(std::move(sensors), per_axis);
  if (ds.schema.hash() != stored_hash) {
    throw ParseError("feature cache schema hash mismatch (corrupt file?)");
  }
  ds.window_seconds = get<double>(in);

  auto n_vectors = get<std::uint64_t>(in);
  const std::size_t width = ds.schema.feature_count();
  ds.vectors.reserve(n_vectors);
  for (std::uint64_t i = 0; i < n_vectors; ++i) {
    FeatureVector v;
    v.label = static_cast<ActivityClass>(get<std::int32_t>(in));
    v.window_index = get<std::uint64_t>(in);
    v.user_id = get_string(in);
    v.session_id = get_string(in);
    v.values.resize(width);
    for (std::size_t j = 0; j < width; ++j) v.values[j] = get<double>(in);
    v.missing.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
      v.missing[j] = get<std::uint8_t>(in) != 0;
    }
    ds.vectors.push_back(std::move(v));
  }
  return ds;
}

WindowedDataset read_features_auto(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ParseError("cannot open '" + path.string() + "'");
  char magic[8] = {};
  probe.read(magic, sizeof(magic));
  probe.close();
  if (std::memcmp(magic, kCacheMagic, sizeof(magic)) == 0) {
    return read_feature_cache(path);
  }
  return read_feature_csv(path);
}

// --- Model files ------------------------------------------------------------

namespace {

constexpr const char* kModelFormat = "tmd-forest-model";
constexpr int kModelVersion = 1;

json params_to_json(const ForestParams& p) {
  json tree;
  if (p.tree.max_depth) {
    tree["max_depth"] = *p.tree.max_depth;
  } else {
    tree["max_depth"] = nullptr;
  }
  tree["min_samples_split"] = p.tree.min_samples_split;
  tree["min_samples_leaf"] = p.tree.min_samples_leaf;
  return json{{"n_trees", p.n_trees},
              {"features_per_split", p.features_per_split},
              {"bootstrap", p.bootstrap},
              {"seed", p.seed},
              {"tree", tree}};
}

ForestParams params_from_json(const json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.features_per_split = j.at("features_per_split").get<int>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  p.seed = j.at("seed").get<std::uint64_t>();
  const json& t = j.at("tree");
  if (!t.at("max_depth").is_null()) {
    p.tree.max_depth = t.at("max_depth").get<int>();
  }
  p.tree.min_samples_split = t.at("min_samples_split").get<int>();
  p.tree.min_samples_leaf = t.at("min_samples_leaf").get<int>();
  return p;
}

}  // namespace

void save_forest(const ForestModel& model,
                 const std::filesystem::path& path) {
  json trees = json::array();
  for (const TreeModel& tree : model.trees) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes) {
      nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right,
                                   n.impurity_decrease, n.sample_fraction,
                                   n.class_counts}));
    }
    trees.push_back(std::move(nodes));
  }

  json j{{"format", kModelFormat},
         {"version", kModelVersion},
         {"schema_hash", model.schema_hash},
         {"n_classes", model.n_classes},
         {"n_features", model.n_features},
         {"trained_labels", model.trained_labels},
         {"params", params_to_json(model.params)},
         {"imputer",
          {{"means", model.imputer.means},
           {"never_observed", model.imputer.never_observed}}},
         {"importance", model.importance},
         {"trees", std::move(trees)}};

  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");

  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "' is not a model file: " +
                     e.what());
  }

  if (!j.is_object() || j.value("format", "") != kModelFormat) {
    throw ParseError("'" + path.string() + "' is not a forest model file");
  }
  if (j.value("version", 0) != kModelVersion) {
    throw ParseError("unsupported model version");
  }

  try {
    ForestModel model;
    model.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    model.n_classes = j.at("n_classes").get<int>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.trained_labels = j.at("trained_labels").get<std::vector<int>>();
    model.params = params_from_json(j.at("params"));
    model.imputer.means =
        j.at("imputer").at("means").get<std::vector<double>>();
    model.imputer.never_observed =
        j.at("imputer").at("never_observed").get<std::vector<bool>>();
    model.importance = j.at("importance").get<std::vector<double>>();

    for (const json& jt : j.at("trees")) {
      TreeModel tree;
      tree.n_classes = model.n_classes;
      tree.n_features = model.n_features;
      tree.params = model.params.tree;
      for (const json& jn : jt) {
        TreeNode n;
        n.feature = jn.at(0).get<int>();
        n.threshold = jn.at(1).get<double>();
        n.left = jn.at(2).get<int>();
        n.right = jn.at(3).get<int>();
        n.impurity_decrease = jn.at(4).get<double>();
        n.sample_fraction = jn.at(5).get<double>();
        n.class_counts = jn.at(6).get<std::vector<std::size_t>>();
        tree.nodes.push_back(std::move(n));
      }
      if (tree.nodes.empty()) throw ParseError("model tree has no nodes");
      model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) throw ParseError("model has no trees");
    return model;
  } catch (const json::exception& e) {
    throw ParseError("malformed model file: " + std::string(e.what()));
  }
}

}  // namespace tmd
