#include "tmd/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tmd/error.hpp"
#include "tmd/eval.hpp"
#include "tmd/ingest.hpp"
#include "tmd/io.hpp"
#include "tmd/rng.hpp"
#include "tmd/version.hpp"

namespace tmd {

namespace {

using nlohmann::json;

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kForestStream = 2;
constexpr std::uint64_t kSynthStream = 3;

const std::set<std::string> kKnownExperiments = {
    "multiclass", "pairwise", "importance", "loo", "external"};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + value +
                    "'");
}

std::int64_t parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("key '" + key + "': expected an integer, got '" +
                      value + "'");
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" +
                      value + "'");
  }
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value +
                      "'");
  }
}

std::vector<SensorKind> parse_sensor_list(const std::string& value,
                                          const std::string& key) {
  std::vector<SensorKind> out;
  for (const std::string& name : split_list(value)) {
    SensorKind kind = parse_sensor_kind(name);
    if (kind == SensorKind::Unknown) {
      throw ConfigError("key '" + key + "': unknown sensor '" + name + "'");
    }
    out.push_back(kind);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_accuracy(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(
    const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  config.sensor_sets = {sensor_set_d1(), sensor_set_d2(), sensor_set_d3()};
  bool sensor_sets_explicit = false;
  bool synthetic = false;
  SynthDataConfig synth;

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };

  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;

    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      static const std::set<std::string> kSections = {
          "run", "data", "windowing", "sensor_sets", "split", "classifier",
          "external"};
      if (!kSections.count(section)) {
        throw ConfigError("unknown section '[" + section + "]'");
      }
      continue;
    }

    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    std::string qual = section + "." + key;

    if (section == "run") {
      if (key == "seed") {
        config.seed = parse_u64(value, qual);
        config.seed_set = true;
      } else if (key == "output_dir") {
        config.output_dir = resolve(value);
      } else if (key == "experiments") {
        config.experiments = split_list(value);
      } else if (key == "jobs") {
        config.jobs = static_cast<int>(parse_int(value, qual));
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else if (section == "data") {
      if (key == "manifest") {
        config.manifest = resolve(value);
      } else if (key == "synthetic") {
        synthetic = parse_bool(value, qual);
      } else if (key == "synth_users") {
        synth.users = static_cast<int>(parse_int(value, qual));
      } else if (key == "synth_sessions_per_class") {
        synth.sessions_per_class = static_cast<int>(parse_int(value, qual));
      } else if (key == "synth_seconds_per_session") {
        synth.seconds_per_session = parse_real(value, qual);
      } else if (key == "synth_sensors") {
        synth.sensors = parse_sensor_list(value, qual);
      } else if (key == "balance") {
        config.balance = parse_bool(value, qual);
      } else if (key == "lenient") {
        config.lenient_parse = parse_bool(value, qual);
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else if (section == "windowing") {
      if (key == "window_seconds") {
        config.windowing.window_seconds = parse_real(value, qual);
      } else if (key == "overlap") {
        config.windowing.overlap_fraction = parse_real(value, qual);
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else if (section == "sensor_sets") {
      if (!sensor_sets_explicit) {
        config.sensor_sets.clear();
        sensor_sets_explicit = true;
      }
      try {
        config.sensor_sets.push_back(
            make_sensor_set(key, parse_sensor_list(value, qual)));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("sensor set '" + key + "': " + e.what());
      }
    } else if (section == "split") {
      if (key == "mode") {
        if (value == "grouped") {
          config.split.mode = SplitSpec::Mode::GroupedBySession;
        } else if (value == "windows") {
          config.split.mode = SplitSpec::Mode::WindowLevel;
        } else {
          throw ConfigError("split.mode must be 'grouped' or 'windows'");
        }
      } else if (key == "test_fraction") {
        config.split.test_fraction = parse_real(value, qual);
      } else if (key == "stratify") {
        config.split.stratify = parse_bool(value, qual);
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else if (section == "classifier") {
      if (key == "algorithm") {
        config.algorithm = value;
      } else if (key == "trees") {
        config.forest.n_trees = static_cast<int>(parse_int(value, qual));
      } else if (key == "max_depth") {
        int d = static_cast<int>(parse_int(value, qual));
        if (d > 0) config.forest.tree.max_depth = d;
      } else if (key == "min_samples_split") {
        config.forest.tree.min_samples_split =
            static_cast<int>(parse_int(value, qual));
      } else if (key == "min_samples_leaf") {
        config.forest.tree.min_samples_leaf =
            static_cast<int>(parse_int(value, qual));
      } else if (key == "features_per_split") {
        config.forest.features_per_split =
            static_cast<int>(parse_int(value, qual));
      } else if (key == "bootstrap") {
        config.forest.bootstrap = parse_bool(value, qual);
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else if (section == "external") {
      if (key == "predictions") {
        config.external_predictions = resolve(value);
      } else {
        throw ConfigError("unknown key '" + qual + "'");
      }
    } else {
      throw ConfigError("key '" + key + "' outside any section");
    }
  }

  if (synthetic) config.synthetic = synth;
  validate_config(config);
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

void validate_config(const ExperimentConfig& config) {
  if (!config.seed_set) {
    throw ConfigError("run.seed is mandatory (runs must be replayable)");
  }
  if (config.jobs < 1) throw ConfigError("run.jobs must be >= 1");

  if (config.experiments.empty()) {
    throw ConfigError("run.experiments selects nothing");
  }
  for (const std::string& e : config.experiments) {
    if (!kKnownExperiments.count(e)) {
      throw ConfigError("unknown experiment '" + e + "'");
    }
  }

  if (config.manifest.has_value() == config.synthetic.has_value()) {
    throw ConfigError(
        "exactly one data source is required: data.manifest or "
        "data.synthetic");
  }
  if (config.manifest && !std::filesystem::exists(*config.manifest)) {
    throw ConfigError("manifest '" + config.manifest->string() +
                      "' does not exist");
  }
  if (config.synthetic) {
    if (config.synthetic->users < 1 ||
        config.synthetic->sessions_per_class < 1 ||
        !(config.synthetic->seconds_per_session > 0)) {
      throw ConfigError("synthetic data parameters must be positive");
    }
    if (config.synthetic->sensors.empty()) {
      throw ConfigError("data.synth_sensors must not be empty");
    }
  }

  try {
    config.windowing.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("windowing: ") + e.what());
  }

  if (config.sensor_sets.empty()) {
    throw ConfigError("at least one sensor set is required");
  }

  if (!(config.split.test_fraction > 0.0 &&
        config.split.test_fraction < 1.0)) {
    throw ConfigError("split.test_fraction must be in (0, 1)");
  }

  if (config.algorithm != "forest" && config.algorithm != "tree") {
    throw ConfigError("classifier.algorithm must be 'forest' or 'tree'");
  }
  try {
    config.forest.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("classifier: ") + e.what());
  }

  bool wants_external =
      std::find(config.experiments.begin(), config.experiments.end(),
                "external") != config.experiments.end();
  if (wants_external) {
    if (!config.external_predictions) {
      throw ConfigError(
          "experiment 'external' requires external.predictions");
    }
    if (!std::filesystem::exists(*config.external_predictions)) {
      throw ConfigError("predictions file '" +
                        config.external_predictions->string() +
                        "' does not exist");
    }
  }
}

std::uint64_t split_seed(const ExperimentConfig& config) {
  return mix_seed(config.seed, kSplitStream);
}
std::uint64_t forest_seed(const ExperimentConfig& config) {
  return mix_seed(config.seed, kForestStream);
}
std::uint64_t synth_seed(const ExperimentConfig& config) {
  return mix_seed(config.seed, kSynthStream);
}

std::vector<RecordingSession> load_config_sessions(
    const ExperimentConfig& config) {
  if (config.manifest) {
    ParseOptions options;
    options.lenient = config.lenient_parse;
    return ingest_manifest(*config.manifest, options);
  }

  const SynthDataConfig& sd = *config.synthetic;
  std::vector<RecordingSession> sessions;
  std::uint64_t counter = 0;
  for (int u = 1; u <= sd.users; ++u) {
    std::string user = "U" + std::to_string(u);
    for (ActivityClass c : kAllClasses) {
      for (int s = 0; s < sd.sessions_per_class; ++s) {
        std::string sid = "synth-" + user + "-" + std::string(to_string(c)) +
                          "-" + std::to_string(s);
        sessions.push_back(synthesize_session(
            c, sd.seconds_per_session, sd.sensors,
            mix_seed(synth_seed(config), counter++), user, sid));
      }
    }
  }
  return sessions;
}

namespace {

void atomic_write(const std::filesystem::path& path,
                  const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

FeatureSchema full_schema(const ExperimentConfig& config) {
  // Union of all configured sets, in canonical sensor order.
  std::set<SensorKind> members;
  for (const SensorSet& set : config.sensor_sets) {
    members.insert(set.members.begin(), set.members.end());
  }
  std::vector<SensorKind> ordered;
  for (SensorKind k : kCoreSensors) {
    if (members.count(k)) ordered.push_back(k);
  }
  return FeatureSchema::for_sensors(ordered);
}

ForestParams effective_params(const ExperimentConfig& config,
                              std::size_t n_features) {
  ForestParams params = config.forest;
  params.seed = forest_seed(config);
  if (config.algorithm == "tree") {
    // A 1-tree, no-bootstrap, all-features forest predicts identically to
    // a plain CART tree; this keeps one pipeline artifact type.
    params.n_trees = 1;
    params.bootstrap = false;
    params.features_per_split = static_cast<int>(n_features);
  }
  return params;
}

json config_to_json(const ExperimentConfig& config) {
  json sets = json::object();
  for (const SensorSet& s : config.sensor_sets) {
    json members = json::array();
    for (SensorKind k : s.members) members.push_back(sensor_name(k));
    sets[s.name] = members;
  }
  json data;
  if (config.manifest) data["manifest"] = config.manifest->string();
  if (config.synthetic) {
    json sensors = json::array();
    for (SensorKind k : config.synthetic->sensors) {
      sensors.push_back(sensor_name(k));
    }
    data["synthetic"] = {
        {"users", config.synthetic->users},
        {"sessions_per_class", config.synthetic->sessions_per_class},
        {"seconds_per_session", config.synthetic->seconds_per_session},
        {"sensors", sensors}};
  }
  data["balance"] = config.balance;

  return json{
      {"seed", config.seed},
      {"experiments", config.experiments},
      {"jobs", config.jobs},
      {"data", data},
      {"windowing",
       {{"window_seconds", config.windowing.window_seconds},
        {"overlap", config.windowing.overlap_fraction}}},
      {"sensor_sets", sets},
      {"split",
       {{"mode", config.split.mode == SplitSpec::Mode::GroupedBySession
                     ? "grouped"
                     : "windows"},
        {"test_fraction", config.split.test_fraction},
        {"stratify", config.split.stratify}}},
      {"classifier",
       {{"algorithm", config.algorithm},
        {"params", {{"n_trees", config.forest.n_trees},
                    {"features_per_split", config.forest.features_per_split},
                    {"bootstrap", config.forest.bootstrap},
                    {"max_depth", config.forest.tree.max_depth
                                      ? json(*config.forest.tree.max_depth)
                                      : json(nullptr)},
                    {"min_samples_split", config.forest.tree.min_samples_split},
                    {"min_samples_leaf", config.forest.tree.min_samples_leaf}}}}},
      {"external_predictions",
       config.external_predictions ? json(config.external_predictions->string())
                                   : json(nullptr)}};
}

json report_to_json(const EvaluationReport& report) {
  json classes = json::array();
  for (ActivityClass c : report.classes) classes.push_back(to_string(c));
  return json{{"classes", classes},         {"confusion", report.confusion},
              {"accuracy", report.accuracy}, {"precision", report.precision},
              {"recall", report.recall},     {"total", report.total},
              {"sensor_set", report.sensor_set}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);

  std::filesystem::path out_dir = config.output_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("TMD_OUTPUT_DIR");
    out_dir = (env && *env) ? std::filesystem::path(env)
                            : std::filesystem::path("tmd-out");
  }
  std::filesystem::create_directories(out_dir);

  RunResult result;

  // Ingest and featurize once; every experiment shares the same windows.
  std::vector<RecordingSession> sessions = load_config_sessions(config);
  FeatureSchema schema = full_schema(config);
  WindowedDataset full =
      featurize_sessions(sessions, config.windowing, schema);
  if (full.empty()) {
    throw DatasetError("no complete windows after featurization");
  }
  WindowedDataset dataset =
      config.balance ? balance_classes(full) : full;

  SplitSpec split_spec = config.split;
  split_spec.seed = split_seed(config);
  ForestParams params = effective_params(config, schema.feature_count());

  auto selected = [&](const std::string& name) {
    return std::find(config.experiments.begin(), config.experiments.end(),
                     name) != config.experiments.end();
  };
  auto run_cell = [&](const std::string& name, auto&& fn) {
    try {
      fn();
      result.completed.push_back(name);
    } catch (const std::exception& e) {
      result.failures.push_back(name + ": " + e.what());
    }
  };

  if (selected("multiclass")) {
    run_cell("multiclass", [&] {
      std::ostringstream table;
      table << "sensor_set,algorithm,accuracy,test_windows\n";
      for (const SensorSet& set : config.sensor_sets) {
        WindowedDataset restricted = select_sensor_set(dataset, set);
        SplitResult sr = split(restricted, split_spec);
        ForestModel model = train_forest(sr.train, params);
        EvaluationReport report = evaluate(model, sr.test);
        report.sensor_set = set.name;
        report.seed = config.seed;
        table << set.name << ',' << config.algorithm << ','
              << format_accuracy(report.accuracy) << ',' << report.total
              << '\n';
        atomic_write(out_dir / ("multiclass_" + set.name + ".json"),
                     report_to_json(report).dump(1) + "\n");
      }
      atomic_write(out_dir / "table3.csv", table.str());
    });
  }

  if (selected("pairwise")) {
    run_cell("pairwise", [&] {
      PairwiseMatrix matrix = pairwise_matrix(dataset, config.sensor_sets,
                                              params, split_spec, config.jobs);
      std::ostringstream csv;
      csv << "pair,sensor_set,accuracy,test_windows\n";
      for (const PairwiseCell& cell : matrix.cells) {
        csv << to_string(cell.pair) << ',' << cell.sensor_set << ','
            << format_accuracy(cell.accuracy) << ',' << cell.test_windows
            << '\n';
      }
      atomic_write(out_dir / "pairwise.csv", csv.str());
    });
  }

  if (selected("importance")) {
    run_cell("importance", [&] {
      ImportanceMap map = importance_map(dataset, config.sensor_sets, params,
                                         split_spec, config.jobs);
      // Wide, plot-ready layout: one row per feature column of the full
      // schema; blank cells where the sensor is absent from the set.
      std::vector<std::string> all_columns = schema.column_names();
      std::ostringstream csv;
      csv << "column";
      for (const ImportanceCell& cell : map.cells) {
        csv << ',' << to_string(cell.pair) << '@' << cell.sensor_set;
      }
      csv << '\n';
      for (std::size_t i = 0; i < all_columns.size(); ++i) {
        csv << all_columns[i];
        for (const ImportanceCell& cell : map.cells) {
          csv << ',';
          std::vector<std::string> cell_columns = cell.schema.column_names();
          auto it = std::find(cell_columns.begin(), cell_columns.end(),
                              all_columns[i]);
          if (it != cell_columns.end()) {
            csv << format_double(
                cell.importance[static_cast<std::size_t>(
                    it - cell_columns.begin())]);
          }
        }
        csv << '\n';
      }
      atomic_write(out_dir / "importance.csv", csv.str());
    });
  }

  if (selected("loo")) {
    run_cell("loo", [&] {
      LooReport report = leave_one_out_report(dataset, config.sensor_sets,
                                              params, split_spec, config.jobs);
      std::ostringstream csv;
      csv << "user,class_count,sensor_set,accuracy_all_classes,"
             "accuracy_own_classes,baseline\n";
      for (const LooUserResult& u : report.users) {
        for (const SensorSet& set : config.sensor_sets) {
          csv << u.user << ',' << u.class_count << ',' << set.name << ','
              << format_accuracy(u.accuracy_all_classes.at(set.name)) << ','
              << format_accuracy(u.accuracy_own_classes.at(set.name)) << ','
              << format_accuracy(report.baseline.at(set.name)) << '\n';
        }
      }
      atomic_write(out_dir / "loo.csv", csv.str());
    });
  }

  if (selected("external")) {
    run_cell("external", [&] {
      // The external service saw every captured window; evaluate against
      // the unbalanced dataset.
      std::vector<ExternalPrediction> predictions =
          load_external_predictions(*config.external_predictions);
      ExternalEvalReport report = external_label_eval(predictions, full);

      std::ostringstream csv;
      csv << "true_class";
      for (int cat = 0; cat < kNumExternalCategories; ++cat) {
        csv << ',' << to_string(static_cast<ExternalCategory>(cat));
      }
      csv << ",total\n";
      for (const auto& [c, counts] : report.distribution) {
        std::size_t total = 0;
        for (std::size_t n : counts) total += n;
        csv << to_string(c);
        for (std::size_t n : counts) csv << ',' << n;
        csv << ',' << total << '\n';
      }
      atomic_write(out_dir / "extmap.csv", csv.str());

      json summary{{"total_windows", report.total_windows},
                   {"classified_windows", report.classified_windows},
                   {"coverage", report.coverage}};
      atomic_write(out_dir / "extmap_summary.json", summary.dump(1) + "\n");
    });
  }

  json manifest{{"version", kVersion},
                {"config", config_to_json(config)},
                {"master_seed", config.seed},
                {"derived_seeds",
                 {{"split", split_seed(config)},
                  {"forest", forest_seed(config)},
                  {"synth", synth_seed(config)}}},
                {"schema_hash", schema.hash()},
                {"windows_total", full.size()},
                {"windows_after_balance", dataset.size()},
                {"completed", result.completed},
                {"failures", result.failures}};
  atomic_write(out_dir / "run_manifest.json", manifest.dump(1) + "\n");

  return result;
}

}  // namespace tmd
