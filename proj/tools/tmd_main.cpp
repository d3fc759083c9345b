#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tmd/error.hpp"
#include "tmd/eval.hpp"
#include "tmd/experiment.hpp"
#include "tmd/ingest.hpp"
#include "tmd/io.hpp"
#include "tmd/rng.hpp"
#include "tmd/version.hpp"

namespace {

using namespace tmd;

std::vector<SensorKind> parse_sensor_names(const std::string& csv) {
  std::vector<SensorKind> out;
  std::stringstream ss(csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    SensorKind kind = parse_sensor_kind(name);
    if (kind == SensorKind::Unknown) {
      throw ConfigError("unknown sensor '" + name + "'");
    }
    out.push_back(kind);
  }
  if (out.empty()) throw ConfigError("empty sensor list");
  return out;
}

ActivityClass parse_class_or_throw(const std::string& name) {
  auto c = parse_activity_class(name);
  if (!c) throw ConfigError("unknown activity class '" + name + "'");
  return *c;
}

std::vector<SensorSet> parse_set_names(const std::string& csv) {
  std::vector<SensorSet> out;
  std::stringstream ss(csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    if (name == "D1" || name == "d1") {
      out.push_back(sensor_set_d1());
    } else if (name == "D2" || name == "d2") {
      out.push_back(sensor_set_d2());
    } else if (name == "D3" || name == "d3") {
      out.push_back(sensor_set_d3());
    } else {
      throw ConfigError("unknown sensor set '" + name +
                        "' (use D1, D2, D3, or a config file for custom sets)");
    }
  }
  if (out.empty()) throw ConfigError("empty sensor set list");
  return out;
}

// Writes to the path when given, stdout otherwise.
void emit(const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    std::ofstream out(*path, std::ios::binary);
    if (!out) throw Error("cannot write '" + *path + "'");
    out << text;
  } else {
    std::cout << text;
  }
}

struct ForestOptions {
  int trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  int features_per_split = 0;
  bool no_bootstrap = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--trees", trees, "Number of trees (default 100)");
    cmd->add_option("--max-depth", max_depth, "Max tree depth, 0 = unlimited");
    cmd->add_option("--min-samples-split", min_samples_split,
                    "Minimum rows to split a node");
    cmd->add_option("--min-samples-leaf", min_samples_leaf,
                    "Minimum rows per leaf");
    cmd->add_option("--features-per-split", features_per_split,
                    "Columns sampled per node, 0 = floor(sqrt(F))");
    cmd->add_flag("--no-bootstrap", no_bootstrap,
                  "Train every tree on the full sample");
  }

  ForestParams params(std::uint64_t forest_seed) const {
    ForestParams p;
    p.n_trees = trees;
    if (max_depth > 0) p.tree.max_depth = max_depth;
    p.tree.min_samples_split = min_samples_split;
    p.tree.min_samples_leaf = min_samples_leaf;
    p.features_per_split = features_per_split;
    p.bootstrap = !no_bootstrap;
    p.seed = forest_seed;
    return p;
  }
};

struct SplitOptions {
  std::string mode = "grouped";
  double test_fraction = 0.2;
  bool no_stratify = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--split-mode", mode, "grouped | windows");
    cmd->add_option("--test-fraction", test_fraction,
                    "Test share of the split (default 0.2)");
    cmd->add_flag("--no-stratify", no_stratify,
                  "Disable class stratification");
  }

  SplitSpec spec(std::uint64_t seed) const {
    SplitSpec s;
    if (mode == "grouped") {
      s.mode = SplitSpec::Mode::GroupedBySession;
    } else if (mode == "windows") {
      s.mode = SplitSpec::Mode::WindowLevel;
    } else {
      throw ConfigError("--split-mode must be 'grouped' or 'windows'");
    }
    s.test_fraction = test_fraction;
    s.stratify = !no_stratify;
    s.seed = seed;
    return s;
  }
};

// The CLI fans one --seed out the same way `run` does with its master
// seed: stream 1 for splits, stream 2 for forests.
std::uint64_t cli_split_seed(std::uint64_t seed) { return mix_seed(seed, 1); }
std::uint64_t cli_forest_seed(std::uint64_t seed) { return mix_seed(seed, 2); }

void write_features(const WindowedDataset& ds, const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin") {
    write_feature_cache(ds, path);
  } else {
    write_feature_csv(ds, std::filesystem::path(path));
  }
}

std::string format_accuracy(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Transportation mode detection pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand(
      "synth", "Generate a seeded synthetic session as canonical CSV");
  std::string synth_class;
  double synth_seconds = 60.0;
  std::uint64_t synth_seed_v = 0;
  std::string synth_sensors = "accelerometer,gyroscope,sound,"
                              "linear_acceleration,speed,rotation_vector";
  std::string synth_user = "synth";
  std::string synth_session;
  std::optional<std::string> synth_out;
  synth->add_option("--class", synth_class, "Activity class")->required();
  synth->add_option("--seconds", synth_seconds, "Session length in seconds")
      ->required();
  synth->add_option("--seed", synth_seed_v, "Generator seed")->required();
  synth->add_option("--sensors", synth_sensors, "Comma-separated sensors");
  synth->add_option("--user", synth_user, "User id");
  synth->add_option("--session", synth_session, "Session id");
  synth->add_option("-o,--output", synth_out, "Output file (default stdout)");
  synth->callback([&] {
    RecordingSession session = synthesize_session(
        parse_class_or_throw(synth_class), synth_seconds,
        parse_sensor_names(synth_sensors), synth_seed_v, synth_user,
        synth_session);
    std::ostringstream out;
    write_log(session, out);
    emit(synth_out, out.str());
  });

  // --- ingest ----------------------------------------------------------------
  auto* ingest = app.add_subcommand(
      "ingest", "Parse and validate a raw log; emit normalized canonical CSV");
  std::string ingest_file, ingest_label, ingest_user = "U1";
  bool ingest_lenient = false;
  std::optional<std::string> ingest_out;
  ingest->add_option("--file", ingest_file, "Raw log file")->required();
  ingest->add_option("--label", ingest_label, "Activity class")->required();
  ingest->add_option("--user", ingest_user, "User id");
  ingest->add_flag("--lenient", ingest_lenient,
                   "Skip malformed lines instead of failing");
  ingest->add_option("-o,--output", ingest_out, "Output file (default stdout)");
  ingest->callback([&] {
    ParseOptions options;
    options.lenient = ingest_lenient;
    ParseReport report;
    RecordingSession session =
        parse_log(ingest_file, parse_class_or_throw(ingest_label),
                  ingest_user, options, &report);
    if (report.lines_skipped > 0) {
      std::cerr << "skipped " << report.lines_skipped
                << " malformed lines\n";
    }
    std::ostringstream out;
    write_log(session, out);
    emit(ingest_out, out.str());
  });

  // --- featurize --------------------------------------------------------------
  auto* featurize = app.add_subcommand(
      "featurize", "Window sessions from a manifest and extract features");
  std::string feat_manifest;
  double feat_window = 5.0, feat_overlap = 0.0;
  std::string feat_sensors = "accelerometer,gyroscope,sound,"
                             "linear_acceleration,speed,rotation_vector";
  bool feat_per_axis = false, feat_lenient = false;
  std::optional<std::string> feat_out;
  featurize->add_option("--manifest", feat_manifest,
                        "Session manifest (path,user_id,label)")
      ->required();
  featurize->add_option("--window", feat_window, "Window length in seconds");
  featurize->add_option("--overlap", feat_overlap, "Overlap fraction [0,1)");
  featurize->add_option("--sensors", feat_sensors, "Schema sensors");
  featurize->add_flag("--per-axis", feat_per_axis,
                      "Per-axis features instead of magnitudes");
  featurize->add_flag("--lenient", feat_lenient, "Skip malformed log lines");
  featurize->add_option("-o,--output", feat_out,
                        "Output file; .bin = binary cache (default stdout CSV)");
  featurize->callback([&] {
    ParseOptions options;
    options.lenient = feat_lenient;
    std::vector<RecordingSession> sessions =
        ingest_manifest(feat_manifest, options);
    WindowingConfig config{feat_window, feat_overlap};
    FeatureSchema schema =
        FeatureSchema::for_sensors(parse_sensor_names(feat_sensors),
                                   feat_per_axis);
    WindowedDataset ds = featurize_sessions(sessions, config, schema);
    if (feat_out) {
      write_features(ds, *feat_out);
    } else {
      std::ostringstream out;
      write_feature_csv(ds, out);
      std::cout << out.str();
    }
  });

  // --- train -------------------------------------------------------------------
  auto* train = app.add_subcommand("train",
                                   "Train a forest (or tree) on a feature file");
  std::string train_features, train_model, train_algorithm = "forest";
  std::string train_set;
  bool train_balance = false;
  std::uint64_t train_seed = 0;
  ForestOptions train_forest_opts;
  train->add_option("--features", train_features, "Feature CSV or cache")
      ->required();
  train->add_option("--model", train_model, "Model output path")->required();
  train->add_option("--seed", train_seed, "Master seed")->required();
  train->add_option("--algorithm", train_algorithm, "forest | tree");
  train->add_option("--sensor-set", train_set,
                    "Named set (D1/D2/D3) or comma-separated sensors");
  train->add_flag("--balance", train_balance,
                  "Balance class durations before training");
  train_forest_opts.attach(train);
  train->callback([&] {
    WindowedDataset ds = read_features_auto(train_features);
    if (!train_set.empty()) {
      SensorSet set;
      if (train_set == "D1" || train_set == "D2" || train_set == "D3" ||
          train_set == "d1" || train_set == "d2" || train_set == "d3") {
        set = parse_set_names(train_set)[0];
      } else {
        set = make_sensor_set("custom", parse_sensor_names(train_set));
      }
      ds = select_sensor_set(ds, set);
    }
    if (train_balance) ds = balance_classes(ds);

    ForestParams params = train_forest_opts.params(cli_forest_seed(train_seed));
    if (train_algorithm == "tree") {
      params.n_trees = 1;
      params.bootstrap = false;
      params.features_per_split =
          static_cast<int>(ds.schema.feature_count());
    } else if (train_algorithm != "forest") {
      throw ConfigError("--algorithm must be 'forest' or 'tree'");
    }
    ForestModel model = train_forest(ds, params);
    save_forest(model, train_model);
    std::cerr << "trained on " << ds.size() << " windows, "
              << ds.schema.feature_count() << " features\n";
  });

  // --- predict ---------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand(
      "predict", "Stream feature CSV rows to labels, one per line");
  std::string predict_model;
  std::optional<std::string> predict_in, predict_out;
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_cmd->add_option("--input", predict_in,
                          "Feature CSV (default stdin)");
  predict_cmd->add_option("-o,--output", predict_out,
                          "Label output (default stdout)");
  predict_cmd->callback([&] {
    ForestModel model = load_forest(predict_model);

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (predict_in) {
      file_in.open(*predict_in);
      if (!file_in) throw Error("cannot open '" + *predict_in + "'");
      in = &file_in;
    }
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (predict_out) {
      file_out.open(*predict_out);
      if (!file_out) throw Error("cannot write '" + *predict_out + "'");
      out = &file_out;
    }

    std::string line;
    std::size_t line_no = 0;
    std::optional<FeatureCsvLayout> layout;
    while (std::getline(*in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!layout) {
        layout = FeatureCsvLayout::parse_header(line);
        if (model.schema_hash != 0 &&
            layout->schema.hash() != model.schema_hash) {
          throw SchemaMismatch(
              "input schema does not match the model's training schema");
        }
        continue;
      }
      FeatureVector v = layout->parse_row(line, line_no);
      *out << to_string(predict(model, v)) << '\n';
    }
    if (!layout) throw ParseError("no feature CSV header on input");
  });

  // --- eval --------------------------------------------------------------------
  auto* eval_cmd =
      app.add_subcommand("eval", "Evaluate a model on a test feature file");
  std::string eval_model, eval_features;
  std::optional<std::string> eval_out;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--features", eval_features, "Test features")
      ->required();
  eval_cmd->add_option("-o,--output", eval_out,
                       "Report JSON output (default stdout)");
  eval_cmd->callback([&] {
    ForestModel model = load_forest(eval_model);
    WindowedDataset test = read_features_auto(eval_features);
    EvaluationReport report = evaluate(model, test);

    nlohmann::json classes = nlohmann::json::array();
    for (ActivityClass c : report.classes) classes.push_back(to_string(c));
    nlohmann::json j{{"classes", classes},
                     {"confusion", report.confusion},
                     {"accuracy", report.accuracy},
                     {"precision", report.precision},
                     {"recall", report.recall},
                     {"total", report.total}};
    emit(eval_out, j.dump(1) + "\n");
  });

  // --- pairwise ----------------------------------------------------------------
  auto* pairwise = app.add_subcommand(
      "pairwise", "Class-vs-class accuracy per sensor set");
  std::string pw_features, pw_sets = "D1,D2,D3";
  std::uint64_t pw_seed = 0;
  int pw_jobs = 1;
  std::optional<std::string> pw_out;
  ForestOptions pw_forest;
  SplitOptions pw_split;
  pairwise->add_option("--features", pw_features, "Feature file")->required();
  pairwise->add_option("--sets", pw_sets, "Sensor sets (D1,D2,D3)");
  pairwise->add_option("--seed", pw_seed, "Master seed")->required();
  pairwise->add_option("--jobs", pw_jobs, "Parallel experiment cells");
  pairwise->add_option("-o,--output", pw_out, "CSV output (default stdout)");
  pw_forest.attach(pairwise);
  pw_split.attach(pairwise);
  pairwise->callback([&] {
    WindowedDataset ds = read_features_auto(pw_features);
    PairwiseMatrix matrix = pairwise_matrix(
        ds, parse_set_names(pw_sets), pw_forest.params(cli_forest_seed(pw_seed)),
        pw_split.spec(cli_split_seed(pw_seed)), pw_jobs);
    std::ostringstream csv;
    csv << "pair,sensor_set,accuracy,test_windows\n";
    for (const PairwiseCell& cell : matrix.cells) {
      csv << to_string(cell.pair) << ',' << cell.sensor_set << ','
          << format_accuracy(cell.accuracy) << ',' << cell.test_windows
          << '\n';
    }
    emit(pw_out, csv.str());
  });

  // --- importance ---------------------------------------------------------------
  auto* importance = app.add_subcommand(
      "importance", "Per-pair forest feature importance per sensor set");
  std::string imp_features, imp_sets = "D1,D2,D3";
  std::uint64_t imp_seed = 0;
  int imp_jobs = 1;
  std::optional<std::string> imp_out;
  ForestOptions imp_forest;
  SplitOptions imp_split;
  importance->add_option("--features", imp_features, "Feature file")
      ->required();
  importance->add_option("--sets", imp_sets, "Sensor sets (D1,D2,D3)");
  importance->add_option("--seed", imp_seed, "Master seed")->required();
  importance->add_option("--jobs", imp_jobs, "Parallel experiment cells");
  importance->add_option("-o,--output", imp_out, "CSV output (default stdout)");
  imp_forest.attach(importance);
  imp_split.attach(importance);
  importance->callback([&] {
    WindowedDataset ds = read_features_auto(imp_features);
    ImportanceMap map = importance_map(
        ds, parse_set_names(imp_sets),
        imp_forest.params(cli_forest_seed(imp_seed)),
        imp_split.spec(cli_split_seed(imp_seed)), imp_jobs);

    std::vector<std::string> all_columns = ds.schema.column_names();
    std::ostringstream csv;
    csv << "column";
    for (const ImportanceCell& cell : map.cells) {
      csv << ',' << to_string(cell.pair) << '@' << cell.sensor_set;
    }
    csv << '\n';
    char buf[32];
    for (const std::string& column : all_columns) {
      csv << column;
      for (const ImportanceCell& cell : map.cells) {
        csv << ',';
        std::vector<std::string> cell_columns = cell.schema.column_names();
        auto it = std::find(cell_columns.begin(), cell_columns.end(), column);
        if (it != cell_columns.end()) {
          std::snprintf(buf, sizeof(buf), "%.9g",
                        cell.importance[static_cast<std::size_t>(
                            it - cell_columns.begin())]);
          csv << buf;
        }
      }
      csv << '\n';
    }
    emit(imp_out, csv.str());
  });

  // --- loo ------------------------------------------------------------------------
  auto* loo = app.add_subcommand(
      "loo", "Leave-one-user-out accuracy, both training regimes");
  std::string loo_features, loo_sets = "D1,D2,D3", loo_user;
  std::uint64_t loo_seed = 0;
  int loo_jobs = 1;
  std::optional<std::string> loo_out;
  ForestOptions loo_forest;
  SplitOptions loo_split;
  loo->add_option("--features", loo_features, "Feature file")->required();
  loo->add_option("--sets", loo_sets, "Sensor sets (D1,D2,D3)");
  loo->add_option("--seed", loo_seed, "Master seed")->required();
  loo->add_option("--user", loo_user, "Single user (default: all users)");
  loo->add_option("--jobs", loo_jobs, "Parallel experiment cells");
  loo->add_option("-o,--output", loo_out, "CSV output (default stdout)");
  loo_forest.attach(loo);
  loo_split.attach(loo);
  loo->callback([&] {
    WindowedDataset ds = read_features_auto(loo_features);
    std::vector<SensorSet> sets = parse_set_names(loo_sets);
    ForestParams params = loo_forest.params(cli_forest_seed(loo_seed));

    LooReport report;
    if (!loo_user.empty()) {
      report.users.push_back(leave_one_out(ds, loo_user, sets, params));
      for (const SensorSet& set : sets) report.baseline[set.name] = 0.0;
    } else {
      report = leave_one_out_report(ds, sets, params,
                                    loo_split.spec(cli_split_seed(loo_seed)),
                                    loo_jobs);
    }

    std::ostringstream csv;
    csv << "user,class_count,sensor_set,accuracy_all_classes,"
           "accuracy_own_classes,baseline\n";
    for (const LooUserResult& u : report.users) {
      for (const SensorSet& set : sets) {
        csv << u.user << ',' << u.class_count << ',' << set.name << ','
            << format_accuracy(u.accuracy_all_classes.at(set.name)) << ','
            << format_accuracy(u.accuracy_own_classes.at(set.name)) << ','
            << format_accuracy(report.baseline.count(set.name)
                                   ? report.baseline.at(set.name)
                                   : 0.0)
            << '\n';
      }
    }
    emit(loo_out, csv.str());
  });

  // --- extmap --------------------------------------------------------------------
  auto* extmap = app.add_subcommand(
      "extmap", "Evaluate externally supplied predictions against truth");
  std::string ext_pred, ext_truth;
  std::optional<std::string> ext_out;
  extmap->add_option("--pred", ext_pred, "CSV window_id,external_label")
      ->required();
  extmap->add_option("--truth", ext_truth, "Feature file with true labels")
      ->required();
  extmap->add_option("-o,--output", ext_out, "CSV output (default stdout)");
  extmap->callback([&] {
    WindowedDataset truth = read_features_auto(ext_truth);
    ExternalEvalReport report =
        external_label_eval(load_external_predictions(ext_pred), truth);

    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", report.coverage);
    std::ostringstream csv;
    csv << "# total=" << report.total_windows
        << " classified=" << report.classified_windows << " coverage=" << buf
        << '\n';
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
    emit(ext_out, csv.str());
  });

  // --- run -------------------------------------------------------------------------
  auto* run = app.add_subcommand(
      "run", "Execute experiments from a declarative config file");
  std::string run_config;
  std::optional<std::string> run_out;
  std::optional<int> run_jobs;
  run->add_option("--config", run_config, "Experiment config file")
      ->required();
  run->add_option("-o,--output-dir", run_out, "Override output directory");
  run->add_option("--jobs", run_jobs, "Override run.jobs");
  run->callback([&] {
    ExperimentConfig config = load_experiment_config(run_config);
    if (run_out) config.output_dir = *run_out;
    if (run_jobs) config.jobs = *run_jobs;
    validate_config(config);

    RunResult result = run_experiment(config);
    for (const std::string& name : result.completed) {
      std::cerr << "completed: " << name << '\n';
    }
    for (const std::string& failure : result.failures) {
      std::cerr << "FAILED " << failure << '\n';
    }
    if (!result.ok()) throw Error("some experiment cells failed");
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
