#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tmd/error.hpp"
#include "tmd/eval.hpp"
#include "tmd/experiment.hpp"
#include "tmd/ingest.hpp"
#include "tmd/io.hpp"
#include "tmd/models.hpp"
#include "tmd/version.hpp"

namespace py = pybind11;
using namespace tmd;

PYBIND11_MODULE(_tmd, m) {
  m.doc() = "Transportation mode detection pipeline (C++ core)";
  m.attr("__version__") = kVersion;

  py::register_exception<SchemaMismatch>(m, "SchemaMismatchError");
  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DatasetError>(m, "DatasetError");
  py::register_exception<TrainingError>(m, "TrainingError");

  // --- enums ---------------------------------------------------------------
  py::enum_<ActivityClass>(m, "ActivityClass")
      .value("Bus", ActivityClass::Bus)
      .value("Car", ActivityClass::Car)
      .value("Still", ActivityClass::Still)
      .value("Train", ActivityClass::Train)
      .value("Walking", ActivityClass::Walking);

  py::enum_<SensorKind>(m, "SensorKind")
      .value("Accelerometer", SensorKind::Accelerometer)
      .value("Gyroscope", SensorKind::Gyroscope)
      .value("Sound", SensorKind::Sound)
      .value("LinearAcceleration", SensorKind::LinearAcceleration)
      .value("Speed", SensorKind::Speed)
      .value("RotationVector", SensorKind::RotationVector)
      .value("Light", SensorKind::Light)
      .value("Pressure", SensorKind::Pressure)
      .value("MagneticField", SensorKind::MagneticField)
      .value("Gravity", SensorKind::Gravity)
      .value("Proximity", SensorKind::Proximity)
      .value("Unknown", SensorKind::Unknown);

  py::enum_<Stat>(m, "Stat")
      .value("Min", Stat::Min)
      .value("Max", Stat::Max)
      .value("Mean", Stat::Mean)
      .value("Std", Stat::Std);

  py::enum_<ExternalLabel>(m, "ExternalLabel")
      .value("InVehicle", ExternalLabel::InVehicle)
      .value("OnBicycle", ExternalLabel::OnBicycle)
      .value("OnFoot", ExternalLabel::OnFoot)
      .value("Running", ExternalLabel::Running)
      .value("Walking", ExternalLabel::Walking)
      .value("Still", ExternalLabel::Still)
      .value("Tilting", ExternalLabel::Tilting)
      .value("Unknown", ExternalLabel::Unknown);

  py::enum_<MappedLabel>(m, "MappedLabel")
      .value("Walking", MappedLabel::Walking)
      .value("Still", MappedLabel::Still)
      .value("Vehicle", MappedLabel::Vehicle)
      .value("Unmapped", MappedLabel::Unmapped);

  m.def("class_name",
        [](ActivityClass c) { return std::string(to_string(c)); });
  m.def("parse_activity_class",
        [](const std::string& s) { return parse_activity_class(s); });
  m.def("sensor_name",
        [](SensorKind k) { return std::string(sensor_name(k)); });
  m.def("parse_sensor_kind",
        [](const std::string& s) { return parse_sensor_kind(s); });
  m.def("axis_count", &axis_count);
  m.def("is_excluded", &is_excluded);
  m.def("is_featurizable", &is_featurizable);

  // --- ingest ----------------------------------------------------------------
  py::class_<SensorReading>(m, "SensorReading")
      .def(py::init<>())
      .def_readwrite("timestamp_ms", &SensorReading::timestamp_ms)
      .def_readwrite("sensor", &SensorReading::sensor)
      .def_readwrite("accuracy", &SensorReading::accuracy)
      .def_readwrite("values", &SensorReading::values)
      .def_readwrite("raw_name", &SensorReading::raw_name);

  py::class_<RecordingSession>(m, "RecordingSession")
      .def(py::init<>())
      .def_readwrite("session_id", &RecordingSession::session_id)
      .def_readwrite("user_id", &RecordingSession::user_id)
      .def_readwrite("label", &RecordingSession::label)
      .def_readwrite("readings", &RecordingSession::readings)
      .def_property_readonly("duration_ms", &RecordingSession::duration_ms)
      .def("__len__",
           [](const RecordingSession& s) { return s.readings.size(); });

  m.def(
      "parse_log",
      [](const std::filesystem::path& path, ActivityClass label,
         const std::string& user_id, bool lenient) {
        ParseOptions options;
        options.lenient = lenient;
        return parse_log(path, label, user_id, options);
      },
      py::arg("path"), py::arg("label"), py::arg("user_id"),
      py::arg("lenient") = false);
  m.def("write_log",
        [](const RecordingSession& s, const std::filesystem::path& path) {
          write_log(s, path);
        });
  m.def("synthesize_session", &synthesize_session, py::arg("activity"),
        py::arg("seconds"), py::arg("sensors"), py::arg("seed"),
        py::arg("user_id") = "synth", py::arg("session_id") = "");

  // --- features --------------------------------------------------------------
  py::class_<WindowingConfig>(m, "WindowingConfig")
      .def(py::init<>())
      .def(py::init([](double window_seconds, double overlap) {
             WindowingConfig c{window_seconds, overlap};
             c.validate();
             return c;
           }),
           py::arg("window_seconds") = 5.0, py::arg("overlap") = 0.0)
      .def_readwrite("window_seconds", &WindowingConfig::window_seconds)
      .def_readwrite("overlap_fraction", &WindowingConfig::overlap_fraction);

  py::class_<FeatureSchema>(m, "FeatureSchema")
      .def_static("for_sensors", &FeatureSchema::for_sensors,
                  py::arg("sensors"), py::arg("per_axis") = false)
      .def_readonly("sensors", &FeatureSchema::sensors)
      .def_readonly("per_axis", &FeatureSchema::per_axis)
      .def_property_readonly("feature_count", &FeatureSchema::feature_count)
      .def("column", py::overload_cast<SensorKind, Stat>(
                         &FeatureSchema::column, py::const_))
      .def("column_names", &FeatureSchema::column_names)
      .def("hash", &FeatureSchema::hash);

  py::class_<FeatureVector>(m, "FeatureVector")
      .def(py::init<>())
      .def_readwrite("values", &FeatureVector::values)
      .def_readwrite("missing", &FeatureVector::missing)
      .def_readwrite("label", &FeatureVector::label)
      .def_readwrite("user_id", &FeatureVector::user_id)
      .def_readwrite("session_id", &FeatureVector::session_id)
      .def_readwrite("window_index", &FeatureVector::window_index)
      .def("has_missing", &FeatureVector::has_missing);

  py::class_<RawWindow>(m, "RawWindow")
      .def_readonly("index", &RawWindow::index)
      .def_readonly("start_ms", &RawWindow::start_ms)
      .def_readonly("end_ms", &RawWindow::end_ms)
      .def_readonly("readings", &RawWindow::readings);

  m.def("partition_windows", &partition_windows);
  m.def("window_stats", &window_stats);
  m.def("featurize_session", &featurize_session);

  py::class_<Imputer>(m, "Imputer")
      .def_readonly("means", &Imputer::means)
      .def_readonly("never_observed", &Imputer::never_observed);

  m.def("fit_imputer", &fit_imputer);
  m.def("apply_imputer", &apply_imputer);

  // --- dataset ----------------------------------------------------------------
  py::class_<SensorSet>(m, "SensorSet")
      .def_readwrite("name", &SensorSet::name)
      .def_readwrite("members", &SensorSet::members);

  m.def("make_sensor_set", &make_sensor_set);
  m.def("sensor_set_d1", &sensor_set_d1);
  m.def("sensor_set_d2", &sensor_set_d2);
  m.def("sensor_set_d3", &sensor_set_d3);

  py::class_<WindowedDataset>(m, "WindowedDataset")
      .def(py::init<>())
      .def_readwrite("schema", &WindowedDataset::schema)
      .def_readwrite("window_seconds", &WindowedDataset::window_seconds)
      .def_readwrite("vectors", &WindowedDataset::vectors)
      .def("__len__", &WindowedDataset::size)
      .def("classes", &WindowedDataset::classes)
      .def("users", &WindowedDataset::users)
      .def("session_ids", &WindowedDataset::session_ids)
      .def("class_durations_seconds",
           &WindowedDataset::class_durations_seconds)
      .def("class_window_counts", &WindowedDataset::class_window_counts);

  m.def("featurize_sessions", &featurize_sessions);
  m.def("select_sensor_set", &select_sensor_set);
  m.def("filter_classes", &filter_classes);
  m.def(
      "balance_classes",
      [](const WindowedDataset& ds, bool seeded_random, std::uint64_t seed) {
        return balance_classes(ds,
                               seeded_random ? BalanceOrder::SeededRandom
                                             : BalanceOrder::EarliestFirst,
                               seed);
      },
      py::arg("dataset"), py::arg("seeded_random") = false,
      py::arg("seed") = 0);

  py::enum_<SplitSpec::Mode>(m, "SplitMode")
      .value("GroupedBySession", SplitSpec::Mode::GroupedBySession)
      .value("WindowLevel", SplitSpec::Mode::WindowLevel);

  py::class_<SplitSpec>(m, "SplitSpec")
      .def(py::init<>())
      .def_readwrite("mode", &SplitSpec::mode)
      .def_readwrite("test_fraction", &SplitSpec::test_fraction)
      .def_readwrite("seed", &SplitSpec::seed)
      .def_readwrite("stratify", &SplitSpec::stratify);

  py::class_<SplitResult>(m, "SplitResult")
      .def_readonly("train", &SplitResult::train)
      .def_readonly("test", &SplitResult::test);

  m.def("split", &split);
  m.def("leave_user_out", &leave_user_out, py::arg("dataset"),
        py::arg("user"), py::arg("classes") = std::nullopt);

  // --- models -----------------------------------------------------------------
  py::class_<TreeParams>(m, "TreeParams")
      .def(py::init<>())
      .def_readwrite("max_depth", &TreeParams::max_depth)
      .def_readwrite("min_samples_split", &TreeParams::min_samples_split)
      .def_readwrite("min_samples_leaf", &TreeParams::min_samples_leaf);

  py::class_<ForestParams>(m, "ForestParams")
      .def(py::init<>())
      .def_readwrite("n_trees", &ForestParams::n_trees)
      .def_readwrite("features_per_split", &ForestParams::features_per_split)
      .def_readwrite("bootstrap", &ForestParams::bootstrap)
      .def_readwrite("seed", &ForestParams::seed)
      .def_readwrite("tree", &ForestParams::tree);

  py::class_<ForestModel>(m, "ForestModel")
      .def_readonly("importance", &ForestModel::importance)
      .def_readonly("n_classes", &ForestModel::n_classes)
      .def_readonly("n_features", &ForestModel::n_features)
      .def_readonly("schema_hash", &ForestModel::schema_hash)
      .def_property_readonly(
          "n_trees",
          [](const ForestModel& f) { return f.trees.size(); });

  m.def("gini", [](const std::vector<std::size_t>& counts) {
    return gini(counts);
  });
  m.def(
      "train_forest",
      [](const WindowedDataset& train, const ForestParams& params) {
        return train_forest(train, params);
      },
      py::arg("train"), py::arg("params"));
  m.def("predict",
        [](const ForestModel& model, const FeatureVector& x) {
          return predict(model, x);
        });
  m.def("predict_proba",
        [](const ForestModel& model, const FeatureVector& x) {
          return predict_proba(model, x);
        });

  // --- eval --------------------------------------------------------------------
  py::class_<EvaluationReport>(m, "EvaluationReport")
      .def_readonly("classes", &EvaluationReport::classes)
      .def_readonly("confusion", &EvaluationReport::confusion)
      .def_readonly("total", &EvaluationReport::total)
      .def_readonly("accuracy", &EvaluationReport::accuracy)
      .def_readonly("precision", &EvaluationReport::precision)
      .def_readonly("recall", &EvaluationReport::recall);

  m.def("evaluate", &evaluate);
  m.def("evaluate_predictions", &evaluate_predictions);

  py::class_<ClassPair>(m, "ClassPair")
      .def_readonly("first", &ClassPair::first)
      .def_readonly("second", &ClassPair::second)
      .def("__repr__", [](const ClassPair& p) { return to_string(p); });

  py::class_<PairwiseCell>(m, "PairwiseCell")
      .def_readonly("pair", &PairwiseCell::pair)
      .def_readonly("sensor_set", &PairwiseCell::sensor_set)
      .def_readonly("accuracy", &PairwiseCell::accuracy)
      .def_readonly("test_windows", &PairwiseCell::test_windows);

  py::class_<PairwiseMatrix>(m, "PairwiseMatrix")
      .def_readonly("cells", &PairwiseMatrix::cells)
      .def("at", &PairwiseMatrix::at);

  m.def("all_class_pairs", &all_class_pairs);
  m.def("pairwise_matrix", &pairwise_matrix, py::arg("dataset"),
        py::arg("sensor_sets"), py::arg("params"), py::arg("split_spec"),
        py::arg("jobs") = 1);

  py::class_<ImportanceCell>(m, "ImportanceCell")
      .def_readonly("pair", &ImportanceCell::pair)
      .def_readonly("sensor_set", &ImportanceCell::sensor_set)
      .def_readonly("schema", &ImportanceCell::schema)
      .def_readonly("importance", &ImportanceCell::importance);

  py::class_<ImportanceMap>(m, "ImportanceMap")
      .def_readonly("cells", &ImportanceMap::cells);

  m.def("importance_map", &importance_map, py::arg("dataset"),
        py::arg("sensor_sets"), py::arg("params"), py::arg("split_spec"),
        py::arg("jobs") = 1);

  py::class_<LooUserResult>(m, "LooUserResult")
      .def_readonly("user", &LooUserResult::user)
      .def_readonly("class_count", &LooUserResult::class_count)
      .def_readonly("accuracy_all_classes",
                    &LooUserResult::accuracy_all_classes)
      .def_readonly("accuracy_own_classes",
                    &LooUserResult::accuracy_own_classes);

  py::class_<LooReport>(m, "LooReport")
      .def_readonly("users", &LooReport::users)
      .def_readonly("baseline", &LooReport::baseline);

  m.def("leave_one_out", &leave_one_out);
  m.def("leave_one_out_report", &leave_one_out_report, py::arg("dataset"),
        py::arg("sensor_sets"), py::arg("params"), py::arg("baseline_spec"),
        py::arg("jobs") = 1);

  m.def("map_external_label", &map_external_label);
  m.def("parse_external_label",
        [](const std::string& s) { return parse_external_label(s); });
  m.def("mapped_matches", &mapped_matches);
  m.def("window_id_of", &window_id_of);

  py::class_<ExternalPrediction>(m, "ExternalPrediction")
      .def(py::init([](const std::string& id, ExternalLabel label) {
             return ExternalPrediction{id, label};
           }),
           py::arg("window_id"), py::arg("label"))
      .def_readwrite("window_id", &ExternalPrediction::window_id)
      .def_readwrite("label", &ExternalPrediction::label);

  py::class_<ExternalEvalReport>(m, "ExternalEvalReport")
      .def_readonly("total_windows", &ExternalEvalReport::total_windows)
      .def_readonly("classified_windows",
                    &ExternalEvalReport::classified_windows)
      .def_readonly("coverage", &ExternalEvalReport::coverage)
      .def_readonly("correct", &ExternalEvalReport::correct)
      .def_property_readonly("distribution", [](const ExternalEvalReport& r) {
        py::dict out;
        for (const auto& [c, counts] : r.distribution) {
          py::list row;
          for (std::size_t n : counts) row.append(n);
          out[py::cast(c)] = row;
        }
        return out;
      });

  m.def("external_label_eval", &external_label_eval);
  m.def("load_external_predictions", &load_external_predictions);

  // --- io ------------------------------------------------------------------------
  m.def("write_feature_csv",
        [](const WindowedDataset& ds, const std::filesystem::path& path) {
          write_feature_csv(ds, path);
        });
  m.def("read_feature_csv", [](const std::filesystem::path& path) {
    return read_feature_csv(path);
  });
  m.def("write_feature_cache", &write_feature_cache);
  m.def("read_feature_cache", &read_feature_cache);
  m.def("read_features_auto", &read_features_auto);
  m.def("save_forest", &save_forest);
  m.def("load_forest", &load_forest);

  // --- experiment ------------------------------------------------------------------
  m.def(
      "run_experiment_file",
      [](const std::filesystem::path& config_path) {
        RunResult result = run_experiment(load_experiment_config(config_path));
        return py::make_tuple(result.completed, result.failures);
      },
      "Run experiments from a config file; returns (completed, failures)");
}
