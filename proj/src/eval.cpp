#include "tmd/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "tmd/error.hpp"
#include "tmd/parallel.hpp"

namespace tmd {

std::size_t EvaluationReport::count(ActivityClass truth,
                                    ActivityClass predicted) const {
  auto idx = [&](ActivityClass c) -> std::optional<std::size_t> {
    auto it = std::find(classes.begin(), classes.end(), c);
    if (it == classes.end()) return std::nullopt;
    return static_cast<std::size_t>(it - classes.begin());
  };
  auto r = idx(truth);
  auto c = idx(predicted);
  if (!r || !c) return 0;
  return confusion[*r][*c];
}

EvaluationReport evaluate_predictions(
    const std::vector<ActivityClass>& truth,
    const std::vector<ActivityClass>& predicted) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("truth and prediction counts differ");
  }
  if (truth.empty()) throw DatasetError("empty test set");

  std::set<ActivityClass> seen(truth.begin(), truth.end());
  seen.insert(predicted.begin(), predicted.end());

  EvaluationReport report;
  report.classes.assign(seen.begin(), seen.end());
  std::size_t n = report.classes.size();
  report.confusion.assign(n, std::vector<std::size_t>(n, 0));
  report.total = truth.size();

  auto idx = [&](ActivityClass c) {
    return static_cast<std::size_t>(
        std::find(report.classes.begin(), report.classes.end(), c) -
        report.classes.begin());
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++report.confusion[idx(truth[i])][idx(predicted[i])];
  }

  std::size_t trace = 0;
  report.precision.assign(n, 0.0);
  report.recall.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    trace += report.confusion[c][c];
    std::size_t row_sum = 0, col_sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += report.confusion[c][j];
      col_sum += report.confusion[j][c];
    }
    if (row_sum > 0) {
      report.recall[c] = static_cast<double>(report.confusion[c][c]) /
                         static_cast<double>(row_sum);
    }
    if (col_sum > 0) {
      report.precision[c] = static_cast<double>(report.confusion[c][c]) /
                            static_cast<double>(col_sum);
    }
  }
  report.accuracy =
      static_cast<double>(trace) / static_cast<double>(report.total);
  return report;
}

EvaluationReport evaluate(const ForestModel& model,
                          const WindowedDataset& test) {
  if (test.empty()) throw DatasetError("empty test set");
  if (model.schema_hash != 0 && model.schema_hash != test.schema.hash()) {
    throw SchemaMismatch("model was trained on a different feature schema");
  }

  std::vector<ActivityClass> truth, predicted;
  truth.reserve(test.size());
  predicted.reserve(test.size());
  for (const FeatureVector& v : test.vectors) {
    truth.push_back(v.label);
    predicted.push_back(predict(model, v));
  }
  return evaluate_predictions(truth, predicted);
}

// --- Class-vs-class ----------------------------------------------------------

ClassPair make_pair_ordered(ActivityClass a, ActivityClass b) {
  if (a == b) throw std::invalid_argument("a class pair needs two classes");
  if (class_index(a) > class_index(b)) std::swap(a, b);
  return {a, b};
}

std::vector<ClassPair> all_class_pairs() {
  std::vector<ClassPair> pairs;
  for (std::size_t i = 0; i < kAllClasses.size(); ++i) {
    for (std::size_t j = i + 1; j < kAllClasses.size(); ++j) {
      pairs.push_back({kAllClasses[i], kAllClasses[j]});
    }
  }
  return pairs;
}

std::string to_string(const ClassPair& pair) {
  return std::string(to_string(pair.first)) + "-" +
         std::string(to_string(pair.second));
}

double PairwiseMatrix::at(const ClassPair& pair,
                          const std::string& sensor_set) const {
  for (const PairwiseCell& cell : cells) {
    if (cell.pair == pair && cell.sensor_set == sensor_set) {
      return cell.accuracy;
    }
  }
  throw DatasetError("no pairwise cell for " + to_string(pair) + " on " +
                     sensor_set);
}

namespace {

struct PairExperiment {
  ClassPair pair;
  std::string sensor_set;
  ForestModel model;
  double accuracy = 0.0;
  std::size_t test_windows = 0;
  FeatureSchema schema;
};

std::vector<PairExperiment> run_pair_experiments(
    const WindowedDataset& dataset, const std::vector<SensorSet>& sensor_sets,
    const ForestParams& params, const SplitSpec& split_spec, int jobs) {
  std::set<ActivityClass> present = dataset.classes();
  if (present.size() < 2) {
    throw DatasetError("pairwise experiments need at least two classes");
  }
  for (const ClassPair& pair : all_class_pairs()) {
    if (!present.count(pair.first) || !present.count(pair.second)) {
      throw DatasetError("class '" +
                         std::string(to_string(present.count(pair.first)
                                                   ? pair.second
                                                   : pair.first)) +
                         "' is missing from the dataset");
    }
  }

  std::vector<PairExperiment> out;
  for (const SensorSet& set : sensor_sets) {
    WindowedDataset restricted = select_sensor_set(dataset, set);
    std::vector<ClassPair> pairs = all_class_pairs();
    std::size_t base = out.size();
    out.resize(base + pairs.size());
    parallel_cells(pairs.size(), jobs, [&](std::size_t i) {
      const ClassPair& pair = pairs[i];
      WindowedDataset pair_ds =
          filter_classes(restricted, {pair.first, pair.second});
      SplitResult sr = split(pair_ds, split_spec);

      PairExperiment exp;
      exp.pair = pair;
      exp.sensor_set = set.name;
      exp.schema = restricted.schema;
      exp.model = train_forest(sr.train, params);
      EvaluationReport report = evaluate(exp.model, sr.test);
      exp.accuracy = report.accuracy;
      exp.test_windows = report.total;
      out[base + i] = std::move(exp);
    });
  }
  return out;
}

}  // namespace

PairwiseMatrix pairwise_matrix(const WindowedDataset& dataset,
                               const std::vector<SensorSet>& sensor_sets,
                               const ForestParams& params,
                               const SplitSpec& split_spec, int jobs) {
  PairwiseMatrix matrix;
  for (PairExperiment& exp :
       run_pair_experiments(dataset, sensor_sets, params, split_spec, jobs)) {
    matrix.cells.push_back(
        {exp.pair, exp.sensor_set, exp.accuracy, exp.test_windows});
  }
  return matrix;
}

ImportanceMap importance_map(const WindowedDataset& dataset,
                             const std::vector<SensorSet>& sensor_sets,
                             const ForestParams& params,
                             const SplitSpec& split_spec, int jobs) {
  ImportanceMap map;
  for (PairExperiment& exp :
       run_pair_experiments(dataset, sensor_sets, params, split_spec, jobs)) {
    map.cells.push_back({exp.pair, exp.sensor_set, std::move(exp.schema),
                         std::move(exp.model.importance)});
  }
  return map;
}

// --- Leave-one-out -----------------------------------------------------------

LooUserResult leave_one_out(const WindowedDataset& dataset,
                            const std::string& user,
                            const std::vector<SensorSet>& sensor_sets,
                            const ForestParams& params) {
  std::set<ActivityClass> user_classes;
  for (const FeatureVector& v : dataset.vectors) {
    if (v.user_id == user) user_classes.insert(v.label);
  }
  if (user_classes.empty()) throw DatasetError("unknown user '" + user + "'");

  LooUserResult result;
  result.user = user;
  result.class_count = user_classes.size();

  for (const SensorSet& set : sensor_sets) {
    WindowedDataset restricted = select_sensor_set(dataset, set);

    SplitResult all = leave_user_out(restricted, user);
    ForestModel model_all = train_forest(all.train, params);
    result.accuracy_all_classes[set.name] =
        evaluate(model_all, all.test).accuracy;

    SplitResult own = leave_user_out(restricted, user, user_classes);
    ForestModel model_own = train_forest(own.train, params);
    result.accuracy_own_classes[set.name] =
        evaluate(model_own, own.test).accuracy;
  }
  return result;
}

LooReport leave_one_out_report(const WindowedDataset& dataset,
                               const std::vector<SensorSet>& sensor_sets,
                               const ForestParams& params,
                               const SplitSpec& baseline_spec, int jobs) {
  LooReport report;

  for (const SensorSet& set : sensor_sets) {
    WindowedDataset restricted = select_sensor_set(dataset, set);
    SplitResult sr = split(restricted, baseline_spec);
    ForestModel model = train_forest(sr.train, params);
    report.baseline[set.name] = evaluate(model, sr.test).accuracy;
  }

  std::vector<std::string> users = dataset.users();
  report.users.resize(users.size());
  parallel_cells(users.size(), jobs, [&](std::size_t i) {
    report.users[i] = leave_one_out(dataset, users[i], sensor_sets, params);
  });
  std::stable_sort(report.users.begin(), report.users.end(),
                   [](const LooUserResult& a, const LooUserResult& b) {
                     if (a.class_count != b.class_count) {
                       return a.class_count < b.class_count;
                     }
                     return a.user < b.user;
                   });
  return report;
}

// --- External recognizer mapping ---------------------------------------------

ExternalLabel parse_external_label(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (n == "IN_VEHICLE") return ExternalLabel::InVehicle;
  if (n == "ON_BICYCLE") return ExternalLabel::OnBicycle;
  if (n == "ON_FOOT") return ExternalLabel::OnFoot;
  if (n == "RUNNING") return ExternalLabel::Running;
  if (n == "WALKING") return ExternalLabel::Walking;
  if (n == "STILL") return ExternalLabel::Still;
  if (n == "TILTING") return ExternalLabel::Tilting;
  return ExternalLabel::Unknown;
}

std::string_view to_string(ExternalLabel label) {
  switch (label) {
    case ExternalLabel::InVehicle: return "IN_VEHICLE";
    case ExternalLabel::OnBicycle: return "ON_BICYCLE";
    case ExternalLabel::OnFoot: return "ON_FOOT";
    case ExternalLabel::Running: return "RUNNING";
    case ExternalLabel::Walking: return "WALKING";
    case ExternalLabel::Still: return "STILL";
    case ExternalLabel::Tilting: return "TILTING";
    case ExternalLabel::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::string_view to_string(MappedLabel label) {
  switch (label) {
    case MappedLabel::Walking: return "walking";
    case MappedLabel::Still: return "still";
    case MappedLabel::Vehicle: return "vehicle";
    case MappedLabel::Unmapped: return "unmapped";
  }
  return "unmapped";
}

MappedLabel map_external_label(ExternalLabel label) {
  switch (label) {
    case ExternalLabel::Running:
    case ExternalLabel::Walking:
    case ExternalLabel::OnFoot:
      return MappedLabel::Walking;
    case ExternalLabel::InVehicle:
      return MappedLabel::Vehicle;
    case ExternalLabel::Still:
      return MappedLabel::Still;
    case ExternalLabel::OnBicycle:
    case ExternalLabel::Tilting:
    case ExternalLabel::Unknown:
      return MappedLabel::Unmapped;
  }
  return MappedLabel::Unmapped;
}

bool mapped_matches(MappedLabel mapped, ActivityClass truth) {
  switch (mapped) {
    case MappedLabel::Walking:
      return truth == ActivityClass::Walking;
    case MappedLabel::Still:
      return truth == ActivityClass::Still;
    case MappedLabel::Vehicle:
      return truth == ActivityClass::Car || truth == ActivityClass::Train ||
             truth == ActivityClass::Bus;
    case MappedLabel::Unmapped:
      return false;
  }
  return false;
}

std::string_view to_string(ExternalCategory category) {
  switch (category) {
    case ExternalCategory::Walking: return "walking";
    case ExternalCategory::Still: return "still";
    case ExternalCategory::Vehicle: return "vehicle";
    case ExternalCategory::Unmapped: return "unmapped";
    case ExternalCategory::Unknown: return "unknown";
  }
  return "unknown";
}

std::string window_id_of(const FeatureVector& vector) {
  return vector.session_id + ":" + std::to_string(vector.window_index);
}

std::vector<ExternalPrediction> load_external_predictions(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");

  std::vector<ExternalPrediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError("expected 'window_id,external_label'", line_no);
    }
    std::string id = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    if (line_no == 1 && id == "window_id") continue;
    out.push_back({id, parse_external_label(label)});
  }
  return out;
}

ExternalEvalReport external_label_eval(
    const std::vector<ExternalPrediction>& predictions,
    const WindowedDataset& truth) {
  if (truth.empty()) throw DatasetError("empty truth dataset");

  std::map<std::string, std::size_t> id_to_row;
  for (std::size_t i = 0; i < truth.vectors.size(); ++i) {
    id_to_row[window_id_of(truth.vectors[i])] = i;
  }

  // Latest prediction wins when a window id repeats.
  std::map<std::size_t, ExternalLabel> by_row;
  for (const ExternalPrediction& p : predictions) {
    auto it = id_to_row.find(p.window_id);
    if (it == id_to_row.end()) {
      throw DatasetError("window id '" + p.window_id +
                         "' does not resolve in the truth dataset");
    }
    by_row[it->second] = p.label;
  }

  ExternalEvalReport report;
  report.total_windows = truth.vectors.size();
  for (ActivityClass c : kAllClasses) {
    report.distribution[c] = {};
    report.correct[c] = 0;
  }

  for (std::size_t i = 0; i < truth.vectors.size(); ++i) {
    ActivityClass label = truth.vectors[i].label;
    auto it = by_row.find(i);

    ExternalCategory category;
    if (it == by_row.end() || it->second == ExternalLabel::Unknown) {
      // Explicit unknown responses and missing responses both count as
      // unknown and as unclassified for coverage.
      category = ExternalCategory::Unknown;
    } else {
      ++report.classified_windows;
      MappedLabel mapped = map_external_label(it->second);
      category = static_cast<ExternalCategory>(mapped);
      if (mapped_matches(mapped, label)) ++report.correct[label];
    }
    ++report.distribution[label][static_cast<std::size_t>(category)];
  }

  report.coverage = static_cast<double>(report.classified_windows) /
                    static_cast<double>(report.total_windows);
  return report;
}

}  // namespace tmd
