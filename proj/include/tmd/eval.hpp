#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tmd/dataset.hpp"
#include "tmd/models.hpp"

namespace tmd {

// Confusion matrix plus the metrics derived from it. Rows are true
// classes, columns predictions, both in `classes` order. Row sums equal
// per-class test counts and accuracy equals trace/total by construction.
struct EvaluationReport {
  std::vector<ActivityClass> classes;
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<double> precision;  // per class; 0 when never predicted
  std::vector<double> recall;     // per class; 0 when never present

  // provenance
  std::string sensor_set;
  std::string note;
  std::uint64_t seed = 0;

  std::size_t count(ActivityClass truth, ActivityClass predicted) const;
};

EvaluationReport evaluate_predictions(
    const std::vector<ActivityClass>& truth,
    const std::vector<ActivityClass>& predicted);

// Applies the model's imputer to the test vectors and scores them. Throws
// SchemaMismatch when the model was trained on a different schema and
// DatasetError on an empty test set.
EvaluationReport evaluate(const ForestModel& model,
                          const WindowedDataset& test);

// --- Class-vs-class experiments ---------------------------------------------

struct ClassPair {
  ActivityClass first;   // lower class index
  ActivityClass second;  // higher class index

  bool operator<(const ClassPair& o) const {
    return std::pair(first, second) < std::pair(o.first, o.second);
  }
  bool operator==(const ClassPair&) const = default;
};

ClassPair make_pair_ordered(ActivityClass a, ActivityClass b);
std::vector<ClassPair> all_class_pairs();  // the 10 unordered pairs
std::string to_string(const ClassPair& pair);

struct PairwiseCell {
  ClassPair pair;
  std::string sensor_set;
  double accuracy = 0.0;
  std::size_t test_windows = 0;
};

struct PairwiseMatrix {
  std::vector<PairwiseCell> cells;

  double at(const ClassPair& pair, const std::string& sensor_set) const;
};

// For each unordered class pair and sensor set: restrict the dataset to
// the pair, re-split with the shared spec, train a fresh forest, record
// the test accuracy. The dataset is expected to be balanced already; pairs
// are not re-balanced so their results stay comparable to the multiclass
// run.
PairwiseMatrix pairwise_matrix(const WindowedDataset& dataset,
                               const std::vector<SensorSet>& sensor_sets,
                               const ForestParams& params,
                               const SplitSpec& split_spec, int jobs = 1);

struct ImportanceCell {
  ClassPair pair;
  std::string sensor_set;
  FeatureSchema schema;            // the set's own columns
  std::vector<double> importance;  // sums to 1
};

struct ImportanceMap {
  std::vector<ImportanceCell> cells;
};

// Importance vectors from the pair-trained forests of pairwise_matrix's
// protocol. Sensors outside a set simply have no entry in that cell's
// schema (the blank cells of the heatmap), rather than a zero.
ImportanceMap importance_map(const WindowedDataset& dataset,
                             const std::vector<SensorSet>& sensor_sets,
                             const ForestParams& params,
                             const SplitSpec& split_spec, int jobs = 1);

// --- Leave-one-out -----------------------------------------------------------

struct LooUserResult {
  std::string user;
  std::size_t class_count = 0;
  // sensor set name -> accuracy on the held-out user's windows
  std::map<std::string, double> accuracy_all_classes;  // trained on 5 classes
  std::map<std::string, double> accuracy_own_classes;  // trained on the user's
};

struct LooReport {
  std::vector<LooUserResult> users;            // ordered by class count, user
  std::map<std::string, double> baseline;      // per set: all-users split accuracy
};

// Both regimes exclude the target user from training. Regime A trains on
// every class of the remaining users; regime B filters training to the
// classes the user actually performed. Accuracy is measured on the user's
// own windows in both cases, so a regime-A prediction outside the user's
// class set counts as an error.
LooUserResult leave_one_out(const WindowedDataset& dataset,
                            const std::string& user,
                            const std::vector<SensorSet>& sensor_sets,
                            const ForestParams& params);

LooReport leave_one_out_report(const WindowedDataset& dataset,
                               const std::vector<SensorSet>& sensor_sets,
                               const ForestParams& params,
                               const SplitSpec& baseline_spec, int jobs = 1);

// --- External recognizer mapping ---------------------------------------------

// Label set of the device-side activity recognition service. Anything else
// parses to Unknown.
enum class ExternalLabel : int {
  InVehicle = 0,
  OnBicycle = 1,
  OnFoot = 2,
  Running = 3,
  Walking = 4,
  Still = 5,
  Tilting = 6,
  Unknown = 7,
};

ExternalLabel parse_external_label(std::string_view name);
std::string_view to_string(ExternalLabel label);

// Mapped target in our class space. Vehicle is a group: a prediction
// counts as correct when the true class is Car, Train, or Bus.
enum class MappedLabel : int {
  Walking = 0,
  Still = 1,
  Vehicle = 2,
  Unmapped = 3,
};

std::string_view to_string(MappedLabel label);
MappedLabel map_external_label(ExternalLabel label);
bool mapped_matches(MappedLabel mapped, ActivityClass truth);

// Histogram categories for the per-true-class distribution. Unknown
// aggregates explicit unknown responses and windows with no response at
// all.
enum class ExternalCategory : int {
  Walking = 0,
  Still = 1,
  Vehicle = 2,
  Unmapped = 3,
  Unknown = 4,
};

inline constexpr int kNumExternalCategories = 5;
std::string_view to_string(ExternalCategory category);

struct ExternalPrediction {
  std::string window_id;
  ExternalLabel label = ExternalLabel::Unknown;
};

// Stable id of a window inside a dataset: "<session_id>:<window_index>".
std::string window_id_of(const FeatureVector& vector);

// CSV `window_id,external_label`, header optional.
std::vector<ExternalPrediction> load_external_predictions(
    const std::filesystem::path& path);

struct ExternalEvalReport {
  std::size_t total_windows = 0;
  std::size_t classified_windows = 0;  // rows with a definite (non-unknown) label
  double coverage = 0.0;               // classified / total
  // per true class, counts over ExternalCategory
  std::map<ActivityClass, std::array<std::size_t, kNumExternalCategories>>
      distribution;
  std::map<ActivityClass, std::size_t> correct;  // group-credit semantics
};

// Evaluates externally produced predictions against the dataset's labels.
// Windows without a prediction count as Unknown. Throws DatasetError for
// window ids that do not resolve in `truth`.
ExternalEvalReport external_label_eval(
    const std::vector<ExternalPrediction>& predictions,
    const WindowedDataset& truth);

}  // namespace tmd
