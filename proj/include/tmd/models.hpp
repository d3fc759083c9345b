#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tmd/dataset.hpp"
#include "tmd/features.hpp"

namespace tmd {

// Row-major dense matrix; rows are windows, columns are features.
struct Matrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return {std::vector<double>(rows * cols, 0.0), rows, cols};
  }

  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

struct LabeledMatrix {
  Matrix x;
  std::vector<int> y;
};

// Requires fully imputed vectors (throws TrainingError on missing or
// non-finite entries). Labels become the stable ActivityClass codes.
LabeledMatrix to_matrix(const WindowedDataset& dataset);

struct TreeParams {
  std::optional<int> max_depth;   // unset = unlimited; 0 = single leaf
  int min_samples_split = 2;      // >= 2
  int min_samples_leaf = 1;       // >= 1

  void validate() const;
  bool operator==(const TreeParams&) const = default;
};

struct ForestParams {
  int n_trees = 100;
  int features_per_split = 0;  // 0 = floor(sqrt(F))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  TreeParams tree;

  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

// Gini impurity 1 - sum_c (n_c/N)^2. Throws TrainingError on an empty
// histogram.
double gini(std::span<const std::size_t> class_counts);

struct SplitDecision {
  int column = -1;
  double threshold = 0.0;
  double impurity_decrease = 0.0;  // parent gini minus weighted child gini
};

// Evaluates thresholds at midpoints between consecutive distinct sorted
// values of each candidate column and maximizes the weighted Gini
// decrease. Candidate scores are compared in exact integer arithmetic, so
// the tie-breaks (lower column index, then lower threshold) are
// deterministic across platforms. Returns nullopt when no split has a
// strictly positive decrease. Rows going left satisfy x[column] <=
// threshold.
std::optional<SplitDecision> best_split(
    const Matrix& x, std::span<const int> y,
    std::span<const std::size_t> rows, std::span<const int> candidate_columns,
    int min_samples_leaf, int n_classes);

struct TreeNode {
  int feature = -1;  // -1 = leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double impurity_decrease = 0.0;
  double sample_fraction = 0.0;  // node rows / root rows
  std::vector<std::size_t> class_counts;

  bool is_leaf() const { return feature < 0; }
};

// CART tree, grown depth-first (left child before right). Leaf prediction
// is the histogram argmax with lowest-class-index tie-break.
struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int n_classes = 0;
  std::size_t n_features = 0;
  TreeParams params;

  int predict_row(std::span<const double> x) const;
  std::vector<double> predict_proba_row(std::span<const double> x) const;
};

TreeModel train_tree(const Matrix& x, std::span<const int> y,
                     const TreeParams& params, int n_classes = 0);

// Bagged CART ensemble. Each tree gets an independent RNG stream derived
// from the master seed, so training is deterministic regardless of
// execution order. Importance is mean decrease in impurity: per split,
// sample_fraction * impurity_decrease, summed over the forest and
// normalized to 1.
struct ForestModel {
  std::vector<TreeModel> trees;
  ForestParams params;
  std::vector<double> importance;  // per feature, sums to 1 when any split
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<int> trained_labels;  // distinct labels seen in training

  // Pipeline artifacts, set when trained from a WindowedDataset.
  std::uint64_t schema_hash = 0;
  Imputer imputer;

  int predict_row(std::span<const double> x) const;  // majority vote
  std::vector<double> predict_proba_row(std::span<const double> x) const;
};

ForestModel train_forest(const Matrix& x, std::span<const int> y,
                         const ForestParams& params);

// Fits the imputer on the training vectors, imputes, trains, and stamps
// schema hash + imputer into the model.
ForestModel train_forest(const WindowedDataset& train,
                         const ForestParams& params);

// Applies the model's imputer to missing entries, then votes. Throws
// SchemaMismatch when the vector width does not match.
ActivityClass predict(const ForestModel& model, const FeatureVector& x);
std::vector<double> predict_proba(const ForestModel& model,
                                  const FeatureVector& x);

// Tree-level prediction over a feature vector (no imputer; the vector must
// be fully observed or already imputed).
ActivityClass predict(const TreeModel& model, const FeatureVector& x);
std::vector<double> predict_proba(const TreeModel& model,
                                  const FeatureVector& x);

// --- Pluggable classifier contract -----------------------------------------
//
// fit/predict/proba over feature matrices. DT and RF are provided; further
// algorithms plug in behind the same interface.

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Matrix& x, std::span<const int> y) = 0;
  virtual int predict_row(std::span<const double> x) const = 0;
  virtual std::vector<double> predict_proba_row(
      std::span<const double> x) const = 0;
  virtual std::string name() const = 0;
};

using ClassifierParams = std::variant<TreeParams, ForestParams>;

std::unique_ptr<Classifier> make_classifier(const ClassifierParams& params);

struct GridSearchResult {
  std::size_t best_index = 0;             // argmax mean accuracy, grid-order ties
  std::vector<double> mean_accuracy;      // per grid candidate
  std::vector<int> fold_of_row;           // seeded fold assignment, shared
};

// Stratified k-fold cross-validation over a parameter grid. Throws
// TrainingError when k < 2 or fewer than k samples are available.
GridSearchResult cross_validate_grid(const Matrix& x, std::span<const int> y,
                                     const std::vector<ClassifierParams>& grid,
                                     int k = 10, std::uint64_t seed = 0);

}  // namespace tmd
