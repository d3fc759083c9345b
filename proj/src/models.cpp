#include "tmd/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "tmd/error.hpp"
#include "tmd/rng.hpp"

namespace tmd {

LabeledMatrix to_matrix(const WindowedDataset& dataset) {
  LabeledMatrix out;
  out.x.rows = dataset.vectors.size();
  out.x.cols = dataset.schema.feature_count();
  out.x.data.reserve(out.x.rows * out.x.cols);
  out.y.reserve(out.x.rows);
  for (const FeatureVector& v : dataset.vectors) {
    if (v.values.size() != out.x.cols) {
      throw SchemaMismatch("vector width does not match dataset schema");
    }
    if (v.has_missing()) {
      throw TrainingError(
          "dataset still has missing values; apply the imputer first");
    }
    out.x.data.insert(out.x.data.end(), v.values.begin(), v.values.end());
    out.y.push_back(class_index(v.label));
  }
  return out;
}

void TreeParams::validate() const {
  if (max_depth && *max_depth < 0) {
    throw std::invalid_argument("max_depth must be >= 0");
  }
  if (min_samples_split < 2) {
    throw std::invalid_argument("min_samples_split must be >= 2");
  }
  if (min_samples_leaf < 1) {
    throw std::invalid_argument("min_samples_leaf must be >= 1");
  }
}

void ForestParams::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (features_per_split < 0) {
    throw std::invalid_argument("features_per_split must be >= 0");
  }
  tree.validate();
}

double gini(std::span<const std::size_t> class_counts) {
  std::size_t total = 0;
  for (std::size_t n : class_counts) total += n;
  if (total == 0) throw TrainingError("gini of an empty node");
  double sum_sq = 0.0;
  for (std::size_t n : class_counts) {
    double p = static_cast<double>(n) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

namespace {

using u64 = std::uint64_t;
using i128 = __int128;

// Candidate score for maximizing Gini decrease with fixed parent counts:
// f = sum_c nL_c^2 / NL + sum_c nR_c^2 / NR. Larger f = larger decrease.
struct SplitScore {
  u64 sum_left = 0;   // sum of squared left counts
  u64 sum_right = 0;  // sum of squared right counts
  u64 n_left = 0;
  u64 n_right = 0;

  // Exact comparison of f values via cross-multiplication.
  bool better_than(const SplitScore& o) const {
    i128 lhs = (i128(sum_left) * o.n_left * i128(n_right) * o.n_right +
                i128(sum_right) * o.n_left * i128(n_left) * o.n_right);
    i128 rhs = (i128(o.sum_left) * n_left * i128(o.n_right) * n_right +
                i128(o.sum_right) * n_left * i128(o.n_left) * n_right);
    // lhs = f * (NL*NR*oNL*oNR), rhs = of * (same); denominators positive.
    return lhs > rhs;
  }

  // Strictly positive decrease versus parent counts.
  bool beats_parent(u64 parent_sq, u64 n_total) const {
    i128 lhs = (i128(sum_left) * n_right + i128(sum_right) * n_left) *
               i128(n_total);
    i128 rhs = i128(parent_sq) * n_left * i128(n_right);
    return lhs > rhs;
  }

  double decrease(u64 parent_sq, u64 n_total) const {
    double n = static_cast<double>(n_total);
    double f = static_cast<double>(sum_left) / static_cast<double>(n_left) +
               static_cast<double>(sum_right) / static_cast<double>(n_right);
    return f / n -
           static_cast<double>(parent_sq) / (n * n);
  }
};

}  // namespace

std::optional<SplitDecision> best_split(const Matrix& x,
                                        std::span<const int> y,
                                        std::span<const std::size_t> rows,
                                        std::span<const int> candidate_columns,
                                        int min_samples_leaf, int n_classes) {
  const u64 n = rows.size();
  if (n < 2) return std::nullopt;

  std::vector<u64> parent_counts(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t r : rows) ++parent_counts[static_cast<std::size_t>(y[r])];
  u64 parent_sq = 0;
  for (u64 c : parent_counts) parent_sq += c * c;
  if (parent_sq == n * n) return std::nullopt;  // pure node

  std::vector<int> columns(candidate_columns.begin(), candidate_columns.end());
  std::sort(columns.begin(), columns.end());

  bool have_best = false;
  SplitScore best_score;
  int best_column = -1;
  double best_threshold = 0.0;

  std::vector<std::pair<double, int>> sorted;  // (value, label)
  sorted.reserve(rows.size());
  std::vector<u64> left_counts(static_cast<std::size_t>(n_classes));
  const u64 msl = static_cast<u64>(min_samples_leaf);

  for (int col : columns) {
    sorted.clear();
    for (std::size_t r : rows) {
      sorted.emplace_back(x(r, static_cast<std::size_t>(col)), y[r]);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (sorted.front().first == sorted.back().first) continue;

    std::fill(left_counts.begin(), left_counts.end(), 0);
    u64 sum_left = 0;
    u64 sum_right = parent_sq;
    u64 n_left = 0;

    std::size_t i = 0;
    while (i < sorted.size()) {
      double value = sorted[i].first;
      // Move the whole group of equal values to the left side.
      while (i < sorted.size() && sorted[i].first == value) {
        u64& c = left_counts[static_cast<std::size_t>(sorted[i].second)];
        u64 r = parent_counts[static_cast<std::size_t>(sorted[i].second)] - c;
        sum_left += 2 * c + 1;
        sum_right -= 2 * r - 1;
        ++c;
        ++n_left;
        ++i;
      }
      if (i == sorted.size()) break;  // no boundary after the last group

      u64 n_right = n - n_left;
      if (n_left < msl || n_right < msl) continue;

      SplitScore score{sum_left, sum_right, n_left, n_right};
      if (!score.beats_parent(parent_sq, n)) continue;
      if (have_best && !score.better_than(best_score)) continue;

      double next = sorted[i].first;
      double mid = value + (next - value) / 2.0;
      if (!(mid > value && mid < next)) mid = value;  // adjacent doubles

      have_best = true;
      best_score = score;
      best_column = col;
      best_threshold = mid;
    }
  }

  if (!have_best) return std::nullopt;
  return SplitDecision{best_column, best_threshold,
                       best_score.decrease(parent_sq, n)};
}

namespace {

int argmax_lowest(std::span<const std::size_t> counts) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(counts.size()); ++c) {
    if (counts[static_cast<std::size_t>(c)] >
        counts[static_cast<std::size_t>(best)]) {
      best = c;
    }
  }
  return best;
}

int derive_n_classes(std::span<const int> y) {
  int max_label = -1;
  for (int label : y) {
    if (label < 0) throw TrainingError("negative class label");
    max_label = std::max(max_label, label);
  }
  return max_label + 1;
}

void check_finite(const Matrix& x) {
  for (double v : x.data) {
    if (!std::isfinite(v)) {
      throw TrainingError("non-finite feature value in training data");
    }
  }
}

// Shared tree growth for plain CART and forest member trees. When
// 0 < features_per_split < n_features, each node draws that many distinct
// candidate columns from `rng` (partial Fisher-Yates); otherwise all
// columns are candidates and the RNG is untouched, which makes the
// degenerate 1-tree forest bit-identical to a plain tree.
TreeModel grow_tree(const Matrix& x, std::span<const int> y,
                    std::vector<std::size_t> root_rows,
                    const TreeParams& params, int n_classes, Rng* rng,
                    int features_per_split) {
  TreeModel model;
  model.n_classes = n_classes;
  model.n_features = x.cols;
  model.params = params;

  const double n_root = static_cast<double>(root_rows.size());
  const int n_features = static_cast<int>(x.cols);
  const bool sample_columns =
      rng != nullptr && features_per_split > 0 && features_per_split < n_features;

  std::vector<int> all_columns(static_cast<std::size_t>(n_features));
  for (int i = 0; i < n_features; ++i) all_columns[static_cast<std::size_t>(i)] = i;
  std::vector<int> scratch = all_columns;

  std::function<int(std::vector<std::size_t>&, int)> build =
      [&](std::vector<std::size_t>& rows, int depth) -> int {
    int index = static_cast<int>(model.nodes.size());
    model.nodes.emplace_back();
    {
      TreeNode& node = model.nodes.back();
      node.class_counts.assign(static_cast<std::size_t>(n_classes), 0);
      for (std::size_t r : rows) {
        ++node.class_counts[static_cast<std::size_t>(y[r])];
      }
      node.sample_fraction = static_cast<double>(rows.size()) / n_root;
    }

    bool depth_reached = params.max_depth && depth >= *params.max_depth;
    if (depth_reached ||
        rows.size() < static_cast<std::size_t>(params.min_samples_split)) {
      return index;
    }

    std::optional<SplitDecision> decision;
    if (sample_columns) {
      for (int i = 0; i < features_per_split; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng->next_below(
                            static_cast<std::uint64_t>(n_features - i)));
        std::swap(scratch[static_cast<std::size_t>(i)], scratch[j]);
      }
      std::span<const int> candidates{scratch.data(),
                                      static_cast<std::size_t>(features_per_split)};
      decision = best_split(x, y, rows, candidates, params.min_samples_leaf,
                            n_classes);
      std::copy(all_columns.begin(), all_columns.end(), scratch.begin());
    } else {
      decision = best_split(x, y, rows, all_columns, params.min_samples_leaf,
                            n_classes);
    }
    if (!decision) return index;

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (std::size_t r : rows) {
      if (x(r, static_cast<std::size_t>(decision->column)) <=
          decision->threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }

    rows.clear();
    rows.shrink_to_fit();

    int left = build(left_rows, depth + 1);
    int right = build(right_rows, depth + 1);
    TreeNode& node = model.nodes[static_cast<std::size_t>(index)];
    node.feature = decision->column;
    node.threshold = decision->threshold;
    node.impurity_decrease = decision->impurity_decrease;
    node.left = left;
    node.right = right;
    return index;
  };

  build(root_rows, 0);
  return model;
}

}  // namespace

int TreeModel::predict_row(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw SchemaMismatch("feature vector width does not match the tree");
  }
  const TreeNode* node = &nodes[0];
  while (!node->is_leaf()) {
    node = (x[static_cast<std::size_t>(node->feature)] <= node->threshold)
               ? &nodes[static_cast<std::size_t>(node->left)]
               : &nodes[static_cast<std::size_t>(node->right)];
  }
  return argmax_lowest(node->class_counts);
}

std::vector<double> TreeModel::predict_proba_row(
    std::span<const double> x) const {
  if (x.size() != n_features) {
    throw SchemaMismatch("feature vector width does not match the tree");
  }
  const TreeNode* node = &nodes[0];
  while (!node->is_leaf()) {
    node = (x[static_cast<std::size_t>(node->feature)] <= node->threshold)
               ? &nodes[static_cast<std::size_t>(node->left)]
               : &nodes[static_cast<std::size_t>(node->right)];
  }
  std::size_t total = 0;
  for (std::size_t c : node->class_counts) total += c;
  std::vector<double> proba(node->class_counts.size(), 0.0);
  for (std::size_t c = 0; c < proba.size(); ++c) {
    proba[c] = static_cast<double>(node->class_counts[c]) /
               static_cast<double>(total);
  }
  return proba;
}

TreeModel train_tree(const Matrix& x, std::span<const int> y,
                     const TreeParams& params, int n_classes) {
  params.validate();
  if (x.rows == 0) throw TrainingError("empty training set");
  if (y.size() != x.rows) {
    throw std::invalid_argument("label count does not match row count");
  }
  check_finite(x);
  if (n_classes <= 0) n_classes = derive_n_classes(y);

  std::vector<std::size_t> rows(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) rows[i] = i;
  return grow_tree(x, y, std::move(rows), params, n_classes, nullptr, 0);
}

int ForestModel::predict_row(std::span<const double> x) const {
  std::vector<std::size_t> votes(static_cast<std::size_t>(n_classes), 0);
  for (const TreeModel& tree : trees) {
    ++votes[static_cast<std::size_t>(tree.predict_row(x))];
  }
  return argmax_lowest(votes);
}

std::vector<double> ForestModel::predict_proba_row(
    std::span<const double> x) const {
  std::vector<double> shares(static_cast<std::size_t>(n_classes), 0.0);
  for (const TreeModel& tree : trees) {
    shares[static_cast<std::size_t>(tree.predict_row(x))] += 1.0;
  }
  for (double& s : shares) s /= static_cast<double>(trees.size());
  return shares;
}

ForestModel train_forest(const Matrix& x, std::span<const int> y,
                         const ForestParams& params) {
  params.validate();
  if (x.rows == 0) throw TrainingError("empty training set");
  if (y.size() != x.rows) {
    throw std::invalid_argument("label count does not match row count");
  }
  check_finite(x);

  const int n_features = static_cast<int>(x.cols);
  int features_per_split = params.features_per_split;
  if (features_per_split == 0) {
    features_per_split = std::max(
        1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
  }
  if (features_per_split > n_features) {
    throw std::invalid_argument("features_per_split exceeds feature count");
  }

  ForestModel model;
  model.params = params;
  model.params.features_per_split = features_per_split;
  model.n_classes = derive_n_classes(y);
  model.n_features = x.cols;

  std::set<int> labels(y.begin(), y.end());
  model.trained_labels.assign(labels.begin(), labels.end());

  model.importance.assign(x.cols, 0.0);
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));

  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(mix_seed(params.seed, static_cast<std::uint64_t>(t)));

    std::vector<std::size_t> rows;
    rows.reserve(x.rows);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < x.rows; ++i) {
        rows.push_back(static_cast<std::size_t>(rng.next_below(x.rows)));
      }
    } else {
      for (std::size_t i = 0; i < x.rows; ++i) rows.push_back(i);
    }

    model.trees.push_back(grow_tree(x, y, std::move(rows), params.tree,
                                    model.n_classes, &rng,
                                    features_per_split));

    for (const TreeNode& node : model.trees.back().nodes) {
      if (!node.is_leaf()) {
        model.importance[static_cast<std::size_t>(node.feature)] +=
            node.sample_fraction * node.impurity_decrease;
      }
    }
  }

  double total = 0.0;
  for (double v : model.importance) total += v;
  if (total > 0.0) {
    for (double& v : model.importance) v /= total;
  }
  return model;
}

ForestModel train_forest(const WindowedDataset& train,
                         const ForestParams& params) {
  if (train.empty()) throw TrainingError("empty training set");
  Imputer imputer = fit_imputer(train.vectors);
  WindowedDataset imputed = train;
  apply_imputer_in_place(imputed.vectors, imputer);
  LabeledMatrix lm = to_matrix(imputed);
  ForestModel model = train_forest(lm.x, lm.y, params);
  model.schema_hash = train.schema.hash();
  model.imputer = std::move(imputer);
  return model;
}

namespace {

std::vector<double> imputed_values(const ForestModel& model,
                                   const FeatureVector& x) {
  if (x.values.size() != model.n_features) {
    throw SchemaMismatch("feature vector width does not match the model");
  }
  std::vector<double> values = x.values;
  if (!model.imputer.means.empty()) {
    if (model.imputer.size() != values.size()) {
      throw SchemaMismatch("model imputer width does not match the vector");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (x.missing[i]) values[i] = model.imputer.means[i];
    }
  } else if (x.has_missing()) {
    throw TrainingError("vector has missing values and model has no imputer");
  }
  return values;
}

}  // namespace

ActivityClass predict(const ForestModel& model, const FeatureVector& x) {
  return static_cast<ActivityClass>(model.predict_row(imputed_values(model, x)));
}

std::vector<double> predict_proba(const ForestModel& model,
                                  const FeatureVector& x) {
  return model.predict_proba_row(imputed_values(model, x));
}

ActivityClass predict(const TreeModel& model, const FeatureVector& x) {
  if (x.has_missing()) {
    throw TrainingError("vector has missing values; impute before predicting");
  }
  return static_cast<ActivityClass>(model.predict_row(x.values));
}

std::vector<double> predict_proba(const TreeModel& model,
                                  const FeatureVector& x) {
  if (x.has_missing()) {
    throw TrainingError("vector has missing values; impute before predicting");
  }
  return model.predict_proba_row(x.values);
}

// --- Classifier contract ----------------------------------------------------

namespace {

class TreeClassifier final : public Classifier {
 public:
  explicit TreeClassifier(TreeParams params) : params_(params) {}

  void fit(const Matrix& x, std::span<const int> y) override {
    model_ = train_tree(x, y, params_);
  }
  int predict_row(std::span<const double> x) const override {
    return model_.predict_row(x);
  }
  std::vector<double> predict_proba_row(
      std::span<const double> x) const override {
    return model_.predict_proba_row(x);
  }
  std::string name() const override { return "tree"; }

 private:
  TreeParams params_;
  TreeModel model_;
};

class ForestClassifier final : public Classifier {
 public:
  explicit ForestClassifier(ForestParams params) : params_(params) {}

  void fit(const Matrix& x, std::span<const int> y) override {
    model_ = train_forest(x, y, params_);
  }
  int predict_row(std::span<const double> x) const override {
    return model_.predict_row(x);
  }
  std::vector<double> predict_proba_row(
      std::span<const double> x) const override {
    return model_.predict_proba_row(x);
  }
  std::string name() const override { return "forest"; }

 private:
  ForestParams params_;
  ForestModel model_;
};

}  // namespace

std::unique_ptr<Classifier> make_classifier(const ClassifierParams& params) {
  if (std::holds_alternative<TreeParams>(params)) {
    return std::make_unique<TreeClassifier>(std::get<TreeParams>(params));
  }
  return std::make_unique<ForestClassifier>(std::get<ForestParams>(params));
}

GridSearchResult cross_validate_grid(const Matrix& x, std::span<const int> y,
                                     const std::vector<ClassifierParams>& grid,
                                     int k, std::uint64_t seed) {
  if (k < 2) throw TrainingError("cross-validation needs k >= 2");
  if (x.rows < static_cast<std::size_t>(k)) {
    throw TrainingError("fewer samples than folds");
  }
  if (grid.empty()) throw std::invalid_argument("empty parameter grid");

  // Stratified fold assignment: shuffle each class's rows, deal round-robin.
  GridSearchResult result;
  result.fold_of_row.assign(x.rows, 0);
  {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < x.rows; ++i) by_class[y[i]].push_back(i);
    for (auto& [label, rows] : by_class) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label) + 29));
      rng.shuffle(rows);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        result.fold_of_row[rows[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
      }
    }
  }

  result.mean_accuracy.assign(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc_sum = 0.0;
    int folds_used = 0;
    for (int fold = 0; fold < k; ++fold) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < x.rows; ++i) {
        (result.fold_of_row[i] == fold ? test_rows : train_rows).push_back(i);
      }
      if (test_rows.empty() || train_rows.empty()) continue;

      Matrix train_x = Matrix::zeros(train_rows.size(), x.cols);
      std::vector<int> train_y(train_rows.size());
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        std::copy_n(x.data.begin() +
                        static_cast<std::ptrdiff_t>(train_rows[i] * x.cols),
                    x.cols,
                    train_x.data.begin() +
                        static_cast<std::ptrdiff_t>(i * x.cols));
        train_y[i] = y[train_rows[i]];
      }

      std::unique_ptr<Classifier> clf = make_classifier(grid[g]);
      clf->fit(train_x, train_y);

      std::size_t correct = 0;
      for (std::size_t r : test_rows) {
        if (clf->predict_row(x.row(r)) == y[r]) ++correct;
      }
      acc_sum += static_cast<double>(correct) /
                 static_cast<double>(test_rows.size());
      ++folds_used;
    }
    result.mean_accuracy[g] =
        folds_used > 0 ? acc_sum / static_cast<double>(folds_used) : 0.0;
  }

  result.best_index = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (result.mean_accuracy[g] > result.mean_accuracy[result.best_index]) {
      result.best_index = g;
    }
  }
  return result;
}

}  // namespace tmd
