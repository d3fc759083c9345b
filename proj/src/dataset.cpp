#include "tmd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tmd/error.hpp"
#include "tmd/rng.hpp"

namespace tmd {

SensorSet make_sensor_set(std::string name, std::vector<SensorKind> members) {
  if (members.empty()) {
    throw std::invalid_argument("sensor set '" + name + "' has no members");
  }
  for (SensorKind k : members) {
    if (is_excluded(k)) {
      throw std::invalid_argument("sensor '" + std::string(sensor_name(k)) +
                                  "' is excluded from analysis");
    }
    if (!is_featurizable(k)) {
      throw std::invalid_argument("sensor '" + std::string(sensor_name(k)) +
                                  "' cannot be a sensor-set member");
    }
  }
  return SensorSet{std::move(name), std::move(members)};
}

SensorSet sensor_set_d1() {
  return {"D1",
          {SensorKind::Accelerometer, SensorKind::Gyroscope, SensorKind::Sound}};
}

SensorSet sensor_set_d2() {
  return {"D2",
          {SensorKind::Accelerometer, SensorKind::Gyroscope, SensorKind::Sound,
           SensorKind::LinearAcceleration, SensorKind::RotationVector}};
}

SensorSet sensor_set_d3() {
  return {"D3",
          {SensorKind::Accelerometer, SensorKind::Gyroscope, SensorKind::Sound,
           SensorKind::LinearAcceleration, SensorKind::RotationVector,
           SensorKind::Speed}};
}

std::set<ActivityClass> WindowedDataset::classes() const {
  std::set<ActivityClass> out;
  for (const FeatureVector& v : vectors) out.insert(v.label);
  return out;
}

std::vector<std::string> WindowedDataset::users() const {
  std::set<std::string> seen;
  for (const FeatureVector& v : vectors) seen.insert(v.user_id);
  return {seen.begin(), seen.end()};
}

std::vector<std::string> WindowedDataset::session_ids() const {
  std::set<std::string> seen;
  for (const FeatureVector& v : vectors) seen.insert(v.session_id);
  return {seen.begin(), seen.end()};
}

std::map<ActivityClass, std::size_t> WindowedDataset::class_window_counts()
    const {
  std::map<ActivityClass, std::size_t> out;
  for (const FeatureVector& v : vectors) ++out[v.label];
  return out;
}

std::map<ActivityClass, double> WindowedDataset::class_durations_seconds()
    const {
  std::map<ActivityClass, double> out;
  for (auto& [c, n] : class_window_counts()) {
    out[c] = static_cast<double>(n) * window_seconds;
  }
  return out;
}

WindowedDataset featurize_sessions(
    const std::vector<RecordingSession>& sessions,
    const WindowingConfig& config, const FeatureSchema& schema) {
  WindowedDataset ds;
  ds.schema = schema;
  ds.window_seconds = config.window_seconds;
  for (const RecordingSession& s : sessions) {
    std::vector<FeatureVector> vs = featurize_session(s, config, schema);
    ds.vectors.insert(ds.vectors.end(), std::make_move_iterator(vs.begin()),
                      std::make_move_iterator(vs.end()));
  }
  return ds;
}

WindowedDataset select_sensor_set(const WindowedDataset& dataset,
                                  const SensorSet& set) {
  for (SensorKind k : set.members) {
    if (std::find(dataset.schema.sensors.begin(), dataset.schema.sensors.end(),
                  k) == dataset.schema.sensors.end()) {
      throw DatasetError("sensor '" + std::string(sensor_name(k)) +
                         "' is not in the dataset schema");
    }
  }

  // Keep the dataset schema's sensor order, dropping non-members.
  std::vector<SensorKind> kept;
  for (SensorKind k : dataset.schema.sensors) {
    if (std::find(set.members.begin(), set.members.end(), k) !=
        set.members.end()) {
      kept.push_back(k);
    }
  }

  WindowedDataset out;
  out.schema = FeatureSchema::for_sensors(kept, dataset.schema.per_axis);
  out.window_seconds = dataset.window_seconds;

  std::vector<std::size_t> col_map;
  col_map.reserve(out.schema.feature_count());
  for (SensorKind k : kept) {
    std::size_t src = dataset.schema.sensor_block_begin(k);
    std::size_t width = dataset.schema.sensor_block_width(k);
    for (std::size_t i = 0; i < width; ++i) col_map.push_back(src + i);
  }

  out.vectors.reserve(dataset.vectors.size());
  for (const FeatureVector& v : dataset.vectors) {
    FeatureVector nv;
    nv.label = v.label;
    nv.user_id = v.user_id;
    nv.session_id = v.session_id;
    nv.window_index = v.window_index;
    nv.values.reserve(col_map.size());
    nv.missing.reserve(col_map.size());
    for (std::size_t c : col_map) {
      nv.values.push_back(v.values[c]);
      nv.missing.push_back(v.missing[c]);
    }
    out.vectors.push_back(std::move(nv));
  }
  return out;
}

WindowedDataset filter_classes(const WindowedDataset& dataset,
                               const std::set<ActivityClass>& classes) {
  WindowedDataset out;
  out.schema = dataset.schema;
  out.window_seconds = dataset.window_seconds;
  for (const FeatureVector& v : dataset.vectors) {
    if (classes.count(v.label)) out.vectors.push_back(v);
  }
  return out;
}

WindowedDataset balance_classes(const WindowedDataset& dataset,
                                BalanceOrder order, std::uint64_t seed) {
  if (dataset.empty()) {
    throw DatasetError("cannot balance an empty dataset");
  }

  auto counts = dataset.class_window_counts();
  std::size_t n_min = counts.begin()->second;
  for (auto& [c, n] : counts) n_min = std::min(n_min, n);

  // Window positions per (class, user), in dataset (chronological) order.
  std::map<ActivityClass, std::map<std::string, std::vector<std::size_t>>>
      per_class_user;
  for (std::size_t i = 0; i < dataset.vectors.size(); ++i) {
    const FeatureVector& v = dataset.vectors[i];
    per_class_user[v.label][v.user_id].push_back(i);
  }

  std::vector<bool> keep(dataset.vectors.size(), false);
  for (auto& [c, users] : per_class_user) {
    std::size_t n_c = counts.at(c);

    // Integer largest-remainder quotas: user u keeps
    // n_min * n_u / n_c windows, +1 for the largest remainders, so the
    // class total is exactly n_min and each user's share moves < 1 window.
    struct Quota {
      const std::string* user;
      std::size_t base;
      std::size_t remainder;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (auto& [user, rows] : users) {
      std::size_t num = n_min * rows.size();
      quotas.push_back({&user, num / n_c, num % n_c});
      assigned += num / n_c;
    }
    std::size_t leftover = n_min - assigned;
    std::stable_sort(quotas.begin(), quotas.end(),
                     [](const Quota& a, const Quota& b) {
                       if (a.remainder != b.remainder)
                         return a.remainder > b.remainder;
                       return *a.user < *b.user;
                     });
    for (std::size_t i = 0; i < quotas.size() && leftover > 0; ++i) {
      if (quotas[i].remainder > 0) {
        ++quotas[i].base;
        --leftover;
      }
    }

    for (const Quota& q : quotas) {
      const std::vector<std::size_t>& rows = users.at(*q.user);
      if (order == BalanceOrder::EarliestFirst) {
        for (std::size_t i = 0; i < q.base; ++i) keep[rows[i]] = true;
      } else {
        std::vector<std::size_t> pool = rows;
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_index(c))));
        rng.shuffle(pool);
        pool.resize(q.base);
        for (std::size_t row : pool) keep[row] = true;
      }
    }
  }

  WindowedDataset out;
  out.schema = dataset.schema;
  out.window_seconds = dataset.window_seconds;
  for (std::size_t i = 0; i < dataset.vectors.size(); ++i) {
    if (keep[i]) out.vectors.push_back(dataset.vectors[i]);
  }
  return out;
}

namespace {

// Largest-remainder allocation of `target` picks across groups with sizes
// `group_sizes`, proportional to size. Deterministic; ties go to the lower
// group index.
std::vector<std::size_t> allocate_proportional(
    const std::vector<std::size_t>& group_sizes, double fraction,
    std::size_t target) {
  std::size_t n = group_sizes.size();
  std::vector<std::size_t> alloc(n, 0);
  std::vector<std::pair<double, std::size_t>> frac;  // (-remainder, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double ideal = fraction * static_cast<double>(group_sizes[i]);
    std::size_t base = static_cast<std::size_t>(ideal);
    base = std::min(base, group_sizes[i]);
    alloc[i] = base;
    assigned += base;
    frac.push_back({-(ideal - static_cast<double>(base)), i});
  }
  std::stable_sort(frac.begin(), frac.end());
  std::size_t i = 0;
  while (assigned < target && i < frac.size()) {
    std::size_t g = frac[i].second;
    if (alloc[g] < group_sizes[g]) {
      ++alloc[g];
      ++assigned;
    }
    ++i;
  }
  // If fractions rounded high, trim from the smallest remainders.
  i = frac.size();
  while (assigned > target && i > 0) {
    --i;
    std::size_t g = frac[i].second;
    if (alloc[g] > 0) {
      --alloc[g];
      --assigned;
    }
  }
  return alloc;
}

}  // namespace

SplitResult split(const WindowedDataset& dataset, const SplitSpec& spec) {
  if (dataset.empty()) throw DatasetError("cannot split an empty dataset");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must be in (0, 1)");
  }

  std::vector<bool> in_test(dataset.vectors.size(), false);

  if (spec.mode == SplitSpec::Mode::WindowLevel) {
    std::size_t n = dataset.vectors.size();
    std::size_t target = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n)));
    target = std::min(std::max<std::size_t>(target, 1), n - 1);

    if (spec.stratify) {
      std::map<ActivityClass, std::vector<std::size_t>> by_class;
      for (std::size_t i = 0; i < n; ++i) {
        by_class[dataset.vectors[i].label].push_back(i);
      }
      std::vector<std::size_t> sizes;
      std::vector<const std::vector<std::size_t>*> groups;
      for (auto& [c, rows] : by_class) {
        sizes.push_back(rows.size());
        groups.push_back(&rows);
      }
      std::vector<std::size_t> alloc =
          allocate_proportional(sizes, spec.test_fraction, target);
      std::size_t gi = 0;
      for (auto& [c, rows] : by_class) {
        std::vector<std::size_t> pool = rows;
        Rng rng(mix_seed(spec.seed,
                         static_cast<std::uint64_t>(class_index(c)) + 17));
        rng.shuffle(pool);
        for (std::size_t i = 0; i < alloc[gi]; ++i) in_test[pool[i]] = true;
        ++gi;
      }
    } else {
      std::vector<std::size_t> pool(n);
      for (std::size_t i = 0; i < n; ++i) pool[i] = i;
      Rng rng(spec.seed);
      rng.shuffle(pool);
      for (std::size_t i = 0; i < target; ++i) in_test[pool[i]] = true;
    }
  } else {
    // Grouped by session: whole sessions go to one side.
    std::vector<std::string> session_order;  // first-appearance order
    std::map<std::string, ActivityClass> session_label;
    std::map<std::string, std::vector<std::size_t>> session_rows;
    for (std::size_t i = 0; i < dataset.vectors.size(); ++i) {
      const FeatureVector& v = dataset.vectors[i];
      auto [it, inserted] = session_rows.try_emplace(v.session_id);
      if (inserted) {
        session_order.push_back(v.session_id);
        session_label[v.session_id] = v.label;
      }
      it->second.push_back(i);
    }

    std::size_t n_sessions = session_order.size();
    if (n_sessions < 2) {
      throw DatasetError(
          "grouped split needs at least two sessions, got " +
          std::to_string(n_sessions));
    }
    std::size_t target = static_cast<std::size_t>(std::llround(
        spec.test_fraction * static_cast<double>(n_sessions)));
    target = std::min(std::max<std::size_t>(target, 1), n_sessions - 1);

    std::set<std::string> test_sessions;
    if (spec.stratify) {
      std::map<ActivityClass, std::vector<std::string>> by_class;
      for (const std::string& sid : session_order) {
        by_class[session_label[sid]].push_back(sid);
      }
      for (auto& [c, sids] : by_class) {
        if (sids.size() < 2) {
          throw DatasetError("class '" + std::string(to_string(c)) +
                             "' has a single session; stratified grouped "
                             "split is degenerate");
        }
      }
      std::vector<std::size_t> sizes;
      for (auto& [c, sids] : by_class) sizes.push_back(sids.size());
      std::vector<std::size_t> alloc =
          allocate_proportional(sizes, spec.test_fraction, target);
      std::size_t gi = 0;
      for (auto& [c, sids] : by_class) {
        std::vector<std::string> pool = sids;
        Rng rng(mix_seed(spec.seed,
                         static_cast<std::uint64_t>(class_index(c)) + 17));
        rng.shuffle(pool);
        // Keep every class on both sides of the partition.
        std::size_t take = std::min(alloc[gi], pool.size() - 1);
        for (std::size_t i = 0; i < take; ++i) test_sessions.insert(pool[i]);
        ++gi;
      }
    } else {
      std::vector<std::string> pool = session_order;
      Rng rng(spec.seed);
      rng.shuffle(pool);
      for (std::size_t i = 0; i < target; ++i) test_sessions.insert(pool[i]);
    }

    for (auto& [sid, rows] : session_rows) {
      if (test_sessions.count(sid)) {
        for (std::size_t r : rows) in_test[r] = true;
      }
    }
  }

  SplitResult result;
  result.train.schema = result.test.schema = dataset.schema;
  result.train.window_seconds = result.test.window_seconds =
      dataset.window_seconds;
  for (std::size_t i = 0; i < dataset.vectors.size(); ++i) {
    (in_test[i] ? result.test : result.train)
        .vectors.push_back(dataset.vectors[i]);
  }
  return result;
}

SplitResult leave_user_out(
    const WindowedDataset& dataset, const std::string& user,
    const std::optional<std::set<ActivityClass>>& classes) {
  bool found = false;
  for (const FeatureVector& v : dataset.vectors) {
    if (v.user_id == user) {
      found = true;
      break;
    }
  }
  if (!found) throw DatasetError("unknown user '" + user + "'");

  SplitResult result;
  result.train.schema = result.test.schema = dataset.schema;
  result.train.window_seconds = result.test.window_seconds =
      dataset.window_seconds;
  for (const FeatureVector& v : dataset.vectors) {
    if (v.user_id == user) {
      result.test.vectors.push_back(v);
    } else if (!classes || classes->count(v.label)) {
      result.train.vectors.push_back(v);
    }
  }
  return result;
}

}  // namespace tmd
