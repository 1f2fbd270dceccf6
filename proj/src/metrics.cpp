#include "geoloceval/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "geoloceval/error.hpp"

namespace geoloceval {

namespace {

void require_non_empty(std::span<const double> xs, const char* what) {
  if (xs.empty()) {
    throw ValidationError(fmt::format("{} of an empty distance list", what));
  }
}

std::vector<AdminPath> truth_paths(const GroundTruth& truth) {
  std::vector<AdminPath> out;
  out.reserve(truth.records.size());
  for (const auto& [id, rec] : truth.records) {
    if (!rec.path) {
      throw ValidationError(
          fmt::format("ground-truth doc_id '{}' is not resolved", id));
    }
    out.push_back(*rec.path);
  }
  return out;
}

std::map<AdminPath, std::size_t> class_counts(std::span<const AdminPath> train,
                                              Granularity g) {
  if (train.empty()) throw ValidationError("baseline training set is empty");
  std::map<AdminPath, std::size_t> counts;
  for (const AdminPath& p : train) {
    if (p.sentinel) continue;
    ++counts[p.truncated(g)];
  }
  if (counts.empty()) {
    throw ValidationError("baseline training set has no resolved locations");
  }
  return counts;
}

}  // namespace

std::size_t ConfusionTally::total_tp() const {
  std::size_t s = 0;
  for (const auto& [loc, c] : counts) s += c.tp;
  return s;
}

std::size_t ConfusionTally::total_fp() const {
  std::size_t s = fp_unresolved;
  for (const auto& [loc, c] : counts) s += c.fp;
  return s;
}

std::size_t ConfusionTally::total_fn() const {
  std::size_t s = 0;
  for (const auto& [loc, c] : counts) s += c.fn;
  return s;
}

ConfusionTally tally(std::span<const AdminPath> predicted,
                     std::span<const AdminPath> truth, Granularity g) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("prediction and truth lists differ in length");
  }
  ConfusionTally t;
  t.granularity = g;
  t.n_users = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].sentinel) {
      throw ValidationError("ground-truth location is unresolved");
    }
    AdminPath true_loc = truth[i].truncated(g);
    if (predicted[i].same_location(truth[i], g)) {
      ++t.counts[std::move(true_loc)].tp;
      continue;
    }
    ++t.counts[std::move(true_loc)].fn;
    if (predicted[i].sentinel) {
      ++t.fp_unresolved;
    } else {
      ++t.counts[predicted[i].truncated(g)].fp;
    }
  }
  for (const AdminPath& p : truth) t.universe.push_back(p.truncated(g));
  std::sort(t.universe.begin(), t.universe.end());
  t.universe.erase(std::unique(t.universe.begin(), t.universe.end()),
                   t.universe.end());
  return t;
}

ConfusionTally tally(std::span<const ResolvedRecord> records,
                     const GroundTruth& truth, Granularity g) {
  std::vector<AdminPath> predicted;
  std::vector<AdminPath> true_paths;
  predicted.reserve(records.size());
  true_paths.reserve(records.size());
  for (const ResolvedRecord& r : records) {
    auto it = truth.records.find(r.doc_id);
    if (it == truth.records.end() || !it->second.path) {
      throw ValidationError(
          fmt::format("doc_id '{}' has no resolved ground truth", r.doc_id));
    }
    predicted.push_back(r.path);
    true_paths.push_back(*it->second.path);
  }
  return tally(predicted, true_paths, g);
}

double accuracy(const ConfusionTally& t) {
  if (t.n_users == 0) throw ValidationError("empty evaluation");
  return static_cast<double>(t.total_tp()) / static_cast<double>(t.n_users);
}

Prf micro_prf(const ConfusionTally& t) {
  if (t.n_users == 0) throw ValidationError("empty evaluation");
  LocationCounts total{t.total_tp(), t.total_fp(), t.total_fn()};
  return location_prf(total);
}

Prf location_prf(const LocationCounts& c) {
  Prf out;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) out.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = tp / static_cast<double>(c.tp + c.fn);
  // Count form of 2PR/(P+R); with one prediction per document it reduces to
  // tp/n exactly, so micro F1 is bit-identical to accuracy.
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom > 0) out.f1 = 2.0 * tp / static_cast<double>(denom);
  return out;
}

std::vector<Prf> per_location_prf(const ConfusionTally& t) {
  std::vector<Prf> out;
  out.reserve(t.universe.size());
  for (const AdminPath& loc : t.universe) {
    auto it = t.counts.find(loc);
    out.push_back(it == t.counts.end() ? Prf{} : location_prf(it->second));
  }
  return out;
}

Prf macro_prf(const ConfusionTally& t) {
  const auto per = per_location_prf(t);
  if (per.empty()) return {};
  Prf sum;
  for (const Prf& p : per) {
    sum.precision += p.precision;
    sum.recall += p.recall;
    sum.f1 += p.f1;
  }
  const auto n = static_cast<double>(per.size());
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

double median_error(std::span<const double> dists_km) {
  require_non_empty(dists_km, "median");
  std::vector<double> v(dists_km.begin(), dists_km.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return (lower + upper) / 2.0;
}

double mean_error(std::span<const double> dists_km) {
  require_non_empty(dists_km, "mean");
  const double sum = std::accumulate(dists_km.begin(), dists_km.end(), 0.0);
  return sum / static_cast<double>(dists_km.size());
}

double acc_at(std::span<const double> dists_km, double threshold_km) {
  if (!(threshold_km > 0.0)) {
    throw ConfigError(fmt::format("threshold {} km must be positive", threshold_km));
  }
  require_non_empty(dists_km, "acc_at");
  const auto hits = std::count_if(dists_km.begin(), dists_km.end(),
                                  [&](double d) { return d <= threshold_km; });
  return static_cast<double>(hits) / static_cast<double>(dists_km.size());
}

std::vector<CdfPoint> cdf(std::span<const double> dists_km) {
  require_non_empty(dists_km, "cdf");
  std::vector<double> v(dists_km.begin(), dists_km.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double auc(std::span<const double> dists_km, double range_km) {
  if (!(range_km > 0.0)) {
    throw ConfigError(fmt::format("AUC range {} km must be positive", range_km));
  }
  require_non_empty(dists_km, "auc");
  // Each distance d contributes a step of height 1/n over [d, range].
  double area = 0.0;
  for (double d : dists_km) area += std::max(0.0, range_km - d);
  return area / (range_km * static_cast<double>(dists_km.size()));
}

MetricVector score(const ConfusionTally& t,
                   std::optional<std::span<const double>> dists_km,
                   const MetricOptions& options) {
  MetricVector m;
  m.granularity = t.granularity;
  m.acc = accuracy(t);
  m.micro = micro_prf(t);
  m.macro = macro_prf(t);
  if (dists_km) {
    m.acc_at = acc_at(*dists_km, options.threshold_km);
    m.median_km = median_error(*dists_km);
    m.mean_km = mean_error(*dists_km);
    m.auc = auc(*dists_km, options.auc_range_km);
  }
  return m;
}

std::vector<AdminPath> majority_class_run(std::span<const AdminPath> train,
                                          std::size_t n_test, Granularity g) {
  const auto counts = class_counts(train, g);
  // std::map iterates in path order, so the first maximum wins ties.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return std::vector<AdminPath>(n_test, best->first);
}

std::vector<AdminPath> majority_class_run(const GroundTruth& train,
                                          std::size_t n_test, Granularity g) {
  const auto paths = truth_paths(train);
  return majority_class_run(paths, n_test, g);
}

std::vector<AdminPath> stratified_sampling_run(std::span<const AdminPath> train,
                                               std::size_t n_test,
                                               Granularity g,
                                               std::uint64_t seed) {
  const auto counts = class_counts(train, g);
  std::vector<const AdminPath*> classes;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t total = 0;
  for (const auto& [path, n] : counts) {
    classes.push_back(&path);
    total += n;
    cumulative.push_back(total);
  }

  // Rejection sampling on raw engine output keeps the draw sequence
  // identical across standard library implementations.
  std::mt19937_64 engine(seed);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % total;
  std::vector<AdminPath> out;
  out.reserve(n_test);
  for (std::size_t i = 0; i < n_test; ++i) {
    std::uint64_t r;
    do {
      r = engine();
    } while (r >= limit);
    r %= total;
    const auto k = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) -
        cumulative.begin());
    out.push_back(*classes[k]);
  }
  return out;
}

std::vector<AdminPath> stratified_sampling_run(const GroundTruth& train,
                                               std::size_t n_test,
                                               Granularity g,
                                               std::uint64_t seed) {
  const auto paths = truth_paths(train);
  return stratified_sampling_run(paths, n_test, g, seed);
}

}  // namespace geoloceval
