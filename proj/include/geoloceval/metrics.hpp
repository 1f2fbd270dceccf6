#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "geoloceval/geo_core.hpp"
#include "geoloceval/geocode.hpp"
#include "geoloceval/ingest.hpp"

namespace geoloceval {

inline constexpr double kDefaultThresholdKm = 161.0;
inline constexpr double kDefaultAucRangeKm = 10000.0;

struct LocationCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const LocationCounts&, const LocationCounts&) = default;
};

/// Per-location true/false positives and false negatives at one granularity.
///
/// `counts` holds every location that occurs in the truth or the
/// predictions, keyed by its path truncated to the granularity. Predictions
/// that resolved to nothing are counted in `fp_unresolved`. The macro
/// universe is the set of distinct ground-truth locations, so all systems
/// scored against the same truth average over the same classes.
struct ConfusionTally {
  Granularity granularity = Granularity::City;
  std::size_t n_users = 0;
  std::map<AdminPath, LocationCounts> counts;
  std::vector<AdminPath> universe;
  std::size_t fp_unresolved = 0;

  std::size_t total_tp() const;
  std::size_t total_fp() const;
  std::size_t total_fn() const;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

/// `predicted[i]` is scored against `truth[i]`.
ConfusionTally tally(std::span<const AdminPath> predicted,
                     std::span<const AdminPath> truth, Granularity g);

/// Records must follow the aligned doc order of `data`.
ConfusionTally tally(std::span<const ResolvedRecord> records,
                     const GroundTruth& truth, Granularity g);

/// Throws ValidationError when n_users is 0.
double accuracy(const ConfusionTally& t);
Prf micro_prf(const ConfusionTally& t);
Prf macro_prf(const ConfusionTally& t);

/// Precision, recall and F1 for one location, with 0 for empty denominators.
Prf location_prf(const LocationCounts& c);
/// Per-location scores in universe order.
std::vector<Prf> per_location_prf(const ConfusionTally& t);

// Distance metrics. All throw ValidationError on empty input.
double median_error(std::span<const double> dists_km);
double mean_error(std::span<const double> dists_km);
/// Fraction of distances <= threshold. Throws ConfigError if threshold <= 0.
double acc_at(std::span<const double> dists_km,
              double threshold_km = kDefaultThresholdKm);

struct CdfPoint {
  double x_km;
  double fraction;
};
/// Empirical CDF as steps at each distinct distance.
std::vector<CdfPoint> cdf(std::span<const double> dists_km);
/// Area under the empirical CDF over [0, range], divided by range.
double auc(std::span<const double> dists_km,
           double range_km = kDefaultAucRangeKm);

/// All scores for one system at one granularity. Distance-based fields are
/// nullopt for class-only systems.
struct MetricVector {
  Granularity granularity = Granularity::City;
  double acc = 0.0;
  Prf micro;
  Prf macro;
  std::optional<double> acc_at;
  std::optional<double> median_km;
  std::optional<double> mean_km;
  std::optional<double> auc;
};

struct MetricOptions {
  double threshold_km = kDefaultThresholdKm;
  double auc_range_km = kDefaultAucRangeKm;
};

MetricVector score(const ConfusionTally& t,
                   std::optional<std::span<const double>> dists_km,
                   const MetricOptions& options = {});

// Baselines. Both predict labels only; `n_test` documents are emitted.

/// Most frequent training location at `g`; ties go to the smallest path.
std::vector<AdminPath> majority_class_run(std::span<const AdminPath> train,
                                          std::size_t n_test, Granularity g);
std::vector<AdminPath> majority_class_run(const GroundTruth& train,
                                          std::size_t n_test, Granularity g);

/// Each document independently draws a training location with probability
/// proportional to its frequency. Deterministic given the seed.
std::vector<AdminPath> stratified_sampling_run(std::span<const AdminPath> train,
                                               std::size_t n_test,
                                               Granularity g,
                                               std::uint64_t seed);
std::vector<AdminPath> stratified_sampling_run(const GroundTruth& train,
                                               std::size_t n_test,
                                               Granularity g,
                                               std::uint64_t seed);

}  // namespace geoloceval
