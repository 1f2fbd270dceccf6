#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geoloceval/geo_core.hpp"
#include "geoloceval/geocode.hpp"
#include "geoloceval/ingest.hpp"
#include "geoloceval/metrics.hpp"
#include "geoloceval/stats.hpp"

namespace geoloceval {

/// Pseudo-system under which ground truth is stored in resolved.json.
inline constexpr std::string_view kTruthSystem = "__truth__";

enum class ProviderKind { Offline, Nominatim, GoogleV3 };
enum class Baseline { MajorityClass, StratifiedSampling };

std::string_view to_string(ProviderKind p);
ProviderKind parse_provider(std::string_view name);
std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view name);
/// Pseudo-system name used in reports ("Mc", "Ss").
std::string_view system_label(Baseline b);

/// Environment variables that carry provider credentials.
inline constexpr const char* kGoogleKeyEnv = "GEOLOCEVAL_GOOGLE_API_KEY";
inline constexpr const char* kNominatimEmailEnv = "GEOLOCEVAL_NOMINATIM_EMAIL";

/// Scoring knobs shared by `evaluate` and `rescore`.
struct ScoringOptions {
  std::vector<Granularity> granularities{kAllGranularities.begin(),
                                         kAllGranularities.end()};
  double threshold_km = kDefaultThresholdKm;
  double auc_range_km = kDefaultAucRangeKm;
  double alpha = kDefaultAlpha;
  std::uint64_t seed = 0;
  std::vector<Baseline> baselines;
  std::size_t workers = 1;
  double clip_km = 6000.0;
  double cdf_step_km = 100.0;

  /// Throws ConfigError.
  void validate() const;
};

struct EvalConfig {
  std::string truth_path;
  std::vector<std::string> run_paths;
  ProviderKind provider = ProviderKind::Offline;
  std::string gazetteer_path;
  /// Empty keeps the cache in memory only.
  std::string cache_path;
  bool rebuild_cache = false;
  std::optional<std::string> endpoint;
  std::optional<double> requests_per_second;
  std::optional<std::size_t> daily_budget;
  MissingPolicy missing_policy = MissingPolicy::Error;
  /// Labelled or resolvable truth used to fit baselines; defaults to the
  /// evaluation truth.
  std::optional<std::string> baseline_train_path;
  ScoringOptions scoring;
  std::string out_dir;

  /// Checks every setting and input path without touching the filesystem
  /// beyond reads. Throws ConfigError.
  void validate() const;
};

/// Everything scoring needs: aligned ids, resolved truth and each system's
/// resolved records. This is what resolved.json holds.
struct ResolvedSystem {
  std::string name;
  std::vector<ResolvedRecord> records;  // aligned doc order
  std::vector<bool> missing;            // gaps filled under policy=wrong
};

struct ResolvedSet {
  std::vector<std::string> doc_ids;
  std::vector<GeoPoint> truth_points;
  std::vector<AdminPath> truth_paths;
  std::vector<ResolvedSystem> systems;
};

struct SystemInfo {
  std::string name;
  bool class_only = false;
  std::size_t missing = 0;
  std::size_t dropped_extra = 0;
};

/// Rows are systems (runs first, then baselines), columns granularities.
struct ScoreTable {
  std::vector<SystemInfo> systems;
  std::vector<Granularity> granularities;
  std::map<std::pair<std::string, Granularity>, MetricVector> cells;

  const MetricVector& at(const std::string& system, Granularity g) const;
};

/// A test family applied to one metric, e.g. "S-F1_M".
struct TestCell {
  std::string id;
  Granularity granularity;
  std::vector<PairwiseTest> pairs;
};

struct CorrelationEntry {
  std::string metric_x;
  Granularity granularity_x;
  std::string metric_y;
  Granularity granularity_y;
  RankCorrelation rc;
  std::size_t n_excluded = 0;
  bool significant = false;
};

struct AgreementEntry {
  Granularity granularity;
  std::string cell_x;
  std::string cell_y;
  AgreementSummary summary;
};

struct DistanceSummary {
  std::string system;
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;
  double mean = 0;
  std::size_t n_over_clip = 0;
};

struct RunStats {
  ResolveStats cache;
  std::int64_t wall_time_ms = 0;
};

struct EvalReport {
  ResolvedSet resolved;
  ScoreTable scores;
  std::vector<TestCell> tests;
  std::vector<CorrelationEntry> correlations;
  std::vector<AgreementEntry> agreements;
  std::vector<DistanceSummary> boxplots;
  /// (system, [(x_km, fraction)]) sampled on the configured grid.
  std::vector<std::pair<std::string, std::vector<CdfPoint>>> cdf_samples;
  ScoringOptions options;
  /// Config echo and constants; deterministic.
  std::string meta_json;
  RunStats stats;
};

/// Quartiles by linear interpolation between closest ranks, Tukey whiskers
/// clipped at `clip_km`.
DistanceSummary summarize_distances(std::string system,
                                    std::span<const double> dists_km,
                                    double clip_km);

/// Parse, align, resolve. Writes the geocode cache when configured.
ResolvedSet resolve_inputs(const EvalConfig& config, RunStats& stats,
                           std::vector<SystemInfo>& systems,
                           std::optional<std::vector<AdminPath>>& baseline_train);

/// Scores a resolved set. `baseline_train` defaults to the truth paths.
EvalReport score_resolved(ResolvedSet resolved, std::vector<SystemInfo> systems,
                          const ScoringOptions& options,
                          const std::optional<std::vector<AdminPath>>& baseline_train);

/// parse -> align -> resolve -> score -> test -> correlate -> agree.
EvalReport run_evaluation(const EvalConfig& config);

/// Scoring from a resolved.json alone.
struct RescoreConfig {
  std::string resolved_path;
  std::optional<std::string> baseline_train_path;
  ScoringOptions scoring;
  std::string out_dir;

  void validate() const;
};

EvalReport run_rescore(const RescoreConfig& config);

/// Nested map doc_id -> system -> record with fields doc_id, lon, lat,
/// country, county, state, city, error_dist (km). Truth is stored under
/// kTruthSystem.
std::string resolved_output_json(const ResolvedSet& set);
ResolvedSet parse_resolved_output(std::string_view text);
void emit_resolved_output(const ResolvedSet& set, const std::string& out_path);

/// Table renderings, each with a header row.
std::string scores_tsv(const EvalReport& report);
std::string tests_tsv(const EvalReport& report);
std::string correlations_tsv(const EvalReport& report);
std::string agreement_tsv(const EvalReport& report);
std::string boxplot_tsv(const EvalReport& report);
std::string cdf_tsv(const EvalReport& report);

/// Builds every output file (resolved.json, scores.tsv, tests.tsv,
/// correlations.tsv, agreement.tsv, boxplot.tsv, cdf.tsv, meta.json,
/// run_stats.json) in a staging directory, then swaps it in for `out_dir`.
/// An existing `out_dir` holding anything else is refused.
void emit_report(const EvalReport& report, const std::string& out_dir);
/// Writes boxplot.tsv and cdf.tsv into an existing directory.
void emit_plot_data(const EvalReport& report, const std::string& out_dir);

/// The fixed set of file names an output directory may contain.
const std::vector<std::string>& output_file_names();

}  // namespace geoloceval
