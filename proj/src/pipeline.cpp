#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "geoloceval/error.hpp"
#include "geoloceval/report.hpp"
#include "parallel.hpp"
#include "pipeline_detail.hpp"

namespace geoloceval {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Names and configuration

std::string_view to_string(ProviderKind p) {
  switch (p) {
    case ProviderKind::Offline: return "offline";
    case ProviderKind::Nominatim: return "nominatim";
    case ProviderKind::GoogleV3: return "googlev3";
  }
  return "?";
}

ProviderKind parse_provider(std::string_view name) {
  if (name == "offline") return ProviderKind::Offline;
  if (name == "nominatim") return ProviderKind::Nominatim;
  if (name == "googlev3") return ProviderKind::GoogleV3;
  throw ConfigError(fmt::format("unknown provider '{}'", name));
}

std::string_view to_string(Baseline b) {
  return b == Baseline::MajorityClass ? "mc" : "ss";
}

Baseline parse_baseline(std::string_view name) {
  if (name == "mc") return Baseline::MajorityClass;
  if (name == "ss") return Baseline::StratifiedSampling;
  throw ConfigError(fmt::format("unknown baseline '{}'", name));
}

std::string_view system_label(Baseline b) {
  return b == Baseline::MajorityClass ? "Mc" : "Ss";
}

namespace {

void require_readable(const std::string& path, const char* what) {
  std::error_code ec;
  if (path.empty()) throw ConfigError(fmt::format("{} path is empty", what));
  if (!fs::is_regular_file(path, ec)) {
    throw ConfigError(fmt::format("{} '{}' is not a readable file", what, path));
  }
}

void require_parent_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(fmt::format("{} path is empty", what));
  fs::path parent = fs::absolute(fs::path(path)).parent_path();
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw ConfigError(fmt::format("directory for {} '{}' does not exist", what,
                                  parent.string()));
  }
}

}  // namespace

void ScoringOptions::validate() const {
  if (granularities.empty()) throw ConfigError("no granularity selected");
  std::set<Granularity> seen(granularities.begin(), granularities.end());
  if (seen.size() != granularities.size()) {
    throw ConfigError("granularity listed twice");
  }
  if (!(threshold_km > 0.0) || !std::isfinite(threshold_km)) {
    throw ConfigError("--threshold-km must be a positive number");
  }
  if (!(auc_range_km > 0.0) || !std::isfinite(auc_range_km)) {
    throw ConfigError("AUC range must be a positive number");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("--alpha must lie strictly between 0 and 1");
  }
  if (workers == 0) throw ConfigError("--workers must be at least 1");
  if (!(clip_km > 0.0)) throw ConfigError("--clip-km must be positive");
  if (!(cdf_step_km > 0.0)) throw ConfigError("--cdf-step-km must be positive");
  std::set<Baseline> b(baselines.begin(), baselines.end());
  if (b.size() != baselines.size()) throw ConfigError("baseline listed twice");
}

void EvalConfig::validate() const {
  scoring.validate();
  require_readable(truth_path, "ground truth");
  if (run_paths.empty()) throw ConfigError("at least one --run is required");
  std::set<std::string> names;
  for (const auto& p : run_paths) {
    require_readable(p, "run file");
    const std::string name = system_name_from_path(p);
    if (name == kTruthSystem) {
      throw ConfigError(fmt::format("system name '{}' is reserved", name));
    }
    for (Baseline b : scoring.baselines) {
      if (name == system_label(b)) {
        throw ConfigError(fmt::format(
            "system name '{}' collides with a baseline pseudo-system", name));
      }
    }
    if (!names.insert(name).second) {
      throw ConfigError(fmt::format("two run files share the system name '{}'", name));
    }
  }
  if (baseline_train_path) require_readable(*baseline_train_path, "baseline training truth");
  switch (provider) {
    case ProviderKind::Offline:
      require_readable(gazetteer_path, "gazetteer");
      break;
    case ProviderKind::GoogleV3: {
      const char* key = std::getenv(kGoogleKeyEnv);
      if (!endpoint && (key == nullptr || *key == '\0')) {
        throw ConfigError(fmt::format(
            "provider googlev3 needs an API key in ${}", kGoogleKeyEnv));
      }
      break;
    }
    case ProviderKind::Nominatim:
      break;
  }
  if (endpoint && endpoint->find("://") == std::string::npos) {
    throw ConfigError(fmt::format("endpoint '{}' lacks a scheme", *endpoint));
  }
  if (requests_per_second && !(*requests_per_second >= 0.0)) {
    throw ConfigError("--rps must be non-negative");
  }
  if (!cache_path.empty()) require_parent_dir(cache_path, "cache");
  require_parent_dir(out_dir, "output directory");
}

void RescoreConfig::validate() const {
  scoring.validate();
  require_readable(resolved_path, "resolved records");
  if (baseline_train_path) require_readable(*baseline_train_path, "baseline training truth");
  require_parent_dir(out_dir, "output directory");
}

const MetricVector& ScoreTable::at(const std::string& system, Granularity g) const {
  auto it = cells.find({system, g});
  if (it == cells.end()) {
    throw ValidationError(fmt::format("no scores for system '{}' at {}", system,
                                      to_string(g)));
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Resolution stage

namespace {

std::unique_ptr<GeocodeProvider> make_provider(const EvalConfig& config) {
  if (config.provider == ProviderKind::Offline) {
    auto gazetteer = std::make_shared<const Gazetteer>(Gazetteer::load(config.gazetteer_path));
    return std::make_unique<GazetteerProvider>(std::move(gazetteer));
  }
  RemoteProviderConfig remote = config.provider == ProviderKind::Nominatim
                                    ? nominatim_defaults()
                                    : googlev3_defaults();
  if (config.endpoint) remote.endpoint = *config.endpoint;
  if (config.requests_per_second) remote.limit.requests_per_second = *config.requests_per_second;
  if (config.daily_budget) remote.limit.daily_budget = *config.daily_budget;
  const char* env = std::getenv(config.provider == ProviderKind::Nominatim
                                    ? kNominatimEmailEnv
                                    : kGoogleKeyEnv);
  if (env != nullptr) remote.credential = env;
  return config.provider == ProviderKind::Nominatim
             ? make_nominatim_provider(std::move(remote))
             : make_googlev3_provider(std::move(remote));
}

}  // namespace

ResolvedSet resolve_inputs(const EvalConfig& config, RunStats& stats,
                           std::vector<SystemInfo>& systems,
                           std::optional<std::vector<AdminPath>>& baseline_train) {
  GroundTruth truth = parse_ground_truth(read_file(config.truth_path));
  if (truth.records.empty()) throw ValidationError("ground truth has no records");
  std::vector<PredictionRun> runs;
  for (const auto& path : config.run_paths) {
    runs.push_back(parse_predictions(read_file(path), system_name_from_path(path)));
  }
  std::optional<GroundTruth> train;
  if (config.baseline_train_path) {
    train = parse_ground_truth(read_file(*config.baseline_train_path));
  }
  AlignedDataset data = align(std::move(truth), runs, config.missing_policy);

  auto provider = make_provider(config);
  GeocodeCache cache;
  if (!config.cache_path.empty() && !config.rebuild_cache) {
    cache = load_cache(config.cache_path);
  }
  ResolverOptions ropts;
  ropts.workers = config.provider == ProviderKind::Offline ? 1 : config.scoring.workers;
  if (!config.cache_path.empty()) ropts.cache_path = config.cache_path;
  Resolver resolver(*provider, cache, ropts);

  resolve_truth(data.truth, resolver);
  if (train) {
    resolve_truth(*train, resolver);
    std::vector<AdminPath> paths;
    for (const auto& [id, rec] : train->records) paths.push_back(*rec.path);
    baseline_train = std::move(paths);
  }
  auto records = resolve_runs(data, resolver);
  stats.cache = resolver.stats();

  ResolvedSet set;
  set.doc_ids = data.doc_ids;
  for (const auto& id : data.doc_ids) {
    const TruthRecord& rec = data.truth.records.at(id);
    set.truth_points.push_back(rec.home);
    set.truth_paths.push_back(*rec.path);
  }
  systems.clear();
  for (std::size_t r = 0; r < data.runs.size(); ++r) {
    const AlignedRun& run = data.runs[r];
    ResolvedSystem sys;
    sys.name = run.system_name;
    sys.records = std::move(records[r]);
    for (const auto& p : run.predictions) sys.missing.push_back(p.missing);
    set.systems.push_back(std::move(sys));
    systems.push_back({run.system_name, false, run.missing_count, run.dropped_extra});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Scoring stage

DistanceSummary summarize_distances(std::string system,
                                    std::span<const double> dists_km,
                                    double clip_km) {
  if (dists_km.empty()) throw ValidationError("no distances to summarize");
  std::vector<double> v(dists_km.begin(), dists_km.end());
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
  };
  DistanceSummary s;
  s.system = std::move(system);
  s.n = v.size();
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = *std::lower_bound(v.begin(), v.end(), lo_fence);
  s.whisker_high = *(std::upper_bound(v.begin(), v.end(), hi_fence) - 1);
  s.whisker_high = std::min(s.whisker_high, clip_km);
  s.whisker_low = std::min(s.whisker_low, clip_km);
  s.mean = mean_error(v);
  s.n_over_clip = static_cast<std::size_t>(
      v.end() - std::upper_bound(v.begin(), v.end(), clip_km));
  return s;
}

namespace {

struct Scored {
  std::string name;
  bool class_only = false;
  /// Predicted labels per granularity index; resolved systems share one list.
  std::array<std::shared_ptr<const std::vector<AdminPath>>, 4> labels;
  std::vector<double> dists;
};

std::size_t gi(Granularity g) { return static_cast<std::size_t>(g); }

}  // namespace

EvalReport score_resolved(ResolvedSet resolved, std::vector<SystemInfo> systems,
                          const ScoringOptions& options,
                          const std::optional<std::vector<AdminPath>>& baseline_train) {
  options.validate();
  const std::size_t n_docs = resolved.doc_ids.size();
  if (n_docs == 0) throw ValidationError("empty evaluation: no documents");
  if (resolved.systems.empty()) throw ValidationError("no systems to evaluate");
  const auto& truth = resolved.truth_paths;

  std::vector<Scored> scored;
  for (const ResolvedSystem& sys : resolved.systems) {
    Scored s;
    s.name = sys.name;
    auto labels = std::make_shared<std::vector<AdminPath>>();
    labels->reserve(n_docs);
    for (const auto& r : sys.records) {
      labels->push_back(r.path);
      s.dists.push_back(r.error_dist_km);
    }
    s.labels.fill(labels);
    scored.push_back(std::move(s));
  }
  const std::vector<AdminPath>& train = baseline_train ? *baseline_train : truth;
  for (Baseline b : options.baselines) {
    Scored s;
    s.name = std::string(system_label(b));
    s.class_only = true;
    for (Granularity g : options.granularities) {
      s.labels[gi(g)] = std::make_shared<const std::vector<AdminPath>>(
          b == Baseline::MajorityClass
              ? majority_class_run(train, n_docs, g)
              : stratified_sampling_run(train, n_docs, g, options.seed));
    }
    scored.push_back(std::move(s));
    systems.push_back({std::string(system_label(b)), true, 0, 0});
  }

  EvalReport report;
  report.options = options;
  report.scores.systems = systems;
  report.scores.granularities = options.granularities;

  // Tallies, score vectors, per-document correctness, per-location scores.
  const std::size_t n_sys = scored.size();
  const std::size_t n_g = options.granularities.size();
  std::vector<ConfusionTally> tallies(n_sys * n_g);
  std::vector<MetricVector> vectors(n_sys * n_g);
  std::vector<std::vector<bool>> correct(n_sys * n_g);
  std::vector<std::vector<Prf>> per_location(n_sys * n_g);
  const MetricOptions mopts{options.threshold_km, options.auc_range_km};
  parallel_for(n_sys * n_g, options.workers, [&](std::size_t k) {
    const Scored& s = scored[k / n_g];
    const Granularity g = options.granularities[k % n_g];
    const auto& labels = *s.labels[gi(g)];
    tallies[k] = tally(labels, truth, g);
    std::optional<std::span<const double>> dists;
    if (!s.class_only) dists = std::span<const double>(s.dists);
    vectors[k] = score(tallies[k], dists, mopts);
    correct[k].resize(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
      correct[k][i] = labels[i].same_location(truth[i], g);
    }
    per_location[k] = per_location_prf(tallies[k]);
  });
  for (std::size_t k = 0; k < n_sys * n_g; ++k) {
    report.scores.cells[{scored[k / n_g].name, options.granularities[k % n_g]}] =
        vectors[k];
  }

  // Pairwise significance tests.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n_sys; ++a) {
    for (std::size_t b = a + 1; b < n_sys; ++b) pairs.emplace_back(a, b);
  }
  const auto& cells = detail::test_cells();
  report.tests.resize(n_g * cells.size());
  parallel_for(report.tests.size(), options.workers, [&](std::size_t t) {
    const std::size_t g_index = t / cells.size();
    const detail::CellSpec& cell = cells[t % cells.size()];
    TestCell& out = report.tests[t];
    out.id = cell.id;
    out.granularity = options.granularities[g_index];
    for (auto [a, b] : pairs) {
      const std::size_t ka = a * n_g + g_index;
      const std::size_t kb = b * n_g + g_index;
      out.pairs.push_back({scored[a].name, scored[b].name,
                           detail::run_cell(cell, vectors[ka], vectors[kb],
                                            correct[ka], correct[kb],
                                            per_location[ka], per_location[kb],
                                            n_docs)});
    }
  });

  // Agreement between every two test cells at each granularity.
  for (std::size_t g_index = 0; g_index < n_g; ++g_index) {
    for (std::size_t x = 0; x < cells.size(); ++x) {
      for (std::size_t y = x; y < cells.size(); ++y) {
        const TestCell& cx = report.tests[g_index * cells.size() + x];
        const TestCell& cy = report.tests[g_index * cells.size() + y];
        report.agreements.push_back({options.granularities[g_index], cx.id, cy.id,
                                     ssa_ssd(cx.pairs, cy.pairs, options.alpha)});
      }
    }
  }

  report.correlations = detail::correlations(report.scores, options);

  for (const Scored& s : scored) {
    if (s.class_only) continue;
    report.boxplots.push_back(summarize_distances(s.name, s.dists, options.clip_km));
    report.cdf_samples.emplace_back(
        s.name, detail::sample_cdf(s.dists, options.cdf_step_km, options.auc_range_km));
  }

  report.resolved = std::move(resolved);
  return report;
}

// ---------------------------------------------------------------------------

EvalReport run_evaluation(const EvalConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunStats stats;
  std::vector<SystemInfo> systems;
  std::optional<std::vector<AdminPath>> train;
  ResolvedSet set = resolve_inputs(config, stats, systems, train);
  EvalReport report = score_resolved(std::move(set), std::move(systems),
                                     config.scoring, train);

  ordered_json echo;
  echo["command"] = "evaluate";
  echo["truth"] = config.truth_path;
  echo["runs"] = config.run_paths;
  echo["provider"] = to_string(config.provider);
  echo["gazetteer"] = config.gazetteer_path;
  echo["cache"] = config.cache_path;
  echo["rebuild_cache"] = config.rebuild_cache;
  echo["endpoint"] = config.endpoint ? ordered_json(*config.endpoint) : ordered_json();
  echo["rps"] = config.requests_per_second ? ordered_json(*config.requests_per_second)
                                           : ordered_json();
  echo["daily_budget"] = config.daily_budget ? ordered_json(*config.daily_budget)
                                             : ordered_json();
  echo["missing"] = to_string(config.missing_policy);
  echo["baseline_train"] = config.baseline_train_path
                               ? ordered_json(*config.baseline_train_path)
                               : ordered_json();
  detail::echo_scoring(echo, config.scoring);
  echo["out_dir"] = config.out_dir;
  report.meta_json = detail::meta_json(echo, report);

  stats.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  report.stats = stats;
  return report;
}

EvalReport run_rescore(const RescoreConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ResolvedSet set = parse_resolved_output(read_file(config.resolved_path));
  std::optional<std::vector<AdminPath>> train;
  if (config.baseline_train_path) {
    GroundTruth t = parse_ground_truth(read_file(*config.baseline_train_path));
    if (!t.fully_resolved()) {
      throw ValidationError(
          "rescoring needs a baseline training file with labels on every record");
    }
    std::vector<AdminPath> paths;
    for (const auto& [id, rec] : t.records) paths.push_back(*rec.path);
    train = std::move(paths);
  }
  std::vector<SystemInfo> systems;
  for (const ResolvedSystem& s : set.systems) {
    const auto missing = static_cast<std::size_t>(
        std::count(s.missing.begin(), s.missing.end(), true));
    systems.push_back({s.name, false, missing, 0});
  }
  EvalReport report = score_resolved(std::move(set), std::move(systems),
                                     config.scoring, train);
  ordered_json echo;
  echo["command"] = "rescore";
  echo["resolved"] = config.resolved_path;
  echo["baseline_train"] = config.baseline_train_path
                               ? ordered_json(*config.baseline_train_path)
                               : ordered_json();
  detail::echo_scoring(echo, config.scoring);
  echo["out_dir"] = config.out_dir;
  report.meta_json = detail::meta_json(echo, report);
  report.stats.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
  return report;
}

}  // namespace geoloceval
