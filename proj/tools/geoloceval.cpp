// geoloceval: evaluate geolocation runs against ground truth.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "geoloceval/error.hpp"
#include "geoloceval/report.hpp"

namespace gle = geoloceval;

namespace {

struct ScoringFlags {
  std::vector<std::string> granularities;
  std::vector<std::string> baselines;
};

void add_scoring_flags(CLI::App& cmd, gle::ScoringOptions& s, ScoringFlags& f) {
  cmd.add_option("--granularity", f.granularities,
                 "Levels to score: city, county, state, country (default all)")
      ->delimiter(',');
  cmd.add_option("--threshold-km", s.threshold_km, "Acc@X threshold in km")
      ->capture_default_str();
  cmd.add_option("--auc-range-km", s.auc_range_km, "Upper end of the AUC range")
      ->capture_default_str();
  cmd.add_option("--alpha", s.alpha, "Significance level")->capture_default_str();
  cmd.add_option("--seed", s.seed, "Seed for the stratified-sampling baseline")
      ->capture_default_str();
  cmd.add_option("--baseline", f.baselines, "Add a baseline pseudo-system: mc, ss")
      ->delimiter(',');
  cmd.add_option("--workers", s.workers, "Worker threads")->capture_default_str();
  cmd.add_option("--clip-km", s.clip_km, "Display clip for boxplot data")
      ->capture_default_str();
  cmd.add_option("--cdf-step-km", s.cdf_step_km, "CDF sampling step")
      ->capture_default_str();
}

void apply_scoring_flags(gle::ScoringOptions& s, const ScoringFlags& f) {
  if (!f.granularities.empty()) {
    s.granularities.clear();
    for (const auto& g : f.granularities) s.granularities.push_back(gle::parse_granularity(g));
  }
  for (const auto& b : f.baselines) s.baselines.push_back(gle::parse_baseline(b));
}

void print_summary(const gle::EvalReport& report, const std::string& out_dir) {
  std::cout << fmt::format("{} documents, {} systems, {} test cells -> {}\n",
                           report.resolved.doc_ids.size(),
                           report.scores.systems.size(), report.tests.size(),
                           out_dir);
  const auto& c = report.stats.cache;
  std::cout << fmt::format("geocoding: {} queries, {} cache hits, {} provider lookups\n",
                           c.queries, c.cache_hits, c.provider_lookups);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate geolocation system outputs against ground truth."};
  app.require_subcommand(1);
  app.footer(fmt::format(
      "Credentials are read from the environment only:\n"
      "  {}   API key for --provider googlev3\n"
      "  {}  contact e-mail sent to --provider nominatim\n"
      "Exit codes: 0 ok, 2 configuration, 3 input validation, 4 geocoding, 5 I/O.",
      gle::kGoogleKeyEnv, gle::kNominatimEmailEnv));

  gle::EvalConfig config;
  ScoringFlags eval_flags;
  std::string provider = "offline";
  std::string missing = "error";
  std::optional<std::string> endpoint;
  std::optional<double> rps;
  std::optional<std::size_t> budget;
  std::optional<std::string> eval_train;

  auto* evaluate = app.add_subcommand("evaluate", "Resolve, score and test runs");
  evaluate->add_option("--truth", config.truth_path, "Ground-truth file")->required();
  evaluate->add_option("--run", config.run_paths, "Prediction run file (repeatable)")
      ->required();
  evaluate->add_option("--provider", provider, "offline, nominatim or googlev3")
      ->capture_default_str();
  evaluate->add_option("--gazetteer", config.gazetteer_path,
                       "Gazetteer for the offline provider");
  evaluate->add_option("--cache", config.cache_path, "Persistent geocode cache file");
  evaluate->add_flag("--rebuild-cache", config.rebuild_cache,
                     "Ignore the existing cache contents");
  evaluate->add_option("--endpoint", endpoint, "Override the provider base URL");
  evaluate->add_option("--rps", rps, "Override the provider request rate");
  evaluate->add_option("--daily-budget", budget,
                       "Override the provider request budget per invocation");
  evaluate->add_option("--missing", missing, "Gap policy: error or wrong")
      ->capture_default_str();
  evaluate->add_option("--baseline-train", eval_train,
                       "Ground truth used to fit baselines (default: --truth)");
  evaluate->add_option("--out-dir", config.out_dir, "Output directory")->required();
  add_scoring_flags(*evaluate, config.scoring, eval_flags);

  gle::RescoreConfig rescore_config;
  ScoringFlags rescore_flags;
  std::optional<std::string> rescore_train;
  auto* rescore = app.add_subcommand("rescore", "Score a resolved.json again");
  rescore->add_option("--resolved", rescore_config.resolved_path, "resolved.json")
      ->required();
  rescore->add_option("--baseline-train", rescore_train,
                      "Labelled ground truth used to fit baselines");
  rescore->add_option("--out-dir", rescore_config.out_dir, "Output directory")
      ->required();
  add_scoring_flags(*rescore, rescore_config.scoring, rescore_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(gle::ErrorKind::Config);
  }

  try {
    if (*evaluate) {
      config.provider = gle::parse_provider(provider);
      config.missing_policy = gle::parse_missing_policy(missing);
      config.endpoint = endpoint;
      config.requests_per_second = rps;
      config.daily_budget = budget;
      config.baseline_train_path = eval_train;
      apply_scoring_flags(config.scoring, eval_flags);
      const auto report = gle::run_evaluation(config);
      gle::emit_report(report, config.out_dir);
      print_summary(report, config.out_dir);
    } else {
      rescore_config.baseline_train_path = rescore_train;
      apply_scoring_flags(rescore_config.scoring, rescore_flags);
      const auto report = gle::run_rescore(rescore_config);
      gle::emit_report(report, rescore_config.out_dir);
      print_summary(report, rescore_config.out_dir);
    }
  } catch (const gle::Error& e) {
    std::cerr << "geoloceval: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "geoloceval: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
