#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "geoloceval/error.hpp"
#include "pipeline_detail.hpp"

namespace geoloceval::detail {

using ordered_json = nlohmann::ordered_json;

const std::vector<CellSpec>& test_cells() {
  static const std::vector<CellSpec> cells = [] {
    std::vector<CellSpec> out{
        {"s-Raw", TestId::MicroSign, CellMetric::Raw},
        {"p-Acc", TestId::ProportionsZ, CellMetric::Acc},
        {"p-P_micro", TestId::ProportionsZ, CellMetric::PMicro},
        {"p-R_micro", TestId::ProportionsZ, CellMetric::RMicro},
    };
    for (TestId t : {TestId::MacroSign, TestId::MacroT, TestId::Wilcoxon}) {
      const std::string prefix(symbol(t));
      out.push_back({prefix + "-P_macro", t, CellMetric::PMacro});
      out.push_back({prefix + "-R_macro", t, CellMetric::RMacro});
      out.push_back({prefix + "-F1_macro", t, CellMetric::F1Macro});
    }
    return out;
  }();
  return cells;
}

namespace {

std::vector<double> column(const std::vector<Prf>& locations, CellMetric m) {
  std::vector<double> out;
  out.reserve(locations.size());
  for (const Prf& p : locations) {
    out.push_back(m == CellMetric::PMacro   ? p.precision
                  : m == CellMetric::RMacro ? p.recall
                                            : p.f1);
  }
  return out;
}

}  // namespace

TestResult run_cell(const CellSpec& cell, const MetricVector& va,
                    const MetricVector& vb, const std::vector<bool>& correct_a,
                    const std::vector<bool>& correct_b,
                    const std::vector<Prf>& locations_a,
                    const std::vector<Prf>& locations_b, std::size_t n_docs) {
  switch (cell.test) {
    case TestId::MicroSign:
      return micro_sign_test(correct_a, correct_b);
    case TestId::ProportionsZ: {
      const double pa = cell.metric == CellMetric::Acc      ? va.acc
                        : cell.metric == CellMetric::PMicro ? va.micro.precision
                                                            : va.micro.recall;
      const double pb = cell.metric == CellMetric::Acc      ? vb.acc
                        : cell.metric == CellMetric::PMicro ? vb.micro.precision
                                                            : vb.micro.recall;
      return proportions_z_test(pa, pb, n_docs);
    }
    default:
      break;
  }
  const auto a = column(locations_a, cell.metric);
  const auto b = column(locations_b, cell.metric);
  if (cell.test == TestId::MacroSign) return macro_sign_test(a, b);
  if (cell.test == TestId::Wilcoxon) return wilcoxon_test(a, b);
  if (a.size() < 2) {
    TestResult r;
    r.test = TestId::MacroT;
    r.n_effective = a.size();
    return r;
  }
  return macro_t_test(a, b);
}

namespace {

std::optional<double> metric_value(const MetricVector& v, std::size_t index) {
  switch (index) {
    case 0: return v.acc;
    case 1: return v.acc_at;
    case 2: return v.micro.precision;
    case 3: return v.micro.recall;
    case 4: return v.micro.f1;
    case 5: return v.macro.precision;
    case 6: return v.macro.recall;
    case 7: return v.macro.f1;
    case 8: return v.median_km;
    case 9: return v.mean_km;
  }
  return std::nullopt;
}

constexpr std::size_t kLabelMetrics = 8;

CorrelationEntry correlate(const ScoreTable& table, const ScoringOptions& options,
                           const std::vector<std::string>& names, std::size_t mx,
                           Granularity gx, std::size_t my, Granularity gy) {
  CorrelationEntry e;
  e.metric_x = names[mx];
  e.granularity_x = gx;
  e.metric_y = names[my];
  e.granularity_y = gy;
  std::vector<double> xs, ys;
  for (const SystemInfo& s : table.systems) {
    const auto x = metric_value(table.at(s.name, gx), mx);
    const auto y = metric_value(table.at(s.name, gy), my);
    if (!x || !y || std::isnan(*x) || std::isnan(*y)) {
      ++e.n_excluded;
      continue;
    }
    xs.push_back(*x);
    ys.push_back(*y);
  }
  if (xs.size() < 2) {
    e.rc.n = xs.size();
    e.rc.computable = false;
    e.rc.tau_b = std::numeric_limits<double>::quiet_NaN();
    e.rc.p_value = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  e.rc = kendall_tau_b(xs, ys);
  e.significant = e.rc.computable && e.rc.p_value <= options.alpha;
  return e;
}

}  // namespace

std::vector<std::string> correlation_metrics(const ScoringOptions& options,
                                             bool with_distance) {
  std::vector<std::string> names{"Acc",
                                 fmt::format("Acc@{}", options.threshold_km),
                                 "P_micro", "R_micro", "F1_micro",
                                 "P_macro", "R_macro", "F1_macro"};
  if (with_distance) {
    names.push_back("Median");
    names.push_back("Mean");
  }
  return names;
}

std::vector<CorrelationEntry> correlations(const ScoreTable& table,
                                           const ScoringOptions& options) {
  const auto names = correlation_metrics(options, true);
  std::vector<CorrelationEntry> out;
  for (Granularity g : table.granularities) {
    for (std::size_t x = 0; x < names.size(); ++x) {
      for (std::size_t y = x; y < names.size(); ++y) {
        out.push_back(correlate(table, options, names, x, g, y, g));
      }
    }
  }
  const auto& gs = table.granularities;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (std::size_t j = i + 1; j < gs.size(); ++j) {
      for (std::size_t x = 0; x < kLabelMetrics; ++x) {
        for (std::size_t y = 0; y < kLabelMetrics; ++y) {
          out.push_back(correlate(table, options, names, x, gs[i], y, gs[j]));
        }
      }
    }
  }
  return out;
}

std::vector<CdfPoint> sample_cdf(std::span<const double> dists_km,
                                 double step_km, double range_km) {
  if (dists_km.empty()) throw ValidationError("no distances to sample");
  std::vector<double> v(dists_km.begin(), dists_km.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  auto at = [&](double x) {
    const auto k = std::upper_bound(v.begin(), v.end(), x) - v.begin();
    return static_cast<double>(k) / n;
  };
  std::vector<CdfPoint> out;
  const auto steps = static_cast<std::size_t>(std::floor(range_km / step_km + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double x = static_cast<double>(i) * step_km;
    out.push_back({x, at(x)});
  }
  if (out.back().x_km < range_km) out.push_back({range_km, at(range_km)});
  return out;
}

void echo_scoring(ordered_json& echo, const ScoringOptions& s) {
  std::vector<std::string> gs;
  for (Granularity g : s.granularities) gs.emplace_back(to_string(g));
  std::vector<std::string> bs;
  for (Baseline b : s.baselines) bs.emplace_back(to_string(b));
  echo["granularities"] = gs;
  echo["threshold_km"] = s.threshold_km;
  echo["auc_range_km"] = s.auc_range_km;
  echo["alpha"] = s.alpha;
  echo["seed"] = s.seed;
  echo["baselines"] = bs;
  echo["workers"] = s.workers;
  echo["clip_km"] = s.clip_km;
  echo["cdf_step_km"] = s.cdf_step_km;
}

std::string meta_json(const ordered_json& echo, const EvalReport& report) {
  ordered_json meta;
  meta["config"] = echo;
  meta["units"] = "km";
  meta["earth_radius_km"] = kEarthRadiusKm;
  meta["distance"] = "haversine";
  meta["cache_decimals"] = CacheKey::kDecimals;
  meta["exact_max"] = {{"sign_test", kBinomialExactMax},
                       {"wilcoxon", kWilcoxonExactMax},
                       {"kendall", kKendallExactMax}};
  meta["z_test"] = "pooled two-proportion z over the shared documents";
  meta["quartiles"] = "linear interpolation between closest ranks (type 7)";
  meta["whiskers"] = "1.5 IQR, capped at clip_km";
  std::vector<std::string> cells;
  for (const CellSpec& c : test_cells()) cells.push_back(c.id);
  meta["test_cells"] = cells;
  ordered_json systems = ordered_json::array();
  for (const SystemInfo& s : report.scores.systems) {
    systems.push_back({{"name", s.name},
                       {"class_only", s.class_only},
                       {"missing", s.missing},
                       {"dropped_extra", s.dropped_extra}});
  }
  meta["systems"] = systems;
  meta["documents"] = report.resolved.doc_ids.size();
  return meta.dump(2) + "\n";
}

std::string number(double v) {
  if (std::isnan(v)) return "n/a";
  return fmt::format("{}", v);
}

std::string number(const std::optional<double>& v) {
  return v ? number(*v) : std::string("n/a");
}

}  // namespace geoloceval::detail
