#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoloceval/report.hpp"

namespace geoloceval::detail {

enum class CellMetric { Raw, Acc, PMicro, RMicro, PMacro, RMacro, F1Macro };

struct CellSpec {
  std::string id;
  TestId test;
  CellMetric metric;
};

/// The fixed list of test cells run at every granularity.
const std::vector<CellSpec>& test_cells();

TestResult run_cell(const CellSpec& cell, const MetricVector& va,
                    const MetricVector& vb, const std::vector<bool>& correct_a,
                    const std::vector<bool>& correct_b,
                    const std::vector<Prf>& locations_a,
                    const std::vector<Prf>& locations_b, std::size_t n_docs);

/// Metric names entering rank correlation, in column order.
std::vector<std::string> correlation_metrics(const ScoringOptions& options,
                                             bool with_distance);

std::vector<CorrelationEntry> correlations(const ScoreTable& table,
                                           const ScoringOptions& options);

/// Empirical CDF evaluated at 0, step, 2*step, ... up to `range_km`.
std::vector<CdfPoint> sample_cdf(std::span<const double> dists_km,
                                 double step_km, double range_km);

void echo_scoring(nlohmann::ordered_json& echo, const ScoringOptions& scoring);

std::string meta_json(const nlohmann::ordered_json& echo, const EvalReport& report);

/// Shortest round-trip text, "n/a" for missing or NaN values.
std::string number(double v);
std::string number(const std::optional<double>& v);

}  // namespace geoloceval::detail
