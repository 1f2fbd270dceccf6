#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoloceval/geo_core.hpp"

namespace geoloceval {

inline constexpr double kDefaultAlpha = 0.05;
/// Sign tests use the exact binomial up to this many untied pairs.
inline constexpr std::size_t kBinomialExactMax = 200;
/// Wilcoxon uses the exact null distribution up to this many nonzero pairs.
inline constexpr std::size_t kWilcoxonExactMax = 25;
/// Kendall p-values are exact permutation tests up to this many systems.
inline constexpr std::size_t kKendallExactMax = 8;

/// Test families: micro sign (s), proportions z (p), macro sign (S),
/// macro paired t (T), Wilcoxon signed-rank (T').
enum class TestId { MicroSign, ProportionsZ, MacroSign, MacroT, Wilcoxon };

std::string_view symbol(TestId id);

enum class Direction { ABetter, BBetter, None };

std::string_view to_string(Direction d);
Direction flipped(Direction d);

struct TestResult {
  TestId test = TestId::MicroSign;
  /// Sign tests: wins of A among untied pairs. z test: z. t test: t.
  /// Wilcoxon: W+, the rank sum of pairs where A is higher.
  double statistic = 0.0;
  double p_value = 1.0;
  Direction direction = Direction::None;
  /// Untied pairs (sign, Wilcoxon), locations (t) or documents (z).
  std::size_t n_effective = 0;
  bool exact = true;
  /// Zero-variance t test with a nonzero mean difference.
  bool degenerate = false;
};

/// Two-sided exact binomial p-value for `k` successes out of `n` at 1/2.
double binomial_two_sided_p(std::size_t k, std::size_t n);
/// Continuity-corrected normal approximation of the same.
double binomial_two_sided_p_normal(std::size_t k, std::size_t n);

/// Sign test on per-document correctness. Pairs where both systems agree
/// are discarded.
TestResult micro_sign_test(const std::vector<bool>& a_correct,
                           const std::vector<bool>& b_correct);

/// Pooled two-proportion z test over `n` shared evaluations.
TestResult proportions_z_test(double p_a, double p_b, std::size_t n);

/// Sign test on paired per-location scores; zero differences discarded.
TestResult macro_sign_test(std::span<const double> a, std::span<const double> b);

/// Paired t test on per-location differences, df = n - 1. Requires n >= 2.
TestResult macro_t_test(std::span<const double> a, std::span<const double> b);

/// Wilcoxon signed-rank test, zero differences dropped, tied magnitudes
/// share their average rank. Exact distribution up to kWilcoxonExactMax
/// pairs, tie-corrected normal approximation above.
TestResult wilcoxon_test(std::span<const double> a, std::span<const double> b);

struct RankCorrelation {
  double tau_b = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool exact = true;
  /// False when either ranking is entirely tied.
  bool computable = true;
};

/// Kendall tau-b with tie correction in both rankings.
RankCorrelation kendall_tau_b(std::span<const double> x,
                              std::span<const double> y);

/// One test outcome for a labelled system pair.
struct PairwiseTest {
  std::string system_a;
  std::string system_b;
  TestResult result;
};

double discriminative_power(std::span<const PairwiseTest> results,
                            double alpha = kDefaultAlpha);

struct AgreementSummary {
  double dp_x = 0.0;
  double dp_y = 0.0;
  double ssa = 0.0;
  double ssd = 0.0;
  std::size_t n_pairs = 0;
};

/// Per system pair: active agreement when both tests are significant with
/// the same winner, active disagreement when both are significant with
/// opposite winners. Pair orientation may differ between the two lists.
/// Throws ValidationError when the lists cover different pairs.
AgreementSummary ssa_ssd(std::span<const PairwiseTest> x,
                         std::span<const PairwiseTest> y,
                         double alpha = kDefaultAlpha);

}  // namespace geoloceval
