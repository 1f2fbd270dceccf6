#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "geoloceval/error.hpp"
#include "geoloceval/stats.hpp"

namespace geoloceval {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

double normal_two_sided(double z) {
  return std::min(1.0, std::erfc(std::fabs(z) / kSqrt2));
}

Direction direction_of(double diff) {
  if (diff > 0) return Direction::ABetter;
  if (diff < 0) return Direction::BBetter;
  return Direction::None;
}

void require_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError(fmt::format(
        "paired score lists differ in length ({} vs {})", a.size(), b.size()));
  }
}

TestResult sign_test(TestId id, std::size_t a_wins, std::size_t b_wins) {
  TestResult r;
  r.test = id;
  r.n_effective = a_wins + b_wins;
  r.statistic = static_cast<double>(a_wins);
  r.direction = a_wins > b_wins   ? Direction::ABetter
                : a_wins < b_wins ? Direction::BBetter
                                  : Direction::None;
  if (r.n_effective == 0) return r;
  r.exact = r.n_effective <= kBinomialExactMax;
  r.p_value = r.exact ? binomial_two_sided_p(a_wins, r.n_effective)
                      : binomial_two_sided_p_normal(a_wins, r.n_effective);
  return r;
}

}  // namespace

std::string_view symbol(TestId id) {
  switch (id) {
    case TestId::MicroSign: return "s";
    case TestId::ProportionsZ: return "p";
    case TestId::MacroSign: return "S";
    case TestId::MacroT: return "T";
    case TestId::Wilcoxon: return "T'";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::ABetter: return "a_better";
    case Direction::BBetter: return "b_better";
    case Direction::None: return "none";
  }
  return "?";
}

Direction flipped(Direction d) {
  if (d == Direction::ABetter) return Direction::BBetter;
  if (d == Direction::BBetter) return Direction::ABetter;
  return Direction::None;
}

double binomial_two_sided_p(std::size_t k, std::size_t n) {
  if (k > n) throw ValidationError("binomial successes exceed trials");
  if (n == 0) return 1.0;
  const std::size_t m = std::max(k, n - k);
  if (2 * m == n) return 1.0;
  // Upper tail sum of C(n, j) for j >= m, built from C(n, n) = 1 downward
  // so terms are added smallest first.
  long double coef = 1.0L;
  long double tail = 0.0L;
  for (std::size_t j = n;; --j) {
    tail += coef;
    if (j == m) break;
    coef = coef * static_cast<long double>(j) / static_cast<long double>(n - j + 1);
  }
  const long double p = 2.0L * std::ldexp(tail, -static_cast<int>(n));
  return std::min(1.0, static_cast<double>(p));
}

double binomial_two_sided_p_normal(std::size_t k, std::size_t n) {
  if (n == 0) return 1.0;
  const double half = static_cast<double>(n) / 2.0;
  const double dev =
      std::max(0.0, std::fabs(static_cast<double>(k) - half) - 0.5);
  return normal_two_sided(dev / (0.5 * std::sqrt(static_cast<double>(n))));
}

TestResult micro_sign_test(const std::vector<bool>& a_correct,
                           const std::vector<bool>& b_correct) {
  if (a_correct.size() != b_correct.size()) {
    throw ValidationError("decision vectors differ in length");
  }
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  for (std::size_t i = 0; i < a_correct.size(); ++i) {
    if (a_correct[i] && !b_correct[i]) ++a_wins;
    if (!a_correct[i] && b_correct[i]) ++b_wins;
  }
  return sign_test(TestId::MicroSign, a_wins, b_wins);
}

TestResult proportions_z_test(double p_a, double p_b, std::size_t n) {
  if (n == 0) throw ValidationError("z test over zero evaluations");
  if (!(p_a >= 0.0 && p_a <= 1.0 && p_b >= 0.0 && p_b <= 1.0)) {
    throw ValidationError("proportions must lie in [0, 1]");
  }
  TestResult r;
  r.test = TestId::ProportionsZ;
  r.n_effective = n;
  r.direction = direction_of(p_a - p_b);
  if (p_a == p_b) return r;
  const double pooled = (p_a + p_b) / 2.0;
  const double se = std::sqrt(pooled * (1.0 - pooled) * 2.0 / static_cast<double>(n));
  r.statistic = (p_a - p_b) / se;
  r.p_value = normal_two_sided(r.statistic);
  return r;
}

TestResult macro_sign_test(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b);
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++a_wins;
    if (a[i] < b[i]) ++b_wins;
  }
  return sign_test(TestId::MacroSign, a_wins, b_wins);
}

TestResult macro_t_test(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b);
  if (a.size() < 2) {
    throw ValidationError("paired t test needs at least two locations");
  }
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);

  TestResult r;
  r.test = TestId::MacroT;
  r.n_effective = n;
  r.direction = direction_of(mean);

  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  }
  // Differences equal up to the rounding of a[i] - b[i] count as zero variance.
  if (*hi - *lo <= 8.0 * std::numeric_limits<double>::epsilon() * scale) {
    if (*lo == 0.0 && *hi == 0.0) {
      r.direction = Direction::None;
      return r;
    }
    r.degenerate = true;
    r.direction = direction_of(*lo + *hi);
    r.statistic = r.direction == Direction::ABetter
                      ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }

  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
  r.p_value = std::min(
      1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic))));
  return r;
}

TestResult wilcoxon_test(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b);
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  TestResult r;
  r.test = TestId::Wilcoxon;
  const std::size_t n = d.size();
  r.n_effective = n;
  if (n == 0) return r;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::fabs(d[i]) < std::fabs(d[j]);
  });
  // Ranks are kept doubled so tied averages stay integral.
  std::vector<std::uint64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const std::size_t t = j - i + 1;
    const std::uint64_t avg2 = 2 * (i + 1) + (t - 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = avg2;
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
    i = j + 1;
  }
  std::uint64_t w_plus2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w_plus2 += rank2[i];
  }
  const std::uint64_t total2 = static_cast<std::uint64_t>(n) * (n + 1);
  r.statistic = static_cast<double>(w_plus2) / 2.0;
  r.direction = 2 * w_plus2 > total2   ? Direction::ABetter
                : 2 * w_plus2 < total2 ? Direction::BBetter
                                       : Direction::None;

  if (n <= kWilcoxonExactMax) {
    // Null distribution of the doubled positive rank sum over all 2^n sign
    // assignments.
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    std::uint64_t reach = 0;
    for (std::uint64_t r2 : rank2) {
      reach += r2;
      for (std::uint64_t s = reach; s >= r2; --s) ways[s] += ways[s - r2];
    }
    const auto observed = static_cast<std::int64_t>(2 * w_plus2) -
                          static_cast<std::int64_t>(total2);
    double extreme = 0.0;
    for (std::uint64_t s = 0; s <= total2; ++s) {
      const auto dev = static_cast<std::int64_t>(2 * s) - static_cast<std::int64_t>(total2);
      if (std::llabs(dev) >= std::llabs(observed)) extreme += ways[s];
    }
    r.p_value = std::min(1.0, std::ldexp(extreme, -static_cast<int>(n)));
    return r;
  }

  r.exact = false;
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = std::max(0.0, std::fabs(r.statistic - mean) - 0.5);
  r.p_value = normal_two_sided(dev / std::sqrt(var));
  return r;
}

}  // namespace geoloceval
