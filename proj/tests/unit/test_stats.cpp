#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "geoloceval/error.hpp"
#include "geoloceval/stats.hpp"

using namespace geoloceval;

namespace {

constexpr double kPiD = 3.14159265358979323846;

// Two-sided sign test p by enumerating every sign assignment.
double sign_oracle(int a_wins, int n) {
  const double obs = std::fabs(a_wins - n / 2.0);
  double extreme = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const int wins = std::popcount(mask);
    if (std::fabs(wins - n / 2.0) >= obs - 1e-12) ++extreme;
  }
  return std::min(1.0, extreme / std::ldexp(1.0, n));
}

// Wilcoxon p by enumerating every sign assignment of the given ranks.
double wilcoxon_oracle(const std::vector<double>& ranks, double w_plus) {
  const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
  const double obs = std::fabs(w_plus - total / 2);
  const std::size_t n = ranks.size();
  double extreme = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) w += ranks[i];
    }
    if (std::fabs(w - total / 2) >= obs - 1e-9) ++extreme;
  }
  return extreme / std::ldexp(1.0, static_cast<int>(n));
}

std::vector<double> average_ranks(const std::vector<double>& mags) {
  std::vector<double> r(mags.size());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    double below = 0, equal = 0;
    for (double m : mags) {
      below += m < mags[i];
      equal += m == mags[i];
    }
    r[i] = below + (equal + 1) / 2;
  }
  return r;
}

// Two-sided Student t tail for integer df (closed forms, A&S 26.7.3/26.7.4).
double t_two_sided_oracle(double t, int df) {
  const double theta = std::atan(std::fabs(t) / std::sqrt(static_cast<double>(df)));
  const double c = std::cos(theta), s = std::sin(theta);
  double a;
  if (df % 2 == 1) {
    double term = c, sum = df > 1 ? c : 0.0;
    for (int k = 3; k <= df - 2; k += 2) {
      term *= c * c * (k - 1) / k;
      sum += term;
    }
    a = 2 / kPiD * (theta + s * sum);
  } else {
    double term = 1, sum = 1;
    for (int k = 2; k <= df - 2; k += 2) {
      term *= c * c * (k - 1) / k;
      sum += term;
    }
    a = s * sum;
  }
  return 1 - a;
}

double tau_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  double nc = 0, nd = 0, tx = 0, ty = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++tx;
      if (dy == 0) ++ty;
      if (dx * dy > 0) ++nc;
      if (dx * dy < 0) ++nd;
    }
  }
  const double n0 = n * (n - 1) / 2.0;
  return (nc - nd) / std::sqrt((n0 - tx) * (n0 - ty));
}

// Permutation p-value over all n! orderings of y's indices.
double tau_p_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double obs = std::fabs(tau_oracle(x, y));
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  double extreme = 0, total = 0;
  do {
    std::vector<double> yp;
    for (std::size_t i : idx) yp.push_back(y[i]);
    if (std::fabs(tau_oracle(x, yp)) >= obs - 1e-12) ++extreme;
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return extreme / total;
}

std::vector<bool> decisions(std::initializer_list<int> v) {
  std::vector<bool> out;
  for (int x : v) out.push_back(x != 0);
  return out;
}

}  // namespace

TEST_CASE("exact binomial") {
  CHECK(binomial_two_sided_p(5, 10) == 1.0);
  CHECK(binomial_two_sided_p(9, 10) == doctest::Approx(22.0 / 1024).epsilon(1e-14));
  CHECK(binomial_two_sided_p(1, 10) == binomial_two_sided_p(9, 10));
  CHECK(binomial_two_sided_p(8, 8) == doctest::Approx(2.0 / 256).epsilon(1e-14));
  CHECK(binomial_two_sided_p(0, 0) == 1.0);
  CHECK_THROWS_AS(binomial_two_sided_p(3, 2), ValidationError);
  for (int n = 1; n <= 16; ++n) {
    for (int k = 0; k <= n; ++k) {
      CHECK(binomial_two_sided_p(k, n) == doctest::Approx(sign_oracle(k, n)).epsilon(1e-12));
    }
  }
  // Tail far below double underflow of 2^-n terms stays finite and ordered.
  CHECK(binomial_two_sided_p(1000, 1000) > 0.0);
  CHECK(binomial_two_sided_p(600, 1000) < binomial_two_sided_p(550, 1000));
}

TEST_CASE("exact and normal sign-test p agree near the crossover") {
  const std::size_t n = kBinomialExactMax;
  for (std::size_t k = 80; k <= 120; ++k) {
    CHECK(std::fabs(binomial_two_sided_p(k, n) - binomial_two_sided_p_normal(k, n)) < 0.01);
  }
}

TEST_CASE("micro sign test") {
  const auto same = micro_sign_test(decisions({1, 0, 1}), decisions({1, 0, 1}));
  CHECK(same.p_value == 1.0);
  CHECK(same.direction == Direction::None);

  std::vector<bool> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(i < 5);
    b.push_back(i >= 5);
  }
  CHECK(micro_sign_test(a, b).p_value == 1.0);
  for (int i = 0; i < 10; ++i) {
    a[i] = i != 0;
    b[i] = i == 0;
  }
  a.push_back(true);
  b.push_back(true);
  const auto r = micro_sign_test(a, b);
  CHECK(r.p_value == doctest::Approx(22.0 / 1024).epsilon(1e-12));
  CHECK(r.direction == Direction::ABetter);
  CHECK(r.n_effective == 10);
  CHECK(r.statistic == 9);
  CHECK(micro_sign_test(b, a).direction == Direction::BBetter);
  CHECK_THROWS_AS(micro_sign_test(decisions({1}), decisions({1, 0})), ValidationError);

  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 50; ++t) {
    std::vector<bool> x(12), y(12);
    int aw = 0, n = 0;
    for (int i = 0; i < 12; ++i) {
      x[i] = coin(rng);
      y[i] = coin(rng);
      aw += x[i] && !y[i];
      n += x[i] != y[i];
    }
    CHECK(micro_sign_test(x, y).p_value == doctest::Approx(sign_oracle(aw, n)).epsilon(1e-12));
  }
}

TEST_CASE("pooled proportions z test") {
  const auto eq = proportions_z_test(0.4, 0.4, 100);
  CHECK(eq.statistic == 0.0);
  CHECK(eq.p_value == 1.0);
  const auto ones = proportions_z_test(1, 1, 100);
  CHECK(ones.direction == Direction::None);
  CHECK(ones.p_value == 1.0);
  const auto r = proportions_z_test(0.6, 0.5, 1000);
  CHECK(r.statistic == doctest::Approx(4.4946657497549465).epsilon(1e-12));
  CHECK(r.p_value < 1e-4);
  CHECK(r.p_value == doctest::Approx(6.9679e-06).epsilon(1e-3));
  CHECK(r.direction == Direction::ABetter);
  CHECK_THROWS_AS(proportions_z_test(1.2, 0.5, 10), ValidationError);
  CHECK_THROWS_AS(proportions_z_test(0.2, 0.5, 0), ValidationError);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int t = 0; t < 50; ++t) {
    const double pa = u(rng), pb = u(rng);
    const std::size_t n = 10 + t * 37;
    const double pbar = (pa + pb) / 2;
    const double z = (pa - pb) / std::sqrt(pbar * (1 - pbar) * (2.0 / n));
    const double p = std::erfc(std::fabs(z) / std::sqrt(2.0));
    const auto got = proportions_z_test(pa, pb, n);
    CHECK(got.statistic == doctest::Approx(z).epsilon(1e-9));
    CHECK(got.p_value == doctest::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("macro sign test") {
  const std::vector<double> f{0.1, 0.5, 0.9};
  CHECK(macro_sign_test(f, f).p_value == 1.0);
  const std::vector<double> a(8, 0.9), b(8, 0.2);
  CHECK(macro_sign_test(a, b).p_value == doctest::Approx(2.0 / 256).epsilon(1e-12));
  const std::vector<double> x{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0.5};
  const std::vector<double> y{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 0.5};
  const auto r = macro_sign_test(x, y);
  CHECK(r.n_effective == 10);
  CHECK(r.p_value == doctest::Approx(sign_oracle(6, 10)).epsilon(1e-12));
  CHECK_THROWS_AS(macro_sign_test(x, f), ValidationError);
}

TEST_CASE("paired t test") {
  const std::vector<double> f{0.2, 0.4, 0.6};
  const auto same = macro_t_test(f, f);
  CHECK(same.p_value == 1.0);
  CHECK(same.direction == Direction::None);

  const std::vector<double> a{0.5, 0.6, 0.7, 0.8}, b{0.4, 0.5, 0.6, 0.7};
  const auto deg = macro_t_test(a, b);
  CHECK(deg.degenerate);
  CHECK(deg.direction == Direction::ABetter);
  CHECK_THROWS_AS(macro_t_test(std::vector<double>{1}, std::vector<double>{0}),
                  ValidationError);

  // Reference values from an independent statistics package.
  const std::vector<double> x{0.9, 0.7, 0.5, 0.8, 0.6}, y{0.6, 0.65, 0.4, 0.5, 0.55};
  const auto r = macro_t_test(x, y);
  CHECK(r.statistic == doctest::Approx(2.7643789618603507).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(0.050621762549260284).epsilon(1e-9));

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 12;
    std::vector<double> p(n), q(n), d(n);
    for (int i = 0; i < n; ++i) {
      p[i] = u(rng);
      q[i] = u(rng);
      d[i] = p[i] - q[i];
    }
    double mean = 0;
    for (double v : d) mean += v;
    mean /= n;
    double ss = 0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double tt = mean / std::sqrt(ss / (n - 1) / n);
    const auto got = macro_t_test(p, q);
    CHECK(got.statistic == doctest::Approx(tt).epsilon(1e-9));
    CHECK(got.p_value == doctest::Approx(t_two_sided_oracle(tt, n - 1)).epsilon(1e-9));
  }
}

TEST_CASE("wilcoxon signed-rank test") {
  const std::vector<double> f{0.2, 0.4, 0.6};
  CHECK(wilcoxon_test(f, f).p_value == 1.0);

  const std::vector<double> a{0.5, 0.2, 0.3, 0.9, 0.1, 0.4};
  std::vector<double> b{0.0, 0.4, 0.0, 0.0, 0.2, 0.0};
  const auto r = wilcoxon_test(a, b);
  const std::vector<double> diffs{0.5, -0.2, 0.3, 0.9, -0.1, 0.4};
  std::vector<double> mags;
  for (double d : diffs) mags.push_back(std::fabs(d));
  const auto ranks = average_ranks(mags);
  double w = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) w += diffs[i] > 0 ? ranks[i] : 0;
  CHECK(r.statistic == w);
  CHECK(r.p_value == doctest::Approx(wilcoxon_oracle(ranks, w)).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.15625).epsilon(1e-12));

  // Rank based: a monotone transform of the differences keeps the result.
  std::vector<double> cubed_a, cubed_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    cubed_a.push_back(d * d * d);
    cubed_b.push_back(0.0);
  }
  const auto rc = wilcoxon_test(cubed_a, cubed_b);
  CHECK(rc.statistic == r.statistic);
  CHECK(rc.p_value == r.p_value);

  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> level(0, 4);
  for (int t = 0; t < 60; ++t) {
    const int n = 1 + t % 12;
    std::vector<double> p(n), q(n);
    for (int i = 0; i < n; ++i) {
      p[i] = level(rng) / 4.0;
      q[i] = level(rng) / 4.0;
    }
    std::vector<double> ds, ms;
    for (int i = 0; i < n; ++i) {
      if (p[i] != q[i]) {
        ds.push_back(p[i] - q[i]);
        ms.push_back(std::fabs(p[i] - q[i]));
      }
    }
    const auto got = wilcoxon_test(p, q);
    if (ds.empty()) {
      CHECK(got.p_value == 1.0);
      continue;
    }
    const auto rk = average_ranks(ms);
    double wp = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) wp += ds[i] > 0 ? rk[i] : 0;
    CHECK(got.statistic == wp);
    CHECK(got.p_value == doctest::Approx(wilcoxon_oracle(rk, wp)).epsilon(1e-12));
  }
}

namespace {

// Tie-corrected normal approximation with continuity correction.
double wilcoxon_normal(const std::vector<double>& d) {
  std::vector<double> mags;
  for (double x : d) mags.push_back(std::fabs(x));
  const auto ranks = average_ranks(mags);
  double w = 0;
  for (std::size_t i = 0; i < d.size(); ++i) w += d[i] > 0 ? ranks[i] : 0;
  const double n = static_cast<double>(d.size());
  double ties = 0;
  for (double m : mags) {
    const double t = static_cast<double>(std::count(mags.begin(), mags.end(), m));
    ties += (t * t * t - t) / t;
  }
  const double var = n * (n + 1) * (2 * n + 1) / 24 - ties / 48;
  const double dev = std::max(0.0, std::fabs(w - n * (n + 1) / 4) - 0.5);
  return std::erfc(dev / std::sqrt(var) / std::sqrt(2.0));
}

}  // namespace

TEST_CASE("wilcoxon exact and normal p agree at the crossover") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 30; ++t) {
    for (std::size_t n : {kWilcoxonExactMax, kWilcoxonExactMax + 1}) {
      std::vector<double> a(n), b(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) a[i] = u(rng) + 0.1 * (t % 5);
      const auto r = wilcoxon_test(a, b);
      CHECK(r.exact == (n <= kWilcoxonExactMax));
      if (r.exact) {
        CHECK(std::fabs(r.p_value - wilcoxon_normal(a)) < 0.01);
      } else {
        CHECK(r.p_value == doctest::Approx(wilcoxon_normal(a)).epsilon(1e-12));
      }
    }
  }
  // Ties shrink the variance.
  std::vector<double> tied(40), zero(40, 0.0);
  for (std::size_t i = 0; i < tied.size(); ++i) tied[i] = (i % 4 == 0 ? -1.0 : 1.0) * (1 + i % 3);
  CHECK(wilcoxon_test(tied, zero).p_value == doctest::Approx(wilcoxon_normal(tied)).epsilon(1e-12));
}

TEST_CASE("kendall tau-b") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(kendall_tau_b(x, x).tau_b == 1.0);
  const std::vector<double> rev{4, 3, 2, 1};
  CHECK(kendall_tau_b(x, rev).tau_b == -1.0);
  const std::vector<double> y{1, 3, 2, 4};
  const auto r = kendall_tau_b(x, y);
  CHECK(r.tau_b == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.exact);

  const std::vector<double> flat{2, 2, 2, 2};
  CHECK_FALSE(kendall_tau_b(x, flat).computable);
  CHECK_THROWS_AS(kendall_tau_b(x, std::vector<double>{1, 2}), ValidationError);
  CHECK_THROWS_AS(kendall_tau_b(std::vector<double>{1}, std::vector<double>{1}),
                  ValidationError);
}

TEST_CASE("kendall tau-b matches brute force counting") {
  for (std::size_t n = 2; n <= 7; ++n) {
    std::vector<double> x(n), y(n);
    std::iota(x.begin(), x.end(), 1.0);
    std::iota(y.begin(), y.end(), 1.0);
    do {
      const auto r = kendall_tau_b(x, y);
      CHECK(r.tau_b == doctest::Approx(tau_oracle(x, y)).epsilon(1e-12));
    } while (std::next_permutation(y.begin(), y.end()));
  }
  std::mt19937_64 rng(41);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + t % 13;
    std::uniform_int_distribution<int> v(0, 3);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = v(rng);
      y[i] = v(rng);
    }
    const auto r = kendall_tau_b(x, y);
    const double want = tau_oracle(x, y);
    if (std::isnan(want)) {
      CHECK_FALSE(r.computable);
      continue;
    }
    CHECK(r.tau_b == doctest::Approx(want).epsilon(1e-12));
    if (n <= 7) CHECK(r.p_value == doctest::Approx(tau_p_oracle(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("kendall normal approximation above the exact range") {
  std::mt19937_64 rng(43);
  for (std::size_t n = kKendallExactMax + 1; n <= 30; ++n) {
    std::vector<double> x(n), y(n);
    std::iota(x.begin(), x.end(), 0.0);
    std::iota(y.begin(), y.end(), 0.0);
    std::shuffle(y.begin(), y.end(), rng);
    const auto r = kendall_tau_b(x, y);
    CHECK_FALSE(r.exact);
    const double nd = static_cast<double>(n);
    const double s = tau_oracle(x, y) * nd * (nd - 1) / 2;
    const double z = s / std::sqrt(nd * (nd - 1) * (2 * nd + 5) / 18);
    CHECK(r.p_value == doctest::Approx(std::erfc(std::fabs(z) / std::sqrt(2.0))).epsilon(1e-9));
  }
}

TEST_CASE("discriminative power and agreement") {
  auto pt = [](std::string a, std::string b, double p, Direction d) {
    TestResult r;
    r.p_value = p;
    r.direction = d;
    return PairwiseTest{std::move(a), std::move(b), r};
  };
  std::vector<PairwiseTest> none{pt("a", "b", 1.0, Direction::None),
                                 pt("a", "c", 1.0, Direction::None)};
  CHECK(discriminative_power(none) == 0.0);
  std::vector<PairwiseTest> all{pt("a", "b", 0.001, Direction::ABetter),
                                pt("a", "c", 0.001, Direction::BBetter)};
  CHECK(discriminative_power(all) == 1.0);
  std::vector<PairwiseTest> mixed{pt("a", "b", 0.001, Direction::ABetter),
                                  pt("a", "c", 0.2, Direction::BBetter),
                                  pt("b", "c", 0.05, Direction::BBetter)};
  CHECK(discriminative_power(mixed) == doctest::Approx(2.0 / 3.0));

  const auto self = ssa_ssd(mixed, mixed);
  CHECK(self.ssd == 0.0);
  CHECK(self.ssa == self.dp_x);

  std::vector<PairwiseTest> x{pt("a", "b", 0.01, Direction::ABetter)};
  std::vector<PairwiseTest> y{pt("a", "b", 0.01, Direction::BBetter)};
  const auto opp = ssa_ssd(x, y);
  CHECK(opp.ssa == 0.0);
  CHECK(opp.ssd == 1.0);
  // Orientation is normalized by name.
  std::vector<PairwiseTest> flipped_y{pt("b", "a", 0.01, Direction::BBetter)};
  CHECK(ssa_ssd(x, flipped_y).ssa == 1.0);

  std::vector<PairwiseTest> other{pt("a", "z", 0.01, Direction::ABetter)};
  CHECK_THROWS_AS(ssa_ssd(x, other), ValidationError);
  std::vector<PairwiseTest> dup{x[0], x[0]};
  CHECK_THROWS_AS(ssa_ssd(dup, dup), ValidationError);

  // Three systems classified pair by pair.
  std::vector<PairwiseTest> tx{pt("a", "b", 0.01, Direction::ABetter),
                               pt("a", "c", 0.01, Direction::ABetter),
                               pt("b", "c", 0.30, Direction::ABetter)};
  std::vector<PairwiseTest> ty{pt("a", "b", 0.02, Direction::ABetter),
                               pt("c", "a", 0.04, Direction::ABetter),
                               pt("b", "c", 0.01, Direction::BBetter)};
  const auto s = ssa_ssd(tx, ty);
  CHECK(s.n_pairs == 3);
  CHECK(s.ssa == doctest::Approx(1.0 / 3));
  CHECK(s.ssd == doctest::Approx(1.0 / 3));
  CHECK(s.dp_x == doctest::Approx(2.0 / 3));
  CHECK(s.dp_y == 1.0);
}
