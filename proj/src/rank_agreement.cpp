#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "geoloceval/error.hpp"
#include "geoloceval/stats.hpp"

namespace geoloceval {

namespace {

using Count = std::int64_t;

Count pairs(Count t) { return t * (t - 1) / 2; }

/// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Eq>
Count tied_pairs(std::size_t n, Eq equal) {
  Count total = 0;
  Count run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      total += pairs(run);
      run = 1;
    }
  }
  return total + pairs(run);
}

/// Stable merge sort of `v`, returning the number of inversions.
Count merge_count(std::vector<double>& v, std::vector<double>& buf,
                  std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  Count swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<Count>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

/// Concordant minus discordant pairs, O(n^2); used inside the permutation
/// null distribution where n is small.
Count score_quadratic(std::span<const double> x, std::span<const double> y) {
  Count s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double prod = dx * dy;
      if (prod > 0) ++s;
      else if (prod < 0) --s;
    }
  }
  return s;
}

std::vector<Count> tie_groups(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<Count> groups;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    groups.push_back(static_cast<Count>(j - i));
    i = j;
  }
  return groups;
}

}  // namespace

RankCorrelation kendall_tau_b(std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError("rankings differ in length");
  }
  if (x.size() < 2) throw ValidationError("rank correlation needs two systems");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) {
      throw ValidationError("rank correlation input contains NaN");
    }
  }
  const std::size_t n = x.size();
  RankCorrelation rc;
  rc.n = n;

  // Knight's algorithm: sort by (x, y), count x ties and joint ties, then
  // count the inversions a merge sort on y needs.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return x[i] < x[j] || (x[i] == x[j] && y[i] < y[j]);
  });
  const Count x_ties =
      tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const Count joint_ties = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]];
  });
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const Count swaps = merge_count(ys, buf, 0, n);
  const Count y_ties =
      tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  const Count total = pairs(static_cast<Count>(n));
  const Count s = total - x_ties - y_ties + joint_ties - 2 * swaps;
  if (total == x_ties || total == y_ties) {
    rc.computable = false;
    rc.tau_b = std::numeric_limits<double>::quiet_NaN();
    rc.p_value = std::numeric_limits<double>::quiet_NaN();
    return rc;
  }
  rc.tau_b = static_cast<double>(s) /
             std::sqrt(static_cast<double>(total - x_ties) *
                       static_cast<double>(total - y_ties));
  rc.tau_b = std::clamp(rc.tau_b, -1.0, 1.0);

  if (n <= kKendallExactMax) {
    // Every arrangement of y against fixed x is equally likely under
    // independence; distinct multiset permutations each stand for the same
    // number of raw permutations.
    std::vector<double> perm(y.begin(), y.end());
    std::sort(perm.begin(), perm.end());
    const Count observed = s < 0 ? -s : s;
    std::uint64_t extreme = 0, arrangements = 0;
    do {
      const Count sp = score_quadratic(x, perm);
      if ((sp < 0 ? -sp : sp) >= observed) ++extreme;
      ++arrangements;
    } while (std::next_permutation(perm.begin(), perm.end()));
    rc.p_value = static_cast<double>(extreme) / static_cast<double>(arrangements);
    return rc;
  }

  rc.exact = false;
  const double nd = static_cast<double>(n);
  double vt = 0, vu = 0, t1 = 0, u1 = 0, t2 = 0, u2 = 0;
  for (Count t : tie_groups(std::vector<double>(x.begin(), x.end()))) {
    const double td = static_cast<double>(t);
    vt += td * (td - 1) * (2 * td + 5);
    t1 += td * (td - 1);
    t2 += td * (td - 1) * (td - 2);
  }
  for (Count u : tie_groups(std::vector<double>(y.begin(), y.end()))) {
    const double ud = static_cast<double>(u);
    vu += ud * (ud - 1) * (2 * ud + 5);
    u1 += ud * (ud - 1);
    u2 += ud * (ud - 1) * (ud - 2);
  }
  const double var = (nd * (nd - 1) * (2 * nd + 5) - vt - vu) / 18.0 +
                     t1 * u1 / (2.0 * nd * (nd - 1)) +
                     t2 * u2 / (9.0 * nd * (nd - 1) * (nd - 2));
  const double z = static_cast<double>(s) / std::sqrt(var);
  rc.p_value = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
  return rc;
}

double discriminative_power(std::span<const PairwiseTest> results,
                            double alpha) {
  if (results.empty()) return 0.0;
  const auto significant =
      std::count_if(results.begin(), results.end(), [&](const PairwiseTest& t) {
        return t.result.p_value <= alpha;
      });
  return static_cast<double>(significant) / static_cast<double>(results.size());
}

AgreementSummary ssa_ssd(std::span<const PairwiseTest> x,
                         std::span<const PairwiseTest> y, double alpha) {
  using Key = std::pair<std::string, std::string>;
  // Orient every pair as (smaller name, larger name).
  auto index = [](std::span<const PairwiseTest> tests) {
    std::map<Key, const PairwiseTest*> out;
    for (const PairwiseTest& t : tests) {
      Key key = t.system_a < t.system_b ? Key{t.system_a, t.system_b}
                                        : Key{t.system_b, t.system_a};
      if (!out.emplace(std::move(key), &t).second) {
        throw ValidationError(fmt::format("system pair ({}, {}) listed twice",
                                          t.system_a, t.system_b));
      }
    }
    return out;
  };
  auto oriented = [](const Key& key, const PairwiseTest& t) {
    return t.system_a == key.first ? t.result.direction
                                   : flipped(t.result.direction);
  };

  const auto xs = index(x);
  const auto ys = index(y);
  if (xs.size() != ys.size()) {
    throw ValidationError("agreement inputs cover different system pairs");
  }
  AgreementSummary out;
  out.n_pairs = xs.size();
  if (out.n_pairs == 0) return out;

  std::size_t sig_x = 0, sig_y = 0, agree = 0, disagree = 0;
  for (const auto& [key, tx] : xs) {
    auto it = ys.find(key);
    if (it == ys.end()) {
      throw ValidationError(fmt::format(
          "system pair ({}, {}) missing from one agreement input", key.first,
          key.second));
    }
    const PairwiseTest& ty = *it->second;
    const bool sx = tx->result.p_value <= alpha;
    const bool sy = ty.result.p_value <= alpha;
    sig_x += sx;
    sig_y += sy;
    if (!sx || !sy) continue;
    const Direction dx = oriented(key, *tx);
    const Direction dy = oriented(key, ty);
    if (dx == Direction::None || dy == Direction::None) continue;
    if (dx == dy) ++agree;
    else ++disagree;
  }
  const auto n = static_cast<double>(out.n_pairs);
  out.dp_x = static_cast<double>(sig_x) / n;
  out.dp_y = static_cast<double>(sig_y) / n;
  out.ssa = static_cast<double>(agree) / n;
  out.ssd = static_cast<double>(disagree) / n;
  return out;
}

}  // namespace geoloceval
