#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "csv.hpp"
#include "geoloceval/geocode.hpp"

namespace geoloceval {

namespace {

constexpr std::uint32_t kLeafSize = 8;

std::array<double, 3> unit_vector(const GeoPoint& p) {
  const double phi = p.lat() * kPi / 180.0;
  const double lambda = p.lon() * kPi / 180.0;
  return {std::cos(phi) * std::cos(lambda), std::cos(phi) * std::sin(lambda),
          std::sin(phi)};
}

double chord2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double box_distance2(const std::array<double, 3>& q,
                     const std::array<double, 3>& lo,
                     const std::array<double, 3>& hi) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double excess = q[k] < lo[k] ? lo[k] - q[k]
                          : q[k] > hi[k] ? q[k] - hi[k]
                                         : 0.0;
    d += excess * excess;
  }
  return d;
}

double parse_number(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(
        fmt::format("gazetteer line {}: '{}' is not a number", line_no, text), 0);
  }
  return value;
}

}  // namespace

Gazetteer::Gazetteer(std::vector<GazetteerRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw ValidationError("gazetteer has no rows");
  if (rows_.size() > std::numeric_limits<std::int32_t>::max()) {
    throw ValidationError("gazetteer too large");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const AdminPath& p = rows_[i].path;
    if (p.sentinel || p.country.empty() || !p.state || !p.county || !p.city) {
      throw ValidationError(
          fmt::format("gazetteer row {} lacks an administrative level", i + 1));
    }
  }
  order_.resize(rows_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  unit_.reserve(rows_.size());
  for (const GazetteerRow& r : rows_) unit_.push_back(unit_vector(r.centroid));
  // unit_ is indexed by row; build() permutes order_ only.
  nodes_.reserve(2 * rows_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(rows_.size()));
}

std::int32_t Gazetteer::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo.fill(std::numeric_limits<double>::infinity());
  node.hi.fill(-std::numeric_limits<double>::infinity());
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& v = unit_[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo[k] = std::min(node.lo[k], v[k]);
      node.hi[k] = std::max(node.hi[k], v[k]);
    }
  }
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return index;

  int axis = 0;
  for (int k = 1; k < 3; ++k) {
    if (node.hi[k] - node.lo[k] > node.hi[axis] - node.lo[axis]) axis = k;
  }
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     return unit_[a][axis] < unit_[b][axis];
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void Gazetteer::search(std::int32_t index, const std::array<double, 3>& q,
                       double& best) const {
  const Node& node = nodes_[index];
  if (box_distance2(q, node.lo, node.hi) > best) return;
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      best = std::min(best, chord2(q, unit_[order_[i]]));
    }
    return;
  }
  const Node& l = nodes_[node.left];
  const Node& r = nodes_[node.right];
  if (box_distance2(q, l.lo, l.hi) <= box_distance2(q, r.lo, r.hi)) {
    search(node.left, q, best);
    search(node.right, q, best);
  } else {
    search(node.right, q, best);
    search(node.left, q, best);
  }
}

std::size_t Gazetteer::nearest(const GeoPoint& p) const {
  const auto q = unit_vector(p);
  double best = std::numeric_limits<double>::infinity();
  search(0, q, best);

  // Chord length is monotone in great-circle distance; rounding can still
  // reorder near-ties, so every row within a small slack is re-ranked by
  // haversine distance and row index.
  const double radius = best * (1.0 + 1e-9) + 1e-12;
  std::size_t winner = rows_.size();
  double winner_km = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance2(q, node.lo, node.hi) > radius) continue;
    if (node.left >= 0) {
      stack.push_back(node.left);
      stack.push_back(node.right);
      continue;
    }
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t row = order_[i];
      if (chord2(q, unit_[row]) > radius) continue;
      const double km = great_circle_distance(p, rows_[row].centroid);
      if (km < winner_km || (km == winner_km && row < winner)) {
        winner_km = km;
        winner = row;
      }
    }
  }
  return winner;
}

Gazetteer Gazetteer::parse(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto lines = csv::lines(text);
  if (lines.empty()) throw ParseError("gazetteer is empty", 0);
  const char delim = lines[0].find('\t') != std::string_view::npos ? '\t' : ',';

  std::vector<std::string> fields;
  if (!csv::split(lines[0], delim, fields)) {
    throw ParseError("gazetteer header has an unterminated quote", 0);
  }
  const std::array<std::string_view, 6> names = {"city",    "county", "state",
                                                  "country", "lat",    "lon"};
  std::array<std::size_t, 6> col{};
  for (std::size_t n = 0; n < names.size(); ++n) {
    auto it = std::find(fields.begin(), fields.end(), names[n]);
    if (it == fields.end()) {
      throw ParseError(
          fmt::format("gazetteer header lacks column '{}'", names[n]), 0);
    }
    col[n] = static_cast<std::size_t>(it - fields.begin());
  }

  std::vector<GazetteerRow> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (!csv::split(lines[i], delim, fields) ||
        fields.size() < *std::max_element(col.begin(), col.end()) + 1) {
      throw ParseError(fmt::format("gazetteer line {} is malformed", line_no),
                       0);
    }
    try {
      GeoPoint centroid(parse_number(fields[col[4]], line_no),
                        parse_number(fields[col[5]], line_no));
      AdminPath path = AdminPath::make(fields[col[3]], fields[col[2]],
                                       fields[col[1]], fields[col[0]]);
      rows.push_back({std::move(path), centroid});
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(
          fmt::format("gazetteer line {}: {}", line_no, e.what()));
    }
  }
  return Gazetteer(std::move(rows));
}

Gazetteer Gazetteer::load(const std::string& path) {
  return parse(read_file(path));
}

}  // namespace geoloceval
