#include "geoloceval/geo_core.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "geoloceval/error.hpp"

namespace geoloceval {

namespace {

constexpr double kDegToRad = kPi / 180.0;

std::optional<std::string> non_empty(std::optional<std::string> s) {
  if (s && s->empty()) return std::nullopt;
  return s;
}

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon)) {
    throw ValidationError("coordinate is not a finite number");
  }
  if (lat < -90.0 || lat > 90.0) {
    throw ValidationError(fmt::format("latitude {} outside [-90, 90]", lat));
  }
  if (lon < -180.0 || lon > 180.0) {
    throw ValidationError(fmt::format("longitude {} outside [-180, 180]", lon));
  }
  lat_ = lat;
  lon_ = lon == -180.0 ? 180.0 : lon;
}

GeoPoint GeoPoint::antipode() const {
  double lon = lon_ + 180.0;
  if (lon > 180.0) lon -= 360.0;
  return GeoPoint(-lat_, lon);
}

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::City: return "city";
    case Granularity::County: return "county";
    case Granularity::State: return "state";
    case Granularity::Country: return "country";
  }
  return "?";
}

Granularity parse_granularity(std::string_view name) {
  for (Granularity g : kAllGranularities) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError(fmt::format("unknown granularity '{}'", name));
}

AdminPath AdminPath::unresolved() {
  AdminPath p;
  p.sentinel = true;
  return p;
}

AdminPath AdminPath::make(std::optional<std::string> country,
                          std::optional<std::string> state,
                          std::optional<std::string> county,
                          std::optional<std::string> city) {
  country = non_empty(std::move(country));
  if (!country) throw ValidationError("administrative path lacks a country");
  AdminPath p;
  p.country = std::move(*country);
  p.state = non_empty(std::move(state));
  p.county = non_empty(std::move(county));
  p.city = non_empty(std::move(city));
  return p;
}

AdminPath AdminPath::truncated(Granularity g) const {
  AdminPath p = *this;
  if (g > Granularity::City) p.city.reset();
  if (g > Granularity::County) p.county.reset();
  if (g > Granularity::State) p.state.reset();
  return p;
}

bool AdminPath::same_location(const AdminPath& other, Granularity g) const {
  if (sentinel || other.sentinel) return false;
  if (country != other.country) return false;
  if (g <= Granularity::State && state != other.state) return false;
  if (g <= Granularity::County && county != other.county) return false;
  if (g <= Granularity::City && city != other.city) return false;
  return true;
}

double great_circle_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat() * kDegToRad;
  const double phi2 = b.lat() * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon() - a.lon()) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

GeoPoint medoid(std::span<const GeoPoint> points) {
  if (points.empty()) {
    throw ValidationError("medoid of an empty point set is undefined");
  }
  // Sorting first makes both the summation order and the tie-break
  // independent of the input permutation.
  std::vector<GeoPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());

  std::size_t best = 0;
  double best_sum = INFINITY;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    double sum = 0.0;
    for (const GeoPoint& q : sorted) sum += great_circle_distance(sorted[i], q);
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return sorted[best];
}

}  // namespace geoloceval
