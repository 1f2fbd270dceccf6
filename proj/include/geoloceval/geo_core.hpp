#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoloceval {

/// Mean Earth radius (IUGG), kilometers.
inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kPi = 3.14159265358979323846;
/// Largest possible great-circle distance.
inline constexpr double kHalfCircumferenceKm = kPi * kEarthRadiusKm;

/// Latitude/longitude in decimal degrees. Longitude is normalized to
/// (-180, 180], so -180 and 180 denote the same meridian.
class GeoPoint {
 public:
  /// Throws ValidationError for non-finite or out-of-range input.
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  /// Diametrically opposite point.
  GeoPoint antipode() const;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
  friend auto operator<=>(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_;
  double lon_;
};

enum class Granularity { City = 0, County = 1, State = 2, Country = 3 };

inline constexpr std::array<Granularity, 4> kAllGranularities = {
    Granularity::City, Granularity::County, Granularity::State,
    Granularity::Country};

std::string_view to_string(Granularity g);
/// Throws ConfigError for an unknown name.
Granularity parse_granularity(std::string_view name);

/// Administrative labels of a location, country down to city. Absent levels
/// are nullopt. The sentinel path marks an unresolvable or missing
/// prediction and never matches any location.
struct AdminPath {
  std::string country;
  std::optional<std::string> state;
  std::optional<std::string> county;
  std::optional<std::string> city;
  bool sentinel = false;

  static AdminPath unresolved();

  /// Empty labels become absent levels. Throws ValidationError when the
  /// country is missing.
  static AdminPath make(std::optional<std::string> country,
                        std::optional<std::string> state,
                        std::optional<std::string> county,
                        std::optional<std::string> city);

  /// Labels from country down to `g`; finer levels are dropped.
  AdminPath truncated(Granularity g) const;

  /// Tuple equality from country down to `g`. False if either side is the
  /// sentinel.
  bool same_location(const AdminPath& other, Granularity g) const;

  friend bool operator==(const AdminPath&, const AdminPath&) = default;
  friend auto operator<=>(const AdminPath&, const AdminPath&) = default;
};

/// Great-circle (haversine) distance in kilometers on a sphere of radius
/// kEarthRadiusKm.
double great_circle_distance(const GeoPoint& a, const GeoPoint& b);

/// Member of `points` minimizing the summed great-circle distance to all
/// members. Ties go to the lexicographically smallest (lat, lon). Throws
/// ValidationError on empty input.
GeoPoint medoid(std::span<const GeoPoint> points);

}  // namespace geoloceval
