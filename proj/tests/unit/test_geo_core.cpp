#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "geoloceval/error.hpp"
#include "geoloceval/geo_core.hpp"

using namespace geoloceval;

namespace {

// Brute-force medoid: minimal distance sum, ties to the smallest (lat, lon).
GeoPoint medoid_oracle(const std::vector<GeoPoint>& pts) {
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double s = 0;
    for (const auto& q : pts) s += great_circle_distance(pts[i], q);
    if (s < best_sum - 1e-9 || (std::fabs(s - best_sum) <= 1e-9 && pts[i] < pts[best])) {
      best_sum = s;
      best = i;
    }
  }
  return pts[best];
}

}  // namespace

TEST_CASE("GeoPoint validates and normalizes") {
  CHECK_THROWS_AS(GeoPoint(91, 0), ValidationError);
  CHECK_THROWS_AS(GeoPoint(0, 180.5), ValidationError);
  CHECK_THROWS_AS(GeoPoint(std::nan(""), 0), ValidationError);
  CHECK(GeoPoint(0, -180).lon() == 180.0);
  CHECK(GeoPoint(0, -180) == GeoPoint(0, 180));
  const GeoPoint a = GeoPoint(10, 20).antipode();
  CHECK(a.lat() == -10.0);
  CHECK(a.lon() == -160.0);
}

TEST_CASE("great-circle distance") {
  CHECK(great_circle_distance({10, 20}, {10, 20}) == 0.0);
  CHECK(great_circle_distance({0, 0}, {0, 180}) ==
        doctest::Approx(kPi * kEarthRadiusKm).epsilon(1e-12));
  CHECK(kHalfCircumferenceKm == doctest::Approx(20015.11444203592).epsilon(1e-12));
  // Reference value from an arbitrary-precision haversine evaluation.
  const double paris_nyc = great_circle_distance({48.8566, 2.3522}, {40.7128, -74.0060});
  CHECK(paris_nyc == doctest::Approx(5837.248966566376).epsilon(1e-9));
  CHECK(great_circle_distance({40.7128, -74.0060}, {48.8566, 2.3522}) == paris_nyc);
  CHECK(great_circle_distance({0, 179.9}, {0, -179.9}) ==
        doctest::Approx(0.2 * kPi / 180 * kEarthRadiusKm).epsilon(1e-9));
  CHECK(great_circle_distance({90, 0}, {90, 120}) == doctest::Approx(0.0));
}

TEST_CASE("great-circle distance is a metric on random points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 500; ++i) {
    GeoPoint a(lat(rng), lon(rng)), b(lat(rng), lon(rng)), c(lat(rng), lon(rng));
    const double ab = great_circle_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= kHalfCircumferenceKm + 1e-9);
    CHECK(ab == great_circle_distance(b, a));
    CHECK(ab <= great_circle_distance(a, c) + great_circle_distance(c, b) + 1e-6);
    // asin is steep near 1, so antipodal distances carry ~sqrt(eps) error.
    CHECK(great_circle_distance(a, a.antipode()) ==
          doctest::Approx(kHalfCircumferenceKm).epsilon(1e-7));
  }
}

TEST_CASE("medoid") {
  CHECK(medoid(std::vector<GeoPoint>{{1, 1}}) == GeoPoint(1, 1));
  CHECK(medoid(std::vector<GeoPoint>{{5, 5}, {5, 5}, {5, 5}}) == GeoPoint(5, 5));
  CHECK_THROWS_AS(medoid(std::vector<GeoPoint>{}), ValidationError);
  // Two points tie; the smaller (lat, lon) wins in either order.
  CHECK(medoid(std::vector<GeoPoint>{{3, 3}, {1, 1}}) == GeoPoint(1, 1));
  CHECK(medoid(std::vector<GeoPoint>{{1, 1}, {3, 3}}) == GeoPoint(1, 1));

  std::vector<GeoPoint> five{{40.7, -74.0}, {40.8, -73.9}, {34.0, -118.2},
                             {40.6, -74.1}, {41.0, -73.5}};
  CHECK(medoid(five) == medoid_oracle(five));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(30, 50), lon(-120, -70);
  for (int t = 0; t < 50; ++t) {
    std::vector<GeoPoint> pts;
    for (int i = 0; i < 2 + t % 12; ++i) pts.emplace_back(lat(rng), lon(rng));
    const GeoPoint m = medoid(pts);
    CHECK(m == medoid_oracle(pts));
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(medoid(pts) == m);
  }
}

TEST_CASE("granularity names") {
  for (Granularity g : kAllGranularities) CHECK(parse_granularity(to_string(g)) == g);
  CHECK_THROWS_AS(parse_granularity("town"), ConfigError);
}

TEST_CASE("AdminPath comparisons") {
  const auto hoboken = AdminPath::make("United States", "New Jersey", "Hudson County", "Hoboken");
  const auto jersey = AdminPath::make("United States", "New Jersey", "Hudson County", "Jersey City");
  const auto newark = AdminPath::make("United States", "New Jersey", "Essex County", "Newark");
  CHECK_FALSE(hoboken.same_location(jersey, Granularity::City));
  CHECK(hoboken.same_location(jersey, Granularity::County));
  CHECK_FALSE(hoboken.same_location(newark, Granularity::County));
  CHECK(hoboken.same_location(newark, Granularity::State));
  CHECK(hoboken.same_location(newark, Granularity::Country));

  const auto sentinel = AdminPath::unresolved();
  CHECK_FALSE(sentinel.same_location(sentinel, Granularity::Country));
  CHECK_FALSE(hoboken.same_location(sentinel, Granularity::Country));

  const auto sparse = AdminPath::make("Monaco", "", std::nullopt, "Monaco");
  CHECK_FALSE(sparse.state.has_value());
  CHECK(sparse.same_location(AdminPath::make("Monaco", std::nullopt, "", "Monaco"),
                             Granularity::City));
  CHECK_THROWS_AS(AdminPath::make("", "x", "y", "z"), ValidationError);

  const auto t = hoboken.truncated(Granularity::State);
  CHECK(t.country == "United States");
  CHECK(t.state == "New Jersey");
  CHECK_FALSE(t.county.has_value());
  CHECK_FALSE(t.city.has_value());
}
