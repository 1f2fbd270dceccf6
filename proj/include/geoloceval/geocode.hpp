#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoloceval/error.hpp"
#include "geoloceval/geo_core.hpp"
#include "geoloceval/ingest.hpp"

namespace geoloceval {

/// Retryable provider failure (timeouts, throttling, 5xx).
struct TransientGeocodeError : GeocodeError {
  explicit TransientGeocodeError(const std::string& what) : GeocodeError(what) {}
};

struct RateLimit {
  /// Sustained request rate; 0 means unlimited.
  double requests_per_second = 0.0;
  /// Maximum provider requests per invocation; 0 means unlimited.
  std::size_t daily_budget = 0;
};

/// Reverse geocoder. `resolve` returns nullopt when the point has no
/// location (open ocean, say).
class GeocodeProvider {
 public:
  virtual ~GeocodeProvider() = default;
  virtual std::string name() const = 0;
  virtual std::optional<AdminPath> resolve(const GeoPoint& p) = 0;
  virtual RateLimit rate_limit() const { return {}; }
};

// ---------------------------------------------------------------------------
// Offline gazetteer

struct GazetteerRow {
  AdminPath path;
  GeoPoint centroid;
};

/// Table of fully labelled centroids. Resolution picks the nearest centroid
/// by great-circle distance, lowest row index on ties.
class Gazetteer {
 public:
  explicit Gazetteer(std::vector<GazetteerRow> rows);

  /// Delimited table with header city,county,state,country,lat,lon (any
  /// column order). Throws ParseError / ValidationError.
  static Gazetteer parse(std::string_view text);
  static Gazetteer load(const std::string& path);

  std::size_t size() const noexcept { return rows_.size(); }
  const GazetteerRow& row(std::size_t i) const { return rows_[i]; }
  std::span<const GazetteerRow> rows() const noexcept { return rows_; }

  std::size_t nearest(const GeoPoint& p) const;

 private:
  struct Node {
    std::array<double, 3> lo;
    std::array<double, 3> hi;
    std::uint32_t begin;
    std::uint32_t end;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const std::array<double, 3>& q,
              double& best) const;

  std::vector<GazetteerRow> rows_;
  std::vector<std::array<double, 3>> unit_;  // unit vectors, in order_
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

class GazetteerProvider : public GeocodeProvider {
 public:
  explicit GazetteerProvider(std::shared_ptr<const Gazetteer> gazetteer)
      : gazetteer_(std::move(gazetteer)) {}

  std::string name() const override { return "offline"; }
  std::optional<AdminPath> resolve(const GeoPoint& p) override {
    return gazetteer_->row(gazetteer_->nearest(p)).path;
  }

 private:
  std::shared_ptr<const Gazetteer> gazetteer_;
};

// ---------------------------------------------------------------------------
// Remote providers

struct RemoteProviderConfig {
  /// Base URL including path, e.g. "https://nominatim.openstreetmap.org/reverse".
  std::string endpoint;
  /// API key (GoogleV3) or contact e-mail (Nominatim); may be empty.
  std::string credential;
  std::string user_agent = "geoloceval/1.0";
  RateLimit limit;
  std::chrono::milliseconds timeout{10000};
};

/// OpenStreetMap Nominatim reverse endpoint (jsonv2).
std::unique_ptr<GeocodeProvider> make_nominatim_provider(RemoteProviderConfig cfg);
/// Google Geocoding API v3 reverse lookups.
std::unique_ptr<GeocodeProvider> make_googlev3_provider(RemoteProviderConfig cfg);

/// Default endpoints and limits for the two supported services.
RemoteProviderConfig nominatim_defaults();
RemoteProviderConfig googlev3_defaults();

// ---------------------------------------------------------------------------
// Cache

/// Coordinates rounded to 5 decimal places, stored as scaled integers.
struct CacheKey {
  static constexpr int kDecimals = 5;
  std::int64_t lat_e5 = 0;
  std::int64_t lon_e5 = 0;

  static CacheKey of(const GeoPoint& p);
  GeoPoint point() const;
  std::string lat_text() const;
  std::string lon_text() const;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

/// Resolved locations keyed by rounded coordinates. A sentinel path records
/// a point the provider could not resolve. Concurrent readers, serialized
/// writers.
class GeocodeCache {
 public:
  GeocodeCache() = default;
  GeocodeCache(const GeocodeCache& other);
  GeocodeCache& operator=(const GeocodeCache& other);

  std::optional<AdminPath> find(const CacheKey& key) const;
  void insert(const CacheKey& key, AdminPath path);
  std::size_t size() const;
  std::map<CacheKey, AdminPath> entries() const;

  /// One "lat,lon,country,state,county,city" line per entry, key order.
  std::string serialize() const;
  static GeocodeCache parse(std::string_view text);

  friend bool operator==(const GeocodeCache& a, const GeocodeCache& b) {
    return a.entries() == b.entries();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<CacheKey, AdminPath> entries_;
};

/// Missing file yields an empty cache. A corrupt file throws GeocodeError
/// suggesting --rebuild-cache.
GeocodeCache load_cache(const std::string& path);
/// Atomic replace (temp file + rename). Throws IoError.
void store_cache(const GeocodeCache& cache, const std::string& path);

// ---------------------------------------------------------------------------
// Resolution

/// Token bucket with a burst of one request.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

struct ResolverOptions {
  std::size_t workers = 1;
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  /// Cache is written here after each batch, including a failed one.
  std::optional<std::string> cache_path;
};

struct ResolveStats {
  std::size_t queries = 0;
  std::size_t cache_hits = 0;
  std::size_t provider_lookups = 0;  // distinct keys sent to the provider
  std::size_t provider_requests = 0;  // including retries
};

/// Cache-first reverse geocoding with rate limiting, bounded retries and
/// bounded concurrency. Providers are queried with the rounded key point so
/// results never depend on which raw point reached a key first.
class Resolver {
 public:
  Resolver(GeocodeProvider& provider, GeocodeCache& cache,
           ResolverOptions options = {});

  AdminPath reverse_geocode(const GeoPoint& p);
  /// Output order matches input order regardless of completion order.
  std::vector<AdminPath> resolve_points(std::span<const GeoPoint> points);

  const ResolveStats& stats() const noexcept { return stats_; }
  GeocodeProvider& provider() noexcept { return provider_; }

 private:
  AdminPath fetch(const CacheKey& key);
  void persist();

  GeocodeProvider& provider_;
  GeocodeCache& cache_;
  ResolverOptions options_;
  RateLimiter limiter_;
  ResolveStats stats_;
  std::atomic<std::size_t> requests_{0};
};

AdminPath reverse_geocode(GeocodeProvider& provider, GeocodeCache& cache,
                          const GeoPoint& p);

/// A prediction expanded to administrative labels, with its distance to the
/// ground-truth point in kilometers.
struct ResolvedRecord {
  std::string doc_id;
  GeoPoint point;
  AdminPath path;
  double error_dist_km = 0.0;

  friend bool operator==(const ResolvedRecord&, const ResolvedRecord&) = default;
};

/// Labels for every truth record lacking them. Unresolvable truth points
/// throw ValidationError.
void resolve_truth(GroundTruth& truth, Resolver& resolver);

/// One record per aligned doc id. Filled gaps get the sentinel path without
/// a provider query.
std::vector<ResolvedRecord> resolve_run(const AlignedRun& run,
                                        const AlignedDataset& data,
                                        Resolver& resolver);

/// Every run of `data`, geocoded in a single batch.
std::vector<std::vector<ResolvedRecord>> resolve_runs(const AlignedDataset& data,
                                                      Resolver& resolver);

}  // namespace geoloceval
