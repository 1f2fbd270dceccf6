#include "geoloceval/geocode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <thread>

#include <fmt/format.h>

#include "csv.hpp"
#include "fs_util.hpp"

namespace geoloceval {

namespace {

constexpr std::int64_t kScale = 100000;
constexpr std::int64_t kLonHalfTurn = 180 * kScale;

std::string scaled_text(std::int64_t v) {
  const std::int64_t mag = v < 0 ? -v : v;
  return fmt::format("{}{}.{:05d}", v < 0 ? "-" : "", mag / kScale,
                     mag % kScale);
}

std::int64_t parse_scaled(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument(text);
  }
  return std::llround(v * kScale);
}

}  // namespace

// ---------------------------------------------------------------------------

CacheKey CacheKey::of(const GeoPoint& p) {
  CacheKey k{std::llround(p.lat() * kScale), std::llround(p.lon() * kScale)};
  if (k.lon_e5 == -kLonHalfTurn) k.lon_e5 = kLonHalfTurn;
  return k;
}

GeoPoint CacheKey::point() const {
  return GeoPoint(static_cast<double>(lat_e5) / kScale,
                  static_cast<double>(lon_e5) / kScale);
}

std::string CacheKey::lat_text() const { return scaled_text(lat_e5); }
std::string CacheKey::lon_text() const { return scaled_text(lon_e5); }

// ---------------------------------------------------------------------------

GeocodeCache::GeocodeCache(const GeocodeCache& other)
    : entries_(other.entries()) {}

GeocodeCache& GeocodeCache::operator=(const GeocodeCache& other) {
  if (this != &other) {
    auto copy = other.entries();
    std::unique_lock lock(mutex_);
    entries_ = std::move(copy);
  }
  return *this;
}

std::optional<AdminPath> GeocodeCache::find(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GeocodeCache::insert(const CacheKey& key, AdminPath path) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(key, std::move(path));
}

std::size_t GeocodeCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::map<CacheKey, AdminPath> GeocodeCache::entries() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

std::string GeocodeCache::serialize() const {
  std::shared_lock lock(mutex_);
  std::string out;
  auto field = [&](const std::optional<std::string>& s) {
    out += ',';
    if (s) out += csv::escape(*s, ',');
  };
  for (const auto& [key, path] : entries_) {
    out += key.lat_text();
    out += ',';
    out += key.lon_text();
    if (path.sentinel) {
      out += ",,,,";
    } else {
      field(path.country);
      field(path.state);
      field(path.county);
      field(path.city);
    }
    out += '\n';
  }
  return out;
}

GeocodeCache GeocodeCache::parse(std::string_view text) {
  GeocodeCache cache;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  for (std::string_view line : csv::lines(text)) {
    ++line_no;
    if (!csv::split(line, ',', fields) || fields.size() != 6) {
      throw GeocodeError(fmt::format(
          "geocode cache line {} is corrupt; rerun with --rebuild-cache",
          line_no));
    }
    CacheKey key;
    try {
      key.lat_e5 = parse_scaled(fields[0]);
      key.lon_e5 = parse_scaled(fields[1]);
      key = CacheKey::of(key.point());
    } catch (const std::exception&) {
      throw GeocodeError(fmt::format(
          "geocode cache line {} has bad coordinates; rerun with "
          "--rebuild-cache",
          line_no));
    }
    if (fields[2].empty()) {
      if (!fields[3].empty() || !fields[4].empty() || !fields[5].empty()) {
        throw GeocodeError(fmt::format(
            "geocode cache line {} has labels without a country; rerun with "
            "--rebuild-cache",
            line_no));
      }
      cache.entries_.insert_or_assign(key, AdminPath::unresolved());
    } else {
      cache.entries_.insert_or_assign(
          key, AdminPath::make(fields[2], fields[3], fields[4], fields[5]));
    }
  }
  return cache;
}

GeocodeCache load_cache(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return {};
  return GeocodeCache::parse(read_file(path));
}

void store_cache(const GeocodeCache& cache, const std::string& path) {
  write_file_atomic(path, cache.serialize());
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------------------

Resolver::Resolver(GeocodeProvider& provider, GeocodeCache& cache,
                   ResolverOptions options)
    : provider_(provider),
      cache_(cache),
      options_(std::move(options)),
      limiter_(provider.rate_limit().requests_per_second) {
  if (options_.workers == 0) options_.workers = 1;
}

AdminPath Resolver::fetch(const CacheKey& key) {
  const std::size_t budget = provider_.rate_limit().daily_budget;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    if (requests_.fetch_add(1) >= budget && budget > 0) {
      throw GeocodeError(fmt::format(
          "request budget of {} for provider '{}' is exhausted", budget,
          provider_.name()));
    }
    limiter_.acquire();
    try {
      auto path = provider_.resolve(key.point());
      return path ? std::move(*path) : AdminPath::unresolved();
    } catch (const TransientGeocodeError& e) {
      if (attempt >= options_.max_retries) {
        throw GeocodeError(fmt::format(
            "provider '{}' failed for ({}, {}) after {} attempts: {}",
            provider_.name(), key.lat_text(), key.lon_text(), attempt + 1,
            e.what()));
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, options_.max_backoff);
  }
}

void Resolver::persist() {
  if (options_.cache_path) store_cache(cache_, *options_.cache_path);
}

std::vector<AdminPath> Resolver::resolve_points(std::span<const GeoPoint> points) {
  std::vector<CacheKey> keys;
  keys.reserve(points.size());
  for (const GeoPoint& p : points) keys.push_back(CacheKey::of(p));

  std::vector<CacheKey> misses;
  {
    std::vector<CacheKey> unique = keys;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (const CacheKey& k : unique) {
      if (!cache_.find(k)) misses.push_back(k);
    }
  }

  if (!misses.empty()) {
    std::vector<std::optional<AdminPath>> results(misses.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= misses.size()) return;
        try {
          results[i] = fetch(misses[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    };
    const std::size_t n_threads = std::min(options_.workers, misses.size());
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }

    for (std::size_t i = 0; i < misses.size(); ++i) {
      if (results[i]) cache_.insert(misses[i], std::move(*results[i]));
    }
    stats_.provider_lookups += misses.size();
    stats_.provider_requests = requests_.load();
    persist();
    if (error) std::rethrow_exception(error);
  } else if (options_.cache_path &&
             !std::filesystem::exists(*options_.cache_path)) {
    persist();
  }

  stats_.queries += points.size();
  stats_.cache_hits += points.size() - misses.size();

  std::vector<AdminPath> out;
  out.reserve(points.size());
  for (const CacheKey& k : keys) out.push_back(*cache_.find(k));
  return out;
}

AdminPath Resolver::reverse_geocode(const GeoPoint& p) {
  return resolve_points(std::span<const GeoPoint>(&p, 1)).front();
}

AdminPath reverse_geocode(GeocodeProvider& provider, GeocodeCache& cache,
                          const GeoPoint& p) {
  Resolver resolver(provider, cache);
  return resolver.reverse_geocode(p);
}

void resolve_truth(GroundTruth& truth, Resolver& resolver) {
  const auto pending = truth.pending_resolution();
  if (pending.empty()) return;
  std::vector<GeoPoint> points;
  points.reserve(pending.size());
  for (const auto& id : pending) points.push_back(truth.records.at(id).home);
  auto paths = resolver.resolve_points(points);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (paths[i].sentinel) {
      throw ValidationError(fmt::format(
          "ground-truth doc_id '{}' at ({}, {}) could not be resolved",
          pending[i], points[i].lat(), points[i].lon()));
    }
    truth.records.at(pending[i]).path = std::move(paths[i]);
  }
}

namespace {

std::vector<std::vector<ResolvedRecord>> resolve_aligned(
    std::span<const AlignedRun* const> runs, const AlignedDataset& data,
    Resolver& resolver) {
  std::vector<GeoPoint> points;
  for (const AlignedRun* run : runs) {
    for (const AlignedPrediction& p : run->predictions) {
      if (!p.missing) points.push_back(p.point);
    }
  }
  auto paths = resolver.resolve_points(points);

  std::vector<std::vector<ResolvedRecord>> out;
  out.reserve(runs.size());
  std::size_t next = 0;
  for (const AlignedRun* run : runs) {
    if (run->predictions.size() != data.doc_ids.size()) {
      throw ValidationError(
          fmt::format("run '{}' is not aligned", run->system_name));
    }
    std::vector<ResolvedRecord> records;
    records.reserve(data.doc_ids.size());
    for (std::size_t i = 0; i < data.doc_ids.size(); ++i) {
      const AlignedPrediction& p = run->predictions[i];
      const GeoPoint& home = data.truth.records.at(data.doc_ids[i]).home;
      if (p.missing) {
        records.push_back({data.doc_ids[i], p.point, AdminPath::unresolved(),
                           kHalfCircumferenceKm});
      } else {
        records.push_back({data.doc_ids[i], p.point, std::move(paths[next++]),
                           great_circle_distance(p.point, home)});
      }
    }
    out.push_back(std::move(records));
  }
  return out;
}

}  // namespace

std::vector<ResolvedRecord> resolve_run(const AlignedRun& run,
                                        const AlignedDataset& data,
                                        Resolver& resolver) {
  const AlignedRun* runs[] = {&run};
  return std::move(resolve_aligned(runs, data, resolver).front());
}

std::vector<std::vector<ResolvedRecord>> resolve_runs(const AlignedDataset& data,
                                                      Resolver& resolver) {
  std::vector<const AlignedRun*> runs;
  for (const AlignedRun& r : data.runs) runs.push_back(&r);
  return resolve_aligned(runs, data, resolver);
}

}  // namespace geoloceval
