#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>
#include <json.hpp>

#include "geoloceval/geocode.hpp"

namespace geoloceval {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError(fmt::format("endpoint '{}' lacks a scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::optional<std::string> text_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

/// Shared HTTP plumbing: status mapping and JSON decoding.
class HttpProvider : public GeocodeProvider {
 public:
  explicit HttpProvider(RemoteProviderConfig cfg)
      : cfg_(std::move(cfg)), url_(split_url(cfg_.endpoint)) {}

  RateLimit rate_limit() const override { return cfg_.limit; }

 protected:
  json get(const httplib::Params& params) const {
    httplib::Client client(url_.origin);
    const auto seconds = cfg_.timeout.count() / 1000;
    const auto micros = (cfg_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_follow_location(true);
    httplib::Headers headers = {{"User-Agent", cfg_.user_agent}};

    auto res = client.Get(url_.path, params, headers);
    if (!res) {
      throw TransientGeocodeError(fmt::format(
          "{}: request failed ({})", name(), httplib::to_string(res.error())));
    }
    if (res->status == 429 || res->status >= 500) {
      throw TransientGeocodeError(
          fmt::format("{}: HTTP {}", name(), res->status));
    }
    if (res->status != 200) {
      throw GeocodeError(fmt::format("{}: HTTP {}", name(), res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw GeocodeError(fmt::format("{}: response is not JSON", name()));
    }
  }

  RemoteProviderConfig cfg_;
  SplitUrl url_;
};

class NominatimProvider final : public HttpProvider {
 public:
  using HttpProvider::HttpProvider;

  std::string name() const override { return "nominatim"; }

  std::optional<AdminPath> resolve(const GeoPoint& p) override {
    httplib::Params params = {
        {"format", "jsonv2"},
        {"lat", fmt::format("{}", p.lat())},
        {"lon", fmt::format("{}", p.lon())},
        {"zoom", "10"},
        {"addressdetails", "1"},
        {"accept-language", "en"},
    };
    if (!cfg_.credential.empty()) params.emplace("email", cfg_.credential);
    const json body = get(params);
    if (body.contains("error")) return std::nullopt;
    auto addr = body.find("address");
    if (addr == body.end() || !addr->is_object()) return std::nullopt;

    std::optional<std::string> city;
    for (const char* key : {"city", "town", "village", "hamlet", "municipality"}) {
      if ((city = text_field(*addr, key))) break;
    }
    auto country = text_field(*addr, "country");
    if (!country || country->empty()) return std::nullopt;
    return AdminPath::make(std::move(country), text_field(*addr, "state"),
                           text_field(*addr, "county"), std::move(city));
  }
};

class GoogleV3Provider final : public HttpProvider {
 public:
  using HttpProvider::HttpProvider;

  std::string name() const override { return "googlev3"; }

  std::optional<AdminPath> resolve(const GeoPoint& p) override {
    httplib::Params params = {
        {"latlng", fmt::format("{},{}", p.lat(), p.lon())},
        {"language", "en"},
    };
    if (!cfg_.credential.empty()) params.emplace("key", cfg_.credential);
    const json body = get(params);
    const std::string status = body.value("status", "");
    if (status == "ZERO_RESULTS") return std::nullopt;
    if (status == "OVER_QUERY_LIMIT" || status == "UNKNOWN_ERROR") {
      throw TransientGeocodeError(fmt::format("googlev3: status {}", status));
    }
    if (status != "OK") {
      throw GeocodeError(fmt::format("googlev3: status {}", status));
    }
    auto results = body.find("results");
    if (results == body.end() || !results->is_array() || results->empty()) {
      return std::nullopt;
    }

    std::optional<std::string> country, state, county, city;
    for (const json& comp : (*results)[0].value("address_components", json::array())) {
      auto name = text_field(comp, "long_name");
      if (!name) continue;
      for (const json& type : comp.value("types", json::array())) {
        if (!type.is_string()) continue;
        const auto& t = type.get_ref<const std::string&>();
        if (t == "country") country = name;
        else if (t == "administrative_area_level_1") state = name;
        else if (t == "administrative_area_level_2") county = name;
        else if (t == "locality" || (t == "postal_town" && !city)) city = name;
      }
    }
    if (!country || country->empty()) return std::nullopt;
    return AdminPath::make(std::move(country), std::move(state),
                           std::move(county), std::move(city));
  }
};

}  // namespace

RemoteProviderConfig nominatim_defaults() {
  RemoteProviderConfig cfg;
  cfg.endpoint = "https://nominatim.openstreetmap.org/reverse";
  // Public usage policy: one request per second; ~2.5k requests per day.
  cfg.limit = {1.0, 2500};
  return cfg;
}

RemoteProviderConfig googlev3_defaults() {
  RemoteProviderConfig cfg;
  cfg.endpoint = "https://maps.googleapis.com/maps/api/geocode/json";
  cfg.limit = {50.0, 100000};
  return cfg;
}

std::unique_ptr<GeocodeProvider> make_nominatim_provider(RemoteProviderConfig cfg) {
  return std::make_unique<NominatimProvider>(std::move(cfg));
}

std::unique_ptr<GeocodeProvider> make_googlev3_provider(RemoteProviderConfig cfg) {
  return std::make_unique<GoogleV3Provider>(std::move(cfg));
}

}  // namespace geoloceval
