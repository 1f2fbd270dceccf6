#include "geoloceval/ingest.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "geoloceval/error.hpp"

namespace geoloceval {

namespace {

using nlohmann::json;

// Parses the top-level object, rejecting duplicate doc ids.
json parse_document(std::string_view source) {
  std::unordered_set<std::string> seen;
  std::string duplicate;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event,
                                   json& parsed) {
    if (event == json::parse_event_t::key && depth == 1 && duplicate.empty()) {
      auto key = parsed.get<std::string>();
      if (!seen.insert(key).second) duplicate = std::move(key);
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(source.begin(), source.end(), cb);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed document at byte {}: {}", e.byte,
                                 e.what()),
                     e.byte);
  }
  if (!duplicate.empty()) {
    throw ValidationError(fmt::format("duplicate doc_id '{}'", duplicate));
  }
  if (!doc.is_object()) {
    throw ParseError("top level must be an object mapping doc_id to a record",
                     0);
  }
  return doc;
}

double coordinate(const json& record, const char* field,
                  const std::string& doc_id) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw ParseError(
        fmt::format("record '{}' is missing field \"{}\"", doc_id, field), 0);
  }
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    const auto& text = it->get_ref<const std::string&>();
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec == std::errc() && ptr == last && !text.empty()) return value;
  }
  throw ParseError(fmt::format("record '{}': field \"{}\" is not numeric",
                               doc_id, field),
                   0);
}

GeoPoint point_of(const json& record, const std::string& doc_id) {
  if (!record.is_object()) {
    throw ParseError(fmt::format("record '{}' is not an object", doc_id), 0);
  }
  const double lon = coordinate(record, "lon", doc_id);
  const double lat = coordinate(record, "lat", doc_id);
  try {
    return GeoPoint(lat, lon);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("doc_id '{}': {}", doc_id, e.what()));
  }
}

std::optional<std::string> label(const json& record, const char* field,
                                 const std::string& doc_id) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ParseError(
        fmt::format("record '{}': field \"{}\" must be text", doc_id, field),
        0);
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<std::string> GroundTruth::pending_resolution() const {
  std::vector<std::string> ids;
  for (const auto& [id, rec] : records) {
    if (!rec.path) ids.push_back(id);
  }
  return ids;
}

bool GroundTruth::fully_resolved() const {
  for (const auto& [id, rec] : records) {
    if (!rec.path) return false;
  }
  return true;
}

std::string_view to_string(MissingPolicy p) {
  return p == MissingPolicy::Error ? "error" : "wrong";
}

MissingPolicy parse_missing_policy(std::string_view name) {
  if (name == "error") return MissingPolicy::Error;
  if (name == "wrong") return MissingPolicy::Wrong;
  throw ConfigError(fmt::format("unknown missing policy '{}'", name));
}

PredictionRun parse_predictions(std::string_view source,
                                std::string system_name) {
  const json doc = parse_document(source);
  PredictionRun run;
  run.system_name = std::move(system_name);
  for (const auto& [id, record] : doc.items()) {
    run.predictions.emplace(id, point_of(record, id));
  }
  return run;
}

GroundTruth parse_ground_truth(std::string_view source) {
  const json doc = parse_document(source);
  GroundTruth truth;
  for (const auto& [id, record] : doc.items()) {
    TruthRecord rec{point_of(record, id), std::nullopt};
    auto country = label(record, "country", id);
    auto state = label(record, "state", id);
    auto county = label(record, "county", id);
    auto city = label(record, "city", id);
    if (country || state || county || city) {
      try {
        rec.path = AdminPath::make(std::move(country), std::move(state),
                                   std::move(county), std::move(city));
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("doc_id '{}': {}", id, e.what()));
      }
    }
    truth.records.emplace(id, std::move(rec));
  }
  return truth;
}

std::string serialize_predictions(const PredictionRun& run) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [id, p] : run.predictions) {
    nlohmann::ordered_json rec;
    rec["lon"] = p.lon();
    rec["lat"] = p.lat();
    doc[id] = std::move(rec);
  }
  return doc.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("error reading '{}'", path));
  return buf.str();
}

std::string system_name_from_path(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

AlignedDataset align(GroundTruth truth, const std::vector<PredictionRun>& runs,
                     MissingPolicy policy) {
  if (runs.empty()) throw ConfigError("at least one prediction run is required");
  AlignedDataset out;
  out.doc_ids.reserve(truth.records.size());
  for (const auto& [id, rec] : truth.records) out.doc_ids.push_back(id);

  std::set<std::string> names;
  for (const PredictionRun& run : runs) {
    if (!names.insert(run.system_name).second) {
      throw ConfigError(
          fmt::format("system name '{}' appears twice", run.system_name));
    }
    AlignedRun aligned;
    aligned.system_name = run.system_name;
    aligned.predictions.reserve(out.doc_ids.size());
    std::vector<std::string> gaps;
    for (const auto& [id, rec] : truth.records) {
      auto it = run.predictions.find(id);
      if (it != run.predictions.end()) {
        aligned.predictions.push_back({it->second, false});
      } else {
        gaps.push_back(id);
        aligned.predictions.push_back({rec.home.antipode(), true});
      }
    }
    if (!gaps.empty() && policy == MissingPolicy::Error) {
      constexpr std::size_t kSample = 10;
      std::string sample;
      for (std::size_t i = 0; i < gaps.size() && i < kSample; ++i) {
        sample += (i ? ", " : "") + gaps[i];
      }
      throw ValidationError(fmt::format(
          "system '{}' lacks predictions for {} doc_id(s): {}{}",
          run.system_name, gaps.size(), sample,
          gaps.size() > kSample ? ", ..." : ""));
    }
    aligned.missing_count = gaps.size();
    for (const auto& [id, p] : run.predictions) {
      if (!truth.records.contains(id)) ++aligned.dropped_extra;
    }
    out.runs.push_back(std::move(aligned));
  }
  out.truth = std::move(truth);
  return out;
}

std::vector<PredictionRun> to_runs(const AlignedDataset& data) {
  std::vector<PredictionRun> runs;
  for (const AlignedRun& aligned : data.runs) {
    PredictionRun run;
    run.system_name = aligned.system_name;
    for (std::size_t i = 0; i < data.doc_ids.size(); ++i) {
      const AlignedPrediction& p = aligned.predictions[i];
      if (!p.missing) run.predictions.emplace(data.doc_ids[i], p.point);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace geoloceval
