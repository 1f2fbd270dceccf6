#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoloceval/geo_core.hpp"

namespace geoloceval {

/// One system's predictions, keyed by opaque document id.
struct PredictionRun {
  std::string system_name;
  std::map<std::string, GeoPoint> predictions;

  friend bool operator==(const PredictionRun&, const PredictionRun&) = default;
};

struct TruthRecord {
  GeoPoint home;
  /// nullopt until the record is resolved by a geocoder.
  std::optional<AdminPath> path;

  friend bool operator==(const TruthRecord&, const TruthRecord&) = default;
};

struct GroundTruth {
  std::map<std::string, TruthRecord> records;

  /// Ids whose records still need reverse geocoding, in id order.
  std::vector<std::string> pending_resolution() const;
  bool fully_resolved() const;
};

enum class MissingPolicy { Error, Wrong };

std::string_view to_string(MissingPolicy p);
MissingPolicy parse_missing_policy(std::string_view name);

/// A prediction after alignment. `missing` marks a gap filled under
/// MissingPolicy::Wrong: the point is the antipode of the truth point.
struct AlignedPrediction {
  GeoPoint point;
  bool missing = false;
};

struct AlignedRun {
  std::string system_name;
  /// Parallel to AlignedDataset::doc_ids.
  std::vector<AlignedPrediction> predictions;
  std::size_t missing_count = 0;
  std::size_t dropped_extra = 0;
};

/// Ground truth joined with every run over one shared, ordered id list.
struct AlignedDataset {
  std::vector<std::string> doc_ids;
  GroundTruth truth;
  std::vector<AlignedRun> runs;
};

/// Parses the prediction file format: a JSON object mapping doc_id to
/// {"lon": ..., "lat": ...}. Coordinates may be numbers or numeric strings.
PredictionRun parse_predictions(std::string_view source,
                                std::string system_name);

/// Same shape as predictions, plus optional "city", "county", "state",
/// "country" text fields per record. Records carrying labels are resolved.
GroundTruth parse_ground_truth(std::string_view source);

/// Canonical form: ids in order, "lon" before "lat", bare numbers, two-space
/// indentation, trailing newline.
std::string serialize_predictions(const PredictionRun& run);

/// Reads a whole file. Throws IoError.
std::string read_file(const std::string& path);

/// System name derived from a file path (its stem).
std::string system_name_from_path(const std::string& path);

/// Joins runs onto the truth ids (sorted order). Extra ids are dropped and
/// counted. Gaps abort under MissingPolicy::Error, otherwise they become
/// missing predictions.
AlignedDataset align(GroundTruth truth, const std::vector<PredictionRun>& runs,
                     MissingPolicy policy);

/// Runs recovered from an aligned dataset; filled gaps are left out.
std::vector<PredictionRun> to_runs(const AlignedDataset& data);

}  // namespace geoloceval
