#include <algorithm>
#include <filesystem>
#include <set>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "csv.hpp"
#include "fs_util.hpp"
#include "geoloceval/error.hpp"
#include "geoloceval/report.hpp"
#include "pipeline_detail.hpp"

namespace geoloceval {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using detail::number;

namespace {

ordered_json label(const std::optional<std::string>& v) {
  return v ? ordered_json(*v) : ordered_json();
}

ordered_json record_json(const std::string& doc_id, const GeoPoint* point,
                         const AdminPath& path, double error_dist) {
  ordered_json r;
  r["doc_id"] = doc_id;
  r["lon"] = point ? ordered_json(point->lon()) : ordered_json();
  r["lat"] = point ? ordered_json(point->lat()) : ordered_json();
  if (path.sentinel) {
    r["country"] = nullptr;
    r["county"] = nullptr;
    r["state"] = nullptr;
    r["city"] = nullptr;
  } else {
    r["country"] = path.country;
    r["county"] = label(path.county);
    r["state"] = label(path.state);
    r["city"] = label(path.city);
  }
  r["error_dist"] = error_dist;
  return r;
}

std::optional<std::string> text_field(const ordered_json& r, const char* key,
                                      const std::string& where) {
  auto it = r.find(key);
  if (it == r.end()) {
    throw ValidationError(fmt::format("{}: field '{}' is missing", where, key));
  }
  if (it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw ValidationError(fmt::format("{}: field '{}' must be a string or null", where, key));
  }
  return it->get<std::string>();
}

std::optional<double> number_field(const ordered_json& r, const char* key,
                                   const std::string& where) {
  auto it = r.find(key);
  if (it == r.end()) {
    throw ValidationError(fmt::format("{}: field '{}' is missing", where, key));
  }
  if (it->is_null()) return std::nullopt;
  if (!it->is_number()) {
    throw ValidationError(fmt::format("{}: field '{}' must be a number or null", where, key));
  }
  return it->get<double>();
}

AdminPath path_of(const ordered_json& r, const std::string& where) {
  auto country = text_field(r, "country", where);
  auto state = text_field(r, "state", where);
  auto county = text_field(r, "county", where);
  auto city = text_field(r, "city", where);
  if (!country || country->empty()) return AdminPath::unresolved();
  return AdminPath::make(std::move(country), std::move(state), std::move(county),
                         std::move(city));
}

}  // namespace

std::string resolved_output_json(const ResolvedSet& set) {
  ordered_json root = ordered_json::object();
  for (std::size_t i = 0; i < set.doc_ids.size(); ++i) {
    const std::string& id = set.doc_ids[i];
    ordered_json doc;
    doc[std::string(kTruthSystem)] =
        record_json(id, &set.truth_points[i], set.truth_paths[i], 0.0);
    for (const ResolvedSystem& s : set.systems) {
      const ResolvedRecord& r = s.records[i];
      doc[s.name] = record_json(id, s.missing[i] ? nullptr : &r.point, r.path,
                                r.error_dist_km);
    }
    root[id] = std::move(doc);
  }
  return root.dump(2) + "\n";
}

ResolvedSet parse_resolved_output(std::string_view text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("resolved records: {}", e.what()), e.byte);
  }
  if (!root.is_object()) {
    throw ValidationError("resolved records must be an object keyed by doc id");
  }
  ResolvedSet set;
  std::vector<std::string> names;
  for (const auto& [id, doc] : root.items()) {
    if (!doc.is_object()) {
      throw ValidationError(fmt::format("resolved records: doc '{}' is not an object", id));
    }
    std::vector<std::string> here;
    for (const auto& [name, rec] : doc.items()) {
      if (name != kTruthSystem) here.push_back(name);
    }
    if (set.doc_ids.empty()) {
      names = here;
      if (names.empty()) throw ValidationError("resolved records hold no systems");
      for (const auto& n : names) set.systems.push_back({n, {}, {}});
    } else if (here != names) {
      throw ValidationError(fmt::format(
          "resolved records: doc '{}' lists a different set of systems", id));
    }
    auto truth_it = doc.find(std::string(kTruthSystem));
    if (truth_it == doc.end()) {
      throw ValidationError(fmt::format("resolved records: doc '{}' has no truth", id));
    }
    const std::string where = fmt::format("doc '{}' truth", id);
    const auto lat = number_field(*truth_it, "lat", where);
    const auto lon = number_field(*truth_it, "lon", where);
    if (!lat || !lon) throw ValidationError(where + ": coordinates are required");
    const GeoPoint home(*lat, *lon);
    AdminPath truth_path = path_of(*truth_it, where);
    if (truth_path.sentinel) throw ValidationError(where + ": country is required");
    set.doc_ids.push_back(id);
    set.truth_points.push_back(home);
    set.truth_paths.push_back(std::move(truth_path));
    for (std::size_t s = 0; s < names.size(); ++s) {
      const ordered_json& rec = doc.at(names[s]);
      const std::string w = fmt::format("doc '{}' system '{}'", id, names[s]);
      if (!rec.is_object()) throw ValidationError(w + ": record is not an object");
      const auto plat = number_field(rec, "lat", w);
      const auto plon = number_field(rec, "lon", w);
      const auto dist = number_field(rec, "error_dist", w);
      if (!dist) throw ValidationError(w + ": error_dist is required");
      const bool missing = !plat || !plon;
      ResolvedRecord r{id, missing ? home.antipode() : GeoPoint(*plat, *plon),
                       missing ? AdminPath::unresolved() : path_of(rec, w), *dist};
      set.systems[s].records.push_back(std::move(r));
      set.systems[s].missing.push_back(missing);
    }
  }
  return set;
}

void emit_resolved_output(const ResolvedSet& set, const std::string& out_path) {
  write_file_atomic(out_path, resolved_output_json(set));
}

// ---------------------------------------------------------------------------
// Tables

namespace {

std::string cell(std::string_view s) { return csv::escape(s, '\t'); }

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

std::string scores_tsv(const EvalReport& report) {
  const auto& o = report.options;
  std::string out = fmt::format(
      "system\tgranularity\tAcc\tAcc@{}\tP_micro\tR_micro\tF1_micro\t"
      "P_macro\tR_macro\tF1_macro\tMedian\tMean\tAUC\n",
      o.threshold_km);
  for (const SystemInfo& s : report.scores.systems) {
    for (Granularity g : report.scores.granularities) {
      const MetricVector& v = report.scores.at(s.name, g);
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                         cell(s.name), to_string(g), number(v.acc),
                         number(v.acc_at), number(v.micro.precision),
                         number(v.micro.recall), number(v.micro.f1),
                         number(v.macro.precision), number(v.macro.recall),
                         number(v.macro.f1), number(v.median_km),
                         number(v.mean_km), number(v.auc));
    }
  }
  return out;
}

std::string tests_tsv(const EvalReport& report) {
  std::string out =
      "granularity\tcell\tsystem_a\tsystem_b\tstatistic\tp_value\tdirection\t"
      "n_effective\texact\tdegenerate\tsignificant\n";
  for (const TestCell& c : report.tests) {
    for (const PairwiseTest& t : c.pairs) {
      const TestResult& r = t.result;
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                         to_string(c.granularity), c.id, cell(t.system_a),
                         cell(t.system_b), number(r.statistic), number(r.p_value),
                         to_string(r.direction), r.n_effective, yes_no(r.exact),
                         yes_no(r.degenerate),
                         yes_no(r.p_value <= report.options.alpha));
    }
  }
  return out;
}

std::string correlations_tsv(const EvalReport& report) {
  std::string out =
      "granularity_x\tmetric_x\tgranularity_y\tmetric_y\ttau_b\tp_value\tn\t"
      "n_excluded\texact\tsignificant\n";
  for (const CorrelationEntry& e : report.correlations) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                       to_string(e.granularity_x), e.metric_x,
                       to_string(e.granularity_y), e.metric_y,
                       e.rc.computable ? number(e.rc.tau_b) : "n/a",
                       e.rc.computable ? number(e.rc.p_value) : "n/a", e.rc.n,
                       e.n_excluded, yes_no(e.rc.exact), yes_no(e.significant));
  }
  return out;
}

std::string agreement_tsv(const EvalReport& report) {
  std::string out = "granularity\tcell_x\tcell_y\tn_pairs\tdp_x\tdp_y\tssa\tssd\n";
  for (const AgreementEntry& e : report.agreements) {
    const AgreementSummary& s = e.summary;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", to_string(e.granularity),
                       e.cell_x, e.cell_y, s.n_pairs, number(s.dp_x),
                       number(s.dp_y), number(s.ssa), number(s.ssd));
  }
  return out;
}

std::string boxplot_tsv(const EvalReport& report) {
  std::string out = fmt::format(
      "# quartiles: linear interpolation between closest ranks (type 7)\n"
      "# whiskers: furthest points within 1.5 IQR, capped at clip_km\n"
      "# clip_km: {}\n"
      "system\tn\tmin\tq1\tmedian\tq3\tmax\twhisker_low\twhisker_high\tmean\t"
      "n_over_clip\n",
      report.options.clip_km);
  for (const DistanceSummary& s : report.boxplots) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", cell(s.system),
                       s.n, number(s.min), number(s.q1), number(s.median),
                       number(s.q3), number(s.max), number(s.whisker_low),
                       number(s.whisker_high), number(s.mean), s.n_over_clip);
  }
  return out;
}

std::string cdf_tsv(const EvalReport& report) {
  std::string out = "system\tx_km\tfraction\n";
  for (const auto& [name, points] : report.cdf_samples) {
    for (const CdfPoint& p : points) {
      out += fmt::format("{}\t{}\t{}\n", cell(name), number(p.x_km), number(p.fraction));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output directory

const std::vector<std::string>& output_file_names() {
  static const std::vector<std::string> names{
      "resolved.json", "scores.tsv",  "tests.tsv", "correlations.tsv",
      "agreement.tsv", "boxplot.tsv", "cdf.tsv",   "meta.json",
      "run_stats.json"};
  return names;
}

namespace {

std::string run_stats_json(const RunStats& s) {
  ordered_json j;
  j["queries"] = s.cache.queries;
  j["cache_hits"] = s.cache.cache_hits;
  j["provider_lookups"] = s.cache.provider_lookups;
  j["provider_requests"] = s.cache.provider_requests;
  j["wall_time_ms"] = s.wall_time_ms;
  return j.dump(2) + "\n";
}

void write_plain(const fs::path& path, std::string_view content) {
  write_file_atomic(path.string(), content);
}

void check_replaceable(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError(fmt::format("output path '{}' exists and is not a directory",
                              dir.string()));
  }
  const auto& known = output_file_names();
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() ||
        std::find(known.begin(), known.end(), name) == known.end()) {
      throw IoError(fmt::format(
          "output directory '{}' holds '{}', which this tool did not write; "
          "refusing to replace it",
          dir.string(), name));
    }
  }
}

}  // namespace

void emit_plot_data(const EvalReport& report, const std::string& out_dir) {
  const fs::path dir(out_dir);
  write_plain(dir / "boxplot.tsv", boxplot_tsv(report));
  write_plain(dir / "cdf.tsv", cdf_tsv(report));
}

void emit_report(const EvalReport& report, const std::string& out_dir) {
  const fs::path out = fs::absolute(fs::path(out_dir)).lexically_normal();
  const fs::path target = out.has_filename() ? out : out.parent_path();
  const bool exists = fs::exists(target);
  if (exists) check_replaceable(target);

  const std::string suffix = fmt::format(".tmp-{}", ::getpid());
  const fs::path staging = target.string() + suffix;
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    fs::create_directory(staging);
    write_plain(staging / "resolved.json", resolved_output_json(report.resolved));
    write_plain(staging / "scores.tsv", scores_tsv(report));
    write_plain(staging / "tests.tsv", tests_tsv(report));
    write_plain(staging / "correlations.tsv", correlations_tsv(report));
    write_plain(staging / "agreement.tsv", agreement_tsv(report));
    emit_plot_data(report, staging.string());
    write_plain(staging / "meta.json", report.meta_json);
    write_plain(staging / "run_stats.json", run_stats_json(report.stats));

    if (exists) {
      const fs::path old = target.string() + fmt::format(".old-{}", ::getpid());
      fs::remove_all(old, ec);
      fs::rename(target, old);
      fs::rename(staging, target);
      fs::remove_all(old, ec);
    } else {
      fs::rename(staging, target);
    }
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(fmt::format("writing '{}': {}", target.string(), e.what()));
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

}  // namespace geoloceval
