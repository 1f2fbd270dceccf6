#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geoloceval/error.hpp"
#include "geoloceval/report.hpp"

using namespace geoloceval;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() /
             ("geoloceval-report-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kGazetteer =
    "city\tcounty\tstate\tcountry\tlat\tlon\n"
    "Hoboken\tHudson County\tNew Jersey\tUnited States\t40.7440\t-74.0324\n"
    "Newark\tEssex County\tNew Jersey\tUnited States\t40.7357\t-74.1724\n"
    "New York\tNew York County\tNew York\tUnited States\t40.7128\t-74.0060\n"
    "Paris\tParis\tIle-de-France\tFrance\t48.8566\t2.3522\n"
    "Lyon\tLyon\tAuvergne-Rhone-Alpes\tFrance\t45.7640\t4.8357\n";

struct Fixture {
  fs::path dir;
  EvalConfig config;

  explicit Fixture(const std::string& name, int n_systems = 2) : dir(scratch(name)) {
    write(dir / "gaz.tsv", kGazetteer);
    write(dir / "truth.json", R"({
      "u1": {"lon": -74.0324, "lat": 40.7440},
      "u2": {"lon": 2.3522, "lat": 48.8566},
      "u3": {"lon": -74.1724, "lat": 40.7357},
      "u4": {"lon": 4.8357, "lat": 45.7640},
      "u5": {"lon": -74.0060, "lat": 40.7128}})");
    const char* points[] = {R"({"lon": -74.0324, "lat": 40.7440})",
                            R"({"lon": 2.3522, "lat": 48.8566})",
                            R"({"lon": -74.1724, "lat": 40.7357})",
                            R"({"lon": 4.8357, "lat": 45.7640})",
                            R"({"lon": -74.0060, "lat": 40.7128})"};
    for (int s = 0; s < n_systems; ++s) {
      std::string doc = "{";
      for (int u = 0; u < 5; ++u) {
        // System s gets the first (5 - s % 5) docs right, then shifts.
        const int pick = u < 5 - s % 5 ? u : (u + 1 + s) % 5;
        doc += (u ? "," : "") + std::string("\"u") + std::to_string(u + 1) + "\": " +
               points[pick];
      }
      doc += "}";
      const auto path = dir / ("sys" + std::to_string(s) + ".json");
      write(path, doc);
      config.run_paths.push_back(path.string());
    }
    config.truth_path = (dir / "truth.json").string();
    config.gazetteer_path = (dir / "gaz.tsv").string();
    config.out_dir = (dir / "out").string();
  }
};

}  // namespace

TEST_CASE("boxplot summaries") {
  const std::vector<double> zeros(4, 0.0);
  const auto z = summarize_distances("z", zeros, 6000);
  CHECK(z.q1 == 0);
  CHECK(z.median == 0);
  CHECK(z.q3 == 0);
  CHECK(z.mean == 0);

  const std::vector<double> v{0, 10, 20, 30, 40};
  const auto s = summarize_distances("s", v, 6000);
  CHECK(s.q1 == 10);
  CHECK(s.median == 20);
  CHECK(s.q3 == 30);
  CHECK(s.whisker_low == 0);
  CHECK(s.whisker_high == 40);

  const std::vector<double> far{1, 2, 3, 7000, 20015};
  const auto c = summarize_distances("c", far, 6000);
  CHECK(c.n_over_clip == 2);
  CHECK(c.max == 20015);
  CHECK(c.whisker_high <= 6000);
}

TEST_CASE("resolved output format") {
  ResolvedSet empty;
  CHECK(resolved_output_json(empty) == "{}\n");
  CHECK(parse_resolved_output("{}").doc_ids.empty());

  ResolvedSet one;
  one.doc_ids = {"483049821"};
  one.truth_points = {GeoPoint(40.7, -74.0)};
  one.truth_paths = {AdminPath::make("United States", "New Jersey", "Hudson County", "Hoboken")};
  ResolvedRecord rec{"483049821", GeoPoint(40.74801738664574, -74.0344411626724),
                     AdminPath::make("United States", "New Jersey", std::nullopt, "Hoboken"),
                     15137.622354338771};
  one.systems.push_back({"geocoding_system_1", {rec}, {false}});
  const std::string text = resolved_output_json(one);
  const auto j = nlohmann::ordered_json::parse(text);
  const auto& r = j["483049821"]["geocoding_system_1"];
  std::vector<std::string> keys;
  for (const auto& [k, v] : r.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"doc_id", "lon", "lat", "country", "county",
                                         "state", "city", "error_dist"});
  CHECK(r["county"].is_null());
  CHECK(r["lon"].is_number());
  CHECK(text.find("\"lon\": -74.0344411626724") != std::string::npos);

  const auto back = parse_resolved_output(text);
  CHECK(resolved_output_json(back) == text);
  CHECK(back.systems[0].records[0] == rec);
  CHECK_THROWS_AS(parse_resolved_output("{\"a\": 1}"), ValidationError);
  CHECK_THROWS_AS(parse_resolved_output("{"), ParseError);
}

TEST_CASE("end to end evaluation") {
  Fixture fx("e2e");
  fx.config.scoring.baselines = {Baseline::MajorityClass, Baseline::StratifiedSampling};
  fx.config.scoring.granularities = {Granularity::City, Granularity::Country};
  const auto report = run_evaluation(fx.config);
  CHECK(report.scores.systems.size() == 4);
  CHECK(report.tests.size() == 2 * 13);
  for (const auto& cell : report.tests) CHECK(cell.pairs.size() == 6);

  const auto scores = scores_tsv(report);
  std::istringstream lines(scores);
  std::string header, row;
  std::getline(lines, header);
  CHECK(header ==
        "system\tgranularity\tAcc\tAcc@161\tP_micro\tR_micro\tF1_micro\tP_macro\t"
        "R_macro\tF1_macro\tMedian\tMean\tAUC");
  int rows = 0;
  while (std::getline(lines, row)) {
    ++rows;
    if (row.rfind("Mc\t", 0) == 0 || row.rfind("Ss\t", 0) == 0) {
      CHECK(row.find("\tn/a\t") != std::string::npos);
    }
  }
  CHECK(rows == 8);
  for (const auto& s : report.scores.systems) {
    for (Granularity g : report.scores.granularities) {
      const auto& m = report.scores.at(s.name, g);
      CHECK(m.acc == m.micro.precision);
      CHECK(m.acc == m.micro.f1);
    }
  }
  CHECK(report.scores.at("sys0", Granularity::City).acc == 1.0);
  CHECK(report.scores.at("sys1", Granularity::City).acc == 0.8);

  emit_report(report, fx.config.out_dir);
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(fx.config.out_dir)) {
    names.insert(e.path().filename().string());
  }
  CHECK(names == std::set<std::string>(output_file_names().begin(), output_file_names().end()));
  CHECK(slurp(fs::path(fx.config.out_dir) / "boxplot.tsv").find("# clip_km: 6000\n") != std::string::npos);

  // Regenerated from resolved.json alone, every table is identical.
  RescoreConfig rc;
  rc.resolved_path = (fs::path(fx.config.out_dir) / "resolved.json").string();
  rc.scoring = fx.config.scoring;
  rc.out_dir = (fx.dir / "rescored").string();
  emit_report(run_rescore(rc), rc.out_dir);
  for (const auto& name : output_file_names()) {
    if (name == "meta.json" || name == "run_stats.json") continue;
    CHECK_MESSAGE(slurp(fs::path(fx.config.out_dir) / name) == slurp(fs::path(rc.out_dir) / name),
                  name);
  }

  // Repeat into the same directory: byte-identical except the volatile stats.
  std::map<std::string, std::string> first;
  for (const auto& name : output_file_names()) first[name] = slurp(fs::path(fx.config.out_dir) / name);
  emit_report(run_evaluation(fx.config), fx.config.out_dir);
  for (const auto& name : output_file_names()) {
    if (name == "run_stats.json") continue;
    CHECK_MESSAGE(first[name] == slurp(fs::path(fx.config.out_dir) / name), name);
  }
}

TEST_CASE("identical runs are never significantly different") {
  Fixture fx("identical", 1);
  fx.config.run_paths.push_back((fx.dir / "copy.json").string());
  fs::copy_file(fx.config.run_paths[0], fx.config.run_paths[1]);
  const auto report = run_evaluation(fx.config);
  for (const auto& cell : report.tests) {
    for (const auto& t : cell.pairs) CHECK(t.result.p_value == 1.0);
  }
  for (const auto& e : report.correlations) {
    if (e.metric_x == e.metric_y && e.granularity_x == e.granularity_y && e.rc.computable) {
      CHECK(e.rc.tau_b == 1.0);
    }
  }
}

TEST_CASE("eleven systems give 55 pairs per cell") {
  Fixture fx("eleven", 11);
  fx.config.scoring.workers = 3;
  const auto report = run_evaluation(fx.config);
  CHECK(report.tests.size() == 4 * 13);
  for (const auto& cell : report.tests) CHECK(cell.pairs.size() == 55);
  for (const auto& a : report.agreements) {
    CHECK(a.summary.n_pairs == 55);
    CHECK(a.summary.ssa + a.summary.ssd <= std::min(a.summary.dp_x, a.summary.dp_y) + 1e-12);
  }
  // Within-granularity triangle plus cross-granularity blocks.
  CHECK(report.correlations.size() == 4 * 55 + 6 * 64);
}

TEST_CASE("configuration and output safety") {
  Fixture fx("config");
  auto bad = fx.config;
  bad.scoring.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fx.config;
  bad.run_paths.push_back(fx.config.run_paths[0]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fx.config;
  bad.gazetteer_path = (fx.dir / "absent.tsv").string();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fx.config;
  bad.scoring.threshold_km = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fx.config;
  bad.out_dir = (fx.dir / "no" / "such" / "out").string();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fx.config;
  bad.provider = ProviderKind::GoogleV3;
  ::unsetenv(kGoogleKeyEnv);
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains(kGoogleKeyEnv), ConfigError);
  CHECK_THROWS_AS(parse_provider("bing"), ConfigError);
  CHECK_THROWS_AS(parse_baseline("zz"), ConfigError);

  const auto report = run_evaluation(fx.config);
  fs::create_directories(fx.config.out_dir);
  write(fs::path(fx.config.out_dir) / "notes.txt", "mine");
  CHECK_THROWS_AS(emit_report(report, fx.config.out_dir), IoError);
  CHECK(slurp(fs::path(fx.config.out_dir) / "notes.txt") == "mine");
  CHECK_FALSE(fs::exists(fs::path(fx.config.out_dir) / "scores.tsv"));
}

TEST_CASE("missing predictions under policy wrong") {
  Fixture fx("missing");
  write(fs::path(fx.config.run_paths[1]), R"({"u1": {"lon": -74.0324, "lat": 40.7440}})");
  CHECK_THROWS_AS(run_evaluation(fx.config), ValidationError);
  fx.config.missing_policy = MissingPolicy::Wrong;
  const auto report = run_evaluation(fx.config);
  CHECK(report.scores.at("sys1", Granularity::Country).acc == 0.2);
  CHECK(report.scores.systems[1].missing == 4);
  const auto j = nlohmann::json::parse(resolved_output_json(report.resolved));
  CHECK(j["u2"]["sys1"]["lat"].is_null());
  CHECK(j["u2"]["sys1"]["country"].is_null());
}
