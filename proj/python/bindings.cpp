#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geoloceval/error.hpp"
#include "geoloceval/report.hpp"

namespace py = pybind11;
namespace gle = geoloceval;

namespace {

std::vector<gle::AdminPath> to_paths(const std::vector<std::optional<gle::AdminPath>>& in) {
  std::vector<gle::AdminPath> out;
  out.reserve(in.size());
  for (const auto& p : in) out.push_back(p ? *p : gle::AdminPath::unresolved());
  return out;
}

py::dict metric_dict(const gle::MetricVector& m) {
  py::dict d;
  d["acc"] = m.acc;
  d["p_micro"] = m.micro.precision;
  d["r_micro"] = m.micro.recall;
  d["f1_micro"] = m.micro.f1;
  d["p_macro"] = m.macro.precision;
  d["r_macro"] = m.macro.recall;
  d["f1_macro"] = m.macro.f1;
  d["acc_at"] = m.acc_at;
  d["median_km"] = m.median_km;
  d["mean_km"] = m.mean_km;
  d["auc"] = m.auc;
  return d;
}

gle::ScoringOptions scoring(const std::vector<std::string>& granularities,
                            double threshold_km, double alpha, std::uint64_t seed,
                            const std::vector<std::string>& baselines,
                            std::size_t workers) {
  gle::ScoringOptions s;
  if (!granularities.empty()) {
    s.granularities.clear();
    for (const auto& g : granularities) s.granularities.push_back(gle::parse_granularity(g));
  }
  for (const auto& b : baselines) s.baselines.push_back(gle::parse_baseline(b));
  s.threshold_km = threshold_km;
  s.alpha = alpha;
  s.seed = seed;
  s.workers = workers;
  return s;
}

py::dict summary(const gle::EvalReport& r) {
  py::dict scores;
  for (const auto& [key, m] : r.scores.cells) {
    scores[py::make_tuple(key.first, std::string(gle::to_string(key.second)))] = metric_dict(m);
  }
  py::dict out;
  out["scores"] = scores;
  out["documents"] = r.resolved.doc_ids.size();
  out["provider_lookups"] = r.stats.cache.provider_lookups;
  out["cache_hits"] = r.stats.cache.cache_hits;
  return out;
}

}  // namespace

PYBIND11_MODULE(_geoloceval, m) {
  m.doc() = "Geolocation evaluation core";

  auto error = py::register_exception<gle::Error>(m, "Error");
  py::register_exception<gle::ConfigError>(m, "ConfigError", error);
  py::register_exception<gle::ValidationError>(m, "ValidationError", error);
  py::register_exception<gle::GeocodeError>(m, "GeocodeError", error);
  py::register_exception<gle::IoError>(m, "IoError", error);

  m.attr("EARTH_RADIUS_KM") = gle::kEarthRadiusKm;

  py::class_<gle::GeoPoint>(m, "GeoPoint")
      .def(py::init<double, double>(), py::arg("lat"), py::arg("lon"))
      .def_property_readonly("lat", &gle::GeoPoint::lat)
      .def_property_readonly("lon", &gle::GeoPoint::lon)
      .def("antipode", &gle::GeoPoint::antipode)
      .def(py::self == py::self)
      .def("__repr__", [](const gle::GeoPoint& p) {
        return "GeoPoint(" + py::repr(py::float_(p.lat())).cast<std::string>() + ", " +
               py::repr(py::float_(p.lon())).cast<std::string>() + ")";
      });

  py::class_<gle::AdminPath>(m, "AdminPath")
      .def(py::init(&gle::AdminPath::make), py::arg("country"), py::arg("state") = std::nullopt,
           py::arg("county") = std::nullopt, py::arg("city") = std::nullopt)
      .def_static("unresolved", &gle::AdminPath::unresolved)
      .def_readonly("country", &gle::AdminPath::country)
      .def_readonly("state", &gle::AdminPath::state)
      .def_readonly("county", &gle::AdminPath::county)
      .def_readonly("city", &gle::AdminPath::city)
      .def_readonly("sentinel", &gle::AdminPath::sentinel)
      .def("same_location",
           [](const gle::AdminPath& a, const gle::AdminPath& b, const std::string& g) {
             return a.same_location(b, gle::parse_granularity(g));
           })
      .def(py::self == py::self);

  m.def("great_circle_distance", &gle::great_circle_distance, py::arg("a"), py::arg("b"),
        "Haversine distance in km.");
  m.def("medoid", [](const std::vector<gle::GeoPoint>& pts) { return gle::medoid(pts); });

  m.def(
      "score_labels",
      [](const std::vector<std::optional<gle::AdminPath>>& predicted,
         const std::vector<gle::AdminPath>& truth, const std::string& granularity,
         std::optional<std::vector<double>> dists_km, double threshold_km) {
        const auto pred = to_paths(predicted);
        const auto t = gle::tally(std::span<const gle::AdminPath>(pred),
                                  std::span<const gle::AdminPath>(truth),
                                  gle::parse_granularity(granularity));
        std::optional<std::span<const double>> d;
        if (dists_km) d = std::span<const double>(*dists_km);
        return metric_dict(gle::score(t, d, gle::MetricOptions{threshold_km, gle::kDefaultAucRangeKm}));
      },
      py::arg("predicted"), py::arg("truth"), py::arg("granularity") = "city",
      py::arg("dists_km") = std::nullopt, py::arg("threshold_km") = gle::kDefaultThresholdKm,
      "Scores predicted paths (None for unresolved) against truth.");

  m.def("acc_at", [](const std::vector<double>& d, double t) { return gle::acc_at(d, t); },
        py::arg("dists_km"), py::arg("threshold_km") = gle::kDefaultThresholdKm);
  m.def("median_error", [](const std::vector<double>& d) { return gle::median_error(d); });
  m.def("mean_error", [](const std::vector<double>& d) { return gle::mean_error(d); });
  m.def("auc", [](const std::vector<double>& d, double r) { return gle::auc(d, r); },
        py::arg("dists_km"), py::arg("range_km") = gle::kDefaultAucRangeKm);

  py::class_<gle::TestResult>(m, "TestResult")
      .def_property_readonly("test", [](const gle::TestResult& r) { return std::string(gle::symbol(r.test)); })
      .def_readonly("statistic", &gle::TestResult::statistic)
      .def_readonly("p_value", &gle::TestResult::p_value)
      .def_property_readonly("direction", [](const gle::TestResult& r) { return std::string(gle::to_string(r.direction)); })
      .def_readonly("n_effective", &gle::TestResult::n_effective)
      .def_readonly("exact", &gle::TestResult::exact)
      .def_readonly("degenerate", &gle::TestResult::degenerate);

  m.def("micro_sign_test", &gle::micro_sign_test, py::arg("a_correct"), py::arg("b_correct"));
  m.def("proportions_z_test", &gle::proportions_z_test, py::arg("p_a"), py::arg("p_b"), py::arg("n"));
  m.def("macro_sign_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    return gle::macro_sign_test(a, b);
  });
  m.def("macro_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    return gle::macro_t_test(a, b);
  });
  m.def("wilcoxon_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    return gle::wilcoxon_test(a, b);
  });
  m.def("kendall_tau_b", [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = gle::kendall_tau_b(x, y);
    return py::make_tuple(r.tau_b, r.p_value);
  });

  m.def(
      "evaluate",
      [](const std::string& truth, const std::vector<std::string>& runs,
         const std::string& gazetteer, const std::string& out_dir, const std::string& cache,
         const std::string& missing, const std::vector<std::string>& granularities,
         double threshold_km, double alpha, std::uint64_t seed,
         const std::vector<std::string>& baselines, std::size_t workers) {
        gle::EvalConfig c;
        c.truth_path = truth;
        c.run_paths = runs;
        c.gazetteer_path = gazetteer;
        c.cache_path = cache;
        c.out_dir = out_dir;
        c.missing_policy = gle::parse_missing_policy(missing);
        c.scoring = scoring(granularities, threshold_km, alpha, seed, baselines, workers);
        gle::EvalReport r;
        {
          py::gil_scoped_release release;
          r = gle::run_evaluation(c);
          gle::emit_report(r, c.out_dir);
        }
        return summary(r);
      },
      py::arg("truth"), py::arg("runs"), py::arg("gazetteer"), py::arg("out_dir"),
      py::arg("cache") = "", py::arg("missing") = "error",
      py::arg("granularities") = std::vector<std::string>{},
      py::arg("threshold_km") = gle::kDefaultThresholdKm, py::arg("alpha") = gle::kDefaultAlpha,
      py::arg("seed") = 0, py::arg("baselines") = std::vector<std::string>{},
      py::arg("workers") = 1,
      "Offline evaluation: resolves through a gazetteer and writes the report.");

  m.def(
      "rescore",
      [](const std::string& resolved, const std::string& out_dir,
         const std::vector<std::string>& granularities, double threshold_km, double alpha,
         std::uint64_t seed, const std::vector<std::string>& baselines, std::size_t workers) {
        gle::RescoreConfig c;
        c.resolved_path = resolved;
        c.out_dir = out_dir;
        c.scoring = scoring(granularities, threshold_km, alpha, seed, baselines, workers);
        gle::EvalReport r;
        {
          py::gil_scoped_release release;
          r = gle::run_rescore(c);
          gle::emit_report(r, c.out_dir);
        }
        return summary(r);
      },
      py::arg("resolved"), py::arg("out_dir"),
      py::arg("granularities") = std::vector<std::string>{},
      py::arg("threshold_km") = gle::kDefaultThresholdKm, py::arg("alpha") = gle::kDefaultAlpha,
      py::arg("seed") = 0, py::arg("baselines") = std::vector<std::string>{},
      py::arg("workers") = 1);
}
