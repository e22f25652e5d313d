#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "geosynth/aggregation.hpp"
#include "geosynth/cart.hpp"
#include "geosynth/diagnostics.hpp"
#include "geosynth/dpmpm.hpp"
#include "geosynth/error.hpp"
#include "geosynth/mdav.hpp"
#include "geosynth/pipeline.hpp"
#include "geosynth/risk.hpp"
#include "geosynth/simulate.hpp"
#include "geosynth/utility.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace geosynth;

namespace {

using XY = std::pair<double, double>;

std::vector<GeoPoint> to_points(const std::vector<XY>& xy) {
  std::vector<GeoPoint> out;
  out.reserve(xy.size());
  for (const auto& [x, y] : xy) out.push_back({x, y});
  return out;
}

// json -> python via the json module; keeps the binding free of a converter
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

pipeline::PipelineConfig config_from(const fs::path& path, std::optional<std::uint64_t> seed,
                                     std::optional<fs::path> out) {
  auto cfg = pipeline::PipelineConfig::load(path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output = *out;
  return cfg;
}

std::size_t workers(std::size_t threads) {
  return threads ? threads : std::max(1u, std::thread::hardware_concurrency());
}

SyntheticRelease release_from(const Schema& schema, const std::vector<fs::path>& files,
                              std::vector<std::string> synthesized) {
  SyntheticRelease r;
  r.synthesized_variables = std::move(synthesized);
  for (const auto& f : files) r.replicates.push_back(load_csv(f, schema));
  return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "geosynth core: MDAV clustering, CART and DPMPM synthesis, risk and utility evaluation";

  // translators run newest first, so the subclass goes last
  py::register_exception<Error>(m, "GeosynthError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.def(
      "mdav_partition",
      [](const std::vector<XY>& points, std::size_t k) {
        const auto pts = to_points(points);
        py::gil_scoped_release nogil;
        return mdav_partition(pts, k).assignments;
      },
      py::arg("points"), py::arg("k"), "cluster id of every (x, y) point");

  m.def(
      "stick_breaking_weights", [](const std::vector<double>& V) { return dpmpm::stick_breaking_weights(V); },
      py::arg("V"));
  m.def(
      "select_snapshots", &dpmpm::select_snapshots, py::arg("saved"), py::arg("m"));

  m.def(
      "gini_impurity", [](const std::vector<std::int64_t>& counts) { return cart::gini_impurity(counts); },
      py::arg("counts"));
  m.def(
      "bayesian_bootstrap_indices",
      [](std::size_t n, std::size_t count, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return cart::bayesian_bootstrap_indices(n, count, rng);
      },
      py::arg("n"), py::arg("count"), py::arg("seed"));

  m.def(
      "cell_corner",
      [](double x, double y, double g) {
        const auto c = cell_corner({x, y}, g);
        return XY{c.x, c.y};
      },
      py::arg("x"), py::arg("y"), py::arg("g"));
  m.def(
      "coarsen_geocode",
      [](double x, double y, double g) {
        const auto c = risk::coarsen_geocode({x, y}, g);
        return std::pair<std::int64_t, std::int64_t>{c.x, c.y};
      },
      py::arg("x"), py::arg("y"), py::arg("g"));

  m.def(
      "k_curve",
      [](const std::vector<XY>& points, const std::vector<std::int32_t>& types, std::int32_t type_i,
         const std::vector<double>& radii, double area) {
        return utility::k_curve(to_points(points), types, type_i, radii, area);
      },
      py::arg("points"), py::arg("types"), py::arg("type_i"), py::arg("radii"), py::arg("domain_area"));
  m.def("l_function", &utility::l_function, py::arg("k_value"), py::arg("r"));

  m.def(
      "geweke_z", [](const std::vector<double>& chain) { return geweke_z(chain); }, py::arg("chain"));
  m.def(
      "heidelberger_welch",
      [](const std::vector<double>& chain) {
        const auto hw = heidelberger_welch(chain);
        py::dict d;
        d["passed"] = hw.passed;
        d["start"] = hw.start;
        d["statistic"] = hw.statistic;
        return d;
      },
      py::arg("chain"));
  m.def(
      "autocorrelation", [](const std::vector<double>& chain, std::size_t lag) { return autocorrelation(chain, lag); },
      py::arg("chain"), py::arg("max_lag"));

  m.def(
      "simulate_population",
      [](const fs::path& csv, const fs::path& schema_json, std::size_t records, std::uint64_t seed) {
        PopulationConfig cfg;
        cfg.records = records;
        cfg.seed = seed;
        const auto ds = simulate_population(cfg);
        save_csv(ds, csv);
        std::ofstream(schema_json) << ds.schema().to_json().dump(2) << '\n';
      },
      py::arg("csv"), py::arg("schema"), py::arg("records") = 3000, py::arg("seed") = 1,
      "write a simulated population and its schema");

  m.def(
      "evaluate_risk",
      [](const fs::path& original_csv, const fs::path& schema_json, const std::vector<fs::path>& release_csvs,
         std::vector<std::string> synthesized, std::vector<std::string> quasi_identifiers,
         std::optional<double> grid_size, const std::vector<std::size_t>& target_records) {
        const Schema schema = Schema::load(schema_json);
        const Dataset orig = load_csv(original_csv, schema);
        const auto rel = release_from(schema, release_csvs, std::move(synthesized));
        risk::IntruderScenario s;
        s.label = "python";
        s.quasi_identifiers = quasi_identifiers.empty() ? schema.quasi_identifiers() : std::move(quasi_identifiers);
        s.grid_size = grid_size;
        s.validate(schema);
        std::vector<risk::Target> targets;
        if (target_records.empty()) {
          for (std::size_t i = 0; i < orig.rows(); ++i) targets.push_back({i, 0});
        } else {
          for (auto i : target_records) targets.push_back({i, 0});
        }
        const auto rep = risk::evaluate_risk(orig, rel, s, targets);
        return to_py(risk::to_json(rep, false));
      },
      py::arg("original"), py::arg("schema"), py::arg("release"), py::arg("synthesized"),
      py::arg("quasi_identifiers") = std::vector<std::string>{}, py::arg("grid_size") = 0.0,
      py::arg("targets") = std::vector<std::size_t>{},
      "risk report for a release; grid_size None drops the geocode, 0 matches it exactly");

  m.def(
      "run_pipeline",
      [](const fs::path& config, std::size_t threads, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
        const auto cfg = config_from(config, seed, out);
        {
          py::gil_scoped_release nogil;
          pipeline::run_pipeline(cfg, workers(threads));
        }
        std::ifstream in(cfg.output / "manifest.json");
        return to_py(nlohmann::json::parse(in));
      },
      py::arg("config"), py::arg("threads") = 0, py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt,
      "every stage; returns the manifest");
  m.def(
      "run_cluster",
      [](const fs::path& config, std::optional<fs::path> out) {
        pipeline::run_cluster(config_from(config, std::nullopt, out));
      },
      py::arg("config"), py::arg("out") = std::nullopt);
  m.def(
      "run_synthesize",
      [](const fs::path& config, std::size_t threads, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
        const auto cfg = config_from(config, seed, out);
        py::gil_scoped_release nogil;
        pipeline::run_synthesize(cfg, workers(threads));
      },
      py::arg("config"), py::arg("threads") = 0, py::arg("seed") = std::nullopt, py::arg("out") = std::nullopt);
  m.def(
      "run_evaluate_risk",
      [](const fs::path& config, std::size_t threads, std::optional<fs::path> out, std::optional<fs::path> release) {
        const auto cfg = config_from(config, std::nullopt, out);
        py::gil_scoped_release nogil;
        pipeline::run_evaluate_risk(cfg, workers(threads), release);
      },
      py::arg("config"), py::arg("threads") = 0, py::arg("out") = std::nullopt, py::arg("release") = std::nullopt);
  m.def(
      "run_evaluate_utility",
      [](const fs::path& config, std::optional<fs::path> out, std::optional<fs::path> release) {
        const auto cfg = config_from(config, std::nullopt, out);
        py::gil_scoped_release nogil;
        pipeline::run_evaluate_utility(cfg, release);
      },
      py::arg("config"), py::arg("out") = std::nullopt, py::arg("release") = std::nullopt);
  m.def(
      "load_config", [](const fs::path& config) { return to_py(pipeline::PipelineConfig::load(config).to_json()); },
      py::arg("config"), "parsed config with every default filled in");
}
