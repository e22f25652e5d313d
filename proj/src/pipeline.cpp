#include "geosynth/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "geosynth/aggregation.hpp"
#include "geosynth/csv.hpp"
#include "geosynth/error.hpp"

namespace geosynth::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Synthesizer parse_synthesizer(const std::string& s) {
  if (s == "cart_categorical") return Synthesizer::cart_categorical;
  if (s == "cart_continuous") return Synthesizer::cart_continuous;
  if (s == "dpmpm") return Synthesizer::dpmpm;
  throw InputError("unknown synthesizer '" + s + "' (expected cart_categorical, cart_continuous or dpmpm)");
}

std::string to_string(Synthesizer s) {
  switch (s) {
    case Synthesizer::cart_categorical: return "cart_categorical";
    case Synthesizer::cart_continuous: return "cart_continuous";
    case Synthesizer::dpmpm: return "dpmpm";
  }
  return "?";
}

// ---------------------------------------------------------------- config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InputError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double number_or_inf(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity")) {
    return std::numeric_limits<double>::infinity();
  }
  throw InputError("config: " + what + " must be a number or \"inf\"");
}

json number_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<utility::Outcome> read_outcomes(const json& arr, const std::string& where) {
  std::vector<utility::Outcome> out;
  for (const auto& o : arr) {
    check_keys(o, {"name", "variable", "levels"}, where);
    utility::Outcome x;
    x.variable = o.at("variable").get<std::string>();
    x.name = o.value("name", x.variable);
    x.levels = o.at("levels").get<std::vector<std::string>>();
    out.push_back(std::move(x));
  }
  return out;
}

json outcomes_json(const std::vector<utility::Outcome>& v) {
  json arr = json::array();
  for (const auto& o : v) arr.push_back({{"name", o.name}, {"variable", o.variable}, {"levels", o.levels}});
  return arr;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    check_keys(j,
               {"input", "schema", "output", "synthesizer", "synthesis_targets", "predictors", "cart", "dpmpm", "mdav",
                "m", "seed", "aggregation", "risk", "utility", "variants"},
               "config");
    c.input = resolve(base_dir, j.at("input").get<std::string>());
    c.schema = resolve(base_dir, j.at("schema").get<std::string>());
    c.output = resolve(base_dir, j.value("output", std::string("out")));
    if (j.contains("synthesizer")) c.synthesizer = parse_synthesizer(j.at("synthesizer").get<std::string>());
    read(j, "synthesis_targets", c.synthesis_targets);
    if (j.contains("predictors") && !j.at("predictors").is_null()) {
      c.predictors = j.at("predictors").get<std::vector<std::string>>();
    }
    if (j.contains("cart")) {
      const auto& cj = j.at("cart");
      check_keys(cj, {"cp", "minsplit", "minbucket", "latitude_first"}, "cart");
      if (cj.contains("cp")) c.cart.cp = number_or_inf(cj.at("cp"), "cart.cp");
      read(cj, "minsplit", c.cart.minsplit);
      read(cj, "minbucket", c.cart.minbucket);
      read(cj, "latitude_first", c.latitude_first);
    }
    if (j.contains("dpmpm")) {
      const auto& dj = j.at("dpmpm");
      check_keys(dj,
                 {"F", "a_alpha", "b_alpha", "dirichlet_a", "iterations", "burn_in", "thin", "acf_threshold",
                  "escalated_thin"},
                 "dpmpm");
      read(dj, "F", c.dpmpm.F);
      read(dj, "a_alpha", c.dpmpm.a_alpha);
      read(dj, "b_alpha", c.dpmpm.b_alpha);
      read(dj, "dirichlet_a", c.dpmpm.dirichlet_default);
      read(dj, "iterations", c.dpmpm.iterations);
      read(dj, "burn_in", c.dpmpm.burn_in);
      read(dj, "thin", c.dpmpm.thin);
      read(dj, "acf_threshold", c.dpmpm.acf_threshold);
      read(dj, "escalated_thin", c.dpmpm.escalated_thin);
    }
    if (j.contains("mdav")) {
      check_keys(j.at("mdav"), {"k"}, "mdav");
      read(j.at("mdav"), "k", c.k);
    }
    read(j, "m", c.m);
    read(j, "seed", c.seed);
    if (j.contains("aggregation") && !j.at("aggregation").is_null()) {
      const auto& a = j.at("aggregation");
      if (a.is_object()) {
        check_keys(a, {"grid"}, "aggregation");
        c.aggregation = a.at("grid").get<double>();
      } else {
        c.aggregation = a.get<double>();
      }
    }
    std::size_t default_targets = 100;
    bool default_block = false;
    if (j.contains("risk")) {
      const auto& rj = j.at("risk");
      check_keys(rj, {"targets_per_cluster", "block_on_cluster", "scenarios"}, "risk");
      read(rj, "targets_per_cluster", default_targets);
      read(rj, "block_on_cluster", default_block);
      for (const auto& sj : rj.value("scenarios", json::array())) {
        check_keys(sj, {"label", "quasi_identifiers", "grid_size", "targets_per_cluster", "block_on_cluster"},
                   "risk.scenarios");
        risk::IntruderScenario s;
        s.targets_per_cluster = sj.value("targets_per_cluster", default_targets);
        s.block_on_cluster = sj.value("block_on_cluster", default_block);
        read(sj, "quasi_identifiers", s.quasi_identifiers);
        if (sj.contains("grid_size")) {
          const auto& g = sj.at("grid_size");
          if (g.is_null() || (g.is_string() && g.get<std::string>() == "none")) {
            s.grid_size.reset();
          } else if (g.is_string() && g.get<std::string>() == "exact") {
            s.grid_size = 0.0;
          } else {
            s.grid_size = g.get<double>();
          }
        }
        s.label = sj.value("label", std::string());
        c.scenarios.push_back(std::move(s));
      }
    }
    if (c.scenarios.empty()) {
      risk::IntruderScenario s;
      s.targets_per_cluster = default_targets;
      s.block_on_cluster = default_block;
      c.scenarios.push_back(s);
    }
    if (j.contains("utility")) {
      const auto& uj = j.at("utility");
      check_keys(uj,
                 {"region_variable", "table_variables", "levels", "weighted", "shares", "l_functions", "r_count",
                  "radii", "domain_area"},
                 "utility");
      auto& u = c.utility;
      read(uj, "region_variable", u.region_variable);
      read(uj, "table_variables", u.table_variables);
      read(uj, "levels", u.levels);
      read(uj, "weighted", u.weighted);
      if (uj.contains("shares")) u.share_outcomes = read_outcomes(uj.at("shares"), "utility.shares");
      if (uj.contains("l_functions")) u.l_outcomes = read_outcomes(uj.at("l_functions"), "utility.l_functions");
      read(uj, "r_count", u.r_count);
      if (uj.contains("radii") && !uj.at("radii").is_null()) u.radii = uj.at("radii").get<std::vector<double>>();
      if (uj.contains("domain_area") && !uj.at("domain_area").is_null()) {
        u.domain_area = uj.at("domain_area").get<double>();
      }
    }
    for (const auto& vj : j.value("variants", json::array())) {
      check_keys(vj, {"name", "synthesis_targets", "synthesizer"}, "variants");
      Variant v;
      v.name = vj.at("name").get<std::string>();
      v.synthesis_targets = vj.at("synthesis_targets").get<std::vector<std::string>>();
      if (vj.contains("synthesizer")) v.synthesizer = parse_synthesizer(vj.at("synthesizer").get<std::string>());
      c.variants.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }

  // Defaults that depend on the schema.
  const Schema schema = Schema::load(c.schema);
  if (c.synthesis_targets.empty()) c.synthesis_targets = schema.synthesis_targets();
  for (auto& s : c.scenarios) {
    if (s.quasi_identifiers.empty()) s.quasi_identifiers = schema.quasi_identifiers();
    if (s.label.empty()) s.label = s.grid_size ? (*s.grid_size == 0.0 ? "exact" : "grid_" + s.grid_label()) : "no_geocode";
  }
  c.validate();
  for (const auto& t : c.synthesis_targets) schema.index_of(t);
  for (const auto& s : c.scenarios) s.validate(schema);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config file " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void PipelineConfig::validate() const {
  if (m < 1) throw InputError("config: m must be at least 1");
  if (k < 1) throw InputError("config: mdav.k must be at least 1");
  if (synthesis_targets.empty()) throw InputError("config: no synthesis targets (set synthesis_targets)");
  if (aggregation && !(*aggregation > 0.0)) throw InputError("config: aggregation grid must be positive");
  cart.validate();
  dpmpm.validate();
  std::set<std::string> names;
  for (const auto& v : variants) {
    if (v.name.empty() || v.name.find_first_of("/\\") != std::string::npos) {
      throw InputError("config: variant names must be nonempty and contain no path separators");
    }
    if (!names.insert(v.name).second) throw InputError("config: duplicate variant '" + v.name + "'");
    if (v.synthesis_targets.empty()) throw InputError("config: variant '" + v.name + "' has no targets");
  }
  std::set<std::string> labels;
  for (const auto& s : scenarios) {
    if (!labels.insert(s.label).second) throw InputError("config: duplicate risk scenario label '" + s.label + "'");
  }
}

json PipelineConfig::to_json() const {
  json j;
  j["input"] = input.generic_string();
  j["schema"] = schema.generic_string();
  j["output"] = output.generic_string();
  j["synthesizer"] = to_string(synthesizer);
  j["synthesis_targets"] = synthesis_targets;
  j["predictors"] = predictors ? json(*predictors) : json(nullptr);
  j["cart"] = {{"cp", number_json(cart.cp)},
               {"minsplit", cart.minsplit},
               {"minbucket", cart.minbucket},
               {"latitude_first", latitude_first}};
  j["dpmpm"] = {{"F", dpmpm.F},
                {"a_alpha", dpmpm.a_alpha},
                {"b_alpha", dpmpm.b_alpha},
                {"dirichlet_a", dpmpm.dirichlet_default},
                {"iterations", dpmpm.iterations},
                {"burn_in", dpmpm.burn_in},
                {"thin", dpmpm.thin},
                {"acf_threshold", dpmpm.acf_threshold},
                {"escalated_thin", dpmpm.escalated_thin}};
  j["mdav"] = {{"k", k}};
  j["m"] = m;
  j["seed"] = seed;
  j["aggregation"] = aggregation ? json{{"grid", *aggregation}} : json(nullptr);
  json scen = json::array();
  for (const auto& s : scenarios) {
    scen.push_back({{"label", s.label},
                    {"quasi_identifiers", s.quasi_identifiers},
                    {"grid_size", s.grid_size ? json(*s.grid_size) : json(nullptr)},
                    {"targets_per_cluster", s.targets_per_cluster},
                    {"block_on_cluster", s.block_on_cluster}});
  }
  j["risk"] = {{"scenarios", scen}};
  j["utility"] = {{"region_variable", utility.region_variable},
                  {"table_variables", utility.table_variables},
                  {"levels", utility.levels},
                  {"weighted", utility.weighted},
                  {"shares", outcomes_json(utility.share_outcomes)},
                  {"l_functions", outcomes_json(utility.l_outcomes)},
                  {"r_count", utility.r_count},
                  {"radii", utility.radii ? json(*utility.radii) : json(nullptr)},
                  {"domain_area", utility.domain_area ? json(*utility.domain_area) : json(nullptr)}};
  json vars = json::array();
  for (const auto& v : variants) {
    json vj = {{"name", v.name}, {"synthesis_targets", v.synthesis_targets}};
    if (v.synthesizer) vj["synthesizer"] = to_string(*v.synthesizer);
    vars.push_back(std::move(vj));
  }
  j["variants"] = vars;
  return j;
}

// ---------------------------------------------------------------- stages

namespace {

template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("stage " + name + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("I/O failure writing " + path.string());
}

std::vector<std::string> released_variables(const PipelineConfig& cfg, const Schema& schema,
                                            const std::vector<std::string>& targets) {
  std::vector<std::string> out = targets;
  const auto geo = schema.geocode_index();
  if (cfg.aggregation && geo) {
    const std::string& g = schema.variable(*geo).name;
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

fs::path partition_path(const PipelineConfig& cfg) { return cfg.output / "clusters.csv"; }

ClusterPartition read_partition(const PipelineConfig& cfg, const Inputs& in) {
  const fs::path p = partition_path(cfg);
  if (!fs::exists(p)) {
    throw InputError("missing " + p.string() + "; run `geosynth cluster` with the same config first");
  }
  ClusterPartition part = load_partition_csv(p);
  if (part.assignments.size() != in.original.rows()) {
    throw InputError(p.string() + " covers " + std::to_string(part.assignments.size()) + " records but the input has " +
                     std::to_string(in.original.rows()) + "; rerun `geosynth cluster`");
  }
  part.k = cfg.k;
  return part;
}

}  // namespace

Inputs load_inputs(const PipelineConfig& cfg) {
  return stage("load", [&] {
    const Schema schema = Schema::load(cfg.schema);
    Inputs in;
    in.original = load_csv(cfg.input, schema);
    if (in.original.rows() == 0) throw InputError(cfg.input.string() + " holds no records");
    in.synthesis_input = cfg.aggregation ? aggregate_geocodes(in.original, *cfg.aggregation) : in.original;
    return in;
  });
}

ClusterPartition cluster_stage(const PipelineConfig& cfg, const Inputs& in) {
  return stage("cluster", [&] {
    if (!in.synthesis_input.schema().geocode_index()) throw InputError("the schema declares no geocode to cluster on");
    return mdav_partition(in.synthesis_input.geocodes(), cfg.k);
  });
}

SyntheticRelease synthesize_part(const Dataset& part, Synthesizer synthesizer, const std::vector<std::string>& targets,
                                 const PipelineConfig& cfg, std::uint64_t seed, json* diagnostics,
                                 dpmpm::ChainTrace* trace) {
  switch (synthesizer) {
    case Synthesizer::cart_categorical:
    case Synthesizer::cart_continuous: {
      cart::CartSynthesisOptions opt;
      opt.cart = cfg.cart;
      opt.geocode = synthesizer == Synthesizer::cart_categorical ? cart::GeocodeTreatment::categorical
                                                                 : cart::GeocodeTreatment::continuous;
      opt.latitude_first = cfg.latitude_first;
      opt.predictors = cfg.predictors;
      return cart::synthesize_cart(part, targets, opt, cfg.m, seed);
    }
    case Synthesizer::dpmpm: {
      dpmpm::DpmpmRun run;
      auto release = dpmpm::synthesize_dpmpm(part, targets, cfg.dpmpm, cfg.m, seed, &run);
      if (diagnostics) {
        json d = diagnostics_json(run.trace.alpha_draws);
        double occ = 0.0;
        for (auto o : run.trace.occupied_classes) occ += static_cast<double>(o);
        d["mean_occupied_classes"] = run.trace.size() ? occ / static_cast<double>(run.trace.size()) : 0.0;
        d["thin"] = run.thin_used;
        d["escalated"] = run.escalated;
        d["snapshots"] = run.snapshot_positions;
        *diagnostics = std::move(d);
      }
      if (trace) *trace = std::move(run.trace);
      return release;
    }
  }
  throw Error("unhandled synthesizer");
}

SynthesisResult synthesize_clusters(const PipelineConfig& cfg, const Inputs& in, const ClusterPartition& part,
                                    const std::vector<std::string>& targets, Synthesizer synthesizer,
                                    std::size_t threads) {
  const ClusterSplit split = stage("split", [&] { return split_dataset(in.synthesis_input, part); });
  const std::size_t C = split.parts.size();
  std::vector<SyntheticRelease> per_cluster(C);
  std::vector<json> diag(C);
  std::vector<dpmpm::ChainTrace> traces(C);
  std::vector<std::exception_ptr> errors(C);
  SynthesisResult result;
  for (std::size_t c = 0; c < C; ++c) result.cluster_seeds.push_back(derive_seed(cfg.seed, {c}));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < C; c = next++) {
      try {
        per_cluster[c] = synthesize_part(split.parts[c], synthesizer, targets, cfg, result.cluster_seeds[c], &diag[c],
                                         &traces[c]);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, C));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (!errors[c]) continue;
    const std::string where = "cluster " + std::to_string(c) + ", stage synthesize: ";
    try {
      std::rethrow_exception(errors[c]);
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    } catch (const std::exception& e) {
      throw Error(where + e.what());
    }
  }

  result.release.synthesized_variables = released_variables(cfg, in.original.schema(), targets);
  for (std::size_t j = 0; j < cfg.m; ++j) {
    ClusterSplit rep;
    rep.provenance = split.provenance;
    for (std::size_t c = 0; c < C; ++c) rep.parts.push_back(per_cluster[c].replicates[j]);
    result.release.replicates.push_back(reassemble(rep, in.original.rows()));
  }
  stage("synthesize", [&] { check_release(in.original, result.release); });
  if (synthesizer == Synthesizer::dpmpm) {
    for (std::size_t c = 0; c < C; ++c) {
      diag[c]["cluster"] = c;
      result.diagnostics.push_back(std::move(diag[c]));
    }
    result.traces = std::move(traces);
  }
  return result;
}

std::vector<risk::RiskReport> risk_stage(const PipelineConfig& cfg, const Inputs& in, const SyntheticRelease& release,
                                         const ClusterPartition& part, std::size_t threads) {
  return stage("evaluate-risk", [&] {
    std::map<std::size_t, std::vector<risk::Target>> targets;
    std::vector<risk::RiskReport> out;
    for (const auto& s : cfg.scenarios) {
      auto it = targets.find(s.targets_per_cluster);
      if (it == targets.end()) {
        Rng rng = make_rng(derive_seed(cfg.seed, {0x746172676574ULL, s.targets_per_cluster}));
        it = targets.emplace(s.targets_per_cluster, risk::sample_targets(part, s.targets_per_cluster, rng)).first;
      }
      out.push_back(risk::evaluate_risk(in.original, release, s, it->second, part.assignments, threads));
    }
    return out;
  });
}

utility::UtilityReport utility_stage(const PipelineConfig& cfg, const Inputs& in, const SyntheticRelease& release) {
  return stage("evaluate-utility", [&] { return utility::evaluate_utility(in.original, release, cfg.utility); });
}

void write_release(const SyntheticRelease& release, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t j = 0; j < release.m(); ++j) {
    save_csv(release.replicates[j], dir / ("synthetic_" + std::to_string(j + 1) + ".csv"));
  }
}

SyntheticRelease read_release(const fs::path& dir, const Schema& schema, std::vector<std::string> synthesized) {
  SyntheticRelease r;
  r.synthesized_variables = std::move(synthesized);
  for (std::size_t j = 1;; ++j) {
    const fs::path p = dir / ("synthetic_" + std::to_string(j) + ".csv");
    if (!fs::exists(p)) break;
    r.replicates.push_back(load_csv(p, schema));
  }
  if (r.replicates.empty()) {
    throw InputError("no synthetic_1.csv in " + dir.string() + "; run `geosynth synthesize` first");
  }
  return r;
}

// ---------------------------------------------------------------- subcommands

namespace {

void write_synthesis_artifacts(const SynthesisResult& res, const PipelineConfig& cfg, Synthesizer synthesizer,
                               const std::vector<std::string>& targets, const fs::path& dir,
                               std::vector<std::string>* artifacts) {
  write_release(res.release, dir);
  for (std::size_t j = 1; j <= res.release.m(); ++j) {
    if (artifacts) artifacts->push_back("synthetic_" + std::to_string(j) + ".csv");
  }
  json meta = {{"synthesizer", to_string(synthesizer)},
               {"synthesis_targets", targets},
               {"synthesized_variables", res.release.synthesized_variables},
               {"m", res.release.m()},
               {"master_seed", cfg.seed},
               {"cluster_seeds", res.cluster_seeds}};
  write_json(meta, dir / "release.json");
  if (artifacts) artifacts->push_back("release.json");
  if (synthesizer == Synthesizer::dpmpm) {
    write_json(res.diagnostics, dir / "dpmpm_diagnostics.json");
    fs::create_directories(dir / "traces");
    for (std::size_t c = 0; c < res.traces.size(); ++c) {
      res.traces[c].write_csv(dir / "traces" / ("cluster_" + std::to_string(c) + ".csv"));
    }
    if (artifacts) {
      artifacts->push_back("dpmpm_diagnostics.json");
      artifacts->push_back("traces/");
    }
  }
}

void write_risk(const std::vector<risk::RiskReport>& reports, const fs::path& dir) {
  json j = json::array();
  for (const auto& r : reports) j.push_back(risk::to_json(r));
  write_json({{"reports", j}}, dir / "risk.json");
  risk::write_risk_table_csv(reports, dir / "risk_table.csv");
}

void write_utility(const utility::UtilityReport& u, const fs::path& dir) {
  write_json(utility::to_json(u), dir / "utility.json");
  utility::write_utility_csvs(u, dir / "utility");
}

SyntheticRelease release_from_disk(const PipelineConfig& cfg, const Inputs& in,
                                   const std::optional<fs::path>& release_dir) {
  const fs::path dir = release_dir ? *release_dir : cfg.output;
  return read_release(dir, in.original.schema(), released_variables(cfg, in.original.schema(), cfg.synthesis_targets));
}

}  // namespace

void run_cluster(const PipelineConfig& cfg) {
  const Inputs in = load_inputs(cfg);
  const ClusterPartition part = cluster_stage(cfg, in);
  fs::create_directories(cfg.output);
  save_partition_csv(part, partition_path(cfg));
}

void run_synthesize(const PipelineConfig& cfg, std::size_t threads) {
  const Inputs in = load_inputs(cfg);
  const ClusterPartition part = read_partition(cfg, in);
  const auto res = synthesize_clusters(cfg, in, part, cfg.synthesis_targets, cfg.synthesizer, threads);
  write_synthesis_artifacts(res, cfg, cfg.synthesizer, cfg.synthesis_targets, cfg.output, nullptr);
}

void run_evaluate_risk(const PipelineConfig& cfg, std::size_t threads, const std::optional<fs::path>& release_dir) {
  const Inputs in = load_inputs(cfg);
  const ClusterPartition part = read_partition(cfg, in);
  const SyntheticRelease release = release_from_disk(cfg, in, release_dir);
  fs::create_directories(cfg.output);
  write_risk(risk_stage(cfg, in, release, part, threads), cfg.output);
}

void run_evaluate_utility(const PipelineConfig& cfg, const std::optional<fs::path>& release_dir) {
  const Inputs in = load_inputs(cfg);
  const SyntheticRelease release = release_from_disk(cfg, in, release_dir);
  fs::create_directories(cfg.output);
  write_utility(utility_stage(cfg, in, release), cfg.output);
}

void run_pipeline(const PipelineConfig& cfg, std::size_t threads) {
  const Inputs in = load_inputs(cfg);
  const ClusterPartition part = cluster_stage(cfg, in);
  fs::create_directories(cfg.output);
  std::vector<std::string> artifacts;
  save_partition_csv(part, partition_path(cfg));
  artifacts.push_back("clusters.csv");

  const auto res = synthesize_clusters(cfg, in, part, cfg.synthesis_targets, cfg.synthesizer, threads);
  write_synthesis_artifacts(res, cfg, cfg.synthesizer, cfg.synthesis_targets, cfg.output, &artifacts);

  const auto risk_reports = risk_stage(cfg, in, res.release, part, threads);
  write_risk(risk_reports, cfg.output);
  artifacts.push_back("risk.json");
  artifacts.push_back("risk_table.csv");
  const auto util = utility_stage(cfg, in, res.release);
  write_utility(util, cfg.output);
  artifacts.push_back("utility.json");
  artifacts.push_back("utility/");

  if (!cfg.variants.empty()) {
    std::ostringstream table;
    std::vector<std::string> header{"variant", "synthesizer", "synthesis_targets"};
    for (std::size_t level : cfg.utility.levels) header.push_back("ul_level" + std::to_string(level));
    for (const auto& s : cfg.scenarios) {
      header.push_back(s.label + "_expected_match_risk");
      header.push_back(s.label + "_true_match_rate");
      header.push_back(s.label + "_false_match_rate");
    }
    write_csv_row(table, header);
    auto num = [](double v) {
      std::ostringstream s;
      s.precision(10);
      s << v;
      return s.str();
    };
    for (const auto& v : cfg.variants) {
      const Synthesizer syn = v.synthesizer.value_or(cfg.synthesizer);
      const fs::path dir = cfg.output / "variants" / v.name;
      const auto vres = synthesize_clusters(cfg, in, part, v.synthesis_targets, syn, threads);
      write_synthesis_artifacts(vres, cfg, syn, v.synthesis_targets, dir, nullptr);
      const auto vrisk = risk_stage(cfg, in, vres.release, part, threads);
      write_risk(vrisk, dir);
      const auto vutil = utility_stage(cfg, in, vres.release);
      write_utility(vutil, dir);
      std::string joined;
      for (const auto& t : v.synthesis_targets) joined += (joined.empty() ? "" : "+") + t;
      std::vector<std::string> row{v.name, to_string(syn), joined};
      for (std::size_t level : cfg.utility.levels) row.push_back(num(vutil.ul_by_level.at(level).ul));
      for (const auto& r : vrisk) {
        row.push_back(num(r.expected_match_risk));
        row.push_back(num(r.true_match_rate));
        row.push_back(r.false_match_rate ? num(*r.false_match_rate) : "NA");
      }
      write_csv_row(table, row);
    }
    std::ofstream out(cfg.output / "variants.csv", std::ios::binary | std::ios::trunc);
    out << table.str();
    if (!out) throw Error("I/O failure writing variants.csv");
    artifacts.push_back("variants.csv");
    artifacts.push_back("variants/");
  }

  json manifest;
  manifest["tool"] = "geosynth";
  manifest["config"] = cfg.to_json();
  manifest["records"] = in.original.rows();
  manifest["clusters"] = part.clusters;
  manifest["cluster_sizes"] = part.sizes();
  manifest["seeds"] = {{"master", cfg.seed}, {"clusters", res.cluster_seeds}};
  manifest["synthesized_variables"] = res.release.synthesized_variables;
  manifest["artifacts"] = artifacts;
  write_json(manifest, cfg.output / "manifest.json");
}

}  // namespace geosynth::pipeline
