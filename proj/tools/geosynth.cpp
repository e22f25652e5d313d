// geosynth command line: cluster, synthesize, evaluate-risk, evaluate-utility, pipeline.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geosynth/error.hpp"
#include "geosynth/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geosynth;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
  std::string release;
  std::vector<std::string> sets;
};

// --set a.b.c=value ; value parsed as JSON, else taken as a string
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw InputError("--set: empty key in '" + path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw InputError("--set: '" + path + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

pipeline::PipelineConfig load_config(const Options& o) {
  std::ifstream in(o.config);
  if (!in) throw InputError("cannot open config file '" + o.config + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InputError("config file '" + o.config + "' is not valid JSON");
  for (const auto& s : o.sets) apply_override(j, s);
  if (o.seed) j["seed"] = *o.seed;
  auto cfg = pipeline::PipelineConfig::from_json(j, fs::path(o.config).parent_path());
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

std::size_t worker_count(const Options& o) {
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partially synthetic geocoded microdata: clustering, synthesis, risk and utility evaluation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON pipeline config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory (overrides the config)");
    sub->add_option("--set", o.sets, "override any config value, e.g. --set dpmpm.F=20 --set mdav.k=500");
  };
  auto threaded = [&o](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };
  auto with_release = [&o](CLI::App* sub) {
    sub->add_option("--release", o.release, "directory holding synthetic_<j>.csv (default: output directory)");
  };

  auto* cluster = app.add_subcommand("cluster", "MDAV partition of the geocodes -> clusters.csv");
  common(cluster);
  auto* synth = app.add_subcommand("synthesize", "per-cluster synthesis -> synthetic_<j>.csv");
  common(synth);
  threaded(synth);
  auto* risk = app.add_subcommand("evaluate-risk", "intruder matching -> risk.json, risk_table.csv");
  common(risk);
  threaded(risk);
  with_release(risk);
  auto* util = app.add_subcommand("evaluate-utility", "UL tables, shares, L-functions -> utility.json");
  common(util);
  with_release(util);
  auto* all = app.add_subcommand("pipeline", "every stage, variants and manifest.json");
  common(all);
  threaded(all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto cfg = load_config(o);
    std::optional<fs::path> release_dir;
    if (!o.release.empty()) release_dir = o.release;
    if (cluster->parsed()) {
      pipeline::run_cluster(cfg);
    } else if (synth->parsed()) {
      pipeline::run_synthesize(cfg, worker_count(o));
    } else if (risk->parsed()) {
      pipeline::run_evaluate_risk(cfg, worker_count(o), release_dir);
    } else if (util->parsed()) {
      pipeline::run_evaluate_utility(cfg, release_dir);
    } else if (all->parsed()) {
      pipeline::run_pipeline(cfg, worker_count(o));
    }
  } catch (const InputError& e) {
    std::cerr << "geosynth: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "geosynth: internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
