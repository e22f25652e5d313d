// Writes a simulated population, its schema and a starter pipeline config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geosynth/data_model.hpp"
#include "geosynth/error.hpp"
#include "geosynth/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Simulate a geocoded employee population"};
  geosynth::PopulationConfig pop;
  std::string dir = "data";
  std::string prefix = "toy";
  std::size_t k = 300;
  app.add_option("--records", pop.records, "number of records");
  app.add_option("--seed", pop.seed, "simulation seed");
  app.add_option("--extent", pop.extent, "side of the square study area, meters");
  app.add_option("--towns", pop.towns, "settlement centres");
  app.add_option("--k", k, "MDAV cluster size written into the config");
  app.add_option("--dir", dir, "output directory");
  app.add_option("--prefix", prefix, "file name prefix");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(dir);
    const auto ds = geosynth::simulate_population(pop);
    const std::string data_file = prefix + "_population.csv";
    const std::string schema_file = prefix + "_schema.json";
    geosynth::save_csv(ds, fs::path(dir) / data_file);
    std::ofstream(fs::path(dir) / schema_file) << ds.schema().to_json().dump(2) << '\n';

    json cfg = {
        {"input", data_file},
        {"schema", schema_file},
        {"output", prefix + "_out"},
        {"synthesizer", "cart_categorical"},
        {"synthesis_targets", {"geo"}},
        {"cart", {{"cp", 1e-8}, {"minsplit", 20}, {"minbucket", 7}}},
        {"dpmpm", {{"F", 30}, {"iterations", 2000}, {"burn_in", 1000}, {"thin", 10}}},
        {"mdav", {{"k", k}}},
        {"m", 5},
        {"seed", 20240501},
        {"risk",
         {{"targets_per_cluster", 100},
          {"scenarios",
           {{{"label", "exact"}, {"grid_size", 0}},
            {{"label", "grid_1000"}, {"grid_size", 1000}},
            {{"label", "no_geocode"}, {"grid_size", nullptr}}}}}},
        {"utility",
         {{"region_variable", "zip"},
          {"table_variables", {"sex", "age", "foreign", "industry"}},
          {"levels", {1, 2, 3}},
          {"shares", {{{"name", "foreign"}, {"variable", "foreign"}, {"levels", {"yes"}}}}},
          {"l_functions", {{{"name", "foreign"}, {"variable", "foreign"}, {"levels", {"yes"}}}}},
          {"r_count", 25}}},
        {"variants",
         {{{"name", "geo"}, {"synthesis_targets", {"geo"}}},
          {{"name", "geo_age"}, {"synthesis_targets", {"geo", "age"}}},
          {{"name", "geo_age_occupation_foreign"}, {"synthesis_targets", {"geo", "age", "occupation", "foreign"}}}}},
    };
    std::ofstream(fs::path(dir) / (prefix + "_pipeline.json")) << cfg.dump(2) << '\n';
  } catch (const geosynth::InputError& e) {
    std::cerr << "make_toy_population: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "make_toy_population: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
