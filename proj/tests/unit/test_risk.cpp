#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "../common/oracles.hpp"
#include "geosynth/error.hpp"
#include "geosynth/mdav.hpp"
#include "geosynth/risk.hpp"
#include "toy.hpp"

using namespace geosynth;
using namespace geosynth::risk;

namespace {

IntruderScenario scenario(std::vector<std::string> qi, std::optional<double> grid) {
  IntruderScenario s;
  s.label = "t";
  s.quasi_identifiers = std::move(qi);
  s.grid_size = grid;
  return s;
}

std::vector<Target> all_targets(std::size_t n) {
  std::vector<Target> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, 0});
  return t;
}

}  // namespace

TEST(Coarsen, FloorArithmetic) {
  EXPECT_EQ(coarsen_geocode({12345, 678}, 1000), (GridCell{12, 0}));
  EXPECT_EQ(coarsen_geocode({-1, 5}, 10), (GridCell{-1, 0}));
  EXPECT_THROW(coarsen_geocode({1, 1}, 0), InputError);
}

TEST(Coarsen, UnitGridIsBijectionOnIntegerPoints) {
  const auto ds = toy::random(2, 300, {2}, 50);
  std::set<std::pair<double, double>> pts;
  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  for (const auto& p : ds.geocodes()) {
    pts.insert({p.x, p.y});
    const auto c = coarsen_geocode(p, 1.0);
    cells.insert({c.x, c.y});
    EXPECT_EQ(static_cast<double>(c.x), p.x);
  }
  EXPECT_EQ(pts.size(), cells.size());
}

TEST(Targets, WholeClustersAndSeed) {
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 60; ++i) pts.push_back({static_cast<double>(i % 13), static_cast<double>(i / 13)});
  const auto part = mdav_partition(pts, 20);
  Rng a = make_rng(4), b = make_rng(4);
  const auto t = sample_targets(part, 20, a);
  EXPECT_EQ(t.size(), 60u);
  const auto t2 = sample_targets(part, 7, b);
  EXPECT_EQ(t2.size(), 21u);
  Rng c = make_rng(4);
  const auto t3 = sample_targets(part, 7, c);
  for (std::size_t i = 0; i < t2.size(); ++i) {
    EXPECT_EQ(t2[i].record, t3[i].record);
    EXPECT_EQ(part.assignments[t2[i].record], t2[i].cluster);
  }
}

TEST(MatchProbabilities, HandEstimator) {
  // replicate 1 candidates {r0, r1}; replicate 2 candidates {r0}
  const Schema s = toy::schema({2});
  const auto orig = toy::make(s, {{1, 1, 2}}, {{0, 0}, {0, 0}, {5, 5}});
  const auto rep2 = toy::make(s, {{1, 2, 2}}, {{0, 0}, {0, 0}, {5, 5}});
  const SyntheticRelease rel{{orig, rep2}, {"a"}};
  const auto sc = scenario({"a"}, 0.0);
  const auto p = exact_match_probabilities(orig, {0, 0}, rel, sc);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.at(0), Rational(3, 4));
  EXPECT_EQ(p.at(1), Rational(1, 4));
  const auto pd = match_probabilities(orig, {0, 0}, rel, sc);
  EXPECT_DOUBLE_EQ(pd.at(0), 0.75);
}

TEST(MatchProbabilities, NoMatchIsEmpty) {
  const Schema s = toy::schema({2});
  const auto orig = toy::make(s, {{1, 2}}, {{0, 0}, {1, 1}});
  const auto moved = toy::make(s, {{1, 2}}, {{9, 9}, {8, 8}});
  const SyntheticRelease rel{{moved}, {"geo"}};
  EXPECT_TRUE(match_probabilities(orig, {0, 0}, rel, scenario({"a"}, 0.0)).empty());
  const auto o = evaluate_target(MatchIndex(rel, scenario({"a"}, 0.0)).match(orig, {0, 0}), {0, 0});
  EXPECT_EQ(o.c, 0u);
  EXPECT_FALSE(o.I);
}

TEST(RiskSummaries, TwoTargetHandExample) {
  const Schema s = toy::schema({2});
  const auto orig = toy::make(s, {{1, 1, 2}}, {{0, 0}, {1, 1}, {2, 2}});
  const SyntheticRelease rel{{orig}, {"geo"}};
  const std::vector<Target> targets{{0, 0}, {2, 0}};
  const auto rep = evaluate_risk(orig, rel, scenario({"a"}, std::nullopt), targets);
  EXPECT_EQ(rep.N, 2u);
  EXPECT_EQ(rep.s, 1u);
  EXPECT_EQ(rep.expected_match_risk, 1.5);
  EXPECT_EQ(rep.true_match_rate, 50.0);
  ASSERT_TRUE(rep.false_match_rate);
  EXPECT_EQ(*rep.false_match_rate, 0.0);
}

TEST(RiskSummaries, FromOutcomes) {
  std::vector<TargetOutcome> o(4);
  o[0].c = 1;
  o[0].I = true;
  o[1].c = 1;
  o[1].I = false;
  o[2].c = 4;
  o[2].I = true;
  o[3].c = 0;
  const auto r = risk_summaries(o);
  EXPECT_EQ(r.N, 4u);
  EXPECT_EQ(r.s, 2u);
  EXPECT_DOUBLE_EQ(r.expected_match_risk, 1.25);
  EXPECT_DOUBLE_EQ(r.true_match_rate, 25.0);
  EXPECT_DOUBLE_EQ(*r.false_match_rate, 50.0);
  EXPECT_FALSE(risk_summaries(std::vector<TargetOutcome>(2)).false_match_rate);
}

TEST(EvaluateRisk, CopiesWithUniqueKeys) {
  const auto ds = toy::random(5, 50, {2}, 1000);
  std::set<std::pair<double, double>> seen;
  for (const auto& p : ds.geocodes()) ASSERT_TRUE(seen.insert({p.x, p.y}).second) << "need unique geocodes";
  const SyntheticRelease rel{std::vector<Dataset>(5, ds), {"geo"}};
  const auto rep = evaluate_risk(ds, rel, scenario({"a"}, 0.0), all_targets(50), {}, 3);
  EXPECT_EQ(rep.expected_match_risk, 50.0);
  EXPECT_EQ(rep.true_match_rate, 100.0);
  EXPECT_EQ(*rep.false_match_rate, 0.0);
}

TEST(EvaluateRisk, ThreadCountIrrelevant) {
  const auto ds = toy::random(6, 300, {2, 3}, 30, 40);
  const auto rep2 = toy::random(7, 300, {2, 3}, 30, 40);
  const SyntheticRelease rel{{ds.with_geocodes({rep2.geocodes().begin(), rep2.geocodes().end()}), ds}, {"geo"}};
  const auto a = evaluate_risk(ds, rel, scenario({"a", "b"}, 5.0), all_targets(300), {}, 1);
  const auto b = evaluate_risk(ds, rel, scenario({"a", "b"}, 5.0), all_targets(300), {}, 7);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(EvaluateRisk, MatchesBruteForceExactly) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng = make_rng(seed);
    const std::size_t n = 10 + rng() % 41;
    const std::size_t m = 1 + rng() % 3;
    const auto orig = toy::random(seed, n, {2, 3}, 6, 8);
    SyntheticRelease rel;
    rel.synthesized_variables = {"geo", "b"};
    for (std::size_t l = 0; l < m; ++l) {
      const auto alt = toy::random(seed * 100 + l, n, {2, 3}, 6, 8);
      rel.replicates.push_back(orig.with_geocodes({alt.geocodes().begin(), alt.geocodes().end()})
                                   .with_column(1, {alt.column(1).begin(), alt.column(1).end()}));
    }
    std::vector<std::uint32_t> clusters(n);
    for (std::size_t i = 0; i < n; ++i) clusters[i] = static_cast<std::uint32_t>(i % 2);
    for (std::optional<double> g : {std::optional<double>(0.0), std::optional<double>(3.0), std::optional<double>()}) {
      for (bool block : {false, true}) {
        auto sc = scenario({"a", "b"}, g);
        sc.block_on_cluster = block;
        for (std::size_t t = 0; t < n; ++t) {
          const auto got = exact_match_probabilities(orig, {t, clusters[t]}, rel, sc, clusters);
          const auto want = oracle::match_probabilities(orig, t, rel, sc, clusters);
          ASSERT_EQ(got, want) << "seed " << seed << " target " << t;
        }
      }
    }
  }
}

TEST(GridSweep, RowsMatchSingleCalls) {
  const auto ds = toy::random(8, 100, {2, 2}, 40, 30);
  const auto alt = toy::random(9, 100, {2, 2}, 40, 30);
  const SyntheticRelease rel{{ds.with_geocodes({alt.geocodes().begin(), alt.geocodes().end()})}, {"geo"}};
  const std::vector<IntruderScenario> sweep{scenario({"a"}, 0.0), scenario({"a"}, 10.0), scenario({"a"}, 10.0),
                                            scenario({"a", "b"}, std::nullopt)};
  const auto rows = risk_grid_sweep(ds, rel, sweep, all_targets(100));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(to_json(rows[i]).dump(), to_json(evaluate_risk(ds, rel, sweep[i], all_targets(100))).dump());
  }
  EXPECT_EQ(to_json(rows[1], false).dump(), to_json(rows[2], false).dump());
  EXPECT_EQ(rows[0].grid, "exact");
  EXPECT_EQ(rows[3].grid, "none");
}

TEST(Scenario, Validation) {
  const Schema s = toy::schema({2});
  EXPECT_THROW(scenario({"zz"}, 0.0).validate(s), InputError);
  EXPECT_THROW(scenario({"a"}, -1.0).validate(s), InputError);
  EXPECT_NO_THROW(scenario({"a"}, std::nullopt).validate(s));
}
