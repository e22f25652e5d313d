#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "geosynth/error.hpp"
#include "geosynth/utility.hpp"
#include "toy.hpp"

using namespace geosynth;
using namespace geosynth::utility;

namespace {

std::vector<GeoPoint> pattern(std::uint64_t seed, std::size_t n, std::vector<std::int32_t>& types) {
  Rng rng = make_rng(seed);
  std::vector<GeoPoint> pts(n);
  types.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    // integer coordinates so pairs land exactly on radii
    pts[i] = {static_cast<double>(rng() % 40), static_cast<double>(rng() % 40)};
    types[i] = static_cast<std::int32_t>(rng() % 3);
  }
  return pts;
}

}  // namespace

TEST(KFunction, HandExample) {
  const std::vector<GeoPoint> pts{{0, 0}, {3, 0}, {1, 0}};
  const std::vector<std::int32_t> types{1, 1, 2};
  const double k = multitype_k(pts, types, 1, 1.5, 100.0);
  EXPECT_NEAR(k, 50.0 / 3.0, 1e-12);
  EXPECT_NEAR(l_function(k, 1.5), std::sqrt(50.0 / (3.0 * std::numbers::pi)) - 1.5, 1e-12);
  EXPECT_NEAR(l_function(k, 1.5), 0.803, 1e-3);
}

TEST(KFunction, IsolatedPointIsZero) {
  const std::vector<GeoPoint> pts{{0, 0}, {10, 0}};
  const std::vector<std::int32_t> types{1, 2};
  EXPECT_EQ(multitype_k(pts, types, 1, 3.0, 50.0), 0.0);
}

TEST(LFunction, Baselines) {
  EXPECT_NEAR(l_function(std::numbers::pi * 4.0, 2.0), 0.0, 1e-15);
  EXPECT_EQ(l_function(0.0, 2.0), -2.0);
}

TEST(KFunction, GridMatchesBruteForceAndIsMonotone) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::vector<std::int32_t> types;
    const auto pts = pattern(seed, 20 + seed * 6, types);
    std::vector<double> radii;
    for (int r = 0; r <= 30; ++r) radii.push_back(r * 0.5);
    radii.push_back(std::sqrt(2.0));
    std::sort(radii.begin(), radii.end());
    const auto a = k_curve(pts, types, 1, radii, 1600.0);
    const auto b = k_curve_bruteforce(pts, types, 1, radii, 1600.0);
    EXPECT_EQ(a, b);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_GE(a[i], a[i - 1]);
    for (std::size_t i = 0; i < radii.size(); ++i) EXPECT_EQ(a[i], multitype_k(pts, types, 1, radii[i], 1600.0));
  }
}

TEST(KFunction, ZeroRadiusWithoutCoincidentPoints) {
  const std::vector<GeoPoint> pts{{0, 0}, {1, 0}, {0, 2}};
  const std::vector<std::int32_t> types{1, 0, 1};
  EXPECT_EQ(multitype_k(pts, types, 1, 0.0, 10.0), 0.0);
}

TEST(KFunction, Errors) {
  const std::vector<GeoPoint> pts{{0, 0}};
  const std::vector<std::int32_t> types{0};
  EXPECT_THROW(multitype_k(pts, types, 1, 1.0, 1.0), InputError);
  EXPECT_THROW(multitype_k(pts, types, 0, -1.0, 1.0), InputError);
  EXPECT_THROW(multitype_k(pts, types, 0, 1.0, 0.0), InputError);
}

TEST(Radii, DefaultsAndArea) {
  const std::vector<GeoPoint> pts{{0, 0}, {100, 40}};
  const auto r = default_radii(pts, 5);
  EXPECT_EQ(r, (std::vector<double>{0, 2.5, 5, 7.5, 10}));
  EXPECT_EQ(bounding_box_area(pts), 4000.0);
}

TEST(LCurves, CopiesGiveIdenticalCurves) {
  const auto ds = toy::random(3, 80, {2}, 30);
  const SyntheticRelease rel{{ds, ds}, {"geo"}};
  const RecordPredicate is_a1 = [](const Dataset& d, std::size_t i) { return d.code(i, 0) == 1; };
  const auto radii = default_radii(ds.geocodes(), 10);
  const auto c = l_curves(rel, ds, is_a1, radii, 900.0);
  EXPECT_EQ(c.original, c.synthetic_mean);
  EXPECT_EQ(c.per_replicate.size(), 2u);
}

TEST(LCurves, MeanOfReplicates) {
  const auto ds = toy::random(4, 60, {2}, 30);
  const auto alt = toy::random(5, 60, {2}, 30);
  const auto moved = ds.with_geocodes({alt.geocodes().begin(), alt.geocodes().end()});
  const SyntheticRelease rel{{ds, moved}, {"geo"}};
  const RecordPredicate is_a1 = [](const Dataset& d, std::size_t i) { return d.code(i, 0) == 1; };
  const std::vector<double> radii{0, 1, 2, 4, 8};
  const auto c = l_curves(rel, ds, is_a1, radii, 900.0);
  std::vector<std::int32_t> types(60);
  for (std::size_t i = 0; i < 60; ++i) types[i] = is_a1(ds, i) ? 1 : 0;
  const auto k0 = k_curve_bruteforce(ds.geocodes(), types, 1, radii, 900.0);
  const auto k1 = k_curve_bruteforce(moved.geocodes(), types, 1, radii, 900.0);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double want = 0.5 * (l_function(k0[i], radii[i]) + l_function(k1[i], radii[i]));
    EXPECT_NEAR(c.synthetic_mean[i], want, 1e-12);
  }
}

TEST(Tables, LevelOneBinary) {
  const Schema s = toy::schema({2});
  const auto ds = toy::make(s, {{1, 1, 1, 2}}, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const std::vector<std::int32_t> regions(4, 7);
  const std::vector<std::size_t> vars{0};
  const auto t = interaction_tables(ds, regions, 1, vars);
  ASSERT_EQ(t.regions, std::vector<std::int32_t>{7});
  EXPECT_EQ(t.freq[0][0], (std::vector<double>{0.75, 0.25}));
}

TEST(Tables, LevelThreeMatchesCrossTab) {
  const auto ds = toy::random(6, 500, {2, 3, 2, 4});
  std::vector<std::int32_t> regions(500);
  for (std::size_t i = 0; i < 500; ++i) regions[i] = static_cast<std::int32_t>(i % 3);
  const std::vector<std::size_t> vars{0, 1, 2, 3};
  const auto t = interaction_tables(ds, regions, 3, vars);
  ASSERT_EQ(t.subsets.size(), 4u);
  for (std::size_t r = 0; r < t.regions.size(); ++r) {
    for (std::size_t s = 0; s < t.subsets.size(); ++s) {
      const auto& sub = t.subsets[s];
      std::map<std::vector<int>, double> oracle;
      double n = 0;
      for (std::size_t i = 0; i < 500; ++i) {
        if (regions[i] != t.regions[r]) continue;
        std::vector<int> key;
        for (auto k : sub) key.push_back(ds.code(i, vars[k]));
        oracle[key] += 1;
        n += 1;
      }
      double total = 0;
      for (double f : t.freq[r][s]) total += f;
      EXPECT_NEAR(total, 1.0, 1e-12);
      for (const auto& [key, cnt] : oracle) {
        std::size_t cell = 0;
        for (std::size_t j = 0; j < key.size(); ++j) {
          cell = cell * static_cast<std::size_t>(ds.schema().variable(vars[sub[j]]).cardinality()) + (key[j] - 1);
        }
        EXPECT_DOUBLE_EQ(t.freq[r][s][cell], cnt / n);
      }
    }
  }
}

TEST(UL, IdentityIsZero) {
  const auto ds = toy::random(7, 300, {2, 3, 4});
  std::vector<std::int32_t> regions(300);
  for (std::size_t i = 0; i < 300; ++i) regions[i] = static_cast<std::int32_t>(i % 5);
  const std::vector<std::size_t> vars{0, 1, 2};
  for (std::size_t level = 1; level <= 3; ++level) {
    const auto t = interaction_tables(ds, regions, level, vars);
    const std::vector<InteractionTables> syn{t, t};
    EXPECT_EQ(ul_measure(t, syn).ul, 0.0);
    EXPECT_EQ(ul_measure(t, syn, true).ul, 0.0);
  }
}

TEST(UL, BinaryHandCase) {
  const Schema s = toy::schema({2});
  const auto orig = toy::make(s, {{1, 1, 1, 2}}, std::vector<GeoPoint>(4));
  const auto syn = toy::make(s, {{1, 2, 1, 2}}, std::vector<GeoPoint>(4));
  const std::vector<std::int32_t> regions(4, 1);
  const std::vector<std::size_t> vars{0};
  const auto ot = interaction_tables(orig, regions, 1, vars);
  const std::vector<InteractionTables> st{interaction_tables(syn, regions, 1, vars)};
  const auto ul = ul_measure(ot, st);
  EXPECT_EQ(ul.ul, 0.25);
  EXPECT_EQ(ul.differences, (std::vector<double>{-0.25, 0.25}));
}

TEST(UL, EmptySyntheticRegionCountsAsZeros) {
  const Schema s = toy::schema({2});
  const auto ds = toy::make(s, {{1, 2}}, std::vector<GeoPoint>(2));
  const std::vector<std::int32_t> orig_regions{1, 2}, syn_regions{1, 1};
  const std::vector<std::size_t> vars{0};
  const std::vector<std::int32_t> list{1, 2};
  const auto ot = interaction_tables(ds, orig_regions, 1, vars, list);
  const std::vector<InteractionTables> st{interaction_tables(ds, syn_regions, 1, vars, list)};
  // region 1: (1,0) vs (.5,.5); region 2: (0,1) vs (0,0)
  EXPECT_DOUBLE_EQ(ul_measure(ot, st).ul, 0.5);
}

TEST(Regions, NearestOriginal) {
  const Schema s = toy::schema({2});
  const auto orig = toy::make(s, {{1, 1, 1, 1, 1}}, {{0, 0}, {10, 0}, {0, 10}, {10, 10}, {5, 5}});
  const std::vector<std::int32_t> zip{1, 2, 3, 4, 5};
  const auto syn = toy::make(s, {{1, 1, 1, 1}}, {{1, 1}, {9, 2}, {5, 6}, {10, 10}});
  EXPECT_EQ(assign_regions(syn, orig, zip), (std::vector<std::int32_t>{1, 2, 5, 4}));
}

TEST(Shares, Simple) {
  const Schema s = toy::schema({2});
  std::vector<std::int32_t> a(10, 1);
  a[0] = a[4] = a[7] = 2;
  const auto ds = toy::make(s, {a}, std::vector<GeoPoint>(10));
  const std::vector<std::int32_t> regions(10, 3);
  const auto sh = region_shares(ds, regions, [](const Dataset& d, std::size_t i) { return d.code(i, 0) == 2; });
  EXPECT_DOUBLE_EQ(sh.at(3), 0.3);
  const auto all = region_shares(ds, regions, [](const Dataset&, std::size_t) { return true; });
  EXPECT_EQ(all.at(3), 1.0);
}

TEST(Evaluate, IdenticalReleaseHasZeroUl) {
  auto ds = toy::random(9, 200, {4, 2, 3}, 50, 40);
  // region follows location: quadrant of the lattice
  std::vector<std::int32_t> quad;
  for (const auto& p : ds.geocodes()) quad.push_back(1 + (p.x >= 25) + 2 * (p.y >= 25));
  ds = ds.with_column(0, quad);
  UtilitySettings u;
  u.region_variable = "a";
  u.levels = {1, 2};
  u.share_outcomes = {{"b2", "b", {"b2"}}};
  u.l_outcomes = {{"b2", "b", {"b2"}}};
  u.r_count = 8;
  const auto rep = evaluate_utility(ds, SyntheticRelease{{ds, ds, ds}, {"geo"}}, u);
  for (const auto& [level, r] : rep.ul_by_level) EXPECT_EQ(r.ul, 0.0) << level;
  EXPECT_EQ(rep.shares[0].original, rep.shares[0].synthetic);
  EXPECT_EQ(rep.l_curves[0].second.original, rep.l_curves[0].second.synthetic_mean);
}
