#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "../common/oracles.hpp"
#include "geosynth/cart.hpp"
#include "geosynth/error.hpp"
#include "toy.hpp"

using namespace geosynth;
using namespace geosynth::cart;

namespace {

CategoricalColumn cat(std::vector<std::int32_t> codes, std::int32_t levels) { return {std::move(codes), levels}; }

void expect_minbucket(const CartTree& t, std::size_t minbucket) {
  for (const auto& l : t.leaves()) {
    if (t.leaves().size() > 1) EXPECT_GE(l.size(), minbucket);
  }
}

Frame random_frame(std::uint64_t seed, std::size_t n, bool continuous_target) {
  Rng rng = make_rng(seed);
  Frame f;
  std::vector<std::int32_t> y(n), a(n), b(n);
  std::vector<double> x(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = 1 + static_cast<std::int32_t>(rng() % 4);
    b[i] = 1 + static_cast<std::int32_t>(rng() % 6);
    x[i] = std::floor(uniform01(rng) * 12.0);
    y[i] = 1 + static_cast<std::int32_t>((a[i] + (rng() % 3 == 0 ? 1 : 0) + (x[i] > 6 ? 1 : 0)) % 3);
    z[i] = x[i] * 0.5 + a[i] + uniform01(rng);
  }
  if (continuous_target) {
    f.add("y", ContinuousColumn{z});
  } else {
    f.add("y", cat(y, 3));
  }
  f.add("a", cat(a, 4));
  f.add("b", cat(b, 6));
  f.add("x", ContinuousColumn{x});
  return f;
}

}  // namespace

TEST(Impurity, Gini) {
  EXPECT_DOUBLE_EQ(gini_impurity(std::vector<std::int64_t>{10, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gini_impurity(std::vector<std::int64_t>{1, 1}), 0.5);
  EXPECT_NEAR(gini_impurity(std::vector<std::int64_t>{2, 3, 5}), 0.62, 1e-15);
  EXPECT_THROW(gini_impurity(std::vector<std::int64_t>{0, 0}), InputError);
}

TEST(Impurity, Variance) {
  EXPECT_DOUBLE_EQ(variance_impurity(std::vector<double>{4, 4, 4}), 0.0);
  EXPECT_NEAR(variance_impurity(std::vector<double>{1, 2, 3}), 2.0 / 3.0, 1e-15);
  Rng rng = make_rng(5);
  std::vector<double> v(10);
  for (auto& x : v) x = 1e3 + uniform01(rng);
  double mean = 0;
  for (auto x : v) mean += x;
  mean /= 10;
  double ss = 0;
  for (auto x : v) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(variance_impurity(v), ss / 10, 1e-12);
  EXPECT_THROW(variance_impurity(std::vector<double>{}), InputError);
}

TEST(FitTree, PerfectBinarySeparator) {
  Frame f;
  std::vector<std::int32_t> y, p;
  for (int i = 0; i < 20; ++i) {
    p.push_back(1 + i % 2);
    y.push_back(1 + i % 2);
  }
  f.add("y", cat(y, 2));
  f.add("p", cat(p, 2));
  const std::vector<std::size_t> preds{1};
  const auto t = fit_tree(f, 0, preds, {0.0, 2, 1});
  ASSERT_EQ(t.leaf_count(), 2u);
  EXPECT_EQ(t.nodes().size(), 3u);
  for (const auto& l : t.leaves()) {
    std::set<std::int32_t> s(l.codes.begin(), l.codes.end());
    EXPECT_EQ(s.size(), 1u);
  }
}

TEST(FitTree, LargeCpGivesSingleLeaf) {
  const auto f = random_frame(3, 200, false);
  const std::vector<std::size_t> preds{1, 2, 3};
  const auto t = fit_tree(f, 0, preds, {std::numeric_limits<double>::infinity(), 2, 1});
  ASSERT_EQ(t.leaf_count(), 1u);
  EXPECT_EQ(t.leaves()[0].size(), 200u);
}

TEST(FitTree, ConstantTargetSingleLeaf) {
  Frame f;
  f.add("y", cat(std::vector<std::int32_t>(50, 2), 3));
  f.add("x", ContinuousColumn{std::vector<double>(50, 1.0)});
  const std::vector<std::size_t> preds{1};
  EXPECT_EQ(fit_tree(f, 0, preds, {0.0, 2, 1}).leaf_count(), 1u);
}

TEST(FitTree, RootSplitMatchesExhaustiveSearch) {
  for (bool continuous : {false, true}) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      const auto f = random_frame(seed, 30, continuous);
      const std::vector<std::size_t> preds{1, 2, 3};
      const CartConfig cfg{0.0, 2, 3};
      const auto t = fit_tree(f, 0, preds, cfg);
      const auto best = oracle::best_root_split(f, 0, preds, cfg.minbucket);
      const double root = t.nodes()[0].risk;
      ASSERT_TRUE(best.found);
      if (root - best.risk <= 1e-10 * root) {
        EXPECT_EQ(t.leaf_count(), 1u);
        continue;
      }
      ASSERT_FALSE(t.nodes()[0].is_leaf()) << "seed " << seed;
      std::vector<std::size_t> L, R;
      for (std::size_t i = 0; i < f.rows(); ++i) (oracle::routes_left(t.nodes()[0].split, f, i) ? L : R).push_back(i);
      const double got = oracle::child_risk(f, 0, L) + oracle::child_risk(f, 0, R);
      EXPECT_NEAR(got, best.risk, 1e-9 * std::max(1.0, root)) << "seed " << seed << " continuous " << continuous;
      expect_minbucket(t, cfg.minbucket);
    }
  }
}

TEST(FitTree, ManyLevelOrderingStillValid) {
  // 20 levels: ordered scan rather than subsets
  Rng rng = make_rng(17);
  const std::size_t n = 400;
  std::vector<std::int32_t> y(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = 1 + static_cast<std::int32_t>(rng() % 20);
    y[i] = a[i] <= 10 ? 1 + static_cast<std::int32_t>(rng() % 2) : 3;
  }
  Frame f;
  f.add("y", cat(y, 3));
  f.add("a", cat(a, 20));
  const std::vector<std::size_t> preds{1};
  const auto t = fit_tree(f, 0, preds, {0.0, 20, 7});
  ASSERT_FALSE(t.nodes()[0].is_leaf());
  const auto& s = t.nodes()[0].split;
  // levels 11..20 are pure class 3 and must sit on one side together
  for (int c = 12; c <= 20; ++c) EXPECT_EQ(s.left_levels[c], s.left_levels[11]);
  for (int c = 1; c <= 10; ++c) EXPECT_NE(s.left_levels[c], s.left_levels[11]);
  expect_minbucket(t, 7);
}

TEST(FitTree, MinbucketHoldsEverywhere) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (bool continuous : {false, true}) {
      const auto f = random_frame(seed, 300, continuous);
      const std::vector<std::size_t> preds{1, 2, 3};
      for (std::size_t mb : {1u, 5u, 13u}) {
        const auto t = fit_tree(f, 0, preds, {0.0, 2 * mb, mb});
        expect_minbucket(t, mb);
        std::size_t total = 0;
        for (const auto& l : t.leaves()) total += l.size();
        EXPECT_EQ(total, 300u);
        for (std::size_t i = 0; i < f.rows(); ++i) {
          EXPECT_EQ(t.leaf_of(f, i), static_cast<std::size_t>(t.training_leaves()[i]));
        }
      }
    }
  }
}

TEST(FitTree, ConfigValidation) {
  EXPECT_THROW((CartConfig{-1.0, 2, 1}).validate(), InputError);
  EXPECT_THROW((CartConfig{0.0, 2, 0}).validate(), InputError);
}

TEST(BayesianBootstrap, SingleValueLeaf) {
  Rng rng = make_rng(1);
  const std::vector<int> leaf{42};
  for (int v : bayesian_bootstrap_draw<int>(leaf, 50, rng)) EXPECT_EQ(v, 42);
}

TEST(BayesianBootstrap, TwoValueFrequency) {
  Rng rng = make_rng(2);
  const std::vector<char> leaf{'a', 'b'};
  std::size_t a = 0;
  const std::size_t draws = 100000;
  for (std::size_t r = 0; r < draws; ++r) a += bayesian_bootstrap_draw<char>(leaf, 1, rng)[0] == 'a';
  EXPECT_NEAR(static_cast<double>(a) / draws, 0.5, 0.01);
}

TEST(BayesianBootstrap, IndicesInRange) {
  Rng rng = make_rng(3);
  for (std::size_t n : {1u, 2u, 7u, 100u}) {
    for (auto i : bayesian_bootstrap_indices(n, 500, rng)) EXPECT_LT(i, n);
  }
}

TEST(Synthesize, SingleLeafIsBootstrapOfWholeColumn) {
  const auto f = random_frame(4, 100, false);
  const std::vector<std::size_t> preds{1, 2, 3};
  const CartConfig cfg{std::numeric_limits<double>::infinity(), 2, 1};
  const auto cols = synthesize_variable(f, 0, preds, cfg, 5, 77);
  ASSERT_EQ(cols.size(), 5u);
  std::set<std::int32_t> support(std::get<CategoricalColumn>(f.column(0)).codes.begin(),
                                 std::get<CategoricalColumn>(f.column(0)).codes.end());
  for (const auto& c : cols) {
    for (auto v : std::get<CategoricalColumn>(c).codes) EXPECT_TRUE(support.count(v));
  }
  EXPECT_NE(std::get<CategoricalColumn>(cols[0]).codes, std::get<CategoricalColumn>(cols[1]).codes);
}

TEST(Synthesize, PureLeavesReproduceOriginal) {
  Frame f;
  std::vector<std::int32_t> y, p;
  for (int i = 0; i < 60; ++i) {
    p.push_back(1 + i % 3);
    y.push_back(1 + i % 3);
  }
  f.add("y", cat(y, 3));
  f.add("p", cat(p, 3));
  const std::vector<std::size_t> preds{1};
  for (const auto& c : synthesize_variable(f, 0, preds, {0.0, 2, 1}, 3, 9)) {
    EXPECT_EQ(std::get<CategoricalColumn>(c).codes, y);
  }
}

TEST(Synthesize, SingleTargetSrmiEqualsSynthesizeVariable) {
  const auto f = random_frame(6, 150, false);
  const std::vector<std::size_t> preds{1, 2, 3};
  const std::vector<std::size_t> targets{0};
  const CartConfig cfg{1e-3, 10, 4};
  const auto a = synthesize_variable(f, 0, preds, cfg, 4, 123);
  const auto b = srmi_synthesize(f, targets, preds, cfg, 4, 123);
  ASSERT_EQ(b.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(std::get<CategoricalColumn>(a[r]).codes, std::get<CategoricalColumn>(b[r][0]).codes);
  }
}

TEST(Synthesize, DeterministicSecondTargetFollowsFirst) {
  Rng rng = make_rng(8);
  Frame f;
  std::vector<std::int32_t> y1(120), p(120);
  for (std::size_t i = 0; i < 120; ++i) {
    p[i] = 1 + static_cast<std::int32_t>(rng() % 2);
    y1[i] = 1 + static_cast<std::int32_t>(rng() % 3);
  }
  f.add("p", cat(p, 2));
  f.add("y1", cat(y1, 3));
  f.add("y2", cat(y1, 3));
  const std::vector<std::size_t> base{0}, targets{1, 2};
  const auto out = srmi_synthesize(f, targets, base, {0.0, 2, 1}, 3, 5);
  for (const auto& rep : out) {
    EXPECT_EQ(std::get<CategoricalColumn>(rep[0]).codes, std::get<CategoricalColumn>(rep[1]).codes);
  }
}

TEST(Synthesize, SeedDeterminism) {
  const auto f = random_frame(9, 100, true);
  const std::vector<std::size_t> preds{1, 2, 3};
  const auto a = synthesize_variable(f, 0, preds, {0.0, 10, 3}, 2, 1);
  const auto b = synthesize_variable(f, 0, preds, {0.0, 10, 3}, 2, 1);
  EXPECT_EQ(std::get<ContinuousColumn>(a[1]).values, std::get<ContinuousColumn>(b[1]).values);
}

TEST(GeocodeCart, OnePointIsUnchanged) {
  const Schema s = toy::schema({2, 3});
  const auto ds = toy::make(s, {{1, 2, 1, 2}, {1, 2, 3, 3}}, std::vector<GeoPoint>(4, GeoPoint{7, 8}));
  const std::vector<std::string> preds{"a", "b"};
  for (const auto& r : synthesize_geocode_categorical(ds, preds, {0.0, 2, 1}, 3, 1).replicates) EXPECT_EQ(r, ds);
  for (const auto& r : synthesize_geocode_continuous(ds, preds, {0.0, 2, 1}, 3, 1).replicates) EXPECT_EQ(r, ds);
}

TEST(GeocodeCart, CategoricalSupportContainment) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ds = toy::random(seed, 200, {3, 4}, 100, 30);
    const std::vector<std::string> preds{"a", "b"};
    const auto rel = synthesize_geocode_categorical(ds, preds, {0.0, 10, 3}, 3, seed);
    std::set<std::pair<double, double>> support;
    for (const auto& p : ds.geocodes()) support.insert({p.x, p.y});
    for (const auto& r : rel.replicates) {
      EXPECT_NO_THROW(check_release(ds, rel));
      for (const auto& p : r.geocodes()) EXPECT_TRUE(support.count({p.x, p.y}));
    }
  }
}

TEST(GeocodeCart, ContinuousMarginalSupport) {
  const auto ds = toy::random(12, 150, {3, 2}, 500, 40);
  const std::vector<std::string> preds{"a", "b"};
  std::set<double> xs, ys;
  for (const auto& p : ds.geocodes()) {
    xs.insert(p.x);
    ys.insert(p.y);
  }
  for (bool lat_first : {false, true}) {
    const auto rel = synthesize_geocode_continuous(ds, preds, {0.0, 10, 3}, 3, 4, lat_first);
    for (const auto& r : rel.replicates) {
      for (const auto& p : r.geocodes()) {
        EXPECT_TRUE(xs.count(p.x));
        EXPECT_TRUE(ys.count(p.y));
      }
    }
  }
}

TEST(GeocodeCart, ContinuousCanCreateNovelPairs) {
  // two points, uninformative predictor: x and y are drawn from separate leaves
  const Schema s = toy::schema({2});
  std::vector<GeoPoint> geo;
  std::vector<std::int32_t> a;
  for (int i = 0; i < 40; ++i) {
    geo.push_back(i % 2 ? GeoPoint{0, 0} : GeoPoint{1, 1});
    a.push_back(1 + (i / 2) % 2);
  }
  const auto ds = toy::make(s, {a}, geo);
  const std::vector<std::string> preds{"a"};
  const CartConfig cfg{std::numeric_limits<double>::infinity(), 2, 1};
  std::set<std::pair<double, double>> seen;
  for (const auto& r : synthesize_geocode_continuous(ds, preds, cfg, 20, 3).replicates) {
    for (const auto& p : r.geocodes()) seen.insert({p.x, p.y});
  }
  EXPECT_TRUE(seen.count({0, 1}) || seen.count({1, 0}));
  for (const auto& p : seen) {
    EXPECT_TRUE(p.first == 0 || p.first == 1);
    EXPECT_TRUE(p.second == 0 || p.second == 1);
  }
}

TEST(GeocodeCart, FiftyRecordClusterLeavesMatchExhaustiveRoot) {
  const auto ds = toy::random(31, 50, {3, 2}, 30, 6);
  const auto df = make_frame(ds, true);
  const std::size_t geo = df.columns_of_variable[2][0];
  const std::vector<std::size_t> preds{df.columns_of_variable[0][0], df.columns_of_variable[1][0]};
  const auto t = fit_tree(df.frame, geo, preds, {0.0, 2, 1});
  const auto best = oracle::best_root_split(df.frame, geo, preds, 1);
  ASSERT_FALSE(t.nodes()[0].is_leaf());
  std::vector<std::size_t> L, R;
  for (std::size_t i = 0; i < 50; ++i) (oracle::routes_left(t.nodes()[0].split, df.frame, i) ? L : R).push_back(i);
  EXPECT_NEAR(oracle::child_risk(df.frame, geo, L) + oracle::child_risk(df.frame, geo, R), best.risk, 1e-9);
}

TEST(SynthesizeCart, UnsynthesizedColumnsUntouched) {
  const auto ds = toy::random(40, 120, {3, 4, 2}, 60, 20);
  CartSynthesisOptions opt;
  opt.cart = {1e-4, 10, 3};
  const std::vector<std::string> targets{"geo", "b"};
  const auto rel = synthesize_cart(ds, targets, opt, 4, 99);
  ASSERT_EQ(rel.m(), 4u);
  EXPECT_NO_THROW(check_release(ds, rel));
  for (const auto& r : rel.replicates) {
    EXPECT_TRUE(std::equal(r.column(0).begin(), r.column(0).end(), ds.column(0).begin()));
    EXPECT_TRUE(std::equal(r.column(2).begin(), r.column(2).end(), ds.column(2).begin()));
  }
}
