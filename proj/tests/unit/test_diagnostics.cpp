#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "geosynth/diagnostics.hpp"
#include "geosynth/error.hpp"
#include "geosynth/rng.hpp"

using namespace geosynth;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t n) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST(Geweke, IidChainMostlySmall) {
  int ok = 0;
  for (std::uint64_t s = 1; s <= 100; ++s) ok += std::abs(geweke_z(normals(s, 10000))) < 3.0;
  EXPECT_GE(ok, 99);
}

TEST(Geweke, RampIsLarge) {
  std::vector<double> ramp(1000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 999.0;
  EXPECT_GT(std::abs(geweke_z(ramp)), 5.0);
}

TEST(Geweke, Errors) {
  EXPECT_THROW(geweke_z(std::vector<double>(100, 2.0)), InputError);
  EXPECT_THROW(geweke_z(std::vector<double>(10, 1.0)), InputError);
}

TEST(HeidelbergerWelch, IidPassesAtZero) {
  int ok = 0;
  for (std::uint64_t s = 1; s <= 2000; ++s) {
    const auto hw = heidelberger_welch(normals(s + 1000, 10000));
    ok += hw.passed && hw.start == 0;
  }
  EXPECT_GE(ok, 1900);
}

TEST(HeidelbergerWelch, RampFails) {
  // 0..1 ramp under noise; a noise-free ramp is absorbed by the AR spectral estimate
  auto ramp = normals(4242, 10000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.5 * ramp[i] + static_cast<double>(i) / 9999.0;
  const auto hw = heidelberger_welch(ramp);
  EXPECT_FALSE(hw.passed);
  EXPECT_GT(hw.statistic, 0.4614);
}

TEST(HeidelbergerWelch, ConstantPasses) {
  const auto hw = heidelberger_welch(std::vector<double>(100, 3.0));
  EXPECT_TRUE(hw.passed);
  EXPECT_EQ(hw.start, 0u);
  EXPECT_EQ(hw.statistic, 0.0);
}

TEST(HeidelbergerWelch, TooShort) { EXPECT_THROW(heidelberger_welch(normals(1, 49)), InputError); }

TEST(Spectrum0, WhiteNoiseNearVariance) {
  const auto v = normals(77, 20000);
  EXPECT_NEAR(spectrum0_ar(v), 1.0, 0.1);
}

TEST(Spectrum0, Ar1) {
  Rng rng = make_rng(9);
  std::normal_distribution<double> nd;
  std::vector<double> x(50000);
  double prev = 0;
  for (auto& v : x) v = prev = 0.5 * prev + nd(rng);
  // sigma^2 / (1 - phi)^2 = 4
  EXPECT_NEAR(spectrum0_ar(x), 4.0, 0.3);
}

TEST(Autocorrelation, Iid) {
  const auto acf = autocorrelation(normals(3, 10000), 5);
  EXPECT_EQ(acf[0], 1.0);
  EXPECT_LT(std::abs(acf[1]), 0.05);
}

TEST(Autocorrelation, Ar1Point9) {
  Rng rng = make_rng(10);
  std::normal_distribution<double> nd;
  std::vector<double> x(20000);
  double prev = 0;
  for (auto& v : x) v = prev = 0.9 * prev + nd(rng);
  EXPECT_NEAR(autocorrelation(x, 1)[1], 0.9, 0.05);
}

TEST(Autocorrelation, Errors) {
  EXPECT_THROW(autocorrelation(std::vector<double>(10, 1.0), 2), InputError);
  EXPECT_THROW(autocorrelation(normals(1, 3), 3), InputError);
}

TEST(DiagnosticsJson, ShortChainHasNulls) {
  const auto j = diagnostics_json(normals(1, 10), 3);
  EXPECT_TRUE(j["heidelberger_welch"].is_null());
  EXPECT_TRUE(j["geweke_z"].is_null());
  EXPECT_EQ(j["acf"].size(), 4u);
}
