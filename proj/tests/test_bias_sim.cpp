#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "vhu/bias_sim.hpp"
#include "vhu/error.hpp"
#include "vhu/metrics.hpp"

using namespace vhu;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), 8 * a.numel()) == 0;
}

BiasFieldSpec spec(BiasBasis basis, int order, std::uint64_t seed, double lo = 0.1, double hi = 1.9) {
  BiasFieldSpec s;
  s.basis = basis;
  s.order = order;
  s.seed = seed;
  s.range_lo = lo;
  s.range_hi = hi;
  return s;
}

}  // namespace

TEST(Field, ValidationErrors) {
  EXPECT_THROW(spec(BiasBasis::legendre, 2, 0, 0.0, 1.0).validate(), std::invalid_argument);
  EXPECT_THROW(spec(BiasBasis::legendre, 2, 0, 1.0, 1.0).validate(), std::invalid_argument);
  EXPECT_THROW(spec(BiasBasis::legendre, -1, 0).validate(), std::invalid_argument);
  EXPECT_THROW(generate_field(spec(BiasBasis::random_polynomial, 2, 0, 2.0, 1.0), 8, 8), std::invalid_argument);
  EXPECT_THROW(parse_bias_basis("fourier"), std::invalid_argument);
  EXPECT_EQ(parse_bias_basis(to_string(BiasBasis::legendre)), BiasBasis::legendre);
}

TEST(Field, OrderZeroIsMidpoint) {
  const auto f = generate_field(spec(BiasBasis::random_polynomial, 0, 3), 16, 16);
  for (double v : f.values()) EXPECT_EQ(v, 1.0);
}

TEST(Field, HitsRangeExactlyAndIsPositive) {
  for (auto basis : {BiasBasis::random_polynomial, BiasBasis::legendre})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto f = generate_field(spec(basis, 4, seed), 32, 24);
      EXPECT_EQ(f.shape(), (Shape{1, 32, 24}));
      const auto [mn, mx] = std::minmax_element(f.values().begin(), f.values().end());
      EXPECT_EQ(*mn, 0.1);
      EXPECT_EQ(*mx, 1.9);
      for (double v : f.values()) EXPECT_GT(v, 0.0);
    }
}

TEST(Field, Deterministic) {
  const auto s = spec(BiasBasis::legendre, 3, 42);
  EXPECT_TRUE(bitwise_equal(generate_field(s, 16, 16), generate_field(s, 16, 16)));
  EXPECT_FALSE(bitwise_equal(generate_field(s, 16, 16), generate_field(spec(BiasBasis::legendre, 3, 43), 16, 16)));
}

TEST(Field, SmootherThanWhiteNoise) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> noise(64 * 64);
  for (auto& v : noise) v = n(rng);
  const double noise_energy = laplacian_energy(Tensor({64, 64}, noise));
  for (auto basis : {BiasBasis::random_polynomial, BiasBasis::legendre})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const double e = laplacian_energy(generate_field(spec(basis, 4, seed), 64, 64));
      EXPECT_LT(e, 0.01 * noise_energy);
    }
}

TEST(Field, HigherOrderRicherOnMatchedSeeds) {
  for (auto basis : {BiasBasis::random_polynomial, BiasBasis::legendre}) {
    int wins = 0;
    const int seeds = 40;
    for (int s = 0; s < seeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s) + 100;
      const double lo = laplacian_energy(generate_field(spec(basis, 2, seed), 64, 64));
      const double hi = laplacian_energy(generate_field(spec(basis, 4, seed), 64, 64));
      wins += hi > lo;
    }
    EXPECT_GE(wins, static_cast<int>(std::ceil(0.9 * seeds))) << to_string(basis);
  }
}

TEST(Corrupt, IdentitiesAndErrors) {
  const auto clean = make_phantom(16, 16, 3, 5).clean;
  const auto ones = Tensor::full({1, 16, 16}, 1.0);
  EXPECT_TRUE(bitwise_equal(corrupt(clean, ones, 0.0, 1), clean));
  const auto field = generate_field(spec(BiasBasis::random_polynomial, 3, 6), 16, 16);
  EXPECT_TRUE(bitwise_equal(corrupt(ones, field, 0.0, 1), field));
  const auto r = corrupt(clean, field, 0.0, 1);
  for (std::size_t i = 0; i < r.numel(); ++i) EXPECT_NEAR(r[i] * (1.0 / field[i]), clean[i], 1e-12);
  auto bad = field.clone();
  bad.mutable_values()[7] = 0.0;
  EXPECT_THROW(corrupt(clean, bad, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(corrupt(clean, Tensor::full({1, 8, 8}, 1.0), 0.0, 1), ShapeError);

  const auto noisy = corrupt(clean, field, 0.05, 9);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < r.numel(); ++i) m += noisy[i] - r[i];
  m /= static_cast<double>(r.numel());
  for (std::size_t i = 0; i < r.numel(); ++i) v += (noisy[i] - r[i] - m) * (noisy[i] - r[i] - m);
  EXPECT_NEAR(std::sqrt(v / static_cast<double>(r.numel())), 0.05, 0.01);
}

TEST(Phantom, TwoRegionsTwoLevels) {
  const auto p = make_phantom(32, 32, 2, 11);
  std::set<double> levels(p.clean.values().begin(), p.clean.values().end());
  EXPECT_EQ(levels.size(), 2u);
  for (double l : levels) {
    EXPECT_GE(l, 0.2);
    EXPECT_LE(l, 1.0);
  }
}

TEST(Phantom, LabelsAreConstantRegions) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = make_phantom(32, 32, 5, seed);
    const auto masks = masks_from_labels(p.labels, 5);
    std::set<double> levels;
    for (const auto& m : masks) {
      ASSERT_GT(m.count(), 0u);
      EXPECT_NEAR(cv(p.clean, m), 0.0, 1e-9);
      for (std::size_t i = 0; i < m.cells.size(); ++i)
        if (m.at(i)) levels.insert(p.clean[i]);
    }
    EXPECT_EQ(levels.size(), 5u);  // distinct per region
  }
  EXPECT_THROW(make_phantom(8, 8, 1, 0), std::invalid_argument);
}

TEST(Phantom, DeterministicAndConsistent) {
  PhantomOptions opt;
  opt.field = spec(BiasBasis::legendre, 3, 0, 0.5, 1.5);
  const auto a = make_phantom(32, 32, 4, 77, opt);
  const auto b = make_phantom(32, 32, 4, 77, opt);
  EXPECT_TRUE(bitwise_equal(a.clean, b.clean));
  EXPECT_TRUE(bitwise_equal(a.bias, b.bias));
  EXPECT_TRUE(bitwise_equal(a.corrupted, b.corrupted));
  EXPECT_TRUE(bitwise_equal(a.labels, b.labels));
  for (std::size_t i = 0; i < a.clean.numel(); ++i) EXPECT_EQ(a.corrupted[i], a.bias[i] * a.clean[i]);
  const auto [mn, mx] = std::minmax_element(a.bias.values().begin(), a.bias.values().end());
  EXPECT_EQ(*mn, 0.5);
  EXPECT_EQ(*mx, 1.5);
}
