#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "vhu/bias_sim.hpp"
#include "vhu/error.hpp"
#include "vhu/metrics.hpp"

using namespace vhu;

namespace {

Tensor image(std::size_t h, std::size_t w, std::vector<double> v) { return Tensor({1, h, w}, std::move(v)); }

Tensor noise_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.1, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(h * w);
  for (auto& x : v) x = u(rng);
  return image(h, w, v);
}

RegionMask mask_where(std::size_t h, std::size_t w, const std::vector<int>& on) {
  auto m = RegionMask::empty(h, w);
  for (int i : on) m.cells[static_cast<std::size_t>(i)] = 1;
  return m;
}

RegionMask full_mask(std::size_t h, std::size_t w) { return RegionMask::empty(h, w).complement(); }

double ssim_oracle(const Tensor& x, const Tensor& y, double L) {
  const std::vector<double> a(x.values().begin(), x.values().end()), b(y.values().begin(), y.values().end());
  return vhu::testing::ssim_direct(a, b, x.shape()[1], x.shape()[2], L);
}

}  // namespace

TEST(Cv, WorkedExampleAndScaleInvariance) {
  const auto x = image(1, 2, {2, 4});
  EXPECT_NEAR(cv(x, full_mask(1, 2)), 100.0 / 3.0, 1e-9);
  const auto img = noise_image(8, 8, 3);
  const auto m = mask_where(8, 8, {0, 5, 9, 17, 33, 60});
  auto scaled = img.clone();
  for (auto& v : scaled.mutable_values()) v *= 7.5;
  EXPECT_NEAR(cv(scaled, m), cv(img, m), 1e-9);
  EXPECT_THROW(cv(img, RegionMask::empty(8, 8)), DataError);
  EXPECT_THROW(cv(img, full_mask(4, 4)), DataError);
}

TEST(Cv, FormulaOracle) {
  const auto img = noise_image(10, 10, 4);
  double s = 0, s2 = 0;
  for (double v : img.values()) s += v;
  const double mean = s / 100;
  for (double v : img.values()) s2 += (v - mean) * (v - mean);
  EXPECT_NEAR(cv(img, full_mask(10, 10)), 100 * std::sqrt(s2 / 100) / mean, 1e-9);
}

TEST(Snr, DoublingSignalAddsSixDecibels) {
  auto img = image(2, 3, {1, 1, 1, 0.1, 0.3, 0.2});
  const auto sig = mask_where(2, 3, {0, 1, 2}), bg = mask_where(2, 3, {3, 4, 5});
  const double a = snr(img, sig, bg);
  auto v = img.mutable_values();
  for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(i)] *= 2;
  EXPECT_NEAR(snr(img, sig, bg) - a, 20 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(a, 20 * std::log10(1.0 / std::sqrt(2.0 / 300)), 1e-9);
}

TEST(Snr, ZeroBackgroundSpreadIsInfinite) {
  const auto img = image(1, 4, {1, 2, 0.5, 0.5});
  EXPECT_EQ(snr(img, mask_where(1, 4, {0, 1}), mask_where(1, 4, {2, 3})), kInfinity);
  EXPECT_THROW(snr(image(1, 4, {-1, -2, 0.5, 0.6}), mask_where(1, 4, {0, 1}), mask_where(1, 4, {2, 3})), DataError);
}

TEST(Cnr, Cases) {
  const auto img = image(1, 6, {1, 1, 3, 3, 0.0, 0.2});
  const auto a = mask_where(1, 6, {0, 1}), b = mask_where(1, 6, {2, 3}), bg = mask_where(1, 6, {4, 5});
  EXPECT_NEAR(cnr(img, a, b, bg), 2.0 / 0.1, 1e-9);
  EXPECT_NEAR(cnr(img, b, a, bg), cnr(img, a, b, bg), 1e-12);
  const auto flat = image(1, 6, {1, 1, 3, 3, 0.5, 0.5});
  EXPECT_EQ(cnr(flat, a, b, bg), kInfinity);
  EXPECT_EQ(cnr(flat, a, a, bg), 0.0);
}

TEST(Ssim, IdentityAndBound) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = noise_image(16, 16, s), y = noise_image(16, 16, s + 50);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
    EXPECT_LE(ssim(x, y), 1.0);
    EXPECT_NEAR(ssim(x, y, 1.0), ssim(y, x, 1.0), 1e-12);
  }
  EXPECT_THROW(ssim(noise_image(10, 16, 0), noise_image(10, 16, 1)), ShapeError);
  EXPECT_THROW(ssim(noise_image(16, 16, 0), noise_image(12, 16, 1)), ShapeError);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  const auto x = noise_image(16, 16, 8), y = noise_image(16, 19, 9);
  const auto y16 = noise_image(16, 16, 9);
  double L = 0;
  for (double v : y16.values()) L = std::max(L, v);
  EXPECT_NEAR(ssim(x, y16), ssim_oracle(x, y16, L), 1e-9);
  const auto xw = noise_image(16, 19, 10);
  EXPECT_NEAR(ssim(xw, y, 2.0), ssim_oracle(xw, y, 2.0), 1e-9);
}

TEST(Psnr, Cases) {
  const auto x = noise_image(8, 8, 1);
  EXPECT_EQ(psnr(x, x, 1.0), kInfinity);
  auto y = x.clone();
  for (auto& v : y.mutable_values()) v += 0.1;
  EXPECT_NEAR(psnr(y, x, 1.0), 20.0, 1e-9);
  EXPECT_NEAR(psnr(y, x, 2.0), 20.0 + 20 * std::log10(2.0), 1e-9);
  EXPECT_THROW(psnr(x, x, 0.0), DataError);
}

TEST(Coco, AffineInvarianceAndOracle) {
  const auto a = noise_image(6, 6, 2), b = noise_image(6, 6, 3);
  auto c = a.clone();
  for (auto& v : c.mutable_values()) v = 3 * v + 5;
  EXPECT_NEAR(coco(c, a), 1.0, 1e-12);
  auto neg = a.clone();
  for (auto& v : neg.mutable_values()) v = -2 * v;
  EXPECT_NEAR(coco(neg, a), -1.0, 1e-12);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < 36; ++i) ma += a[i] / 36, mb += b[i] / 36;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < 36; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_NEAR(coco(a, b), sab / std::sqrt(saa * sbb), 1e-9);
  EXPECT_THROW(coco(Tensor::full({1, 6, 6}, 2.0), a), DataError);
}

TEST(Masks, OtsuSeparatesTwoLevels) {
  std::vector<double> v(64, 0.2);
  for (std::size_t i = 20; i < 44; ++i) v[i] = 0.9;
  const auto img = image(8, 8, v);
  const double t = otsu_threshold(img);
  EXPECT_GT(t, 0.2);
  EXPECT_LT(t, 0.9);
  const auto fg = otsu_foreground(img);
  EXPECT_EQ(fg.count(), 24u);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(fg.at(i), v[i] > 0.5);
}

TEST(Masks, ErosionAndLabels) {
  auto m = full_mask(7, 7);
  EXPECT_EQ(m.eroded(1).count(), 25u);
  EXPECT_EQ(m.eroded(3).count(), 1u);
  EXPECT_EQ(m.eroded(0).count(), 49u);
  const auto masks = masks_from_labels(image(2, 2, {0, 1, 1, 2}), 3);
  ASSERT_EQ(masks.size(), 3u);
  EXPECT_EQ(masks[1].count(), 2u);
  EXPECT_THROW(masks_from_labels(image(2, 2, {0, 1, 3, 2}), 3), DataError);
}

TEST(Summary, MeanStdAndInfinity) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(1.25), 1e-12);
  EXPECT_EQ(s.count, 4u);
  const std::vector<double> all_inf{kInfinity, kInfinity};
  EXPECT_EQ(summarize(all_inf).mean, kInfinity);
  EXPECT_EQ(summarize(all_inf).std, 0.0);
  const std::vector<double> some_inf{1.0, kInfinity};
  EXPECT_EQ(summarize(some_inf).mean, kInfinity);
}

// Dividing out the true bias must tighten every region.
TEST(Report, RemovingBiasLowersCv) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = make_phantom(32, 32, 4, seed);
    const auto masks = masks_from_labels(p.labels, 4);
    const auto before = phantom_report(p.corrupted, p.clean, p.labels, 4);
    const auto after = phantom_report(p.clean, p.clean, p.labels, 4, &p.bias, &p.bias);
    EXPECT_LT(*after.cv, *before.cv);
    EXPECT_NEAR(*after.cv, mean_region_cv(p.clean, masks), 1e-12);
    EXPECT_NEAR(*after.ssim, 1.0, 1e-12);
    EXPECT_EQ(*after.psnr, kInfinity);
    EXPECT_NEAR(*after.coco, 1.0, 1e-12);
    EXPECT_FALSE(before.coco.has_value());
  }
}
