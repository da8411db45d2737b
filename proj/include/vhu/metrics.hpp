#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhu/tensor.hpp"

namespace vhu {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Boolean grid over an image's H x W pixels.
struct RegionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> cells;

  static RegionMask empty(std::size_t height, std::size_t width);
  std::size_t count() const;
  bool at(std::size_t i) const { return cells[i] != 0; }
  RegionMask complement() const;
  // Keeps a pixel only if every pixel within Chebyshev distance `radius`
  // lies inside the image and the mask.
  RegionMask eroded(std::size_t radius) const;
};

// One mask per label value 0..n_labels-1 of an integer-valued label image.
std::vector<RegionMask> masks_from_labels(const Tensor& labels, std::size_t n_labels);
// Otsu threshold over a 256-bin histogram between min and max.
double otsu_threshold(const Tensor& image);
// Foreground = pixels above the Otsu threshold.
RegionMask otsu_foreground(const Tensor& image);
// Complement of the foreground eroded by two pixels.
RegionMask default_background(const Tensor& image);

// All mask-based metrics throw DataError on an empty mask or a mask whose
// extents do not match the image.
double cv(const Tensor& image, const RegionMask& mask);  // percent
double snr(const Tensor& image, const RegionMask& signal, const RegionMask& background);  // dB
double cnr(const Tensor& image, const RegionMask& a, const RegionMask& b, const RegionMask& background);

/// Mean local SSIM over 'valid' 11x11 Gaussian windows (sigma 1.5) with
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2. When dynamic_range is not given, L is
/// the maximum of the reference y. Throws ShapeError for mismatched shapes or
/// images smaller than the window.
double ssim(const Tensor& x, const Tensor& y, std::optional<double> dynamic_range = std::nullopt);
// +inf when the images are identical.
double psnr(const Tensor& x, const Tensor& y, double peak);
// Pearson correlation; throws DataError when either argument is constant.
double coco(const Tensor& estimated, const Tensor& truth);

struct MetricsReport {
  std::optional<double> cv, snr, cnr, ssim, psnr, coco;
};

struct Summary {
  double mean = 0;
  double std = 0;  // population
  std::size_t count = 0;
};

// Infinite values propagate: the mean is +inf, the std 0 if all are +inf and
// +inf otherwise.
Summary summarize(std::span<const double> values);

/// Metrics of `image` against a phantom's clean reference and labels.
/// cv is the mean region CV over all labels, snr uses labels >= 1 as signal
/// and label 0 as background, cnr compares labels 1 and 2 (1 and 0 when only
/// two labels exist). ssim and psnr take the reference maximum as peak. coco
/// is filled only when both fields are given.
MetricsReport phantom_report(const Tensor& image, const Tensor& reference, const Tensor& labels, std::size_t n_labels,
                             const Tensor* estimated_bias = nullptr, const Tensor* true_bias = nullptr);

// Mean over labels of the per-region CV.
double mean_region_cv(const Tensor& image, const std::vector<RegionMask>& regions);

}  // namespace vhu
