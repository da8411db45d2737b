#include "vhu/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "vhu/error.hpp"

namespace vhu {

namespace {

struct Plane {
  std::size_t h, w;
  std::span<const double> v;
};

Plane plane_of(const Tensor& t, const char* what) {
  const auto& s = t.shape();
  if (s.size() == 2) return {s[0], s[1], t.values()};
  if (s.size() == 3 && s[0] == 1) return {s[1], s[2], t.values()};
  throw ShapeError(std::string(what) + ": expected [H,W] or [1,H,W], got " + shape_str(s));
}

void check_mask(const Plane& p, const RegionMask& m, const char* what) {
  if (m.height != p.h || m.width != p.w) throw DataError(std::string(what) + ": mask extents differ from image");
  if (m.count() == 0) throw DataError(std::string(what) + ": empty mask");
}

struct Moments {
  double mean, std;
};

Moments moments(const Plane& p, const RegionMask& m) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.v.size(); ++i)
    if (m.at(i)) s += p.v[i], ++n;
  const double mu = s / static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < p.v.size(); ++i)
    if (m.at(i)) ss += (p.v[i] - mu) * (p.v[i] - mu);
  return {mu, std::sqrt(ss / static_cast<double>(n))};
}

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double s = 0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    s += g[i];
  }
  for (auto& x : g) x /= s;
  return g;
}

}  // namespace

RegionMask RegionMask::empty(std::size_t height, std::size_t width) {
  return {height, width, std::vector<std::uint8_t>(height * width, 0)};
}

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

RegionMask RegionMask::complement() const {
  RegionMask out = *this;
  for (auto& c : out.cells) c = c ? 0 : 1;
  return out;
}

RegionMask RegionMask::eroded(std::size_t radius) const {
  RegionMask out = empty(height, width);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto hh = static_cast<std::ptrdiff_t>(height), ww = static_cast<std::ptrdiff_t>(width);
  for (std::ptrdiff_t i = 0; i < hh; ++i)
    for (std::ptrdiff_t j = 0; j < ww; ++j) {
      bool keep = true;
      for (std::ptrdiff_t di = -r; keep && di <= r; ++di)
        for (std::ptrdiff_t dj = -r; keep && dj <= r; ++dj) {
          const auto y = i + di, x = j + dj;
          keep = y >= 0 && y < hh && x >= 0 && x < ww && cells[static_cast<std::size_t>(y * ww + x)];
        }
      out.cells[static_cast<std::size_t>(i * ww + j)] = keep ? 1 : 0;
    }
  return out;
}

std::vector<RegionMask> masks_from_labels(const Tensor& labels, std::size_t n_labels) {
  const Plane p = plane_of(labels, "masks_from_labels");
  std::vector<RegionMask> out(n_labels, RegionMask::empty(p.h, p.w));
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    const double l = p.v[i];
    if (l < 0 || l != std::floor(l) || l >= static_cast<double>(n_labels)) {
      throw DataError("masks_from_labels: label " + std::to_string(l) + " outside 0.." + std::to_string(n_labels - 1));
    }
    out[static_cast<std::size_t>(l)].cells[i] = 1;
  }
  return out;
}

double otsu_threshold(const Tensor& image) {
  const Plane p = plane_of(image, "otsu_threshold");
  const auto [mn, mx] = std::minmax_element(p.v.begin(), p.v.end());
  const double lo = *mn, hi = *mx;
  if (!(hi > lo)) return lo;
  constexpr std::size_t bins = 256;
  std::array<double, bins> hist{};
  for (double x : p.v) {
    auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * bins);
    hist[std::min(b, bins - 1)] += 1;
  }
  const double total = static_cast<double>(p.v.size());
  double sum_all = 0;
  for (std::size_t b = 0; b < bins; ++b) sum_all += static_cast<double>(b) * hist[b];
  double w0 = 0, sum0 = 0, best = -1;
  std::size_t best_b = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    w0 += hist[b];
    sum0 += static_cast<double>(b) * hist[b];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) best = between, best_b = b;
  }
  // Upper edge of the last background bin.
  return lo + (hi - lo) * static_cast<double>(best_b + 1) / bins;
}

RegionMask otsu_foreground(const Tensor& image) {
  const Plane p = plane_of(image, "otsu_foreground");
  const double t = otsu_threshold(image);
  RegionMask m = RegionMask::empty(p.h, p.w);
  for (std::size_t i = 0; i < p.v.size(); ++i) m.cells[i] = p.v[i] > t ? 1 : 0;
  return m;
}

RegionMask default_background(const Tensor& image) { return otsu_foreground(image).complement().eroded(2); }

double cv(const Tensor& image, const RegionMask& mask) {
  const Plane p = plane_of(image, "cv");
  check_mask(p, mask, "cv");
  const auto m = moments(p, mask);
  if (m.mean == 0) throw DataError("cv: zero mean inside the mask");
  return 100.0 * m.std / std::fabs(m.mean);
}

double snr(const Tensor& image, const RegionMask& signal, const RegionMask& background) {
  const Plane p = plane_of(image, "snr");
  check_mask(p, signal, "snr");
  check_mask(p, background, "snr");
  const double mu = moments(p, signal).mean;
  const double sd = moments(p, background).std;
  if (!(mu > 0)) throw DataError("snr: signal mean must be positive");
  if (sd == 0) return kInfinity;
  return 20.0 * std::log10(mu / sd);
}

double cnr(const Tensor& image, const RegionMask& a, const RegionMask& b, const RegionMask& background) {
  const Plane p = plane_of(image, "cnr");
  check_mask(p, a, "cnr");
  check_mask(p, b, "cnr");
  check_mask(p, background, "cnr");
  const double diff = std::fabs(moments(p, a).mean - moments(p, b).mean);
  const double sd = moments(p, background).std;
  if (sd == 0) return diff == 0 ? 0.0 : kInfinity;
  return diff / sd;
}

double ssim(const Tensor& x, const Tensor& y, std::optional<double> dynamic_range) {
  if (x.shape() != y.shape()) throw ShapeError("ssim: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  const Plane a = plane_of(x, "ssim"), b = plane_of(y, "ssim");
  if (a.h < kWindow || a.w < kWindow) throw ShapeError("ssim: image smaller than the 11x11 window");
  const double L = dynamic_range ? *dynamic_range : *std::max_element(b.v.begin(), b.v.end());
  if (!(L > 0)) throw DataError("ssim: dynamic range must be positive");
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const auto g = gaussian_taps();
  const std::size_t oh = a.h - kWindow + 1, ow = a.w - kWindow + 1;

  // Separable filtering: rows first, then columns, for the five moment maps.
  const std::size_t w = a.w;
  std::array<std::vector<double>, 5> rows;
  for (auto& r : rows) r.assign(a.h * ow, 0.0);
  for (std::size_t i = 0; i < a.h; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < kWindow; ++k) {
        const double u = a.v[i * w + j + k], v = b.v[i * w + j + k];
        s[0] += g[k] * u;
        s[1] += g[k] * v;
        s[2] += g[k] * u * u;
        s[3] += g[k] * v * v;
        s[4] += g[k] * u * v;
      }
      for (int q = 0; q < 5; ++q) rows[static_cast<std::size_t>(q)][i * ow + j] = s[q];
    }
  double total = 0;
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < kWindow; ++k)
        for (int q = 0; q < 5; ++q) s[q] += g[k] * rows[static_cast<std::size_t>(q)][(i + k) * ow + j];
      const double mx = s[0], my = s[1];
      const double vx = s[2] - mx * mx, vy = s[3] - my * my, cxy = s[4] - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / static_cast<double>(oh * ow);
}

double psnr(const Tensor& x, const Tensor& y, double peak) {
  if (x.shape() != y.shape()) throw ShapeError("psnr: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  if (x.numel() == 0) throw ShapeError("psnr: empty images");
  if (!(peak > 0)) throw DataError("psnr: peak must be positive");
  const auto a = x.values(), b = y.values();
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  if (se == 0) return kInfinity;
  return 10.0 * std::log10(peak * peak / (se / static_cast<double>(a.size())));
}

double coco(const Tensor& estimated, const Tensor& truth) {
  if (estimated.shape() != truth.shape()) {
    throw ShapeError("coco: " + shape_str(estimated.shape()) + " vs " + shape_str(truth.shape()));
  }
  const auto a = estimated.values(), b = truth.values();
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) throw DataError("coco: zero variance field");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  const auto n_inf = std::count_if(values.begin(), values.end(), [](double v) { return std::isinf(v); });
  if (n_inf > 0) {
    s.mean = kInfinity;
    s.std = static_cast<std::size_t>(n_inf) == values.size() ? 0.0 : kInfinity;
    return s;
  }
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

double mean_region_cv(const Tensor& image, const std::vector<RegionMask>& regions) {
  double acc = 0;
  std::size_t n = 0;
  for (const auto& r : regions) {
    if (r.count() == 0) continue;
    acc += cv(image, r);
    ++n;
  }
  if (n == 0) throw DataError("mean_region_cv: no nonempty regions");
  return acc / static_cast<double>(n);
}

MetricsReport phantom_report(const Tensor& image, const Tensor& reference, const Tensor& labels, std::size_t n_labels,
                             const Tensor* estimated_bias, const Tensor* true_bias) {
  MetricsReport r;
  const auto regions = masks_from_labels(labels, n_labels);
  r.cv = mean_region_cv(image, regions);
  RegionMask signal = regions[0].complement();
  if (signal.count() > 0 && regions[0].count() > 0) {
    r.snr = snr(image, signal, regions[0]);
    const std::size_t b = n_labels > 2 ? 2 : 0;
    if (regions[1].count() > 0 && regions[b].count() > 0) r.cnr = cnr(image, regions[1], regions[b], regions[0]);
  }
  const Plane ref = plane_of(reference, "phantom_report");
  if (ref.h >= 11 && ref.w >= 11) r.ssim = ssim(image, reference);
  r.psnr = psnr(image, reference, *std::max_element(ref.v.begin(), ref.v.end()));
  if (estimated_bias && true_bias) r.coco = coco(*estimated_bias, *true_bias);
  return r;
}

}  // namespace vhu
