#include "vhu/bias_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace vhu {

std::string to_string(BiasBasis basis) { return basis == BiasBasis::legendre ? "legendre" : "random_polynomial"; }

BiasBasis parse_bias_basis(const std::string& name) {
  if (name == "legendre") return BiasBasis::legendre;
  if (name == "random_polynomial" || name == "random") return BiasBasis::random_polynomial;
  throw std::invalid_argument("unknown bias basis '" + name + "' (expected random_polynomial or legendre)");
}

void BiasFieldSpec::validate() const {
  if (!(range_lo > 0)) throw std::invalid_argument("bias field range must have a positive lower bound");
  if (!(range_hi > range_lo)) throw std::invalid_argument("bias field range must satisfy hi > lo");
  if (order < 0) throw std::invalid_argument("bias field order must be nonnegative");
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

double coordinate(std::size_t i, std::size_t n) {
  return n < 2 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

// Values of the first `count` basis functions at t (monomials or Legendre).
std::vector<double> basis_values(BiasBasis basis, double t, int order) {
  std::vector<double> v(static_cast<std::size_t>(order) + 1);
  v[0] = 1.0;
  if (order >= 1) v[1] = t;
  for (int k = 2; k <= order; ++k) {
    const auto n = static_cast<std::size_t>(k);
    v[n] = basis == BiasBasis::legendre
               ? ((2.0 * k - 1.0) * t * v[n - 1] - (k - 1.0) * v[n - 2]) / static_cast<double>(k)
               : v[n - 1] * t;
  }
  return v;
}

void rescale_into(std::vector<double>& f, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
  const double a = *mn, b = *mx;
  if (!(b - a > 1e-12 * std::max(1.0, std::fabs(b)))) {
    std::fill(f.begin(), f.end(), 0.5 * (lo + hi));
    return;
  }
  for (auto& x : f) x = lo + (hi - lo) * (x - a) / (b - a);
  // Pin the extremes so the range is attained exactly despite rounding.
  f[static_cast<std::size_t>(mn - f.begin())] = lo;
  f[static_cast<std::size_t>(mx - f.begin())] = hi;
  for (auto& x : f) x = std::clamp(x, lo, hi);
}

}  // namespace

Tensor generate_field(const BiasFieldSpec& spec, std::size_t height, std::size_t width) {
  spec.validate();
  if (height == 0 || width == 0) throw ShapeError("generate_field: empty extents");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coef(-0.5, 0.5);
  // Coefficients ordered by total degree, so a higher order extends a lower one
  // drawn from the same seed.
  struct Term {
    int a, b;
    double c;
  };
  std::vector<Term> terms;
  for (int d = 0; d <= spec.order; ++d)
    for (int a = d; a >= 0; --a) terms.push_back({a, d - a, coef(rng)});

  std::vector<std::vector<double>> bu(height), bv(width);
  for (std::size_t i = 0; i < height; ++i) bu[i] = basis_values(spec.basis, coordinate(i, height), spec.order);
  for (std::size_t j = 0; j < width; ++j) bv[j] = basis_values(spec.basis, coordinate(j, width), spec.order);

  std::vector<double> f(height * width);
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      double p = 0;
      for (const auto& t : terms) p += t.c * bu[i][static_cast<std::size_t>(t.a)] * bv[j][static_cast<std::size_t>(t.b)];
      f[i * width + j] = std::exp(p);
    }
  rescale_into(f, spec.range_lo, spec.range_hi);
  return Tensor({1, height, width}, std::move(f));
}

Tensor corrupt(const Tensor& clean, const Tensor& field, double noise_sigma, std::uint64_t seed) {
  if (clean.shape() != field.shape()) {
    throw ShapeError("corrupt: clean " + shape_str(clean.shape()) + " vs field " + shape_str(field.shape()));
  }
  if (noise_sigma < 0) throw std::invalid_argument("corrupt: noise sigma must be nonnegative");
  const auto c = clean.values(), b = field.values();
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(b[i] > 0)) throw std::invalid_argument("corrupt: bias field must be strictly positive");
    out[i] = b[i] * c[i];
  }
  if (noise_sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (auto& v : out) v += noise(rng);
  }
  return Tensor(clean.shape(), std::move(out));
}

namespace {

struct Ellipse {
  double cy, cx, ry, rx, angle;
  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / rx, v = (-s * dx + c * dy) / ry;
    return u * u + v * v <= 1.0;
  }
};

std::vector<std::size_t> draw_labels(std::size_t h, std::size_t w, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> centre(0.15, 0.85), radius(0.12, 0.35), angle(0.0, std::numbers::pi);
  const double hh = static_cast<double>(h), ww = static_cast<double>(w);
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::size_t> labels(h * w, 0);
    for (std::size_t k = 1; k < n; ++k) {
      const Ellipse e{centre(rng) * hh, centre(rng) * ww, radius(rng) * hh, radius(rng) * ww, angle(rng)};
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          if (e.contains(static_cast<double>(i) + 0.5, static_cast<double>(j) + 0.5)) labels[i * w + j] = k;
    }
    std::vector<std::size_t> counts(n, 0);
    for (auto l : labels) ++counts[l];
    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; })) return labels;
  }
  // Tiny grids: fall back to one pixel per label.
  std::vector<std::size_t> labels(h * w, 0);
  for (std::size_t k = 1; k < n; ++k) labels[k - 1] = k;
  return labels;
}

std::vector<double> draw_levels(std::size_t n, std::mt19937_64& rng) {
  const double gap = std::min(0.1, 0.8 / (2.0 * static_cast<double>(n - 1)));
  std::uniform_real_distribution<double> level(0.2, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> v(n);
    for (auto& x : v) x = level(rng);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (std::size_t i = 1; i < n; ++i) ok = ok && sorted[i] - sorted[i - 1] >= gap;
    if (ok) return v;
  }
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = 0.2 + 0.8 * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

Phantom make_phantom(std::size_t height, std::size_t width, std::size_t n_regions, std::uint64_t seed,
                     const PhantomOptions& options) {
  if (n_regions < 2) throw std::invalid_argument("make_phantom: need at least two regions");
  if (height * width < n_regions) throw ShapeError("make_phantom: grid smaller than the region count");
  std::mt19937_64 rng(mix_seed(seed));
  const auto labels = draw_labels(height, width, n_regions, rng);
  const auto levels = draw_levels(n_regions, rng);

  std::vector<double> clean(height * width), lab(height * width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    clean[i] = levels[labels[i]];
    lab[i] = static_cast<double>(labels[i]);
  }
  Phantom p;
  p.clean = Tensor({1, height, width}, std::move(clean));
  p.labels = Tensor({1, height, width}, std::move(lab));
  BiasFieldSpec fs = options.field;
  fs.seed = mix_seed(seed ^ 0xB1A5F1E1DULL);
  p.bias = generate_field(fs, height, width);
  p.corrupted = corrupt(p.clean, p.bias, options.noise_sigma, mix_seed(seed + 0x5EEDULL));
  p.noise_sigma = options.noise_sigma;
  p.n_regions = n_regions;
  return p;
}

double laplacian_energy(const Tensor& field) {
  const std::size_t h = field.dim(field.ndim() - 2), w = field.dim(field.ndim() - 1);
  if (h < 3 || w < 3) throw ShapeError("laplacian_energy: extents must be at least 3x3");
  const auto f = field.values();
  double acc = 0;
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) {
      const double l = f[(i - 1) * w + j] + f[(i + 1) * w + j] + f[i * w + j - 1] + f[i * w + j + 1] - 4 * f[i * w + j];
      acc += l * l;
    }
  return acc / static_cast<double>((h - 2) * (w - 2));
}

}  // namespace vhu
