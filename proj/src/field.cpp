#include "spot/field.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spot {

double dice(const Grid& a, const Grid& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("dice: incompatible grid dimensions");
  const double inter = (a * b).sum();
  const double denom = a.sum() + b.sum() + 1e-7;
  return 2.0 * inter / denom;
}

BilinearSample bilinear_sample(const Grid& g, const Prompt& p) {
  if (g.cols() < 2 || g.rows() < 2)
    throw std::invalid_argument("bilinear_sample: grid must be at least 2x2");
  if (!in_bounds(g, p))
    throw std::invalid_argument("bilinear_sample: prompt out of bounds");
  // Clamping the cell index to the last interior cell gives the one-sided
  // derivative on the right/bottom edge.
  const int x0 = std::min(int(std::floor(p.x)), int(g.cols()) - 2);
  const int y0 = std::min(int(std::floor(p.y)), int(g.rows()) - 2);
  const double fx = p.x - x0;
  const double fy = p.y - y0;
  const double g00 = g(y0, x0), g01 = g(y0, x0 + 1);
  const double g10 = g(y0 + 1, x0), g11 = g(y0 + 1, x0 + 1);

  BilinearSample out;
  out.value = (1.0 - fy) * ((1.0 - fx) * g00 + fx * g01) +
              fy * ((1.0 - fx) * g10 + fx * g11);
  out.grad[0] = (1.0 - fy) * (g01 - g00) + fy * (g11 - g10);
  out.grad[1] = (1.0 - fx) * (g10 - g00) + fx * (g11 - g01);
  return out;
}

namespace {

// Large finite sentinel: keeps the parabola intersection arithmetic finite
// for cells without a site. Any real site beats it at image scales.
constexpr double kInf = 1e20;

// 1D squared-distance transform by lower envelope of parabolas
// (Felzenszwalb & Huttenlocher). f holds per-cell offsets, d the result.
void edt_1d(const double* f, double* d, int n, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
               (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    const double dq = double(q) - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared Euclidean distance to the nearest site (site == true cells).
Grid edt_squared(const Grid& mask, bool site_value) {
  const int h = int(mask.rows());
  const int w = int(mask.cols());
  Grid d2(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      d2(y, x) = ((mask(y, x) != 0.0) == site_value) ? 0.0 : kInf;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  // Columns first, then rows.
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = d2(y, x);
    edt_1d(f.data(), d.data(), h, v.data(), z.data());
    for (int y = 0; y < h; ++y) d2(y, x) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = d2(y, x);
    edt_1d(f.data(), d.data(), w, v.data(), z.data());
    for (int x = 0; x < w; ++x) d2(y, x) = d[x];
  }
  return d2;
}

}  // namespace

Grid signed_distance(const Grid& mask) {
  const double fg = mask.sum();
  if (fg == 0.0)
    throw std::invalid_argument("signed_distance: mask has no foreground");
  if (fg == double(mask.size()))
    throw std::invalid_argument("signed_distance: mask has no background");

  const Grid to_fg = edt_squared(mask, true);
  const Grid to_bg = edt_squared(mask, false);
  Grid out(mask.rows(), mask.cols());
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x)
      out(y, x) = mask(y, x) != 0.0 ? std::sqrt(to_bg(y, x))
                                    : -std::sqrt(to_fg(y, x));
  return out;
}

Prompt centroid(const Grid& mask) {
  double sx = 0.0, sy = 0.0, n = 0.0;
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x)
      if (mask(y, x) != 0.0) {
        sx += x;
        sy += y;
        n += 1.0;
      }
  if (n == 0.0) throw std::invalid_argument("centroid: empty mask");
  return Prompt{sx / n, sy / n, 1};
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2)
    throw std::invalid_argument("pearson: need at least 2 points");
  const double n = double(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace spot
