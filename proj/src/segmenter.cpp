#include "spot/segmenter.hpp"

#include <cmath>
#include <stdexcept>

namespace spot {

namespace {

// Overflow-safe elementwise logistic.
Grid logistic(const Grid& z) {
  Grid out(z.rows(), z.cols());
  for (int y = 0; y < z.rows(); ++y)
    for (int x = 0; x < z.cols(); ++x) {
      const double v = z(y, x);
      if (v >= 0.0) {
        out(y, x) = 1.0 / (1.0 + std::exp(-v));
      } else {
        const double e = std::exp(v);
        out(y, x) = e / (1.0 + e);
      }
    }
  return out;
}

void check_config(const SegmenterConfig& cfg) {
  if (cfg.kappa <= 0.0 || cfg.lambda_i < 0.0 || cfg.lambda_r < 0.0)
    throw std::invalid_argument(
        "segmenter: require kappa > 0 and nonnegative lambdas");
}

// z_i as a function of the prompt sample value a and squared distances.
Grid logits_for(const Grid& image, const Prompt& p, const SegmenterConfig& cfg,
                double a) {
  const int w = int(image.cols());
  const int h = int(image.rows());
  const double inv_m2 = 1.0 / double(std::max(w, h) * std::max(w, h));
  const Eigen::ArrayXd dx2 =
      (Eigen::ArrayXd::LinSpaced(w, 0.0, double(w - 1)) - p.x).square();
  const Eigen::ArrayXd dy2 =
      (Eigen::ArrayXd::LinSpaced(h, 0.0, double(h - 1)) - p.y).square();
  Grid z(h, w);
  for (int y = 0; y < h; ++y)
    z.row(y) = cfg.kappa *
               (cfg.tau - cfg.lambda_i * (image.row(y) - a).square() -
                cfg.lambda_r * (dy2[y] + dx2.transpose()) * inv_m2);
  return z;
}

}  // namespace

SegmentationOutput segment(const Grid& image, const Prompt& p,
                           const SegmenterConfig& cfg) {
  check_config(cfg);
  if (p.label != 1)
    throw std::invalid_argument(
        "segment: only foreground prompts (label 1) are supported");
  const BilinearSample a = bilinear_sample(image, p);  // throws if out of bounds

  SegmentationOutput out;
  out.logits = logits_for(image, p, cfg, a.value);
  out.mask = logistic(out.logits);
  out.prompt_value = a.value;
  out.prompt_grad = a.grad;
  return out;
}

Grid sharpen(const Grid& logits, double k) {
  if (k <= 0.0) throw std::invalid_argument("sharpen: slope k must be > 0");
  return logistic(k * logits);
}

Eigen::Vector2d prompt_vjp(const Grid& image, const Prompt& p,
                           const SegmenterConfig& cfg, double k,
                           const Grid& upstream) {
  check_config(cfg);
  if (k <= 0.0) throw std::invalid_argument("prompt_vjp: slope k must be > 0");
  if (upstream.rows() != image.rows() || upstream.cols() != image.cols())
    throw std::invalid_argument("prompt_vjp: upstream shape mismatch");
  const BilinearSample a = bilinear_sample(image, p);

  const int w = int(image.cols());
  const int h = int(image.rows());
  const double inv_m2 = 1.0 / double(std::max(w, h) * std::max(w, h));

  const Grid z = logits_for(image, p, cfg, a.value);
  const Grid m = logistic(k * z);
  // w_i = upstream_i * m_i (1 - m_i) * k: the sharpened-logistic chain.
  const Grid wgt = upstream * m * (1.0 - m) * k;

  // dz/dx = kappa * (2 lambda_i (I - a) da/dx - 2 lambda_r (x - u) / M^2)
  // and symmetrically for y; accumulate the three reductions.
  const Eigen::ArrayXd us = Eigen::ArrayXd::LinSpaced(w, 0.0, double(w - 1));
  const Eigen::ArrayXd vs = Eigen::ArrayXd::LinSpaced(h, 0.0, double(h - 1));
  double s_int = 0.0;   // sum w_i (I_i - a)
  double s_dx = 0.0;    // sum w_i (x - u_i)
  double s_dy = 0.0;    // sum w_i (y - v_i)
  for (int y = 0; y < h; ++y) {
    const auto wrow = wgt.row(y);
    s_int += (wrow * (image.row(y) - a.value)).sum();
    s_dx += (wrow * (p.x - us.transpose())).sum();
    s_dy += wrow.sum() * (p.y - vs[y]);
  }

  Eigen::Vector2d g;
  g[0] = cfg.kappa * (2.0 * cfg.lambda_i * a.grad[0] * s_int -
                      2.0 * cfg.lambda_r * inv_m2 * s_dx);
  g[1] = cfg.kappa * (2.0 * cfg.lambda_i * a.grad[1] * s_int -
                      2.0 * cfg.lambda_r * inv_m2 * s_dy);
  return g;
}

Eigen::Vector2d fd_prompt_grad(const std::function<double(const Prompt&)>& score,
                               const Prompt& p, double h, int width,
                               int height) {
  if (h <= 0.0) throw std::invalid_argument("fd_prompt_grad: h must be > 0");
  const bool ok = p.x - h >= 0.0 && p.y - h >= 0.0 &&
                  p.x + h <= double(width - 1) && p.y + h <= double(height - 1);
  if (!ok)
    throw std::invalid_argument("fd_prompt_grad: stencil leaves the image");
  Eigen::Vector2d g;
  g[0] = (score(Prompt{p.x + h, p.y, p.label}) -
          score(Prompt{p.x - h, p.y, p.label})) /
         (2.0 * h);
  g[1] = (score(Prompt{p.x, p.y + h, p.label}) -
          score(Prompt{p.x, p.y - h, p.label})) /
         (2.0 * h);
  return g;
}

}  // namespace spot
