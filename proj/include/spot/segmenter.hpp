#pragma once

#include <functional>

#include "spot/field.hpp"
#include "spot/grid.hpp"

namespace spot {

// Analytic promptable segmenter. For pixel i at center (u_i, v_i):
//   a(p)   = bilinear_sample(image, p)
//   r_i(p) = ||(u_i, v_i) - (x, y)|| / max(W, H)
//   z_i(p) = kappa * (tau - lambda_i * (I_i - a(p))^2 - lambda_r * r_i(p)^2)
//   m_i    = logistic(z_i)
// Pixels similar in intensity to the prompted point and close to it get
// positive logits. Smooth in p everywhere except bilinear cell boundaries,
// so prompt gradients are available analytically.
struct SegmenterConfig {
  double kappa = 10.0;     // logit scale
  double tau = 0.3;        // affinity offset
  double lambda_i = 4.0;   // intensity-dissimilarity weight
  double lambda_r = 4.0;   // normalized-radius weight
};

struct SegmentationOutput {
  Grid logits;
  Grid mask;  // logistic(logits), in (0,1)
  double prompt_value = 0.0;                              // a(p)
  Eigen::Vector2d prompt_grad = Eigen::Vector2d::Zero();  // d a / d (x,y)
};

SegmentationOutput segment(const Grid& image, const Prompt& p,
                           const SegmenterConfig& cfg);

// Steeper-slope logistic applied to raw logits: logistic(k * z).
Grid sharpen(const Grid& logits, double k);

// Exact gradient of sum_i upstream_i * logistic(k * z_i(p)) with respect to
// the prompt coordinates, chained through sharpen and segment.
Eigen::Vector2d prompt_vjp(const Grid& image, const Prompt& p,
                           const SegmenterConfig& cfg, double k,
                           const Grid& upstream);

// Central-difference fallback for black-box segmenters.
Eigen::Vector2d fd_prompt_grad(const std::function<double(const Prompt&)>& score,
                               const Prompt& p, double h, int width,
                               int height);

}  // namespace spot
