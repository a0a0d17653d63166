#include "spot/evolve.hpp"

#include <cmath>
#include <stdexcept>

#include "spot/errors.hpp"
#include "spot/field.hpp"

namespace spot {

Prompt adam_ascent_step(AdamState& state, const Prompt& p,
                        const Eigen::Vector2d& grad, const Grid& image,
                        double clamp_margin) {
  if (!grad.allFinite())
    throw NumericalError("adam_ascent_step: non-finite gradient");
  ++state.t;
  Eigen::Vector2d g = grad;
  if (state.weight_decay != 0.0)
    g -= state.weight_decay * Eigen::Vector2d(p.x, p.y);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v =
      state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
  const Eigen::Vector2d m_hat = state.m / bc1;
  const Eigen::Vector2d v_hat = state.v / bc2;
  Prompt next = p;
  next.x += state.lr * m_hat[0] / (std::sqrt(v_hat[0]) + state.eps);
  next.y += state.lr * m_hat[1] / (std::sqrt(v_hat[1]) + state.eps);
  return clamp_prompt(image, next, clamp_margin);
}

ScoreGrad score_and_grad(const Grid& image, const Prompt& p,
                         const SegmenterConfig& seg, double k,
                         const RegressorParams& params) {
  if (params.mode != Mode::Eval)
    throw std::logic_error("score_and_grad: params must be in eval mode");
  const SegmentationOutput out = segment(image, p, seg);
  ScoreGrad result;
  result.mask = sharpen(out.logits, k);

  ForwardCache cache;
  result.score = regressor_forward(image, result.mask, params, &cache);

  Tensor d_input;
  Eigen::VectorXd upstream(1);
  upstream[0] = 1.0;
  (void)regressor_backward(cache, params, upstream, &d_input);
  const Grid d_mask = d_input.plane(0, 1);  // channel 1 is the mask
  result.grad = prompt_vjp(image, p, seg, k, d_mask);
  return result;
}

EvolveResult evolve(const Grid& image, const Prompt& p0,
                    const EvolveConfig& cfg, const RegressorParams& params,
                    const Grid* gt) {
  if (cfg.max_iters < 1)
    throw std::invalid_argument("evolve: max_iters must be >= 1");
  if (!in_bounds(image, p0))
    throw std::invalid_argument("evolve: initial prompt out of bounds");

  EvolveResult result;
  Trajectory& traj = result.trajectory;

  AdamState adam;
  adam.lr = cfg.lr;
  Prompt p = p0;

  const auto record = [&](int iter, const Prompt& q, const ScoreGrad& sg) {
    TrajectoryRecord rec;
    rec.iter = iter;
    rec.prompt = q;
    rec.score = sg.score;
    if (gt) {
      rec.dice = dice(sg.mask, *gt);
      rec.has_dice = true;
    }
    traj.records.push_back(rec);
    if (sg.score > traj.records[size_t(traj.best_index)].score ||
        traj.records.size() == 1)
      traj.best_index = int(traj.records.size()) - 1;
  };

  ScoreGrad sg = score_and_grad(image, p, cfg.segmenter, cfg.sharpen_k, params);
  if (!std::isfinite(sg.score))
    throw NumericalError("evolve: non-finite score at the initial prompt");
  record(0, p, sg);

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (!sg.grad.allFinite()) {
      if (cfg.stop_on_nonfinite) {
        traj.aborted_nonfinite = true;
        break;
      }
      throw NumericalError("evolve: non-finite prompt gradient");
    }
    p = adam_ascent_step(adam, p, sg.grad, image, cfg.clamp_margin);
    sg = score_and_grad(image, p, cfg.segmenter, cfg.sharpen_k, params);
    if (!std::isfinite(sg.score)) {
      if (cfg.stop_on_nonfinite) {
        traj.aborted_nonfinite = true;
        break;
      }
      throw NumericalError("evolve: non-finite score");
    }
    record(iter, p, sg);
  }

  result.best = traj.records[size_t(traj.best_index)].prompt;
  return result;
}

Prompt initial_prompt(const Sample& sample) {
  const Prompt c = centroid(sample.gt);  // throws on empty mask
  const int cx = int(std::lround(c.x));
  const int cy = int(std::lround(c.y));
  if (sample.gt(cy, cx) != 0.0) return c;

  // Centroid fell on background: snap to the nearest foreground pixel
  // (ties resolved by scan order).
  double best_d2 = std::numeric_limits<double>::infinity();
  Prompt best = c;
  for (int y = 0; y < sample.gt.rows(); ++y)
    for (int x = 0; x < sample.gt.cols(); ++x)
      if (sample.gt(y, x) != 0.0) {
        const double d2 =
            (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = Prompt{double(x), double(y), 1};
        }
      }
  return best;
}

}  // namespace spot
