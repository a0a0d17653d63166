#pragma once

#include <vector>

#include "spot/phantom.hpp"
#include "spot/regressor.hpp"
#include "spot/segmenter.hpp"

namespace spot {

// Adam state for the 2D prompt coordinate, ascent direction.
struct AdamState {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  long t = 0;
  double lr = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One Adam ascent step on the prompt, clamped back into the image.
Prompt adam_ascent_step(AdamState& state, const Prompt& p,
                        const Eigen::Vector2d& grad, const Grid& image,
                        double clamp_margin = 0.0);

struct EvolveConfig {
  int max_iters = 50;
  double lr = 10.0;
  double sharpen_k = 10.0;
  double clamp_margin = 0.0;
  SegmenterConfig segmenter;
  bool stop_on_nonfinite = true;
};

struct TrajectoryRecord {
  int iter = 0;
  Prompt prompt;
  double score = 0.0;
  double dice = 0.0;  // meaningful only when has_dice
  bool has_dice = false;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;  // record 0 is the initial prompt
  int best_index = 0;                     // argmax of score, earliest on ties
  bool aborted_nonfinite = false;
};

struct ScoreGrad {
  double score = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Grid mask;  // sharpened surrogate mask at p
};

// Oracle score of the sharpened surrogate mask at p, plus its exact
// gradient with respect to the prompt: regressor (eval mode) chained
// through sharpen and segment via the mask-input gradient and prompt_vjp.
ScoreGrad score_and_grad(const Grid& image, const Prompt& p,
                         const SegmenterConfig& seg, double k,
                         const RegressorParams& params);

struct EvolveResult {
  Prompt best;
  Trajectory trajectory;
};

// Gradient-ascent prompt evolution: at most max_iters Adam steps, recording
// the oracle score (and, when gt is given, the true dice) at every visited
// prompt, returning the visited prompt with the maximal score. The params
// and config are read-only: score(best) >= score(p0) by construction.
EvolveResult evolve(const Grid& image, const Prompt& p0,
                    const EvolveConfig& cfg, const RegressorParams& params,
                    const Grid* gt = nullptr);

// Ground-truth centroid, snapped to the nearest foreground pixel when the
// centroid itself falls on background (non-convex masks).
Prompt initial_prompt(const Sample& sample);

}  // namespace spot
