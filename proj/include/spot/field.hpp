#pragma once

#include <vector>

#include "spot/grid.hpp"

namespace spot {

// Soft Dice overlap: 2*sum(a*b) / (sum(a) + sum(b) + 1e-7). The epsilon in
// the denominator makes dice(empty, empty) == 0, so an optimizer is never
// rewarded for collapsing a mask to nothing. For binary masks this equals
// the set form 2|A^B|/(|A|+|B|) up to the epsilon guard.
double dice(const Grid& a, const Grid& b);

struct BilinearSample {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();  // d value / d (x, y)
};

// Bilinear interpolation of the four surrounding pixel centers, with the
// exact analytic gradient. On the outer boundary the gradient is the
// one-sided derivative of the adjacent interior cell. Out-of-bounds p throws.
BilinearSample bilinear_sample(const Grid& g, const Prompt& p);

// Exact signed Euclidean distance transform: per pixel, the distance to the
// nearest pixel of the opposite class, positive inside the mask and negative
// outside. Throws if the mask is all-foreground or all-background.
Grid signed_distance(const Grid& mask);

// Foreground centroid (mean column, mean row) as a foreground prompt.
Prompt centroid(const Grid& mask);

// Pearson product-moment correlation. Requires equal lengths >= 2 and
// nonzero variance in both sequences.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace spot
