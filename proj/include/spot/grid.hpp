#pragma once

#include <Eigen/Dense>

#include <algorithm>

namespace spot {

// 2D scalar field. Indexing is (row, col) = (y, x): x runs along columns,
// y along rows, origin at the top-left pixel center. Image grids and soft
// masks keep values in [0,1]; binary masks in {0,1} exactly.
using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Click prompt: continuous pixel coordinates plus a foreground label.
struct Prompt {
  double x = 0.0;
  double y = 0.0;
  int label = 1;  // 1 = foreground, 0 = background
};

inline bool in_bounds(const Grid& g, const Prompt& p) {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= double(g.cols() - 1) &&
         p.y <= double(g.rows() - 1);
}

// Clamp to [margin, W-1-margin] x [margin, H-1-margin].
inline Prompt clamp_prompt(const Grid& g, Prompt p, double margin = 0.0) {
  p.x = std::clamp(p.x, margin, double(g.cols() - 1) - margin);
  p.y = std::clamp(p.y, margin, double(g.rows() - 1) - margin);
  return p;
}

inline bool is_binary(const Grid& m) {
  return ((m == 0.0) || (m == 1.0)).all();
}

inline double foreground_fraction(const Grid& mask) {
  return mask.sum() / double(mask.size());
}

}  // namespace spot
