#include "spot/field.hpp"

#include <cmath>

#include "doctest.h"
#include "spot/rng.hpp"

using spot::Grid;
using spot::Prompt;

namespace {

// Brute-force signed distance: all-pairs scan over opposite-class pixels.
Grid brute_force_signed_distance(const Grid& m) {
  Grid out(m.rows(), m.cols());
  for (int y = 0; y < m.rows(); ++y)
    for (int x = 0; x < m.cols(); ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (int v = 0; v < m.rows(); ++v)
        for (int u = 0; u < m.cols(); ++u)
          if ((m(v, u) != 0.0) != (m(y, x) != 0.0)) {
            const double d2 = double(u - x) * (u - x) + double(v - y) * (v - y);
            best = std::min(best, d2);
          }
      out(y, x) = (m(y, x) != 0.0 ? 1.0 : -1.0) * std::sqrt(best);
    }
  return out;
}

Grid random_mixed_mask(spot::Pcg32& rng, int h, int w) {
  for (;;) {
    Grid m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m(y, x) = rng.next_below(2) ? 1.0 : 0.0;
    if (m.sum() > 0.0 && m.sum() < double(m.size())) return m;
  }
}

}  // namespace

TEST_CASE("dice basics") {
  Grid a = Grid::Zero(4, 4);
  a(1, 1) = a(1, 2) = a(2, 1) = 1.0;
  CHECK(spot::dice(a, a) == doctest::Approx(1.0).epsilon(1e-8));

  Grid b = Grid::Zero(4, 4);
  b(3, 3) = 1.0;
  CHECK(spot::dice(a, b) == doctest::Approx(0.0));

  // |A| = |B| = 100, |A^B| = 50 on a 20x20 grid.
  Grid c = Grid::Zero(20, 20);
  Grid d = Grid::Zero(20, 20);
  for (int i = 0; i < 100; ++i) c(i / 20, i % 20) = 1.0;
  for (int i = 50; i < 150; ++i) d(i / 20, i % 20) = 1.0;
  CHECK(spot::dice(c, d) == doctest::Approx(0.5).epsilon(1e-8));

  Grid empty = Grid::Zero(4, 4);
  CHECK(spot::dice(empty, empty) == 0.0);

  Grid wrong = Grid::Zero(3, 4);
  CHECK_THROWS_AS((void)spot::dice(a, wrong), std::invalid_argument);
}

TEST_CASE("dice symmetry and range on random soft masks") {
  spot::Pcg32 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Grid a(6, 5), b(6, 5);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 5; ++x) {
        a(y, x) = rng.next_double();
        b(y, x) = rng.next_double();
      }
    const double ab = spot::dice(a, b);
    CHECK(ab == spot::dice(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("soft dice equals set dice on binary masks") {
  spot::Pcg32 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Grid a = random_mixed_mask(rng, 8, 8);
    const Grid b = random_mixed_mask(rng, 8, 8);
    double inter = 0.0, na = 0.0, nb = 0.0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        inter += (a(y, x) == 1.0 && b(y, x) == 1.0) ? 1.0 : 0.0;
        na += a(y, x);
        nb += b(y, x);
      }
    const double set_dice = 2.0 * inter / (na + nb);
    // Equal up to the 1e-7 denominator guard.
    CHECK(spot::dice(a, b) == doctest::Approx(set_dice).epsilon(1e-7));
  }
}

TEST_CASE("bilinear_sample examples") {
  Grid c = Grid::Constant(5, 7, 0.37);
  const auto s = spot::bilinear_sample(c, Prompt{3.1, 2.8});
  CHECK(s.value == doctest::Approx(0.37));
  CHECK(s.grad[0] == doctest::Approx(0.0));
  CHECK(s.grad[1] == doctest::Approx(0.0));

  Grid g(3, 4);
  g << 0.1, 0.5, 0.9, 0.2, 0.3, 0.7, 0.4, 0.8, 0.6, 0.0, 0.25, 0.75;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(spot::bilinear_sample(g, Prompt{double(x), double(y)}).value ==
            doctest::Approx(g(y, x)));

  Grid ramp(2, 2);
  ramp << 0.0, 1.0, 0.0, 1.0;
  const auto r = spot::bilinear_sample(ramp, Prompt{0.5, 0.0});
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.grad[0] == doctest::Approx(1.0));
  CHECK(r.grad[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS((void)spot::bilinear_sample(g, Prompt{-0.1, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)spot::bilinear_sample(g, Prompt{0.0, 2.5}),
                  std::invalid_argument);
}

TEST_CASE("bilinear gradient matches central finite differences") {
  spot::Pcg32 rng(13);
  Grid g(9, 11);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x) g(y, x) = rng.next_double();

  const double h = 1e-4;
  for (int trial = 0; trial < 200; ++trial) {
    // Interior points away from pixel-cell boundaries.
    const double x = 1.0 + rng.next_below(8) + 0.1 + 0.8 * rng.next_double();
    const double y = 1.0 + rng.next_below(6) + 0.1 + 0.8 * rng.next_double();
    const auto s = spot::bilinear_sample(g, Prompt{x, y});
    const double fdx = (spot::bilinear_sample(g, Prompt{x + h, y}).value -
                        spot::bilinear_sample(g, Prompt{x - h, y}).value) /
                       (2.0 * h);
    const double fdy = (spot::bilinear_sample(g, Prompt{x, y + h}).value -
                        spot::bilinear_sample(g, Prompt{x, y - h}).value) /
                       (2.0 * h);
    CHECK(std::abs(s.grad[0] - fdx) < 1e-6);
    CHECK(std::abs(s.grad[1] - fdy) < 1e-6);
  }
}

TEST_CASE("signed_distance single pixel and adjacency") {
  Grid m = Grid::Zero(5, 5);
  m(2, 3) = 1.0;
  const Grid d = spot::signed_distance(m);
  CHECK(d(2, 3) == doctest::Approx(1.0));
  CHECK(d(2, 2) == doctest::Approx(-1.0));
  CHECK(d(1, 3) == doctest::Approx(-1.0));
  CHECK(d(2, 4) == doctest::Approx(-1.0));
  CHECK(d(1, 2) == doctest::Approx(-std::sqrt(2.0)));

  CHECK_THROWS_AS((void)spot::signed_distance(Grid::Zero(4, 4)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)spot::signed_distance(Grid::Ones(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("signed_distance equals brute force on random masks") {
  spot::Pcg32 rng(14);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 4 + int(rng.next_below(13));  // up to 16
    const int w = 4 + int(rng.next_below(13));
    const Grid m = random_mixed_mask(rng, h, w);
    const Grid fast = spot::signed_distance(m);
    const Grid brute = brute_force_signed_distance(m);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) CHECK(fast(y, x) == brute(y, x));
  }
}

TEST_CASE("centroid") {
  Grid one = Grid::Zero(8, 8);
  one(5, 3) = 1.0;  // (x, y) = (3, 5)
  auto p = spot::centroid(one);
  CHECK(p.x == doctest::Approx(3.0));
  CHECK(p.y == doctest::Approx(5.0));
  CHECK(p.label == 1);

  Grid square = Grid::Zero(8, 8);
  for (int y = 2; y <= 5; ++y)
    for (int x = 2; x <= 5; ++x) square(y, x) = 1.0;
  p = spot::centroid(square);
  CHECK(p.x == doctest::Approx(3.5));
  CHECK(p.y == doctest::Approx(3.5));

  // L-shape {(0,0), (0,1), (1,0)} as (x, y) pairs: mean is (1/3, 1/3).
  Grid ell = Grid::Zero(4, 4);
  ell(0, 0) = ell(1, 0) = ell(0, 1) = 1.0;
  p = spot::centroid(ell);
  CHECK(p.x == doctest::Approx(1.0 / 3.0));
  CHECK(p.y == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS((void)spot::centroid(Grid::Zero(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("pearson") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  CHECK(spot::pearson(x, x) == doctest::Approx(1.0));

  const std::vector<double> nx = {-1.0, -2.0, -3.0, -4.0};
  CHECK(spot::pearson(x, nx) == doctest::Approx(-1.0));

  // Textbook formula by hand: cov = 11, var_x = 5, var_y = 26,
  // r = 11 / sqrt(130).
  const std::vector<double> y = {2.0, 4.0, 5.0, 9.0};
  CHECK(spot::pearson(x, y) ==
        doctest::Approx(11.0 / std::sqrt(130.0)).epsilon(1e-12));
  CHECK(spot::pearson(x, y) == doctest::Approx(0.9647638212377322));

  CHECK_THROWS_AS((void)spot::pearson(x, {1.0, 1.0, 1.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)spot::pearson(x, {1.0}), std::invalid_argument);
}

TEST_CASE("pearson affine invariance") {
  spot::Pcg32 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> xs(12), ys(12);
    for (size_t i = 0; i < xs.size(); ++i) {
      xs[i] = rng.next_double();
      ys[i] = rng.next_double();
    }
    const double a = 0.1 + 5.0 * rng.next_double();
    const double b = -3.0 + 6.0 * rng.next_double();
    std::vector<double> scaled(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) scaled[i] = a * xs[i] + b;
    CHECK(std::abs(spot::pearson(scaled, ys) - spot::pearson(xs, ys)) < 1e-12);
  }
}
