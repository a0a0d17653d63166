#include "spot/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "spot/field.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {

struct Ellipse {
  double cx, cy, ax, ay;
  bool contains(double x, double y) const {
    const double u = (x - cx) / ax;
    const double v = (y - cy) / ay;
    return u * u + v * v <= 1.0;
  }
};

// Baseline lung geometry as fractions of the image size; jitter on top.
// The target lung is large enough that one full optimizer hop (the Adam
// step size in both coordinates) from the centroid stays inside it.
constexpr double kTargetCx = 0.34, kTargetCy = 0.50;
constexpr double kTargetAx = 0.255, kTargetAy = 0.30;
constexpr double kOtherCx = 0.84, kOtherCy = 0.28;
constexpr double kOtherAx = 0.10, kOtherAy = 0.13;

Ellipse jittered(Pcg32& rng, const PhantomSpec& s, double cx, double cy,
                 double ax, double ay) {
  Ellipse e;
  e.cx = (cx + rng.uniform(-s.center_jitter, s.center_jitter)) * s.width;
  e.cy = (cy + rng.uniform(-s.center_jitter, s.center_jitter)) * s.height;
  e.ax = ax * s.width * (1.0 + rng.uniform(-s.axis_jitter, s.axis_jitter));
  e.ay = ay * s.height * (1.0 + rng.uniform(-s.axis_jitter, s.axis_jitter));
  return e;
}

}  // namespace

void validate(const PhantomSpec& s) {
  const bool intensities_ok =
      s.lung_intensity >= 0.0 && s.lung_intensity <= 1.0 &&
      s.background_intensity >= 0.0 && s.background_intensity <= 1.0 &&
      s.rib_amplitude >= 0.0 && s.rib_amplitude <= 1.0;
  if (!intensities_ok)
    throw std::invalid_argument("phantom: intensities must lie in [0,1]");
  if (s.width < 8 || s.height < 8)
    throw std::invalid_argument("phantom: image must be at least 8x8");
  if (s.rib_period < 2.0)
    throw std::invalid_argument("phantom: rib_period must be >= 2");
  if (s.pathology_probability < 0.0 || s.pathology_probability > 1.0)
    throw std::invalid_argument("phantom: pathology_probability outside [0,1]");
  if (s.noise_sigma < 0.0)
    throw std::invalid_argument("phantom: noise_sigma must be >= 0");
}

Sample generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  validate(spec);
  Pcg32 rng(seed, /*stream=*/0x5eed);
  const int w = spec.width, h = spec.height;

  const Ellipse target =
      jittered(rng, spec, kTargetCx, kTargetCy, kTargetAx, kTargetAy);
  const Ellipse other =
      jittered(rng, spec, kOtherCx, kOtherCy, kOtherAx, kOtherAy);
  const double rib_phase = rng.uniform(0.0, 6.283185307179586);

  Grid gt = Grid::Zero(h, w);
  Grid image(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool in_target = target.contains(x, y);
      const bool in_other = other.contains(x, y);
      gt(y, x) = in_target ? 1.0 : 0.0;
      image(y, x) = (in_target || in_other) ? spec.lung_intensity
                                            : spec.background_intensity;
    }

  const double frac = foreground_fraction(gt);
  if (frac <= 0.02 || frac >= 0.60)
    throw std::invalid_argument(
        "phantom: ground-truth fraction outside (2%, 60%)");

  if (spec.rib_amplitude > 0.0) {
    const double omega = 6.283185307179586 / spec.rib_period;
    for (int y = 0; y < h; ++y) {
      const double stripe =
          spec.rib_amplitude * 0.5 * (1.0 + std::sin(omega * y + rib_phase));
      image.row(y) += stripe;
    }
  }

  if (rng.next_double() < spec.pathology_probability) {
    const double radius = rng.uniform(3.0, 5.0);
    const double brightness = rng.uniform(0.24, 0.36);
    // Disc centers deep enough inside the target lung to stay contained,
    // preferring the central region where a user would click.
    const Prompt center = centroid(gt);
    const double near2 = 4.0;
    std::vector<std::pair<int, int>> eligible, near;
    const Grid sdt = signed_distance(gt);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (sdt(y, x) < radius + 0.5) continue;
        eligible.emplace_back(x, y);
        const double d2 = (x - center.x) * (x - center.x) +
                          (y - center.y) * (y - center.y);
        if (d2 <= near2) near.emplace_back(x, y);
      }
    const auto& pool = near.empty() ? eligible : near;
    if (!pool.empty()) {
      const auto [px, py] = pool[rng.next_below(std::uint32_t(pool.size()))];
      // Paraboloid profile, brightest at the nodule center and fading to
      // the lung level at the rim.
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double d2 = double(x - px) * (x - px) + double(y - py) * (y - py);
          if (d2 <= radius * radius)
            image(y, x) += brightness * (1.0 - d2 / (radius * radius));
        }
    }
  }

  if (spec.noise_sigma > 0.0)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        image(y, x) += spec.noise_sigma * rng.next_gaussian();

  image = image.cwiseMax(0.0).cwiseMin(1.0);

  Sample s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%016llx", (unsigned long long)seed);
  s.id = buf;
  s.image = std::move(image);
  s.gt = std::move(gt);
  return s;
}

Dataset make_dataset(const PhantomSpec& spec, int n_train, int n_val,
                     int n_test, std::uint64_t seed) {
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("make_dataset: all split sizes must be >= 1");
  std::uint64_t stream = seed;
  Dataset ds;
  const auto fill = [&](std::vector<Sample>& out, const char* split, int n) {
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
      Sample s = generate_phantom(spec, splitmix64(stream));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s_%04d", split, i);
      s.id = buf;
      out.push_back(std::move(s));
    }
  };
  fill(ds.train, "train", n_train);
  fill(ds.val, "val", n_val);
  fill(ds.test, "test", n_test);
  return ds;
}

}  // namespace spot
