#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spot/grid.hpp"

namespace spot {

// Synthetic chest phantom: bright background, two dark lung ellipses (the
// left one is the segmentation target), horizontal sinusoidal rib stripes
// across the whole image, an optional bright pathology disc inside the
// target lung, and clipped Gaussian noise.
struct PhantomSpec {
  int width = 64;
  int height = 64;
  double lung_intensity = 0.25;
  double background_intensity = 0.78;
  double rib_amplitude = 0.14;      // additive stripe brightness
  double rib_period = 9.0;          // pixels per stripe cycle
  double pathology_probability = 0.85;
  double noise_sigma = 0.015;
  double center_jitter = 0.03;      // ellipse center jitter, fraction of W/H
  double axis_jitter = 0.10;        // relative jitter on ellipse semi-axes
};

struct Sample {
  std::string id;
  Grid image;
  Grid gt;  // binary mask of the target lung ellipse
};

struct Dataset {
  std::vector<Sample> train, val, test;
};

// Deterministic in (spec, seed). Throws if the spec is invalid or the
// resulting ground truth covers <2% or >60% of the pixels.
Sample generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

// Disjoint per-sample seeds derived from one master seed; ids are
// "<split>_<index>". Reproducible: same call gives identical pixel data.
Dataset make_dataset(const PhantomSpec& spec, int n_train, int n_val,
                     int n_test, std::uint64_t seed);

void validate(const PhantomSpec& spec);

}  // namespace spot
