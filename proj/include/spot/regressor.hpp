#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "spot/grid.hpp"

namespace spot {

enum class Mode { Train, Eval };

// Dense activation block: batch x channels x rows x cols, planes row-major.
struct Tensor {
  int batch = 0, channels = 0, rows = 0, cols = 0;
  Eigen::ArrayXd data;

  Tensor() = default;
  Tensor(int b, int c, int r, int k)
      : batch(b), channels(c), rows(r), cols(k),
        data(Eigen::ArrayXd::Zero(Eigen::Index(b) * c * r * k)) {}

  // Reuses the existing allocation when the total size is unchanged.
  void resize(int b, int c, int r, int k) {
    batch = b;
    channels = c;
    rows = r;
    cols = k;
    const Eigen::Index n = Eigen::Index(b) * c * r * k;
    if (data.size() != n) data.resize(n);
  }

  Eigen::Index plane_size() const { return Eigen::Index(rows) * cols; }
  double* plane_ptr(int b, int c) {
    return data.data() + (Eigen::Index(b) * channels + c) * plane_size();
  }
  const double* plane_ptr(int b, int c) const {
    return data.data() + (Eigen::Index(b) * channels + c) * plane_size();
  }
  Eigen::Map<Grid> plane(int b, int c) {
    return Eigen::Map<Grid>(plane_ptr(b, c), rows, cols);
  }
  Eigen::Map<const Grid> plane(int b, int c) const {
    return Eigen::Map<const Grid>(plane_ptr(b, c), rows, cols);
  }
};

// Per-pixel quality regressor: five 3x3 convolutions (zero padding 1,
// strides 1,2,2,2,1, channels 2->8->16->16->32->1), the first four followed
// by per-channel normalization and leaky ReLU (slope 0.01), then a global
// average pool and a logistic squash to (0,1). Input channel 0 is the
// image, channel 1 the candidate mask.
struct ConvSpec {
  int in_ch, out_ch, stride;
};
inline constexpr std::array<ConvSpec, 5> kConvPlan{
    {{2, 8, 1}, {8, 16, 2}, {16, 16, 2}, {16, 32, 2}, {32, 1, 1}}};
inline constexpr std::array<int, 4> kNormChannels{8, 16, 16, 32};
inline constexpr double kNormEps = 1e-5;
inline constexpr double kNormMomentum = 0.1;
inline constexpr double kLeakySlope = 0.01;
inline constexpr int kKernel = 3;

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RegressorParams {
  std::array<MatrixRM, 5> weight;  // out_ch x (in_ch * 9)
  std::array<Eigen::VectorXd, 5> bias;
  std::array<Eigen::ArrayXd, 4> gamma, beta, run_mean, run_var;
  Mode mode = Mode::Eval;
};

// Kaiming-uniform-style fan-in init (bound sqrt(6/fan_in)) from the repo
// generator; normalization starts at identity with unit running variance.
RegressorParams init_params(std::uint64_t seed);

// Trainable values: 8569 conv weights/biases + 144 normalization scales and
// shifts = 8713 (running statistics excluded).
long trainable_count();

// Holds everything backward needs plus reusable scratch. Keep one cache
// alive across calls (per thread): all buffers resize in place, so steady
// state runs allocation-free.
struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::Eval;
  int batch = 0, in_rows = 0, in_cols = 0;
  std::array<Eigen::MatrixXd, 5> cols;  // im2col, (B*H_out*W_out) x (in_ch*9)
  std::array<std::array<int, 2>, 5> out_hw;
  std::array<Tensor, 4> xhat;    // normalized pre-scale activations
  std::array<Tensor, 4> bn_out;  // post-norm pre-leaky activations
  std::array<Eigen::ArrayXd, 4> inv_std;  // per channel
  Eigen::VectorXd pooled;  // pre-squash, per item
  Eigen::VectorXd scores;
  // Scratch (forward activations and backward temporaries).
  std::array<Tensor, 5> act;
  std::array<Eigen::MatrixXd, 5> out_nc;
  Eigen::MatrixXd d_nc, d_col;
  Tensor d_act, d_conv;
};

// Batched forward pass. Training mode normalizes with batch statistics and
// updates the running statistics in params (momentum 0.1); eval mode uses
// the stored running statistics and leaves params untouched.
Eigen::VectorXd forward_batch(const Tensor& input, RegressorParams& params,
                              Mode mode, ForwardCache* cache);
Eigen::VectorXd forward_eval(const Tensor& input,
                             const RegressorParams& params,
                             ForwardCache* cache = nullptr);

// Single (image, mask) pair in eval mode.
double regressor_forward(const Grid& image, const Grid& mask,
                         const RegressorParams& params,
                         ForwardCache* cache = nullptr);

struct RegressorGrads {
  std::array<MatrixRM, 5> weight;
  std::array<Eigen::VectorXd, 5> bias;
  std::array<Eigen::ArrayXd, 4> gamma, beta;
};

// Exact gradients of the forward arithmetic, including the full
// batch-statistics path in training mode. upstream is dL/dscore per item;
// d_input (optional) receives dL/d(input channels). The cache is the one
// filled by the matching forward pass; its scratch buffers are reused.
RegressorGrads regressor_backward(ForwardCache& cache,
                                  const RegressorParams& params,
                                  const Eigen::VectorXd& upstream,
                                  Tensor* d_input = nullptr);

// Binary weight file: magic "SPOT", version, layer plan, then every tensor
// as little-endian 32-bit floats (conv weights row-major then bias, layer by
// layer; then gamma/beta/running mean/running variance per norm layer).
void save_params(const RegressorParams& params,
                 const std::filesystem::path& path);
RegressorParams load_params(const std::filesystem::path& path);

}  // namespace spot
