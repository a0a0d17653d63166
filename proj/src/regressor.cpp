#include "spot/regressor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "spot/errors.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {

int conv_out_dim(int in, int stride) { return (in + 2 - kKernel) / stride + 1; }

// Gather 3x3 patches of `in` into `col`: row b*HW + i*W_out + j holds the
// receptive field of output pixel (i, j) of item b, one column per
// (channel, ki, kj). Zero padding of one pixel on each side.
void im2col(const Tensor& in, int stride, Eigen::MatrixXd& col, int h_out,
            int w_out) {
  const int K = in.channels * 9;
  const Eigen::Index n = Eigen::Index(in.batch) * h_out * w_out;
  col.setZero(n, K);
  for (int b = 0; b < in.batch; ++b)
    for (int ci = 0; ci < in.channels; ++ci) {
      const double* src = in.plane_ptr(b, ci);
      for (int ki = 0; ki < 3; ++ki)
        for (int kj = 0; kj < 3; ++kj) {
          const int k = ci * 9 + ki * 3 + kj;
          // x = j*stride + kj - 1 must lie in [0, cols)
          const int j_lo = kj == 0 ? 1 : 0;
          const int j_hi = std::min(w_out - 1, (in.cols - kj) / stride);
          const int len = j_hi - j_lo + 1;
          if (len <= 0) continue;
          for (int i = 0; i < h_out; ++i) {
            const int y = i * stride + ki - 1;
            if (y < 0 || y >= in.rows) continue;
            const double* s = src + Eigen::Index(y) * in.cols +
                              (Eigen::Index(j_lo) * stride + kj - 1);
            auto dst = col.col(k).segment(Eigen::Index(b) * h_out * w_out +
                                              Eigen::Index(i) * w_out + j_lo,
                                          len);
            if (stride == 1)
              dst = Eigen::Map<const Eigen::VectorXd>(s, len);
            else
              dst = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(
                  s, len, Eigen::InnerStride<>(stride));
          }
        }
    }
}

// Transpose of im2col: scatter-add columns of d_col back onto d_in.
void col2im(const Eigen::MatrixXd& d_col, int stride, Tensor& d_in, int h_out,
            int w_out) {
  for (int b = 0; b < d_in.batch; ++b)
    for (int ci = 0; ci < d_in.channels; ++ci) {
      double* dst = d_in.plane_ptr(b, ci);
      for (int ki = 0; ki < 3; ++ki)
        for (int kj = 0; kj < 3; ++kj) {
          const int k = ci * 9 + ki * 3 + kj;
          const int j_lo = kj == 0 ? 1 : 0;
          const int j_hi = std::min(w_out - 1, (d_in.cols - kj) / stride);
          const int len = j_hi - j_lo + 1;
          if (len <= 0) continue;
          for (int i = 0; i < h_out; ++i) {
            const int y = i * stride + ki - 1;
            if (y < 0 || y >= d_in.rows) continue;
            double* d = dst + Eigen::Index(y) * d_in.cols +
                        (Eigen::Index(j_lo) * stride + kj - 1);
            const auto src =
                d_col.col(k).segment(Eigen::Index(b) * h_out * w_out +
                                         Eigen::Index(i) * w_out + j_lo,
                                     len);
            if (stride == 1)
              Eigen::Map<Eigen::VectorXd>(d, len) += src;
            else
              Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<>>(
                  d, len, Eigen::InnerStride<>(stride)) += src;
          }
        }
    }
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd forward_impl(const Tensor& input,
                             const RegressorParams& params, Mode mode,
                             ForwardCache* cache,
                             std::array<Eigen::ArrayXd, 4>* new_run_mean,
                             std::array<Eigen::ArrayXd, 4>* new_run_var) {
  if (input.channels != 2)
    throw std::invalid_argument("regressor: input must have 2 channels");
  if (input.batch < 1 || input.rows < 2 || input.cols < 2)
    throw std::invalid_argument("regressor: bad input shape");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.valid = false;
  c.mode = mode;
  c.batch = input.batch;
  c.in_rows = input.rows;
  c.in_cols = input.cols;

  const Tensor* cur = &input;
  for (int l = 0; l < 5; ++l) {
    const size_t li = size_t(l);
    const ConvSpec spec = kConvPlan[li];
    const int h_out = conv_out_dim(cur->rows, spec.stride);
    const int w_out = conv_out_dim(cur->cols, spec.stride);
    if (h_out < 1 || w_out < 1)
      throw std::invalid_argument("regressor: input too small");
    c.out_hw[li] = {h_out, w_out};

    im2col(*cur, spec.stride, c.cols[li], h_out, w_out);
    const Eigen::Index hw = Eigen::Index(h_out) * w_out;
    const Eigen::Index n = Eigen::Index(input.batch) * hw;

    // out_nc: one column per output channel.
    Eigen::MatrixXd& out_nc = c.out_nc[li];
    out_nc.resize(n, spec.out_ch);
    out_nc.noalias() = c.cols[li] * params.weight[li].transpose();
    out_nc.rowwise() += params.bias[li].transpose();

    Tensor& out = c.act[li];
    out.resize(input.batch, spec.out_ch, h_out, w_out);
    for (int b = 0; b < input.batch; ++b)
      for (int ch = 0; ch < spec.out_ch; ++ch)
        Eigen::Map<Eigen::VectorXd>(out.plane_ptr(b, ch), hw) =
            out_nc.col(ch).segment(Eigen::Index(b) * hw, hw);

    if (l < 4) {
      // Normalization: batch statistics in training mode, running in eval.
      const int C = spec.out_ch;
      const double n_per_ch = double(input.batch) * double(hw);
      Eigen::ArrayXd mean(C), var(C);
      if (mode == Mode::Train) {
        for (int ch = 0; ch < C; ++ch) {
          double s = 0.0;
          for (int b = 0; b < input.batch; ++b)
            s += out.plane(b, ch).sum();
          mean[ch] = s / n_per_ch;
        }
        for (int ch = 0; ch < C; ++ch) {
          double s = 0.0;
          for (int b = 0; b < input.batch; ++b)
            s += (out.plane(b, ch) - mean[ch]).square().sum();
          var[ch] = s / n_per_ch;
        }
        if (new_run_mean) {
          (*new_run_mean)[li] =
              (1.0 - kNormMomentum) * params.run_mean[li] + kNormMomentum * mean;
          (*new_run_var)[li] =
              (1.0 - kNormMomentum) * params.run_var[li] + kNormMomentum * var;
        }
      } else {
        mean = params.run_mean[li];
        var = params.run_var[li];
      }
      c.inv_std[li] = (var + kNormEps).sqrt().inverse();

      Tensor& xh = c.xhat[li];
      Tensor& bn = c.bn_out[li];
      xh.resize(input.batch, C, h_out, w_out);
      bn.resize(input.batch, C, h_out, w_out);
      for (int b = 0; b < input.batch; ++b)
        for (int ch = 0; ch < C; ++ch) {
          xh.plane(b, ch) = (out.plane(b, ch) - mean[ch]) * c.inv_std[li][ch];
          bn.plane(b, ch) =
              params.gamma[li][ch] * xh.plane(b, ch) + params.beta[li][ch];
        }

      // Leaky ReLU, written back over the conv output.
      out.data = (bn.data > 0.0).select(bn.data, kLeakySlope * bn.data);
    }
    cur = &out;
  }

  // Global average pool + logistic.
  c.pooled.resize(input.batch);
  for (int b = 0; b < input.batch; ++b) c.pooled[b] = cur->plane(b, 0).mean();
  c.scores.resize(input.batch);
  for (int b = 0; b < input.batch; ++b) c.scores[b] = logistic(c.pooled[b]);
  c.valid = true;
  return c.scores;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xFF),
                        (unsigned char)((v >> 8) & 0xFF),
                        (unsigned char)((v >> 16) & 0xFF),
                        (unsigned char)((v >> 24) & 0xFF)};
  out.write((const char*)b, 4);
}

std::uint32_t read_u32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  in.read((char*)b, 4);
  if (in.gcount() != 4)
    throw DataError("weights: truncated file: " + path.string());
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_f32_span(std::ostream& out, const double* v, Eigen::Index n) {
  std::vector<unsigned char> buf(size_t(n) * 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(float(v[i]));
    buf[size_t(i) * 4 + 0] = (unsigned char)(bits & 0xFF);
    buf[size_t(i) * 4 + 1] = (unsigned char)((bits >> 8) & 0xFF);
    buf[size_t(i) * 4 + 2] = (unsigned char)((bits >> 16) & 0xFF);
    buf[size_t(i) * 4 + 3] = (unsigned char)((bits >> 24) & 0xFF);
  }
  out.write((const char*)buf.data(), std::streamsize(buf.size()));
}

void read_f32_span(std::istream& in, double* v, Eigen::Index n,
                   const std::filesystem::path& path) {
  std::vector<unsigned char> buf(size_t(n) * 4);
  in.read((char*)buf.data(), std::streamsize(buf.size()));
  if (size_t(in.gcount()) != buf.size())
    throw DataError("weights: truncated file: " + path.string());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint32_t bits =
        std::uint32_t(buf[size_t(i) * 4 + 0]) |
        (std::uint32_t(buf[size_t(i) * 4 + 1]) << 8) |
        (std::uint32_t(buf[size_t(i) * 4 + 2]) << 16) |
        (std::uint32_t(buf[size_t(i) * 4 + 3]) << 24);
    v[i] = double(std::bit_cast<float>(bits));
  }
}

constexpr char kMagic[4] = {'S', 'P', 'O', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

RegressorParams init_params(std::uint64_t seed) {
  Pcg32 rng(seed, /*stream=*/0x1e17);
  RegressorParams p;
  for (size_t l = 0; l < 5; ++l) {
    const ConvSpec spec = kConvPlan[l];
    const int fan_in = spec.in_ch * 9;
    const double bound = std::sqrt(6.0 / double(fan_in));
    p.weight[l].resize(spec.out_ch, fan_in);
    for (int r = 0; r < spec.out_ch; ++r)
      for (int col = 0; col < fan_in; ++col)
        p.weight[l](r, col) = rng.uniform(-bound, bound);
    p.bias[l] = Eigen::VectorXd::Zero(spec.out_ch);
  }
  for (size_t l = 0; l < 4; ++l) {
    const int c = kNormChannels[l];
    p.gamma[l] = Eigen::ArrayXd::Ones(c);
    p.beta[l] = Eigen::ArrayXd::Zero(c);
    p.run_mean[l] = Eigen::ArrayXd::Zero(c);
    p.run_var[l] = Eigen::ArrayXd::Ones(c);
  }
  return p;
}

long trainable_count() {
  long n = 0;
  for (const ConvSpec spec : kConvPlan)
    n += long(spec.out_ch) * spec.in_ch * 9 + spec.out_ch;
  for (const int c : kNormChannels) n += 2L * c;
  return n;
}

Eigen::VectorXd forward_batch(const Tensor& input, RegressorParams& params,
                              Mode mode, ForwardCache* cache) {
  std::array<Eigen::ArrayXd, 4> new_mean, new_var;
  const Eigen::VectorXd scores =
      forward_impl(input, params, mode, cache,
                   mode == Mode::Train ? &new_mean : nullptr,
                   mode == Mode::Train ? &new_var : nullptr);
  if (mode == Mode::Train) {
    params.run_mean = std::move(new_mean);
    params.run_var = std::move(new_var);
  }
  return scores;
}

Eigen::VectorXd forward_eval(const Tensor& input,
                             const RegressorParams& params,
                             ForwardCache* cache) {
  return forward_impl(input, params, Mode::Eval, cache, nullptr, nullptr);
}

double regressor_forward(const Grid& image, const Grid& mask,
                         const RegressorParams& params, ForwardCache* cache) {
  if (image.rows() != mask.rows() || image.cols() != mask.cols())
    throw std::invalid_argument("regressor: image/mask shape mismatch");
  Tensor in(1, 2, int(image.rows()), int(image.cols()));
  in.plane(0, 0) = image;
  in.plane(0, 1) = mask;
  return forward_eval(in, params, cache)[0];
}

RegressorGrads regressor_backward(ForwardCache& cache,
                                  const RegressorParams& params,
                                  const Eigen::VectorXd& upstream,
                                  Tensor* d_input) {
  if (!cache.valid)
    throw std::logic_error("regressor_backward: missing or stale cache");
  if (upstream.size() != cache.batch)
    throw std::logic_error("regressor_backward: upstream size mismatch");

  RegressorGrads g;
  for (size_t l = 0; l < 5; ++l) {
    g.weight[l] = MatrixRM::Zero(kConvPlan[l].out_ch, kConvPlan[l].in_ch * 9);
    g.bias[l] = Eigen::VectorXd::Zero(kConvPlan[l].out_ch);
  }
  for (size_t l = 0; l < 4; ++l) {
    g.gamma[l] = Eigen::ArrayXd::Zero(kNormChannels[l]);
    g.beta[l] = Eigen::ArrayXd::Zero(kNormChannels[l]);
  }

  const int B = cache.batch;
  // Head: logistic and global average pool.
  Eigen::VectorXd d_pooled(B);
  for (int b = 0; b < B; ++b) {
    const double s = cache.scores[b];
    d_pooled[b] = upstream[b] * s * (1.0 - s);
  }

  const auto [h5, w5] = cache.out_hw[4];
  const Eigen::Index hw5 = Eigen::Index(h5) * w5;
  Tensor& d_out = cache.d_act;
  d_out.resize(B, 1, h5, w5);
  for (int b = 0; b < B; ++b)
    d_out.plane(b, 0).setConstant(d_pooled[b] / double(hw5));

  // Walk the conv stack backwards; d_out enters as dL/d(conv_l output).
  for (int l = 4; l >= 0; --l) {
    const ConvSpec spec = kConvPlan[size_t(l)];
    const auto [h_out, w_out] = cache.out_hw[size_t(l)];
    const Eigen::Index hw = Eigen::Index(h_out) * w_out;
    const Eigen::Index n = Eigen::Index(B) * hw;

    Eigen::MatrixXd& d_out_nc = cache.d_nc;
    d_out_nc.resize(n, spec.out_ch);
    for (int b = 0; b < B; ++b)
      for (int ch = 0; ch < spec.out_ch; ++ch)
        d_out_nc.col(ch).segment(Eigen::Index(b) * hw, hw) =
            Eigen::Map<const Eigen::VectorXd>(d_out.plane_ptr(b, ch), hw);

    g.weight[size_t(l)].noalias() =
        d_out_nc.transpose() * cache.cols[size_t(l)];
    g.bias[size_t(l)] = d_out_nc.colwise().sum().transpose();

    const bool need_d_in = l > 0 || d_input != nullptr;
    if (!need_d_in) break;

    Eigen::MatrixXd& d_col = cache.d_col;
    d_col.resize(n, spec.in_ch * 9);
    d_col.noalias() = d_out_nc * params.weight[size_t(l)];

    const int in_rows = l == 0 ? cache.in_rows : cache.out_hw[size_t(l - 1)][0];
    const int in_cols = l == 0 ? cache.in_cols : cache.out_hw[size_t(l - 1)][1];
    Tensor& d_in = cache.d_conv;
    d_in.resize(B, spec.in_ch, in_rows, in_cols);
    d_in.data.setZero();
    col2im(d_col, spec.stride, d_in, h_out, w_out);

    if (l == 0) {
      if (d_input) *d_input = d_in;
      break;
    }

    // Through leaky ReLU of layer l-1.
    const size_t bl = size_t(l - 1);
    const Tensor& bno = cache.bn_out[bl];
    d_in.data = (bno.data > 0.0).select(d_in.data, kLeakySlope * d_in.data);

    // Through normalization of layer l-1.
    const int C = kNormChannels[bl];
    d_out.resize(B, C, in_rows, in_cols);
    const Eigen::Index n_per_ch = Eigen::Index(B) * in_rows * in_cols;
    for (int ch = 0; ch < C; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < B; ++b) {
        sum_dy += d_in.plane(b, ch).sum();
        sum_dy_xhat += (d_in.plane(b, ch) * cache.xhat[bl].plane(b, ch)).sum();
      }
      g.beta[bl][ch] += sum_dy;
      g.gamma[bl][ch] += sum_dy_xhat;

      const double gamma = params.gamma[bl][ch];
      const double istd = cache.inv_std[bl][ch];
      if (cache.mode == Mode::Train) {
        // Full batch-statistics derivative.
        const double inv_n = 1.0 / double(n_per_ch);
        for (int b = 0; b < B; ++b)
          d_out.plane(b, ch) =
              gamma * istd *
              (d_in.plane(b, ch) - inv_n * sum_dy -
               cache.xhat[bl].plane(b, ch) * (inv_n * sum_dy_xhat));
      } else {
        // Running statistics are constants in eval mode.
        for (int b = 0; b < B; ++b)
          d_out.plane(b, ch) = gamma * istd * d_in.plane(b, ch);
      }
    }
  }
  return g;
}

void save_params(const RegressorParams& params,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("weights: cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, 5);
  for (const ConvSpec spec : kConvPlan) {
    write_u32(out, std::uint32_t(spec.in_ch));
    write_u32(out, std::uint32_t(spec.out_ch));
    write_u32(out, kKernel);
    write_u32(out, std::uint32_t(spec.stride));
  }
  write_u32(out, 4);
  for (const int c : kNormChannels) write_u32(out, std::uint32_t(c));
  write_u32(out, params.mode == Mode::Train ? 1 : 0);
  for (size_t l = 0; l < 5; ++l) {
    write_f32_span(out, params.weight[l].data(), params.weight[l].size());
    write_f32_span(out, params.bias[l].data(), params.bias[l].size());
  }
  for (size_t l = 0; l < 4; ++l) {
    write_f32_span(out, params.gamma[l].data(), params.gamma[l].size());
    write_f32_span(out, params.beta[l].data(), params.beta[l].size());
    write_f32_span(out, params.run_mean[l].data(), params.run_mean[l].size());
    write_f32_span(out, params.run_var[l].data(), params.run_var[l].size());
  }
  if (!out) throw DataError("weights: write failed: " + path.string());
}

RegressorParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("weights: cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("weights: bad magic in " + path.string());
  const std::uint32_t version = read_u32(in, path);
  if (version != kFormatVersion)
    throw DataError("weights: unsupported version " + std::to_string(version) +
                    " in " + path.string());
  if (read_u32(in, path) != 5)
    throw DataError("weights: unexpected layer plan in " + path.string());
  for (const ConvSpec spec : kConvPlan) {
    const bool ok = read_u32(in, path) == std::uint32_t(spec.in_ch) &&
                    read_u32(in, path) == std::uint32_t(spec.out_ch) &&
                    read_u32(in, path) == kKernel &&
                    read_u32(in, path) == std::uint32_t(spec.stride);
    if (!ok)
      throw DataError("weights: unexpected layer plan in " + path.string());
  }
  if (read_u32(in, path) != 4)
    throw DataError("weights: unexpected layer plan in " + path.string());
  for (const int c : kNormChannels)
    if (read_u32(in, path) != std::uint32_t(c))
      throw DataError("weights: unexpected layer plan in " + path.string());

  RegressorParams p;
  p.mode = read_u32(in, path) == 1 ? Mode::Train : Mode::Eval;
  for (size_t l = 0; l < 5; ++l) {
    const ConvSpec spec = kConvPlan[l];
    p.weight[l].resize(spec.out_ch, spec.in_ch * 9);
    p.bias[l].resize(spec.out_ch);
    read_f32_span(in, p.weight[l].data(), p.weight[l].size(), path);
    read_f32_span(in, p.bias[l].data(), p.bias[l].size(), path);
  }
  for (size_t l = 0; l < 4; ++l) {
    const int c = kNormChannels[l];
    p.gamma[l].resize(c);
    p.beta[l].resize(c);
    p.run_mean[l].resize(c);
    p.run_var[l].resize(c);
    read_f32_span(in, p.gamma[l].data(), c, path);
    read_f32_span(in, p.beta[l].data(), c, path);
    read_f32_span(in, p.run_mean[l].data(), c, path);
    read_f32_span(in, p.run_var[l].data(), c, path);
  }
  return p;
}

}  // namespace spot
