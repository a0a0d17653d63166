#include "spot/trainer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spot/errors.hpp"
#include "spot/rng.hpp"

namespace spot {

namespace {

void pack_batch(const CandidateSet& set, const std::vector<size_t>& order,
                size_t begin, size_t end, Tensor& in) {
  const Grid& first = *set[order[begin]].image;
  in.resize(int(end - begin), 2, int(first.rows()), int(first.cols()));
  for (size_t i = begin; i < end; ++i) {
    const Candidate& c = set[order[i]];
    if (c.image->rows() != first.rows() || c.image->cols() != first.cols() ||
        c.mask.rows() != first.rows() || c.mask.cols() != first.cols())
      throw std::invalid_argument("train: candidate resolutions differ");
    in.plane(int(i - begin), 0) = *c.image;
    in.plane(int(i - begin), 1) = c.mask;
  }
}

// Adam moments for every trainable tensor, in a fixed flat order.
struct AdamBuffers {
  std::vector<Eigen::ArrayXd> m, v;
  long t = 0;
};

template <typename Fn>
void for_each_trainable(RegressorParams& p, RegressorGrads& g, Fn&& fn) {
  for (size_t l = 0; l < 5; ++l) {
    fn(p.weight[l].data(), g.weight[l].data(), p.weight[l].size());
    fn(p.bias[l].data(), g.bias[l].data(), p.bias[l].size());
  }
  for (size_t l = 0; l < 4; ++l) {
    fn(p.gamma[l].data(), g.gamma[l].data(), p.gamma[l].size());
    fn(p.beta[l].data(), g.beta[l].data(), p.beta[l].size());
  }
}

void adam_step(RegressorParams& params, RegressorGrads& grads,
               AdamBuffers& buf, const TrainingConfig& cfg) {
  ++buf.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(buf.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(buf.t));
  size_t slot = 0;
  for_each_trainable(params, grads,
                     [&](double* p, const double* g, Eigen::Index n) {
                       Eigen::Map<Eigen::ArrayXd> pm(p, n);
                       Eigen::Map<const Eigen::ArrayXd> gm(g, n);
                       Eigen::ArrayXd& m = buf.m[slot];
                       Eigen::ArrayXd& v = buf.v[slot];
                       m = cfg.beta1 * m + (1.0 - cfg.beta1) * gm;
                       v = cfg.beta2 * v + (1.0 - cfg.beta2) * gm.square();
                       pm -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
                       ++slot;
                     });
}

}  // namespace

std::vector<double> predict_scores(const CandidateSet& set,
                                   const RegressorParams& params) {
  std::vector<double> out(set.size());
  std::vector<size_t> order(set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t chunk = 32;
  Tensor in;
  ForwardCache cache;
  for (size_t begin = 0; begin < set.size(); begin += chunk) {
    const size_t end = std::min(set.size(), begin + chunk);
    pack_batch(set, order, begin, end, in);
    const Eigen::VectorXd scores = forward_eval(in, params, &cache);
    for (size_t i = begin; i < end; ++i) out[i] = scores[Eigen::Index(i - begin)];
  }
  return out;
}

double evaluate_mse(const CandidateSet& set, const RegressorParams& params) {
  if (set.empty()) throw std::invalid_argument("evaluate_mse: empty set");
  const std::vector<double> scores = predict_scores(set, params);
  double sum = 0.0;
  for (size_t i = 0; i < set.size(); ++i) {
    const double d = scores[i] - set[i].dice;
    sum += d * d;
  }
  return sum / double(set.size());
}

TrainResult train_regressor(const CandidateSet& train, const CandidateSet& val,
                            const TrainingConfig& cfg) {
  if (train.empty() || val.empty())
    throw std::invalid_argument("train: empty candidate set");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0)
    throw std::invalid_argument("train: bad training config");

  RegressorParams params = init_params(cfg.seed);
  params.mode = Mode::Train;

  AdamBuffers buf;
  {
    RegressorGrads dummy;  // sized like the params
    for (size_t l = 0; l < 5; ++l) {
      dummy.weight[l] = MatrixRM::Zero(params.weight[l].rows(),
                                       params.weight[l].cols());
      dummy.bias[l] = Eigen::VectorXd::Zero(params.bias[l].size());
    }
    for (size_t l = 0; l < 4; ++l) {
      dummy.gamma[l] = Eigen::ArrayXd::Zero(params.gamma[l].size());
      dummy.beta[l] = Eigen::ArrayXd::Zero(params.beta[l].size());
    }
    for_each_trainable(params, dummy,
                       [&](double*, const double*, Eigen::Index n) {
                         buf.m.push_back(Eigen::ArrayXd::Zero(n));
                         buf.v.push_back(Eigen::ArrayXd::Zero(n));
                       });
  }

  TrainResult result;
  result.best_val_mse = evaluate_mse(val, params);
  result.best_epoch = 0;
  result.params = params;
  result.params.mode = Mode::Eval;

  Pcg32 shuffle_rng(cfg.seed, /*stream=*/0x5f);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int since_best = 0;
  Tensor in;
  ForwardCache cache;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates reshuffle each epoch.
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      const size_t j =
          i + shuffle_rng.next_below(std::uint32_t(order.size() - i));
      std::swap(order[i], order[j]);
    }

    double train_sq_sum = 0.0;
    for (size_t begin = 0; begin < order.size();
         begin += size_t(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), begin + size_t(cfg.batch_size));
      pack_batch(train, order, begin, end, in);
      const Eigen::VectorXd scores =
          forward_batch(in, params, Mode::Train, &cache);

      const auto B = Eigen::Index(end - begin);
      Eigen::VectorXd upstream(B);
      for (Eigen::Index b = 0; b < B; ++b) {
        const double diff = scores[b] - train[order[begin + size_t(b)]].dice;
        train_sq_sum += diff * diff;
        upstream[b] = 2.0 * diff / double(B);
      }
      if (!upstream.allFinite() || !scores.allFinite())
        throw NumericalError("train: non-finite loss encountered");

      RegressorGrads grads = regressor_backward(cache, params, upstream);
      adam_step(params, grads, buf, cfg);
    }

    const double train_mse = train_sq_sum / double(train.size());
    const double val_mse = evaluate_mse(val, params);
    result.curve.push_back(EpochLoss{epoch, train_mse, val_mse});

    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      result.params = params;
      result.params.mode = Mode::Eval;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace spot
