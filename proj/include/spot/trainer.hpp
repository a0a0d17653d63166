#pragma once

#include <cstdint>
#include <vector>

#include "spot/candidates.hpp"
#include "spot/regressor.hpp"

namespace spot {

struct TrainingConfig {
  int epochs = 200;
  int batch_size = 32;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  // Stop after this many epochs without a validation improvement; 0 trains
  // the full epoch budget. The best-validation snapshot is returned either way.
  int patience = 0;
};

struct EpochLoss {
  int epoch;  // 1-based
  double train_mse;
  double val_mse;
};

struct TrainResult {
  RegressorParams params;  // snapshot with minimal validation loss
  std::vector<EpochLoss> curve;
  double best_val_mse = 0.0;
  int best_epoch = 0;  // 0 = the untrained initialization
};

// Mini-batch Adam on MSE(score, true dice). Deterministic given cfg.seed.
TrainResult train_regressor(const CandidateSet& train, const CandidateSet& val,
                            const TrainingConfig& cfg);

// Mean squared error of the (eval-mode) regressor over a candidate set.
double evaluate_mse(const CandidateSet& set, const RegressorParams& params);

// Predicted scores in set order (eval mode).
std::vector<double> predict_scores(const CandidateSet& set,
                                   const RegressorParams& params);

}  // namespace spot
