#pragma once

#include <string>
#include <vector>

#include "hetgp/common.hpp"
#include "hetgp/io.hpp"
#include "hetgp/mcmc.hpp"
#include "hetgp/predict.hpp"

namespace hetgp {

// Batch pipelines behind the command-line front end, callable directly.

struct FitOptions {
  McmcConfig mcmc;
  PriorConfig priors;
  bool preprocess = true;  // map inputs to [0,1]^d and standardise outputs
};

Checkpoint fit_campaign(const RawCampaign& raw, const FitOptions& opts);

// Prediction in the original units of the campaign the checkpoint was fit on.
PredictionResult predict_checkpoint(const Checkpoint& cp, const Matrix& X_test_raw,
                                    const PredictConfig& cfg);

// argv without the program name. Returns the process exit code:
// 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace hetgp
