#pragma once

#include <cstdint>

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"
#include "hetgp/mcmc.hpp"

namespace hetgp {

// How the latent posterior at a test point becomes a plug-in noise value.
enum class LambdaMode { UpperQuantile, Mean, Sample };

struct PredictConfig {
  int m_predict = 200;
  LambdaMode lambda_mode = LambdaMode::UpperQuantile;
  double quantile = 0.95;  // upper-quantile mode
  // Independent per-point conditionals (the default). false switches to the
  // joint stacked path where test points also condition on earlier test
  // points.
  bool pointwise = true;
  double level = 0.90;  // central interval mass for the exported intervals
  bool keep_samples = false;
  std::uint64_t seed = 0;  // sample-mode noise draws and the stacked ordering

  void validate() const;
};

// Latent-field conditional at the test points for one posterior sample,
// already scaled: sd = sqrt(tau2_lambda * conditional variance).
struct LatentPrediction {
  Vector mu;
  Vector sd;
};

LatentPrediction predict_latent_sample(const HyperState& st, const Matrix& X_train,
                                       const Matrix& X_test, const PredictConfig& cfg);

// Plug-in noise from the latent conditional. Sample mode draws one Gaussian
// per point from rng.
Vector lambda_plugin(const LatentPrediction& lp, const PredictConfig& cfg, Rng& rng);

// Mean-process conditional for one posterior sample given plugged test noise.
// var_pred includes the noise at the test point; var_conf does not.
struct MeanPrediction {
  Vector mu;
  Vector var_pred;
  Vector var_conf;
};

MeanPrediction predict_mean_sample(const HyperState& st, const ReplicatedDesign& train,
                                   const Matrix& X_test, const Vector& lambda_test,
                                   const PredictConfig& cfg);

// Posterior-averaged prediction: means are averaged over samples and the
// predictive variance adds the between-sample spread of the means to the
// averaged within-sample variance.
struct PredictionResult {
  Vector mean;
  Vector var_pred;
  Vector var_conf;
  Matrix sample_mu;        // kept only with keep_samples (rows = samples)
  Matrix sample_var_pred;
  Matrix sample_var_conf;
  int samples = 0;
  // A single retained sample leaves no between-sample term; flagged so
  // callers can warn that the variance is within-sample only.
  bool single_sample = false;
};

// Law-of-total-variance reduction of per-sample moments (rows = samples):
// means are averaged and each variance column gains the unbiased
// between-sample variance of the means.
PredictionResult aggregate_samples(const Matrix& sample_mu, const Matrix& sample_var_pred,
                                   const Matrix& sample_var_conf, bool keep_samples);

PredictionResult predict(const ChainSamples& chain, const ReplicatedDesign& train,
                         const Matrix& X_test, const PredictConfig& cfg);

// Posterior mean of the log noise at each training site, in the modelling
// units: mean over samples of log(tau2_n) + log_lambda_i.
Vector log_noise_at_sites(const ChainSamples& chain, int n_sites);

// Map a prediction back to the original output units.
PredictionResult rescale_prediction(const PredictionResult& pred, const Preprocess& pre);

struct MetricReport {
  double rmse_mean = 0.0;        // against per-site means
  double rmse_replicates = 0.0;  // against individual runs (from the statistics)
  double score = 0.0;            // mean Gaussian proper score against runs
  double coverage = 0.0;         // NaN when raw replicate values are absent
  double mean_pi_width = 0.0;
  double mean_ci_width = 0.0;
  double runtime_seconds = 0.0;
};

// Held-out quality of an aggregated prediction. The test design must be in
// the same units as the prediction. Interval coverage needs the raw
// replicate values; without them it is reported as NaN.
MetricReport compute_metrics(const PredictionResult& pred, const ReplicatedDesign& test,
                             double level);

}  // namespace hetgp
