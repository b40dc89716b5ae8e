#pragma once

#include <string>
#include <vector>

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"
#include "hetgp/mcmc.hpp"
#include "hetgp/predict.hpp"

namespace hetgp {

// Numeric CSV with an optional header row (detected by a non-numeric first
// field). Parse errors name the line.
struct Table {
  std::vector<std::string> header;  // empty when the file has none
  Matrix values;
};

Table read_table(const std::string& path);

// Campaign CSV: columns x_1..x_d followed by y, one row per run.
RawCampaign read_campaign_csv(const std::string& path);
void write_campaign_csv(const std::string& path, const Matrix& X, const Vector& y);

// Prediction CSV: x_1..x_d, mean, sd_predictive, sd_confidence, pi_lo, pi_hi,
// ci_lo, ci_hi at the given central level.
void write_prediction_csv(const std::string& path, const Matrix& X,
                          const PredictionResult& pred, double level);

// Everything needed to predict later or warm-start another chain: the chain
// itself, the (preprocessed) training statistics, and the unit maps. Raw
// replicate values are not persisted, and neither is fit_seconds: the file
// must be byte-identical across reruns of the same seeded fit, so wall-clock
// diagnostics go to the fit report instead.
struct Checkpoint {
  ChainSamples chain;
  ReplicatedDesign design;
  Preprocess preprocess;
  double fit_seconds = 0.0;  // in-memory only
};

void write_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& path);

void write_metrics_json(const std::string& path, const MetricReport& m);

}  // namespace hetgp
