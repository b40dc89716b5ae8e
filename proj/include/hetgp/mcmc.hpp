#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"
#include "hetgp/rng.hpp"
#include "hetgp/vecchia.hpp"

namespace hetgp {

enum class InitStrategy { ConstantFraction, SmoothedResidual };

struct McmcConfig {
  int total_iters = 1000;
  int burn_in = 500;
  int thin = 10;
  std::uint64_t seed = 0;
  int m = 25;
  // Keep each latent lengthscale above its mean-process counterpart (the
  // noise surface should vary more slowly than the mean).
  bool constrain_theta = true;
  // Homoskedastic comparison mode: the latent field stays at its
  // initialization and only the mean-process lengthscales are sampled.
  bool freeze_latent = false;
  double g_lambda = 1e-6;
  bool estimate_g = false;
  InitStrategy init = InitStrategy::SmoothedResidual;

  void validate() const;
  int kept_count() const { return (total_iters - burn_in) / thin; }
};

struct PriorConfig {
  // Gamma(shape, rate) on each lengthscale; rate 0 means "derive from the
  // inputs" (mode at 10% of the maximum squared pairwise distance).
  double theta_shape = 1.5;
  double theta_rate_y = 0.0;
  double theta_rate_lambda = 0.0;
  ScalePrior scale_y{10.0, 4.0};
  ScalePrior scale_lambda{10.0, 4.0};
  // Nugget prior, used only with estimate_g.
  double g_shape = 1.5;
  double g_rate = 500.0;
};

double derive_theta_rate(const Matrix& X, double shape);

struct HyperState {
  Vector theta_y;      // d
  Vector theta_lambda; // d
  Vector log_lambda;   // n, site order
  double tau2_n = 0.0;
  double tau2_lambda = 0.0;
  double g = 1e-6;
};

struct ChainSamples {
  std::vector<HyperState> kept;
  std::vector<long> accept_theta_y;       // per input dimension
  std::vector<long> accept_theta_lambda;  // per input dimension
  long mh_attempts = 0;                   // per dimension, per process
  std::vector<int> shrink_counts;         // per elliptical-slice update
  std::uint64_t structure_seed = 0;       // reproduces the training ordering
  McmcConfig config;
  PriorConfig priors;
};

// Starting values. ConstantFraction sets the latent field to log of 10% of
// the pooled output variance and the lengthscales to their prior medians.
// SmoothedResidual runs two small profile-grid homoskedastic fits: one on the
// means to form smoothed per-site residual variances, one on their centred
// logs to give a smooth latent start and a latent lengthscale.
HyperState initialize(const ReplicatedDesign& d, const McmcConfig& cfg,
                      const PriorConfig& pri);

// Blocked Gibbs sampler: per sweep, each latent lengthscale then each
// mean-process lengthscale gets a Metropolis update, followed by one
// elliptical-slice update of the latent field (and an optional nugget move).
// States are recorded after burn-in at the thinning stride. Identical inputs
// give bitwise-identical output.
ChainSamples gibbs_fit(const ReplicatedDesign& d, const McmcConfig& cfg,
                       const PriorConfig& pri,
                       const std::optional<HyperState>& start = std::nullopt);

// One elliptical-slice move for a Gaussian-prior parameter vector against an
// arbitrary log likelihood. prior_draw must be a sample from the (zero-mean)
// prior. Non-finite likelihood values act as -infinity. shrinks counts the
// rejected angles before acceptance.
struct EssOutcome {
  Vector state;
  double loglik = 0.0;
  int shrinks = 0;
};
EssOutcome ess_update(const Vector& current, double current_loglik,
                      const std::function<double(const Vector&)>& loglik,
                      const Vector& prior_draw, Rng& rng);

// Multiplicative sliding-window Metropolis step: proposes uniformly on
// [x/2, 2x] and corrects for the asymmetry with log(x/x*). log_posterior
// returns the unnormalised log posterior at the candidate; a non-finite value
// rejects immediately (no acceptance draw).
struct MhOutcome {
  double value = 0.0;
  bool accepted = false;
};
MhOutcome mh_sliding_update(double current, double current_log_posterior,
                            const std::function<double(double)>& log_posterior,
                            Rng& rng);

}  // namespace hetgp
