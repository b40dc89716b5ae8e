#include "hetgp/predict.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "hetgp/kernel.hpp"
#include "hetgp/mathutil.hpp"
#include "hetgp/rng.hpp"
#include "hetgp/vecchia.hpp"

namespace hetgp {

void PredictConfig::validate() const {
  if (m_predict < 0) throw ConfigError("predict: m_predict must be >= 0");
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw ConfigError("predict: quantile must lie strictly in (0,1)");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("predict: level must lie strictly in (0,1)");
  }
}

namespace {

// Neighbour sets and gathered coordinates are independent of the posterior
// sample, so they are computed once per prediction call.
struct PointContext {
  std::vector<int> nn;
  Matrix G;  // k x d
};

std::vector<PointContext> gather_contexts(const Matrix& X_train, const Matrix& X_test,
                                          int m) {
  std::vector<PointContext> ctx(static_cast<std::size_t>(X_test.rows()));
  for (Eigen::Index q = 0; q < X_test.rows(); ++q) {
    auto& c = ctx[static_cast<std::size_t>(q)];
    c.nn = nearest_rows(X_train, X_test.row(q).transpose(), m);
    c.G.resize(static_cast<Eigen::Index>(c.nn.size()), X_train.cols());
    for (std::size_t j = 0; j < c.nn.size(); ++j) {
      c.G.row(static_cast<Eigen::Index>(j)) = X_train.row(c.nn[j]);
    }
  }
  return ctx;
}

// Correlation block over the first k gathered rows, written into M, followed
// by the cross-correlation against x into ci. Distances are accumulated
// scalar, the exp is one vectorised pass.
void corr_pieces(const Matrix& G, int k, const Vector& x, const Vector& theta, Matrix& M,
                 Vector& ci) {
  for (int j = 0; j < k; ++j) {
    M(j, j) = 0.0;
    for (int i = j + 1; i < k; ++i) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < theta.size(); ++t) {
        const double d = G(i, t) - G(j, t);
        s += d * d / theta[t];
      }
      M(i, j) = s;
      M(j, i) = s;
    }
    double s = 0.0;
    for (Eigen::Index t = 0; t < theta.size(); ++t) {
      const double d = G(j, t) - x[t];
      s += d * d / theta[t];
    }
    ci[j] = s;
  }
  M.topLeftCorner(k, k) = (-M.topLeftCorner(k, k)).array().exp();
  ci.head(k) = (-ci.head(k)).array().exp();
}

// Conditional mean and raw variance (unscaled, base variance 1 + ddiag) of a
// single point given values at the gathered rows.
void point_conditional(const Matrix& G, const Vector& x, const Vector& theta,
                       const Vector& dadd, double ddiag, const Vector& values, Matrix& M,
                       Vector& ci, Vector& B, double& mu, double& var_raw,
                       const char* context) {
  const int k = static_cast<int>(G.rows());
  if (k == 0) {
    mu = 0.0;
    var_raw = 1.0 + ddiag;
    return;
  }
  corr_pieces(G, k, x, theta, M, ci);
  for (int j = 0; j < k; ++j) M(j, j) = 1.0 + dadd[j];
  auto blk = M.topLeftCorner(k, k);
  Eigen::LLT<Eigen::Ref<Matrix>> llt(blk);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string(context) + ": conditioning block not positive definite");
  }
  auto Bh = B.head(k);
  Bh = ci.head(k);
  llt.solveInPlace(Bh);
  mu = Bh.dot(values.head(k));
  var_raw = 1.0 + ddiag - Bh.dot(ci.head(k));
  if (var_raw < 0.0) var_raw = 0.0;
}

int max_context_size(const std::vector<PointContext>& ctx) {
  int k = 1;
  for (const auto& c : ctx) k = std::max(k, static_cast<int>(c.nn.size()));
  return k;
}

}  // namespace

LatentPrediction predict_latent_sample(const HyperState& st, const Matrix& X_train,
                                       const Matrix& X_test, const PredictConfig& cfg) {
  const auto ctx = gather_contexts(X_train, X_test, cfg.m_predict);
  const int p = static_cast<int>(X_test.rows());
  const int kmax = max_context_size(ctx);
  Matrix M(kmax, kmax);
  Vector ci(kmax), B(kmax), vals(kmax), dadd(kmax);

  LatentPrediction out;
  out.mu.resize(p);
  out.sd.resize(p);
  for (int q = 0; q < p; ++q) {
    const auto& c = ctx[static_cast<std::size_t>(q)];
    const int k = static_cast<int>(c.nn.size());
    for (int j = 0; j < k; ++j) {
      vals[j] = st.log_lambda[c.nn[static_cast<std::size_t>(j)]];
      dadd[j] = st.g;
    }
    double mu = 0.0, var_raw = 0.0;
    point_conditional(c.G, X_test.row(q).transpose(), st.theta_lambda, dadd, st.g, vals,
                      M, ci, B, mu, var_raw, "predict_latent");
    out.mu[q] = mu;
    out.sd[q] = std::sqrt(st.tau2_lambda * var_raw);
  }
  return out;
}

Vector lambda_plugin(const LatentPrediction& lp, const PredictConfig& cfg, Rng& rng) {
  const int p = static_cast<int>(lp.mu.size());
  Vector lam(p);
  switch (cfg.lambda_mode) {
    case LambdaMode::UpperQuantile: {
      const double z = normal_quantile(cfg.quantile);
      for (int q = 0; q < p; ++q) lam[q] = std::exp(lp.mu[q] + z * lp.sd[q]);
      break;
    }
    case LambdaMode::Mean:
      for (int q = 0; q < p; ++q) lam[q] = std::exp(lp.mu[q]);
      break;
    case LambdaMode::Sample:
      for (int q = 0; q < p; ++q) lam[q] = std::exp(lp.mu[q] + lp.sd[q] * rng.normal());
      break;
  }
  return lam;
}

MeanPrediction predict_mean_sample(const HyperState& st, const ReplicatedDesign& train,
                                   const Matrix& X_test, const Vector& lambda_test,
                                   const PredictConfig& cfg) {
  if (lambda_test.size() != X_test.rows()) {
    throw ConfigError("predict_mean_sample: lambda_test size mismatch");
  }
  const auto ctx = gather_contexts(train.X, X_test, cfg.m_predict);
  const int p = static_cast<int>(X_test.rows());
  const int kmax = max_context_size(ctx);
  Matrix M(kmax, kmax);
  Vector ci(kmax), B(kmax), vals(kmax), dadd(kmax);

  MeanPrediction out;
  out.mu.resize(p);
  out.var_pred.resize(p);
  out.var_conf.resize(p);
  for (int q = 0; q < p; ++q) {
    const auto& c = ctx[static_cast<std::size_t>(q)];
    const int k = static_cast<int>(c.nn.size());
    for (int j = 0; j < k; ++j) {
      const int site = c.nn[static_cast<std::size_t>(j)];
      vals[j] = train.ybar[site];
      dadd[j] = std::exp(st.log_lambda[site]) / static_cast<double>(train.a[site]);
    }
    double mu = 0.0, var_raw = 0.0;
    // ddiag = 0: the noise-free base variance; the plugged noise is added to
    // the predictive variance below so the confidence variance stays exact.
    point_conditional(c.G, X_test.row(q).transpose(), st.theta_y, dadd, 0.0, vals, M, ci,
                      B, mu, var_raw, "predict_mean");
    out.mu[q] = mu;
    out.var_conf[q] = st.tau2_n * var_raw;
    out.var_pred[q] = st.tau2_n * (var_raw + lambda_test[q]);
  }
  return out;
}

PredictionResult aggregate_samples(const Matrix& sample_mu, const Matrix& sample_var_pred,
                                   const Matrix& sample_var_conf, bool keep_samples) {
  const int T = static_cast<int>(sample_mu.rows());
  const int p = static_cast<int>(sample_mu.cols());
  if (T == 0) throw ConfigError("aggregate_samples: no samples");
  if (sample_var_pred.rows() != T || sample_var_conf.rows() != T ||
      sample_var_pred.cols() != p || sample_var_conf.cols() != p) {
    throw ConfigError("aggregate_samples: sample matrices disagree in shape");
  }
  PredictionResult out;
  out.samples = T;
  out.single_sample = (T == 1);
  out.mean.resize(p);
  out.var_pred.resize(p);
  out.var_conf.resize(p);
  for (int q = 0; q < p; ++q) {
    RunningMoments mm;
    for (int t = 0; t < T; ++t) mm.add(sample_mu(t, q));
    const double between = mm.variance();
    out.mean[q] = mm.mean;
    out.var_pred[q] = sample_var_pred.col(q).mean() + between;
    out.var_conf[q] = sample_var_conf.col(q).mean() + between;
  }
  if (keep_samples) {
    out.sample_mu = sample_mu;
    out.sample_var_pred = sample_var_pred;
    out.sample_var_conf = sample_var_conf;
  }
  return out;
}

namespace {

// Joint-path prediction for one sample through the stacked factors.
void predict_joint_sample(const HyperState& st, const ReplicatedDesign& train,
                          const VecchiaStructure& S, const Matrix& X_test,
                          const PredictConfig& cfg, Rng& noise_rng, Vector& mu,
                          Vector& var_pred, Vector& var_conf) {
  const int n = train.n();
  const int p = static_cast<int>(X_test.rows());
  Vector ell_ord(n), ybar_ord(n), dadd_mean(n);
  for (int pos = 0; pos < n; ++pos) {
    const int site = S.order[static_cast<std::size_t>(pos)];
    ell_ord[pos] = st.log_lambda[site];
    ybar_ord[pos] = train.ybar[site];
    dadd_mean[pos] = std::exp(st.log_lambda[site]) / static_cast<double>(train.a[site]);
  }
  const std::uint64_t order_seed = Rng(cfg.seed).split(11).seed();

  const StackedU lat = build_stacked_U(S, X_test, cfg.m_predict, st.theta_lambda,
                                       Vector::Constant(n, st.g),
                                       Vector::Constant(p, st.g), order_seed);
  const StackedPrediction latp = predict_from_stacked(lat, ell_ord);
  LatentPrediction lp;
  lp.mu = latp.mean;
  lp.sd = (st.tau2_lambda * latp.var_diag.array()).sqrt();
  const Vector lam_test = lambda_plugin(lp, cfg, noise_rng);

  const StackedU mean = build_stacked_U(S, X_test, cfg.m_predict, st.theta_y, dadd_mean,
                                        lam_test, order_seed);
  const StackedPrediction meanp = predict_from_stacked(mean, ybar_ord);
  mu = meanp.mean;
  var_pred = st.tau2_n * meanp.var_diag;
  var_conf = (var_pred.array() - st.tau2_n * lam_test.array()).max(0.0);
}

}  // namespace

PredictionResult predict(const ChainSamples& chain, const ReplicatedDesign& train,
                         const Matrix& X_test, const PredictConfig& cfg) {
  cfg.validate();
  if (chain.kept.empty()) throw ConfigError("predict: chain has no retained samples");
  if (X_test.cols() != train.X.cols()) {
    throw ConfigError("predict: test dimension does not match the training design");
  }
  const int T = static_cast<int>(chain.kept.size());
  const int p = static_cast<int>(X_test.rows());
  Rng noise_rng = Rng(cfg.seed).split(7);

  // Streaming reduction keeps memory at O(p); the full T x p matrices are
  // materialized only on request.
  const bool keep = cfg.keep_samples;
  Matrix mu, vp, vc;
  if (keep) {
    mu.resize(T, p);
    vp.resize(T, p);
    vc.resize(T, p);
  }
  std::vector<RunningMoments> mom(static_cast<std::size_t>(p));
  Vector acc_vp = Vector::Zero(p), acc_vc = Vector::Zero(p);
  auto absorb = [&](int t, const Vector& smu, const Vector& svp, const Vector& svc) {
    for (int q = 0; q < p; ++q) mom[static_cast<std::size_t>(q)].add(smu[q]);
    acc_vp += svp;
    acc_vc += svc;
    if (keep) {
      mu.row(t) = smu;
      vp.row(t) = svp;
      vc.row(t) = svc;
    }
  };

  if (cfg.pointwise) {
    for (int t = 0; t < T; ++t) {
      const HyperState& st = chain.kept[static_cast<std::size_t>(t)];
      const LatentPrediction lp = predict_latent_sample(st, train.X, X_test, cfg);
      const Vector lam = lambda_plugin(lp, cfg, noise_rng);
      const MeanPrediction mp = predict_mean_sample(st, train, X_test, lam, cfg);
      absorb(t, mp.mu, mp.var_pred, mp.var_conf);
    }
  } else {
    const VecchiaStructure S = build_structure(
        train.X, std::min(chain.config.m, train.n() - 1), chain.structure_seed);
    Vector smu, svp, svc;
    for (int t = 0; t < T; ++t) {
      predict_joint_sample(chain.kept[static_cast<std::size_t>(t)], train, S, X_test, cfg,
                           noise_rng, smu, svp, svc);
      absorb(t, smu, svp, svc);
    }
  }

  PredictionResult out;
  out.samples = T;
  out.single_sample = (T == 1);
  out.mean.resize(p);
  out.var_pred.resize(p);
  out.var_conf.resize(p);
  for (int q = 0; q < p; ++q) {
    const auto& mm = mom[static_cast<std::size_t>(q)];
    out.mean[q] = mm.mean;
    out.var_pred[q] = acc_vp[q] / T + mm.variance();
    out.var_conf[q] = acc_vc[q] / T + mm.variance();
  }
  if (keep) {
    out.sample_mu = mu;
    out.sample_var_pred = vp;
    out.sample_var_conf = vc;
  }
  return out;
}

Vector log_noise_at_sites(const ChainSamples& chain, int n_sites) {
  if (chain.kept.empty()) throw ConfigError("log_noise_at_sites: empty chain");
  Vector acc = Vector::Zero(n_sites);
  for (const auto& st : chain.kept) {
    if (st.log_lambda.size() != n_sites) {
      throw ConfigError("log_noise_at_sites: sample size mismatch");
    }
    acc.array() += st.log_lambda.array() + std::log(st.tau2_n);
  }
  return acc / static_cast<double>(chain.kept.size());
}

PredictionResult rescale_prediction(const PredictionResult& pred, const Preprocess& pre) {
  if (!pre.active) return pred;
  PredictionResult out = pred;
  const double s2 = pre.y_scale * pre.y_scale;
  out.mean = pred.mean.array() * pre.y_scale + pre.y_mean;
  out.var_pred = pred.var_pred * s2;
  out.var_conf = pred.var_conf * s2;
  if (pred.sample_mu.size() > 0) {
    out.sample_mu = pred.sample_mu.array() * pre.y_scale + pre.y_mean;
    out.sample_var_pred = pred.sample_var_pred * s2;
    out.sample_var_conf = pred.sample_var_conf * s2;
  }
  return out;
}

MetricReport compute_metrics(const PredictionResult& pred, const ReplicatedDesign& test,
                             double level) {
  const int p = test.n();
  if (pred.mean.size() != p) throw ConfigError("compute_metrics: size mismatch");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("compute_metrics: bad level");
  const double z = normal_quantile(0.5 + 0.5 * level);

  MetricReport r;
  double se_mean = 0.0, se_rep = 0.0, score = 0.0;
  double piw = 0.0, ciw = 0.0;
  long long covered = 0, total = 0;
  for (int i = 0; i < p; ++i) {
    const double dev = test.ybar[i] - pred.mean[i];
    const double ai = static_cast<double>(test.a[i]);
    se_mean += dev * dev;
    // sum_j (y_ij - mu_i)^2 = a_i (s2_i + (ybar_i - mu_i)^2)
    const double rep_sq = ai * (test.s2[i] + dev * dev);
    se_rep += rep_sq;
    const double v = pred.var_pred[i];
    score += -rep_sq / v - ai * std::log(v);
    const double sd_p = std::sqrt(pred.var_pred[i]);
    const double sd_c = std::sqrt(pred.var_conf[i]);
    piw += 2.0 * z * sd_p;
    ciw += 2.0 * z * sd_c;
    if (test.has_replicates()) {
      const double lo = pred.mean[i] - z * sd_p;
      const double hi = pred.mean[i] + z * sd_p;
      for (double y : test.reps[static_cast<std::size_t>(i)]) {
        covered += (y >= lo && y <= hi) ? 1 : 0;
        ++total;
      }
    }
  }
  const double N = static_cast<double>(test.N);
  r.rmse_mean = std::sqrt(se_mean / static_cast<double>(p));
  r.rmse_replicates = std::sqrt(se_rep / N);
  r.score = score / N;
  r.coverage = total > 0 ? static_cast<double>(covered) / static_cast<double>(total)
                         : std::numeric_limits<double>::quiet_NaN();
  r.mean_pi_width = piw / static_cast<double>(p);
  r.mean_ci_width = ciw / static_cast<double>(p);
  return r;
}

}  // namespace hetgp
