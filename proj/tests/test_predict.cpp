#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetgp/densegp.hpp"
#include "hetgp/mathutil.hpp"
#include "hetgp/predict.hpp"
#include "hetgp/rng.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

// Small synthetic training design with varied replication, plus one posterior
// state with known hyperparameters. Everything downstream is deterministic
// given these.
struct Setup {
  ReplicatedDesign train;
  HyperState st;
  Matrix X_test;
};

Setup make_setup(int n, int p, int d, std::uint64_t seed) {
  Rng rng(seed);
  Setup s;
  s.train.X.resize(n, d);
  s.train.a.resize(n);
  s.train.ybar.resize(n);
  s.train.s2.resize(n);
  long long N = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) s.train.X(i, k) = rng.uniform01();
    s.train.a[i] = 1 + static_cast<int>(rng.below(4));
    s.train.ybar[i] = rng.normal();
    s.train.s2[i] = s.train.a[i] > 1 ? 0.1 * rng.uniform01() : 0.0;
    N += s.train.a[i];
  }
  s.train.N = N;

  s.st.theta_y = Vector::Constant(d, 0.4);
  s.st.theta_lambda = Vector::Constant(d, 0.9);
  s.st.log_lambda.resize(n);
  for (int i = 0; i < n; ++i) s.st.log_lambda[i] = -1.0 + 0.5 * rng.normal();
  s.st.tau2_n = 1.4;
  s.st.tau2_lambda = 0.7;
  s.st.g = 1e-5;

  s.X_test.resize(p, d);
  for (int q = 0; q < p; ++q)
    for (int k = 0; k < d; ++k) s.X_test(q, k) = rng.uniform01();
  return s;
}

ChainSamples chain_of(const std::vector<HyperState>& states, int m,
                      std::uint64_t structure_seed) {
  ChainSamples ch;
  ch.kept = states;
  ch.config.m = m;
  ch.structure_seed = structure_seed;
  return ch;
}

}  // namespace

TEST_SUITE_BEGIN("predict");

TEST_CASE("prediction config validation") {
  PredictConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  PredictConfig bad = cfg;
  bad.m_predict = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.quantile = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.quantile = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.level = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("noise plug-in modes transform the latent conditional as documented") {
  LatentPrediction lp;
  lp.mu.resize(2);
  lp.mu << 0.2, -1.0;
  lp.sd.resize(2);
  lp.sd << 0.5, 0.3;

  PredictConfig cfg;
  cfg.quantile = 0.95;
  Rng rng(11);

  cfg.lambda_mode = LambdaMode::UpperQuantile;
  const Vector up = lambda_plugin(lp, cfg, rng);
  CHECK(up[0] == doctest::Approx(std::exp(0.2 + oracle::kQ95 * 0.5)).epsilon(1e-13));
  CHECK(up[1] == doctest::Approx(std::exp(-1.0 + oracle::kQ95 * 0.3)).epsilon(1e-13));

  cfg.lambda_mode = LambdaMode::Mean;
  const Vector mid = lambda_plugin(lp, cfg, rng);
  CHECK(mid[0] == doctest::Approx(std::exp(0.2)).epsilon(1e-13));
  CHECK(mid[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  for (int q = 0; q < 2; ++q) CHECK(up[q] > mid[q]);

  // Sample mode is seeded and collapses to the mean when the sd vanishes.
  cfg.lambda_mode = LambdaMode::Sample;
  Rng r1(21), r2(21);
  const Vector s1 = lambda_plugin(lp, cfg, r1);
  const Vector s2 = lambda_plugin(lp, cfg, r2);
  CHECK(s1 == s2);
  for (int q = 0; q < 2; ++q) CHECK(s1[q] > 0.0);

  lp.sd.setZero();
  Rng r3(31);
  const Vector s0 = lambda_plugin(lp, cfg, r3);
  CHECK(s0[0] == doctest::Approx(std::exp(0.2)).epsilon(1e-13));
}

TEST_CASE("mean-process conditional matches dense kriging with full context") {
  const Setup s = make_setup(20, 5, 2, 900);
  PredictConfig cfg;
  cfg.m_predict = 20;

  Vector lam_test(5);
  lam_test << 0.3, 0.1, 0.5, 0.2, 0.4;
  const MeanPrediction mp = predict_mean_sample(s.st, s.train, s.X_test, lam_test, cfg);

  Vector dadd(20);
  for (int i = 0; i < 20; ++i) {
    dadd[i] = std::exp(s.st.log_lambda[i]) / static_cast<double>(s.train.a[i]);
  }
  const DensePrediction with_noise = kriging_predict_dense(
      s.train.X, s.train.ybar, dadd, s.st.theta_y, s.st.tau2_n, s.X_test, lam_test);
  const DensePrediction noise_free = kriging_predict_dense(
      s.train.X, s.train.ybar, dadd, s.st.theta_y, s.st.tau2_n, s.X_test, Vector::Zero(5));

  for (int q = 0; q < 5; ++q) {
    CHECK(mp.mu[q] == doctest::Approx(with_noise.mean[q]).epsilon(1e-9));
    CHECK(mp.var_pred[q] == doctest::Approx(with_noise.cov(q, q)).epsilon(1e-9));
    CHECK(mp.var_conf[q] == doctest::Approx(noise_free.cov(q, q)).epsilon(1e-9));
    CHECK(mp.var_pred[q] - mp.var_conf[q] ==
          doctest::Approx(s.st.tau2_n * lam_test[q]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(predict_mean_sample(s.st, s.train, s.X_test, Vector::Zero(3), cfg),
                  ConfigError);
}

TEST_CASE("latent conditional matches dense kriging and reverts far from data") {
  const Setup s = make_setup(15, 4, 1, 901);
  PredictConfig cfg;
  cfg.m_predict = 15;

  const LatentPrediction lp = predict_latent_sample(s.st, s.train.X, s.X_test, cfg);
  const Vector gvec = Vector::Constant(15, s.st.g);
  const DensePrediction dp =
      kriging_predict_dense(s.train.X, s.st.log_lambda, gvec, s.st.theta_lambda,
                            s.st.tau2_lambda, s.X_test, Vector::Constant(4, s.st.g));
  for (int q = 0; q < 4; ++q) {
    CHECK(lp.mu[q] == doctest::Approx(dp.mean[q]).epsilon(1e-9));
    CHECK(lp.sd[q] * lp.sd[q] == doctest::Approx(dp.cov(q, q)).epsilon(1e-9));
  }

  // Far from every site the conditional reverts to the prior.
  Matrix far(1, 1);
  far << 400.0;
  const LatentPrediction fp = predict_latent_sample(s.st, s.train.X, far, cfg);
  CHECK(fp.mu[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(fp.sd[0] ==
        doctest::Approx(std::sqrt(s.st.tau2_lambda * (1.0 + s.st.g))).epsilon(1e-12));
}

TEST_CASE("sample aggregation follows the law of total variance") {
  // Two samples at one point: means 0 and 2 with unit within-sample variance
  // give a pooled mean of 1 and variance 1 + var({0,2}) = 3.
  Matrix mu(2, 1), vp(2, 1), vc(2, 1);
  mu << 0.0, 2.0;
  vp << 1.0, 1.0;
  vc << 0.5, 0.5;
  const PredictionResult r = aggregate_samples(mu, vp, vc, false);
  CHECK(r.mean[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.var_pred[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r.var_conf[0] == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(r.samples == 2);
  CHECK_FALSE(r.single_sample);
  CHECK(r.sample_mu.size() == 0);

  // Identical samples leave no between-sample term.
  Matrix mu2 = Matrix::Constant(3, 2, 0.7);
  Matrix v2 = Matrix::Constant(3, 2, 0.2);
  const PredictionResult flat = aggregate_samples(mu2, v2, v2, true);
  CHECK(flat.var_pred[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(flat.sample_mu == mu2);

  // Sample order cannot matter.
  Rng rng(902);
  Matrix a(5, 3), b(5, 3), c(5, 3);
  for (int t = 0; t < 5; ++t)
    for (int q = 0; q < 3; ++q) {
      a(t, q) = rng.normal();
      b(t, q) = 0.1 + rng.uniform01();
      c(t, q) = 0.05 + rng.uniform01();
    }
  const PredictionResult fwd = aggregate_samples(a, b, c, false);
  const auto perm = Rng(903).permutation(5);
  Matrix ap(5, 3), bp(5, 3), cp(5, 3);
  for (int t = 0; t < 5; ++t) {
    ap.row(t) = a.row(perm[static_cast<std::size_t>(t)]);
    bp.row(t) = b.row(perm[static_cast<std::size_t>(t)]);
    cp.row(t) = c.row(perm[static_cast<std::size_t>(t)]);
  }
  const PredictionResult rev = aggregate_samples(ap, bp, cp, false);
  for (int q = 0; q < 3; ++q) {
    CHECK(fwd.mean[q] == doctest::Approx(rev.mean[q]).epsilon(1e-12));
    CHECK(fwd.var_pred[q] == doctest::Approx(rev.var_pred[q]).epsilon(1e-12));
  }

  // A single retained sample is flagged.
  const PredictionResult one =
      aggregate_samples(mu.topRows(1), vp.topRows(1), vc.topRows(1), false);
  CHECK(one.single_sample);
  CHECK(one.var_pred[0] == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(aggregate_samples(Matrix(0, 2), Matrix(0, 2), Matrix(0, 2), false),
                  ConfigError);
  CHECK_THROWS_AS(aggregate_samples(mu, vp.topRows(1), vc, false), ConfigError);
}

TEST_CASE("posterior-averaged prediction equals the aggregated per-sample calls") {
  const Setup s = make_setup(18, 6, 2, 904);
  Setup s2 = make_setup(18, 6, 2, 905);
  s2.train = s.train;
  s2.X_test = s.X_test;

  PredictConfig cfg;
  cfg.m_predict = 10;
  cfg.keep_samples = true;

  const ChainSamples ch = chain_of({s.st, s2.st}, 17, 55);
  const PredictionResult agg = predict(ch, s.train, s.X_test, cfg);
  REQUIRE(agg.samples == 2);
  REQUIRE(agg.sample_mu.rows() == 2);

  Rng noise_rng = Rng(cfg.seed).split(7);
  Matrix mu(2, 6), vp(2, 6), vc(2, 6);
  for (int t = 0; t < 2; ++t) {
    const HyperState& st = ch.kept[static_cast<std::size_t>(t)];
    const LatentPrediction lp = predict_latent_sample(st, s.train.X, s.X_test, cfg);
    const Vector lam = lambda_plugin(lp, cfg, noise_rng);
    const MeanPrediction mp = predict_mean_sample(st, s.train, s.X_test, lam, cfg);
    mu.row(t) = mp.mu;
    vp.row(t) = mp.var_pred;
    vc.row(t) = mp.var_conf;
  }
  const PredictionResult ref = aggregate_samples(mu, vp, vc, false);
  for (int q = 0; q < 6; ++q) {
    CHECK(agg.mean[q] == doctest::Approx(ref.mean[q]).epsilon(1e-12));
    CHECK(agg.var_pred[q] == doctest::Approx(ref.var_pred[q]).epsilon(1e-12));
    CHECK(agg.var_conf[q] == doctest::Approx(ref.var_conf[q]).epsilon(1e-12));
    CHECK(agg.sample_mu(0, q) == mu(0, q));
    CHECK(agg.sample_var_pred(1, q) == vp(1, q));
  }

  // Intervals nest: predictive at least confidence, both nonnegative.
  for (int q = 0; q < 6; ++q) {
    CHECK(agg.var_pred[q] >= agg.var_conf[q]);
    CHECK(agg.var_conf[q] >= 0.0);
  }

  CHECK_THROWS_AS(predict(ChainSamples{}, s.train, s.X_test, cfg), ConfigError);
  CHECK_THROWS_AS(predict(ch, s.train, Matrix::Zero(2, 5), cfg), ConfigError);
}

TEST_CASE("joint path agrees with the dense reference under full conditioning") {
  const Setup s = make_setup(16, 4, 2, 906);
  PredictConfig cfg;
  cfg.pointwise = false;
  cfg.m_predict = 16 + 4;

  const ChainSamples ch = chain_of({s.st}, 15, 77);
  const PredictionResult jp = predict(ch, s.train, s.X_test, cfg);

  // Dense reference: plug the exact latent conditional in by hand, then do
  // exact kriging with that noise at the test points.
  const Vector gtr = Vector::Constant(16, s.st.g);
  const DensePrediction lat =
      kriging_predict_dense(s.train.X, s.st.log_lambda, gtr, s.st.theta_lambda,
                            s.st.tau2_lambda, s.X_test, Vector::Constant(4, s.st.g));
  Vector lam(4);
  const double z = normal_quantile(cfg.quantile);
  for (int q = 0; q < 4; ++q) lam[q] = std::exp(lat.mean[q] + z * std::sqrt(lat.cov(q, q)));

  Vector dadd(16);
  for (int i = 0; i < 16; ++i) {
    dadd[i] = std::exp(s.st.log_lambda[i]) / static_cast<double>(s.train.a[i]);
  }
  const DensePrediction mean = kriging_predict_dense(s.train.X, s.train.ybar, dadd,
                                                     s.st.theta_y, s.st.tau2_n, s.X_test, lam);
  for (int q = 0; q < 4; ++q) {
    CHECK(jp.mean[q] == doctest::Approx(mean.mean[q]).epsilon(1e-8));
    CHECK(jp.var_pred[q] == doctest::Approx(mean.cov(q, q)).epsilon(1e-8));
    CHECK(jp.var_pred[q] - jp.var_conf[q] ==
          doctest::Approx(s.st.tau2_n * lam[q]).epsilon(1e-8));
  }

  // With a single test point the joint and pointwise paths coincide.
  const Matrix one = s.X_test.topRows(1);
  PredictConfig pw = cfg;
  pw.pointwise = true;
  const PredictionResult a = predict(ch, s.train, one, pw);
  const PredictionResult b = predict(ch, s.train, one, cfg);
  CHECK(a.mean[0] == doctest::Approx(b.mean[0]).epsilon(1e-9));
  CHECK(a.var_pred[0] == doctest::Approx(b.var_pred[0]).epsilon(1e-9));
}

TEST_CASE("posterior log noise at the training sites averages over the chain") {
  HyperState s1, s2;
  s1.tau2_n = 1.0;
  s1.log_lambda.resize(2);
  s1.log_lambda << 0.0, 1.0;
  s2.tau2_n = std::exp(2.0);
  s2.log_lambda.resize(2);
  s2.log_lambda << -1.0, 0.0;
  const ChainSamples ch = chain_of({s1, s2}, 1, 0);

  const Vector ln = log_noise_at_sites(ch, 2);
  CHECK(ln[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(ln[1] == doctest::Approx(1.5).epsilon(1e-13));

  CHECK_THROWS_AS(log_noise_at_sites(ChainSamples{}, 2), ConfigError);
  CHECK_THROWS_AS(log_noise_at_sites(ch, 3), ConfigError);
}

TEST_CASE("rescaling maps predictions back to the original output units") {
  PredictionResult pred;
  pred.mean.resize(2);
  pred.mean << 2.5, 4.0;
  pred.var_pred.resize(2);
  pred.var_pred << 4.0, 2.25;
  pred.var_conf.resize(2);
  pred.var_conf << 1.0, 0.25;
  pred.samples = 3;

  Preprocess pre;
  pre.active = true;
  pre.y_mean = 2.0;
  pre.y_scale = 3.0;

  const PredictionResult out = rescale_prediction(pred, pre);
  CHECK(out.mean[0] == doctest::Approx(9.5).epsilon(1e-14));
  CHECK(out.mean[1] == doctest::Approx(14.0).epsilon(1e-14));
  CHECK(out.var_pred[0] == doctest::Approx(36.0).epsilon(1e-14));
  CHECK(out.var_conf[1] == doctest::Approx(2.25).epsilon(1e-14));

  Preprocess off;
  const PredictionResult same = rescale_prediction(pred, off);
  CHECK(same.mean == pred.mean);
  CHECK(same.var_pred == pred.var_pred);
}

TEST_CASE("held-out metrics reproduce the frozen reference") {
  const PredictionResult pred = [] {
    PredictionResult p;
    p.mean.resize(2);
    p.mean << 2.5, 4.0;
    p.var_pred.resize(2);
    p.var_pred << 4.0, 2.25;
    p.var_conf.resize(2);
    p.var_conf << 1.0, 0.25;
    p.samples = 5;
    return p;
  }();

  RawCampaign c;
  c.X.resize(5, 1);
  c.X << 0.0, 0.0, 0.0, 1.0, 1.0;
  c.y.resize(5);
  c.y << 1.0, 2.0, 3.0, 4.0, 6.0;

  const ReplicatedDesign with_reps = build_replicated_design(c, 0.0, true);
  const MetricReport m = compute_metrics(pred, with_reps, 0.9);
  CHECK(m.rmse_mean == doctest::Approx(oracle::kMetricRmseMean).epsilon(1e-12));
  CHECK(m.rmse_replicates == doctest::Approx(oracle::kMetricRmseReps).epsilon(1e-12));
  CHECK(m.score == doctest::Approx(oracle::kMetricScore).epsilon(1e-12));
  CHECK(m.coverage == doctest::Approx(oracle::kMetricCoverage).epsilon(1e-12));
  CHECK(m.mean_pi_width == doctest::Approx(oracle::kMetricPiWidth).epsilon(1e-12));
  CHECK(m.mean_ci_width == doctest::Approx(oracle::kMetricCiWidth).epsilon(1e-12));

  // Without raw replicate values every statistic except coverage survives.
  const ReplicatedDesign no_reps = build_replicated_design(c, 0.0, false);
  const MetricReport m2 = compute_metrics(pred, no_reps, 0.9);
  CHECK(m2.rmse_replicates == doctest::Approx(m.rmse_replicates).epsilon(1e-14));
  CHECK(m2.score == doctest::Approx(m.score).epsilon(1e-14));
  CHECK(std::isnan(m2.coverage));

  CHECK_THROWS_AS(compute_metrics(pred, with_reps, 0.0), ConfigError);
  CHECK_THROWS_AS(compute_metrics(pred, with_reps, 1.0), ConfigError);
  PredictionResult wrong = pred;
  wrong.mean.resize(3);
  wrong.mean.setZero();
  CHECK_THROWS_AS(compute_metrics(wrong, with_reps, 0.9), ConfigError);
}

TEST_SUITE_END();
