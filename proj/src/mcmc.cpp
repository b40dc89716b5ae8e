#include "hetgp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/Cholesky>

#include "hetgp/kernel.hpp"
#include "hetgp/likelihood.hpp"
#include "hetgp/mathutil.hpp"

namespace hetgp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kMaxShrinks = 1000;
constexpr double kRetryJitter = 1e-7;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void McmcConfig::validate() const {
  if (total_iters < 1) throw ConfigError("mcmc: total_iters must be >= 1");
  if (burn_in < 0) throw ConfigError("mcmc: burn_in must be >= 0");
  if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
  if (total_iters - burn_in < thin) {
    throw ConfigError("mcmc: no samples would be retained (total_iters - burn_in < thin)");
  }
  if (m < 1) throw ConfigError("mcmc: m must be >= 1");
  if (!(g_lambda > 0.0)) throw ConfigError("mcmc: g_lambda must be positive");
}

double derive_theta_rate(const Matrix& X, double shape) {
  if (shape <= 1.0) throw ConfigError("derive_theta_rate: needs shape > 1 for a mode");
  const int n = static_cast<int>(X.rows());
  double maxd2 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < X.cols(); ++k) {
        const double d = X(i, k) - X(j, k);
        s += d * d;
      }
      maxd2 = std::max(maxd2, s);
    }
  }
  if (maxd2 == 0.0) throw ConfigError("derive_theta_rate: all inputs coincide");
  // Gamma mode (shape-1)/rate placed at 10% of the squared diameter.
  return (shape - 1.0) / (0.1 * maxd2);
}

MhOutcome mh_sliding_update(double current, double current_log_posterior,
                            const std::function<double(double)>& log_posterior,
                            Rng& rng) {
  const double prop = rng.uniform(0.5 * current, 2.0 * current);
  const double lp = log_posterior(prop);
  if (!std::isfinite(lp)) return {current, false};
  const double log_alpha = lp - current_log_posterior + std::log(current / prop);
  if (std::log(rng.uniform01()) < log_alpha) return {prop, true};
  return {current, false};
}

EssOutcome ess_update(const Vector& current, double current_loglik,
                      const std::function<double(const Vector&)>& loglik,
                      const Vector& prior_draw, Rng& rng) {
  if (prior_draw.size() != current.size()) {
    throw ConfigError("ess_update: prior draw size mismatch");
  }
  const double threshold = current_loglik + std::log(rng.uniform01());
  double gamma = rng.uniform(0.0, kTwoPi);
  double lo = gamma - kTwoPi;
  double hi = gamma;
  EssOutcome out;
  for (int it = 0; it < kMaxShrinks; ++it) {
    out.state = std::cos(gamma) * current + std::sin(gamma) * prior_draw;
    double ll = loglik(out.state);
    if (!std::isfinite(ll)) ll = kNegInf;
    if (ll > threshold) {
      out.loglik = ll;
      return out;
    }
    ++out.shrinks;
    if (gamma < 0.0) {
      lo = gamma;
    } else {
      hi = gamma;
    }
    gamma = rng.uniform(lo, hi);
  }
  throw NumericError("ess_update: slice did not terminate after " +
                     std::to_string(kMaxShrinks) + " shrinks");
}

namespace {

// Isotropic profile-grid fit of a homoskedastic surrogate, used only to seed
// the chain. Returns the best lengthscale, noise ratio, and profiled scale.
struct GridFit {
  double theta = 0.0;
  double g = 0.0;
  double tau2 = 0.0;
  double loglik = kNegInf;
};

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  for (int i = 0; i < count; ++i) {
    const double f = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
    v[static_cast<std::size_t>(i)] = std::exp(llo + f * (lhi - llo));
  }
  return v;
}

double max_sq_dist(const Matrix& X) {
  double maxd2 = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
      maxd2 = std::max(maxd2, (X.row(i) - X.row(j)).squaredNorm());
    }
  }
  return maxd2;
}

GridFit profile_grid_fit(const ReplicatedDesign& dd, const ScalePrior& prior, int m,
                         std::uint64_t seed) {
  const int n = dd.n();
  const int d = dd.dim();
  const double maxd2 = max_sq_dist(dd.X);
  if (maxd2 == 0.0) throw ConfigError("initialize: all input sites coincide");
  const auto thetas = logspace(0.005 * maxd2, 2.0 * maxd2, 12);
  const auto gs = logspace(1e-4, 10.0, 10);

  const VecchiaStructure S = build_structure(dd.X, std::min(m, n - 1), seed);
  CachedKernelColumns ck(S);
  Vector dadd(n);
  GridFit best;
  for (double th : thetas) {
    ck.rebuild(Vector::Constant(d, th));
    for (double g : gs) {
      for (int p = 0; p < n; ++p) {
        dadd[p] = g / static_cast<double>(dd.a[S.order[static_cast<std::size_t>(p)]]);
      }
      ck.set_diag(dadd);
      LoglikResult ll;
      try {
        const SparseU U = build_U(S, ck);
        ll = vecchia_woodbury_loglik(dd, S, U, Vector::Constant(n, g), prior);
      } catch (const NumericError&) {
        continue;
      }
      if (ll.loglik > best.loglik) {
        best = {th, g, ll.tau2_hat, ll.loglik};
      }
    }
  }
  if (!std::isfinite(best.loglik)) {
    throw NumericError("initialize: every profile-grid fit failed");
  }
  return best;
}

// Nugget-smoothed kriging of per-site values at the sites themselves (each
// site conditions on its nearest neighbours, itself included).
Vector smooth_at_sites(const Matrix& X, const Vector& values, const IntVector& a,
                       double theta_iso, double g, int m) {
  const int n = static_cast<int>(X.rows());
  const int k = std::min(m, n);
  const Vector theta = Vector::Constant(X.cols(), theta_iso);
  Vector out(n);
  Matrix Scc(k, k);
  Vector Sci(k);
  for (int i = 0; i < n; ++i) {
    const auto c = nearest_rows(X, X.row(i).transpose(), k);
    const int kk = static_cast<int>(c.size());
    for (int jj = 0; jj < kk; ++jj) {
      const int cj = c[static_cast<std::size_t>(jj)];
      Scc(jj, jj) = 1.0 + g / static_cast<double>(a[cj]);
      for (int ii = jj + 1; ii < kk; ++ii) {
        const int ci = c[static_cast<std::size_t>(ii)];
        const double v = kernel_value(X.row(ci).transpose(), X.row(cj).transpose(), theta);
        Scc(ii, jj) = v;
        Scc(jj, ii) = v;
      }
      Sci[jj] = kernel_value(X.row(cj).transpose(), X.row(i).transpose(), theta);
    }
    auto blk = Scc.topLeftCorner(kk, kk);
    Eigen::LLT<Eigen::Ref<Matrix>> llt(blk);
    if (llt.info() != Eigen::Success) {
      throw NumericError("initialize: smoothing solve failed at site " + std::to_string(i));
    }
    Vector B = Sci.head(kk);
    llt.solveInPlace(B);
    double mu = 0.0;
    for (int jj = 0; jj < kk; ++jj) mu += B[jj] * values[c[static_cast<std::size_t>(jj)]];
    out[i] = mu;
  }
  return out;
}

double pooled_variance(const ReplicatedDesign& d) {
  double mu = 0.0;
  for (int i = 0; i < d.n(); ++i) mu += static_cast<double>(d.a[i]) * d.ybar[i];
  mu /= static_cast<double>(d.N);
  double v = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    const double dev = d.ybar[i] - mu;
    v += static_cast<double>(d.a[i]) * (d.s2[i] + dev * dev);
  }
  return v / static_cast<double>(d.N);
}

}  // namespace

HyperState initialize(const ReplicatedDesign& d, const McmcConfig& cfg,
                      const PriorConfig& pri) {
  d.validate();
  const int n = d.n();
  const int dim = d.dim();
  const double v = pooled_variance(d);
  if (v == 0.0) {
    throw ConfigError(
        "initialize: outputs have zero variance; jitter the responses before fitting");
  }
  const double rate_y =
      pri.theta_rate_y > 0.0 ? pri.theta_rate_y : derive_theta_rate(d.X, pri.theta_shape);
  const double rate_l = pri.theta_rate_lambda > 0.0 ? pri.theta_rate_lambda : rate_y;

  HyperState st;
  st.g = cfg.g_lambda;
  if (cfg.init == InitStrategy::ConstantFraction) {
    st.log_lambda = Vector::Constant(n, std::log(0.1 * v));
    const double med_y = gamma_quantile(0.5, pri.theta_shape, rate_y);
    const double med_l = gamma_quantile(0.5, pri.theta_shape, rate_l);
    st.theta_y = Vector::Constant(dim, med_y);
    st.theta_lambda =
        Vector::Constant(dim, cfg.constrain_theta ? std::max(med_l, 2.0 * med_y) : med_l);
    return st;
  }

  // Smoothed-residual start: homoskedastic pre-fit for the mean, pooled
  // residual variances, then a second pre-fit on their centred logs.
  const std::uint64_t grid_seed = Rng(cfg.seed).split(3).seed();
  const GridFit fit_mean = profile_grid_fit(d, pri.scale_y, cfg.m, grid_seed);
  const int m_smooth = std::min(std::max(2 * cfg.m, 30), n);
  const Vector yhat = smooth_at_sites(d.X, d.ybar, d.a, fit_mean.theta, fit_mean.g, m_smooth);

  Vector h(n);
  const double floor = 1e-10 * v;
  for (int i = 0; i < n; ++i) {
    const double dev = d.ybar[i] - yhat[i];
    h[i] = std::log(std::max(d.s2[i] + dev * dev, floor));
  }
  const double hbar = h.mean();

  ReplicatedDesign dh;
  dh.X = d.X;
  dh.a = IntVector::Ones(n);
  dh.ybar = h.array() - hbar;
  dh.s2 = Vector::Zero(n);
  dh.N = n;
  const GridFit fit_lat = profile_grid_fit(dh, pri.scale_lambda, cfg.m, grid_seed);
  const Vector hs =
      smooth_at_sites(d.X, dh.ybar, dh.a, fit_lat.theta, fit_lat.g, m_smooth);

  // tau2 * exp(ell) should reproduce the smoothed residual variances, so the
  // mean-fit scale is divided out of them.
  st.log_lambda = hs.array() + hbar - std::log(fit_mean.tau2);
  st.theta_y = Vector::Constant(dim, fit_mean.theta);
  const double th_l =
      cfg.constrain_theta ? std::max(fit_lat.theta, 2.0 * fit_mean.theta) : fit_lat.theta;
  st.theta_lambda = Vector::Constant(dim, th_l);
  return st;
}

namespace {

class GibbsEngine {
public:
  GibbsEngine(const ReplicatedDesign& d, const McmcConfig& cfg, const PriorConfig& pri,
              const HyperState& start)
      : d_(d),
        cfg_(cfg),
        pri_(pri),
        rng_(Rng(cfg.seed).split(2)),
        structure_seed_(Rng(cfg.seed).split(1).seed()),
        S_(build_structure(d.X, std::min(cfg.m, d.n() - 1), structure_seed_)),
        ckY_(std::make_unique<CachedKernelColumns>(S_)),
        ckY_alt_(std::make_unique<CachedKernelColumns>(S_)),
        ckL_(std::make_unique<CachedKernelColumns>(S_)),
        ckL_alt_(std::make_unique<CachedKernelColumns>(S_)) {
    const int n = d_.n();
    theta_y_ = start.theta_y;
    theta_l_ = start.theta_lambda;
    g_ = start.g > 0.0 ? start.g : cfg_.g_lambda;
    rate_y_ = pri_.theta_rate_y > 0.0 ? pri_.theta_rate_y
                                      : derive_theta_rate(d_.X, pri_.theta_shape);
    rate_l_ = pri_.theta_rate_lambda > 0.0 ? pri_.theta_rate_lambda : rate_y_;
    if (theta_y_.size() != d_.dim() || theta_l_.size() != d_.dim() ||
        start.log_lambda.size() != n) {
      throw ConfigError("gibbs_fit: starting state sizes disagree with the design");
    }
    validate_lengthscales(theta_y_);
    validate_lengthscales(theta_l_);
    if (cfg_.constrain_theta && !cfg_.freeze_latent) {
      for (int k = 0; k < d_.dim(); ++k) {
        if (!(theta_l_[k] > theta_y_[k])) {
          throw ConfigError(
              "gibbs_fit: constrained start needs theta_lambda > theta_y componentwise");
        }
      }
    }

    a_ord_.resize(n);
    ell_ord_.resize(n);
    for (int p = 0; p < n; ++p) {
      const int site = S_.order[static_cast<std::size_t>(p)];
      a_ord_[p] = d_.a[site];
      ell_ord_[p] = start.log_lambda[site];
    }
    lambda_site_.resize(n);
    dadd_y_.resize(n);
    refresh_lambda(ell_ord_);

    ckY_->rebuild(theta_y_);
    ckY_->set_diag(dadd_y_);
    Uy_ = build_state_factor(*ckY_, "mean-process factor at the starting state");
    llY_ = vecchia_woodbury_loglik(d_, S_, Uy_, lambda_site_, pri_.scale_y);

    ckL_->rebuild(theta_l_);
    ckL_->set_diag(Vector::Constant(n, g_));
    Ul_ = build_state_factor(*ckL_, "latent factor at the starting state");
    llL_ = vecchia_latent_loglik(S_, Ul_, ell_ord_, pri_.scale_lambda);
  }

  ChainSamples run() {
    ChainSamples out;
    out.config = cfg_;
    out.priors = pri_;
    out.structure_seed = structure_seed_;
    out.accept_theta_y.assign(static_cast<std::size_t>(d_.dim()), 0);
    out.accept_theta_lambda.assign(static_cast<std::size_t>(d_.dim()), 0);
    out.mh_attempts = cfg_.total_iters;
    out.kept.reserve(static_cast<std::size_t>(cfg_.kept_count()));

    for (int t = 1; t <= cfg_.total_iters; ++t) {
      iteration_ = t;
      for (int j = 0; j < d_.dim(); ++j) {
        if (!cfg_.freeze_latent) {
          if (update_theta_lambda(j)) ++out.accept_theta_lambda[static_cast<std::size_t>(j)];
        }
        if (update_theta_y(j)) ++out.accept_theta_y[static_cast<std::size_t>(j)];
      }
      if (!cfg_.freeze_latent) {
        out.shrink_counts.push_back(ess_move());
        if (cfg_.estimate_g) update_g();
      }
      if (t > cfg_.burn_in && (t - cfg_.burn_in) % cfg_.thin == 0) {
        out.kept.push_back(snapshot());
      }
    }
    return out;
  }

private:
  void refresh_lambda(const Vector& ell_ord) {
    const int n = d_.n();
    for (int p = 0; p < n; ++p) {
      const double lam = std::exp(ell_ord[p]);
      lambda_site_[S_.order[static_cast<std::size_t>(p)]] = lam;
      dadd_y_[p] = lam / static_cast<double>(a_ord_[p]);
    }
  }

  static bool lambda_ok(const Vector& ell_ord) {
    for (Eigen::Index p = 0; p < ell_ord.size(); ++p) {
      const double lam = std::exp(ell_ord[p]);
      if (!(lam > 0.0) || !std::isfinite(lam)) return false;
    }
    return true;
  }

  // State rebuilds must succeed; a proposal evaluation may fail softly.
  SparseU build_state_factor(const CachedKernelColumns& ck, const char* what) {
    try {
      return build_U(S_, ck);
    } catch (const NumericError&) {
      try {
        return build_U(S_, ck, kRetryJitter);
      } catch (const NumericError& e) {
        throw NumericError("gibbs_fit: " + std::string(what) + " failed at iteration " +
                           std::to_string(iteration_) + " even with a diagonal ridge (" +
                           e.what() + ")");
      }
    }
  }

  bool try_build(const CachedKernelColumns& ck, SparseU& out) {
    try {
      out = build_U(S_, ck);
      return true;
    } catch (const NumericError&) {
    }
    try {
      out = build_U(S_, ck, kRetryJitter);
      return true;
    } catch (const NumericError&) {
      return false;
    }
  }

  bool update_theta_lambda(int j) {
    const double cur = theta_l_[j];
    const double cur_lp = llL_.loglik + gamma_log_pdf(cur, pri_.theta_shape, rate_l_);
    SparseU pending;
    LoglikResult pending_ll;
    auto logpost = [&](double cand) -> double {
      if (cfg_.constrain_theta && cand <= theta_y_[j]) return kNegInf;
      const double lp = gamma_log_pdf(cand, pri_.theta_shape, rate_l_);
      if (!std::isfinite(lp)) return kNegInf;
      Vector th = theta_l_;
      th[j] = cand;
      ckL_alt_->rebuild(th);
      ckL_alt_->set_diag(Vector::Constant(d_.n(), g_));
      if (!try_build(*ckL_alt_, pending)) return kNegInf;
      pending_ll = vecchia_latent_loglik(S_, pending, ell_ord_, pri_.scale_lambda);
      if (!std::isfinite(pending_ll.loglik)) return kNegInf;
      return pending_ll.loglik + lp;
    };
    const MhOutcome mh = mh_sliding_update(cur, cur_lp, logpost, rng_);
    if (mh.accepted) {
      theta_l_[j] = mh.value;
      std::swap(ckL_, ckL_alt_);
      Ul_ = std::move(pending);
      llL_ = pending_ll;
    }
    return mh.accepted;
  }

  bool update_theta_y(int j) {
    const double cur = theta_y_[j];
    const double cur_lp = llY_.loglik + gamma_log_pdf(cur, pri_.theta_shape, rate_y_);
    SparseU pending;
    LoglikResult pending_ll;
    auto logpost = [&](double cand) -> double {
      if (cfg_.constrain_theta && !cfg_.freeze_latent && cand >= theta_l_[j]) return kNegInf;
      const double lp = gamma_log_pdf(cand, pri_.theta_shape, rate_y_);
      if (!std::isfinite(lp)) return kNegInf;
      Vector th = theta_y_;
      th[j] = cand;
      ckY_alt_->rebuild(th);
      ckY_alt_->set_diag(dadd_y_);
      if (!try_build(*ckY_alt_, pending)) return kNegInf;
      pending_ll = vecchia_woodbury_loglik(d_, S_, pending, lambda_site_, pri_.scale_y);
      if (!std::isfinite(pending_ll.loglik)) return kNegInf;
      return pending_ll.loglik + lp;
    };
    const MhOutcome mh = mh_sliding_update(cur, cur_lp, logpost, rng_);
    if (mh.accepted) {
      theta_y_[j] = mh.value;
      std::swap(ckY_, ckY_alt_);
      Uy_ = std::move(pending);
      llY_ = pending_ll;
    }
    return mh.accepted;
  }

  int ess_move() {
    const int n = d_.n();
    Vector z(n);
    for (int p = 0; p < n; ++p) z[p] = rng_.normal();
    const Vector nu = std::sqrt(llL_.tau2_hat) * Ul_.solve_transpose(z);

    SparseU pending;
    LoglikResult pending_ll;
    Vector lam_site(n), dadd(n);
    auto loglik = [&](const Vector& ell) -> double {
      if (!lambda_ok(ell)) return kNegInf;
      for (int p = 0; p < n; ++p) {
        const double lam = std::exp(ell[p]);
        lam_site[S_.order[static_cast<std::size_t>(p)]] = lam;
        dadd[p] = lam / static_cast<double>(a_ord_[p]);
      }
      ckY_->set_diag(dadd);
      if (!try_build(*ckY_, pending)) return kNegInf;
      pending_ll = vecchia_woodbury_loglik(d_, S_, pending, lam_site, pri_.scale_y);
      return pending_ll.loglik;
    };
    EssOutcome ess;
    try {
      ess = ess_update(ell_ord_, llY_.loglik, loglik, nu, rng_);
    } catch (const NumericError& e) {
      throw NumericError("gibbs_fit: iteration " + std::to_string(iteration_) + ": " +
                         e.what());
    }
    ell_ord_ = ess.state;
    refresh_lambda(ell_ord_);
    ckY_->set_diag(dadd_y_);
    Uy_ = std::move(pending);
    llY_ = pending_ll;
    // The latent likelihood moves with ell even though its factor does not.
    llL_ = vecchia_latent_loglik(S_, Ul_, ell_ord_, pri_.scale_lambda);
    return ess.shrinks;
  }

  void update_g() {
    const double cur = g_;
    const double cur_lp = llL_.loglik + gamma_log_pdf(cur, pri_.g_shape, pri_.g_rate);
    SparseU pending;
    LoglikResult pending_ll;
    auto logpost = [&](double cand) -> double {
      const double lp = gamma_log_pdf(cand, pri_.g_shape, pri_.g_rate);
      if (!std::isfinite(lp)) return kNegInf;
      ckL_->set_diag(Vector::Constant(d_.n(), cand));
      if (!try_build(*ckL_, pending)) return kNegInf;
      pending_ll = vecchia_latent_loglik(S_, pending, ell_ord_, pri_.scale_lambda);
      if (!std::isfinite(pending_ll.loglik)) return kNegInf;
      return pending_ll.loglik + lp;
    };
    const MhOutcome mh = mh_sliding_update(cur, cur_lp, logpost, rng_);
    if (mh.accepted) {
      g_ = mh.value;
      Ul_ = std::move(pending);
      llL_ = pending_ll;
    }
    // Leave the cached diagonal at the accepted nugget for later prior draws.
    ckL_->set_diag(Vector::Constant(d_.n(), g_));
  }

  HyperState snapshot() const {
    HyperState st;
    st.theta_y = theta_y_;
    st.theta_lambda = theta_l_;
    st.log_lambda.resize(d_.n());
    for (int p = 0; p < d_.n(); ++p) {
      st.log_lambda[S_.order[static_cast<std::size_t>(p)]] = ell_ord_[p];
    }
    st.tau2_n = llY_.tau2_hat;
    st.tau2_lambda = llL_.tau2_hat;
    st.g = g_;
    return st;
  }

  const ReplicatedDesign& d_;
  McmcConfig cfg_;
  PriorConfig pri_;
  Rng rng_;
  std::uint64_t structure_seed_;
  VecchiaStructure S_;
  std::unique_ptr<CachedKernelColumns> ckY_, ckY_alt_, ckL_, ckL_alt_;
  SparseU Uy_, Ul_;
  Vector theta_y_, theta_l_;
  Vector ell_ord_;      // position order
  Vector lambda_site_;  // site order
  Vector dadd_y_;       // position order
  IntVector a_ord_;
  double g_ = 1e-6;
  double rate_y_ = 0.0, rate_l_ = 0.0;
  LoglikResult llY_, llL_;
  int iteration_ = 0;
};

}  // namespace

ChainSamples gibbs_fit(const ReplicatedDesign& d, const McmcConfig& cfg,
                       const PriorConfig& pri, const std::optional<HyperState>& start) {
  cfg.validate();
  d.validate();
  if (d.n() < 2) throw ConfigError("gibbs_fit: need at least two unique sites");
  const HyperState st = start ? *start : initialize(d, cfg, pri);
  GibbsEngine engine(d, cfg, pri, st);
  return engine.run();
}

}  // namespace hetgp
