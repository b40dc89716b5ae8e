#include "hetgp/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <Eigen/Cholesky>

#include "hetgp/densegp.hpp"
#include "hetgp/kernel.hpp"
#include "hetgp/likelihood.hpp"
#include "hetgp/mathutil.hpp"
#include "hetgp/mcmc.hpp"
#include "hetgp/testbeds.hpp"

namespace hetgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::vector<TimingRow> ess_timing_sweep(const std::vector<int>& site_counts, int factor,
                                        int iters, std::uint64_t seed) {
  if (factor < 1) throw ConfigError("benchmark: factor must be >= 1");
  if (iters < 1) throw ConfigError("benchmark: iters must be >= 1");
  std::vector<TimingRow> rows;
  const ScalePrior prior{10.0, 4.0};
  const double g = 1e-6;

  for (std::size_t idx = 0; idx < site_counts.size(); ++idx) {
    const int n = site_counts[idx];
    if (n < 2) throw ConfigError("benchmark: site counts must be >= 2");
    const long long N = static_cast<long long>(n) * factor;
    if (N > kDenseCap) {
      throw ConfigError("benchmark: N = " + std::to_string(N) +
                        " exceeds the dense cap; lower the factor or the site count");
    }

    TestbedSpec spec;
    spec.kind = TestbedSpec::Kind::ForresterHet;
    spec.n = n;
    spec.reps.kind = RepSpec::Kind::Fixed;
    spec.reps.fixed = factor;
    Rng master = Rng(seed).split(idx);
    const SimulatedCampaign sim = simulate(spec, master.seed());
    const ReplicatedDesign d = build_replicated_design(sim.raw, 0.0, false);

    const Vector theta_y = Vector::Constant(1, 0.1);
    const Vector theta_l = Vector::Constant(1, 0.4);
    double pooled = 0.0;
    for (int i = 0; i < d.n(); ++i) {
      pooled += static_cast<double>(d.a[i]) * (d.s2[i] + d.ybar[i] * d.ybar[i]);
    }
    pooled /= static_cast<double>(d.N);
    const double ell0 = std::log(0.1 * pooled);

    // Expanded representation: one latent value per run.
    {
      Rng rng = master.split(1);
      TimingRow row{"full-dense", n, N, iters, 0.0, 0.0, 0};
      const auto t0 = Clock::now();
      const RawCampaign& raw = sim.raw;
      Matrix Kl = kernel_matrix_sym(raw.X, theta_l);
      Kl.diagonal().array() += g;
      const auto llt = chol_spd(std::move(Kl), 0.0, "benchmark full-dense");
      Vector ell = Vector::Constant(N, ell0);
      long long evals = 0;
      auto loglik = [&](const Vector& e) {
        ++evals;
        return loglik_full_N(raw.y, raw.X, e.array().exp(), theta_y, prior).loglik;
      };
      double cur = loglik(ell);
      row.setup_seconds = seconds_since(t0);
      const auto t1 = Clock::now();
      Vector z(N);
      for (int it = 0; it < iters; ++it) {
        for (Eigen::Index r = 0; r < N; ++r) z[r] = rng.normal();
        const Vector nu = llt.matrixL() * z;
        const EssOutcome out = ess_update(ell, cur, loglik, nu, rng);
        ell = out.state;
        cur = out.loglik;
      }
      row.per_iter_seconds = seconds_since(t1) / iters;
      row.likelihood_evals = evals;
      rows.push_back(row);
    }

    // Collapsed, dense in the unique sites.
    {
      Rng rng = master.split(2);
      TimingRow row{"unique-dense", n, N, iters, 0.0, 0.0, 0};
      const auto t0 = Clock::now();
      Matrix Kl = kernel_matrix_sym(d.X, theta_l);
      Kl.diagonal().array() += g;
      const auto llt = chol_spd(std::move(Kl), 0.0, "benchmark unique-dense");
      Vector ell = Vector::Constant(n, ell0);
      long long evals = 0;
      auto loglik = [&](const Vector& e) {
        ++evals;
        return woodbury_loglik(d, e.array().exp(), theta_y, prior).loglik;
      };
      double cur = loglik(ell);
      row.setup_seconds = seconds_since(t0);
      const auto t1 = Clock::now();
      Vector z(n);
      for (int it = 0; it < iters; ++it) {
        for (int r = 0; r < n; ++r) z[r] = rng.normal();
        const Vector nu = llt.matrixL() * z;
        const EssOutcome out = ess_update(ell, cur, loglik, nu, rng);
        ell = out.state;
        cur = out.loglik;
      }
      row.per_iter_seconds = seconds_since(t1) / iters;
      row.likelihood_evals = evals;
      rows.push_back(row);
    }

    // Collapsed, sparse factors with cached kernel blocks.
    {
      Rng rng = master.split(3);
      TimingRow row{"unique-vecchia", n, N, iters, 0.0, 0.0, 0};
      const auto t0 = Clock::now();
      const int m = std::min(25, n - 1);
      const VecchiaStructure S = build_structure(d.X, m, master.split(4).seed());
      CachedKernelColumns ckY(S), ckL(S);
      ckY.rebuild(theta_y);
      ckL.rebuild(theta_l);
      ckL.set_diag(Vector::Constant(n, g));
      const SparseU Ul = build_U(S, ckL);
      IntVector a_ord(n);
      for (int p = 0; p < n; ++p) a_ord[p] = d.a[S.order[static_cast<std::size_t>(p)]];
      Vector ell = Vector::Constant(n, ell0);
      long long evals = 0;
      Vector lam_site(n), dadd(n);
      auto loglik = [&](const Vector& e) {
        ++evals;
        for (int p = 0; p < n; ++p) {
          const double lam = std::exp(e[p]);
          lam_site[S.order[static_cast<std::size_t>(p)]] = lam;
          dadd[p] = lam / static_cast<double>(a_ord[p]);
        }
        ckY.set_diag(dadd);
        const SparseU U = build_U(S, ckY);
        return vecchia_woodbury_loglik(d, S, U, lam_site, prior).loglik;
      };
      double cur = loglik(ell);
      row.setup_seconds = seconds_since(t0);
      const auto t1 = Clock::now();
      Vector z(n);
      for (int it = 0; it < iters; ++it) {
        for (int r = 0; r < n; ++r) z[r] = rng.normal();
        const Vector nu = Ul.solve_transpose(z);
        const EssOutcome out = ess_update(ell, cur, loglik, nu, rng);
        ell = out.state;
        cur = out.loglik;
      }
      row.per_iter_seconds = seconds_since(t1) / iters;
      row.likelihood_evals = evals;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_timings_csv(const std::string& path, const std::vector<TimingRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "method,n,N,iters,setup_seconds,per_iter_seconds,likelihood_evals\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.n << "," << r.N << "," << r.iters << ","
        << format_double(r.setup_seconds) << "," << format_double(r.per_iter_seconds)
        << "," << r.likelihood_evals << "\n";
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace hetgp
