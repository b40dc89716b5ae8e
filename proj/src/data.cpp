#include "hetgp/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "hetgp/rng.hpp"

namespace hetgp {

void validate_campaign(const RawCampaign& c) {
  if (c.X.rows() != c.y.size()) {
    throw IoError("campaign: " + std::to_string(c.X.rows()) + " input rows but " +
                  std::to_string(c.y.size()) + " outputs");
  }
  if (c.X.rows() == 0) throw IoError("campaign: no rows");
  if (c.X.cols() == 0) throw IoError("campaign: no input columns");
  for (Eigen::Index i = 0; i < c.X.rows(); ++i) {
    if (!std::isfinite(c.y[i])) {
      throw IoError("campaign: non-finite output at row " + std::to_string(i));
    }
    for (Eigen::Index k = 0; k < c.X.cols(); ++k) {
      if (!std::isfinite(c.X(i, k))) {
        throw IoError("campaign: non-finite input at row " + std::to_string(i) +
                      ", column " + std::to_string(k));
      }
    }
  }
}

Preprocess Preprocess::fit(const RawCampaign& c) {
  validate_campaign(c);
  Preprocess p;
  p.active = true;
  p.x_min = c.X.colwise().minCoeff();
  p.x_max = c.X.colwise().maxCoeff();
  p.y_mean = c.y.mean();
  const double n = static_cast<double>(c.y.size());
  double ss = (c.y.array() - p.y_mean).square().sum();
  p.y_scale = n > 1 ? std::sqrt(ss / (n - 1.0)) : 1.0;
  if (p.y_scale == 0.0) p.y_scale = 1.0;
  return p;
}

Matrix Preprocess::transform_inputs(const Matrix& X) const {
  if (!active) return X;
  Matrix out = X;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double range = x_max[k] - x_min[k];
    if (range > 0.0) {
      out.col(k) = (X.col(k).array() - x_min[k]) / range;
    } else {
      out.col(k).setZero();
    }
  }
  return out;
}

Vector Preprocess::transform_outputs(const Vector& y) const {
  if (!active) return y;
  return (y.array() - y_mean) / y_scale;
}

RawCampaign Preprocess::transform(const RawCampaign& c) const {
  return RawCampaign{transform_inputs(c.X), transform_outputs(c.y)};
}

void ReplicatedDesign::validate() const {
  const int nn = n();
  if (nn == 0) throw IoError("design: empty");
  if (a.size() != nn || ybar.size() != nn || s2.size() != nn) {
    throw IoError("design: field sizes disagree");
  }
  long long total = 0;
  for (int i = 0; i < nn; ++i) {
    if (a[i] < 1) throw IoError("design: multiplicity < 1 at site " + std::to_string(i));
    if (s2[i] < 0.0) throw IoError("design: negative s2 at site " + std::to_string(i));
    if (a[i] == 1 && s2[i] != 0.0) {
      throw IoError("design: unreplicated site " + std::to_string(i) + " has s2 != 0");
    }
    total += a[i];
  }
  if (total != N) throw IoError("design: multiplicities do not sum to N");
  if (!reps.empty()) {
    if (static_cast<int>(reps.size()) != nn) throw IoError("design: replicate list size");
    for (int i = 0; i < nn; ++i) {
      if (static_cast<int>(reps[i].size()) != a[i]) {
        throw IoError("design: replicate count mismatch at site " + std::to_string(i));
      }
    }
  }
}

ReplicatedDesign build_replicated_design(const RawCampaign& c, double tol,
                                         bool keep_replicates) {
  validate_campaign(c);
  if (tol < 0.0) throw ConfigError("build_replicated_design: tol must be >= 0");
  const Eigen::Index N = c.X.rows();
  const Eigen::Index d = c.X.cols();

  std::vector<int> group(N, -1);
  std::vector<Eigen::Index> rep_row;  // first row of each group
  if (tol == 0.0) {
    // Exact duplicates: lexicographic map over raw coordinates.
    std::map<std::vector<double>, int> seen;
    std::vector<double> key(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) key[static_cast<std::size_t>(k)] = c.X(i, k);
      auto [it, fresh] = seen.try_emplace(key, static_cast<int>(rep_row.size()));
      if (fresh) rep_row.push_back(i);
      group[i] = it->second;
    }
  } else {
    // Tolerance grouping against first-appearance representatives.
    for (Eigen::Index i = 0; i < N; ++i) {
      int g = -1;
      for (std::size_t r = 0; r < rep_row.size(); ++r) {
        bool close = true;
        for (Eigen::Index k = 0; k < d; ++k) {
          if (std::fabs(c.X(i, k) - c.X(rep_row[r], k)) > tol) {
            close = false;
            break;
          }
        }
        if (close) {
          g = static_cast<int>(r);
          break;
        }
      }
      if (g < 0) {
        g = static_cast<int>(rep_row.size());
        rep_row.push_back(i);
      }
      group[i] = g;
    }
  }

  const int n = static_cast<int>(rep_row.size());
  ReplicatedDesign out;
  out.X.resize(n, d);
  out.a = IntVector::Zero(n);
  out.ybar = Vector::Zero(n);
  out.s2 = Vector::Zero(n);
  out.N = N;
  std::vector<std::vector<double>> values(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.X.row(i) = c.X.row(rep_row[static_cast<std::size_t>(i)]);
  for (Eigen::Index r = 0; r < N; ++r) {
    values[static_cast<std::size_t>(group[r])].push_back(c.y[r]);
  }
  for (int i = 0; i < n; ++i) {
    const auto& v = values[static_cast<std::size_t>(i)];
    out.a[i] = static_cast<int>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out.ybar[i] = mean;
    out.s2[i] = ss / static_cast<double>(v.size());
  }
  if (keep_replicates) out.reps = std::move(values);
  out.validate();
  return out;
}

RawCampaign expand_design(const ReplicatedDesign& d) {
  if (!d.has_replicates()) {
    throw ConfigError("expand_design: design carries no raw replicate values");
  }
  RawCampaign c;
  c.X.resize(d.N, d.dim());
  c.y.resize(d.N);
  Eigen::Index r = 0;
  for (int i = 0; i < d.n(); ++i) {
    for (double v : d.reps[static_cast<std::size_t>(i)]) {
      c.X.row(r) = d.X.row(i);
      c.y[r] = v;
      ++r;
    }
  }
  return c;
}

namespace {

ReplicatedDesign subset_sites(const ReplicatedDesign& d, const std::vector<int>& idx) {
  ReplicatedDesign out;
  const int n = static_cast<int>(idx.size());
  out.X.resize(n, d.dim());
  out.a.resize(n);
  out.ybar.resize(n);
  out.s2.resize(n);
  out.N = 0;
  if (d.has_replicates()) out.reps.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int i = idx[static_cast<std::size_t>(j)];
    out.X.row(j) = d.X.row(i);
    out.a[j] = d.a[i];
    out.ybar[j] = d.ybar[i];
    out.s2[j] = d.s2[i];
    out.N += d.a[i];
    if (d.has_replicates()) out.reps[static_cast<std::size_t>(j)] = d.reps[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

std::pair<ReplicatedDesign, ReplicatedDesign> split(const ReplicatedDesign& d,
                                                    const SplitSpec& spec) {
  d.validate();
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("split: train_fraction must lie strictly in (0,1)");
  }
  Rng rng(spec.seed);
  if (spec.mode == SplitMode::BySite) {
    const int n = d.n();
    auto perm = rng.permutation(n);
    const int ntr = static_cast<int>(std::ceil(spec.train_fraction * n));
    if (ntr == 0 || ntr == n) throw ConfigError("split: a side would be empty");
    std::vector<int> tr(perm.begin(), perm.begin() + ntr);
    std::vector<int> te(perm.begin() + ntr, perm.end());
    // Preserve the original site order inside each side.
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    return {subset_sites(d, tr), subset_sites(d, te)};
  }

  if (!d.has_replicates()) {
    throw ConfigError("split: by-replicate split needs stored replicate values");
  }
  RawCampaign tr_raw, te_raw;
  std::vector<double> ytr, yte;
  std::vector<Eigen::Index> rtr, rte;
  for (int i = 0; i < d.n(); ++i) {
    for (double v : d.reps[static_cast<std::size_t>(i)]) {
      if (rng.uniform01() < spec.train_fraction) {
        rtr.push_back(i);
        ytr.push_back(v);
      } else {
        rte.push_back(i);
        yte.push_back(v);
      }
    }
  }
  if (ytr.empty() || yte.empty()) throw ConfigError("split: a side would be empty");
  auto assemble = [&](const std::vector<Eigen::Index>& rows, const std::vector<double>& vals) {
    RawCampaign c;
    c.X.resize(static_cast<Eigen::Index>(rows.size()), d.dim());
    c.y.resize(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      c.X.row(static_cast<Eigen::Index>(r)) = d.X.row(rows[r]);
      c.y[static_cast<Eigen::Index>(r)] = vals[r];
    }
    return build_replicated_design(c, 0.0, true);
  };
  return {assemble(rtr, ytr), assemble(rte, yte)};
}

}  // namespace hetgp
