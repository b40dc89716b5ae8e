#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetgp/common.hpp"

namespace hetgp {

struct TimingRow {
  std::string method;  // full-dense | unique-dense | unique-vecchia
  int n = 0;           // unique sites
  long long N = 0;     // total runs
  int iters = 0;       // elliptical-slice updates timed
  double setup_seconds = 0.0;
  double per_iter_seconds = 0.0;
  long long likelihood_evals = 0;
};

// Times elliptical-slice updates of the latent noise field under three
// likelihood representations on the same simulated campaigns: the expanded
// O(N^3) form, the replication-collapsed dense O(n^3) form, and the collapsed
// sparse-factor form. One-off setup (kernel factor for prior draws, caches)
// is reported separately from the per-update cost.
std::vector<TimingRow> ess_timing_sweep(const std::vector<int>& site_counts, int factor,
                                        int iters, std::uint64_t seed);

void write_timings_csv(const std::string& path, const std::vector<TimingRow>& rows);

}  // namespace hetgp
