#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hetgp/common.hpp"

namespace hetgp {

// A simulation campaign as it arrives: one row per run, replicates appear as
// repeated input rows.
struct RawCampaign {
  Matrix X;  // N x d
  Vector y;  // N
};

// Throws if sizes disagree or any entry is non-finite (message names the row).
void validate_campaign(const RawCampaign& c);

// Per-column min-max scaling of inputs to [0,1] plus centring/scaling of the
// output by its standard deviation. Stored so predictions can be mapped back.
struct Preprocess {
  bool active = false;
  Vector x_min, x_max;  // d
  double y_mean = 0.0;
  double y_scale = 1.0;

  static Preprocess fit(const RawCampaign& c);
  Matrix transform_inputs(const Matrix& X) const;
  Vector transform_outputs(const Vector& y) const;
  RawCampaign transform(const RawCampaign& c) const;
};

// Replication-collapsed design: unique sites with multiplicities and the
// per-site sufficient statistics (mean and mean squared deviation). This is
// all the likelihood ever touches; the raw replicate values are kept only
// when downstream consumers (splits by replicate, interval coverage) need
// them.
struct ReplicatedDesign {
  Matrix X;        // n x d unique sites, in order of first appearance
  IntVector a;     // multiplicities, a_i >= 1
  Vector ybar;     // per-site mean
  Vector s2;       // per-site mean squared deviation: (1/a_i) sum_j (y_ij - ybar_i)^2
  long long N = 0; // total runs = sum a_i
  std::vector<std::vector<double>> reps;  // optional raw values per site

  int n() const { return static_cast<int>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }
  bool has_replicates() const { return !reps.empty(); }
  void validate() const;
};

// Groups coincident rows. With tol = 0 rows must match bitwise; with tol > 0
// a row joins the first earlier representative within tol in every
// coordinate. Site order is order of first appearance.
ReplicatedDesign build_replicated_design(const RawCampaign& c, double tol = 0.0,
                                         bool keep_replicates = true);

// Reconstitute a row-per-run campaign (site order, replicates adjacent).
// Requires stored replicate values.
RawCampaign expand_design(const ReplicatedDesign& d);

enum class SplitMode { BySite, ByReplicate };

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::BySite;
};

// Partition into train/test. BySite moves whole sites; ByReplicate assigns
// each stored replicate independently (requires raw values) and drops sites
// from a side when none of their runs land there. Either side empty is an
// error.
std::pair<ReplicatedDesign, ReplicatedDesign> split(const ReplicatedDesign& d,
                                                    const SplitSpec& spec);

}  // namespace hetgp
