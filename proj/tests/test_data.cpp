#include <doctest.h>

#include <cmath>

#include "hetgp/data.hpp"
#include "oracles.hpp"

using namespace hetgp;

namespace {

RawCampaign tiny_campaign() {
  RawCampaign c;
  c.X.resize(3, 1);
  c.X << 0.0, 0.0, 1.0;
  c.y.resize(3);
  c.y << 1.0, 3.0, 5.0;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("campaign validation names the offending row") {
  RawCampaign c = tiny_campaign();
  CHECK_NOTHROW(validate_campaign(c));

  c.y[1] = std::nan("");
  bool threw = false;
  try {
    validate_campaign(c);
  } catch (const IoError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  CHECK(threw);

  RawCampaign mismatch = tiny_campaign();
  mismatch.y.resize(2);
  CHECK_THROWS_AS(validate_campaign(mismatch), IoError);
  RawCampaign empty;
  empty.X.resize(0, 1);
  empty.y.resize(0);
  CHECK_THROWS_AS(validate_campaign(empty), IoError);
}

TEST_CASE("exact dedup groups coincident rows in first-appearance order") {
  const ReplicatedDesign d = build_replicated_design(tiny_campaign());
  REQUIRE(d.n() == 2);
  CHECK(d.X(0, 0) == 0.0);
  CHECK(d.X(1, 0) == 1.0);
  CHECK(d.a[0] == 2);
  CHECK(d.a[1] == 1);
  CHECK(d.ybar[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(d.ybar[1] == doctest::Approx(5.0).epsilon(1e-15));
  // Mean squared deviation: ((1-2)^2 + (3-2)^2)/2 = 1 at the replicated site,
  // exactly 0 at the singleton.
  CHECK(d.s2[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.s2[1] == 0.0);
  CHECK(d.N == 3);
  CHECK(d.has_replicates());
  CHECK(d.reps[0] == std::vector<double>{1.0, 3.0});

  const ReplicatedDesign bare = build_replicated_design(tiny_campaign(), 0.0, false);
  CHECK_FALSE(bare.has_replicates());
}

TEST_CASE("fixture A statistics come out as computed by hand") {
  const ReplicatedDesign d = build_replicated_design(oracle::campaign_a());
  const ReplicatedDesign ref = oracle::design_a();
  REQUIRE(d.n() == 4);
  CHECK(d.N == 10);
  for (int i = 0; i < 4; ++i) {
    CHECK(d.a[i] == ref.a[i]);
    CHECK(d.ybar[i] == doctest::Approx(ref.ybar[i]).epsilon(1e-14));
    CHECK(d.s2[i] == doctest::Approx(ref.s2[i]).epsilon(1e-13));
  }
}

TEST_CASE("tolerance grouping joins rows to the first representative") {
  RawCampaign c;
  c.X.resize(4, 1);
  c.X << 0.0, 0.05, 0.2, 0.28;
  c.y.resize(4);
  c.y << 1.0, 2.0, 3.0, 4.0;
  const ReplicatedDesign d = build_replicated_design(c, 0.1);
  // 0.05 joins 0.0; 0.2 is beyond 0.1 of 0.0 so it opens a new site; 0.28 is
  // within 0.1 of the representative 0.2 (grouping is not transitive).
  REQUIRE(d.n() == 2);
  CHECK(d.X(0, 0) == 0.0);
  CHECK(d.X(1, 0) == 0.2);
  CHECK(d.a[0] == 2);
  CHECK(d.a[1] == 2);
  CHECK_THROWS_AS(build_replicated_design(c, -0.5), ConfigError);
}

TEST_CASE("expansion reproduces the collapsed design") {
  const ReplicatedDesign d = build_replicated_design(oracle::campaign_a());
  const RawCampaign back = expand_design(d);
  const ReplicatedDesign d2 = build_replicated_design(back);
  REQUIRE(d2.n() == d.n());
  CHECK(d2.X == d.X);
  CHECK(d2.a == d.a);
  for (int i = 0; i < d.n(); ++i) {
    CHECK(d2.ybar[i] == d.ybar[i]);
    CHECK(d2.s2[i] == d.s2[i]);
  }

  ReplicatedDesign no_reps = build_replicated_design(oracle::campaign_a(), 0.0, false);
  CHECK_THROWS_AS(expand_design(no_reps), ConfigError);
}

TEST_CASE("design validation catches inconsistent fields") {
  ReplicatedDesign d = oracle::design_a();
  CHECK_NOTHROW(d.validate());
  ReplicatedDesign bad = d;
  bad.a[0] = 0;
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = d;
  bad.s2[1] = 0.3;  // unreplicated site cannot carry spread
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = d;
  bad.N = 99;
  CHECK_THROWS_AS(bad.validate(), IoError);
  bad = d;
  bad.s2[0] = -0.1;
  CHECK_THROWS_AS(bad.validate(), IoError);
}

TEST_CASE("preprocess maps inputs to the unit box and standardizes outputs") {
  const RawCampaign c = oracle::campaign_a();
  const Preprocess pre = Preprocess::fit(c);
  const RawCampaign t = pre.transform(c);

  for (Eigen::Index k = 0; k < t.X.cols(); ++k) {
    CHECK(t.X.col(k).minCoeff() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t.X.col(k).maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(t.y.mean() == doctest::Approx(0.0).epsilon(1e-12));
  const double n = static_cast<double>(t.y.size());
  const double sd = std::sqrt((t.y.array() - t.y.mean()).square().sum() / (n - 1.0));
  CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));

  // Mapping back by hand recovers the original inputs.
  for (Eigen::Index i = 0; i < c.X.rows(); ++i) {
    for (Eigen::Index k = 0; k < c.X.cols(); ++k) {
      const double orig = pre.x_min[k] + t.X(i, k) * (pre.x_max[k] - pre.x_min[k]);
      CHECK(orig == doctest::Approx(c.X(i, k)).epsilon(1e-14));
    }
  }
}

TEST_CASE("preprocess handles degenerate columns and stays inert when inactive") {
  RawCampaign c;
  c.X.resize(3, 2);
  c.X << 0.5, 1.0, 0.5, 2.0, 0.5, 3.0;
  c.y.resize(3);
  c.y << 1.0, 1.0, 1.0;  // zero output spread
  const Preprocess pre = Preprocess::fit(c);
  CHECK(pre.y_scale == 1.0);  // guarded against division by zero
  const Matrix t = pre.transform_inputs(c.X);
  CHECK(t.col(0).cwiseAbs().maxCoeff() == 0.0);  // constant column pinned at 0

  Preprocess off;
  CHECK_FALSE(off.active);
  CHECK(off.transform_inputs(c.X) == c.X);
  CHECK(off.transform_outputs(c.y) == c.y);
}

TEST_CASE("site split partitions sites and conserves run counts") {
  const ReplicatedDesign d = build_replicated_design(oracle::campaign_a());
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.seed = 3;
  const auto [tr, te] = split(d, spec);
  CHECK(tr.n() + te.n() == d.n());
  CHECK(tr.N + te.N == d.N);
  CHECK(tr.n() == 2);  // ceil(0.5 * 4)
  // Sites keep their original relative order inside each side.
  for (int i = 1; i < tr.n(); ++i) CHECK(tr.X(i, 0) != tr.X(i - 1, 0));
  // Replicate values travel with their sites.
  CHECK(tr.has_replicates());
  CHECK(te.has_replicates());

  // Deterministic under the same seed.
  const auto [tr2, te2] = split(d, spec);
  CHECK(tr2.X == tr.X);
  CHECK(te2.X == te.X);

  SplitSpec bad = spec;
  bad.train_fraction = 1.0;
  CHECK_THROWS_AS(split(d, bad), ConfigError);
}

TEST_CASE("replicate split needs raw values and conserves runs") {
  const ReplicatedDesign d = build_replicated_design(oracle::campaign_a());
  SplitSpec spec;
  spec.mode = SplitMode::ByReplicate;
  spec.train_fraction = 0.6;
  spec.seed = 11;
  const auto [tr, te] = split(d, spec);
  CHECK(tr.N + te.N == d.N);
  CHECK(tr.N >= 1);
  CHECK(te.N >= 1);

  const ReplicatedDesign bare = build_replicated_design(oracle::campaign_a(), 0.0, false);
  CHECK_THROWS_AS(split(bare, spec), ConfigError);
}

TEST_SUITE_END();
