#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hetgp/io.hpp"
#include "hetgp/mathutil.hpp"
#include "hetgp/mcmc.hpp"
#include "oracles.hpp"

using namespace hetgp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hetgp_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("tables detect an optional header and skip blank lines") {
  const fs::path p = scratch_file("table_header.csv");
  write_text(p, "x_1,y\r\n0.5,1.5\n\n-2,3e-4\n");
  const Table t = read_table(p.string());
  REQUIRE(t.header.size() == 2);
  CHECK(t.header[0] == "x_1");
  CHECK(t.header[1] == "y");
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(0, 0) == 0.5);
  CHECK(t.values(1, 1) == 3e-4);

  const fs::path q = scratch_file("table_plain.csv");
  write_text(q, "1,2\n3,4\n");
  const Table u = read_table(q.string());
  CHECK(u.header.empty());
  CHECK(u.values(1, 0) == 3.0);
}

TEST_CASE("table parse errors name the offending line") {
  const fs::path p = scratch_file("table_bad_field.csv");
  write_text(p, "1,2\n3,oops\n");
  bool threw = false;
  try {
    read_table(p.string());
  } catch (const IoError& e) {
    threw = true;
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK(threw);

  const fs::path q = scratch_file("table_ragged.csv");
  write_text(q, "1,2\n3\n");
  CHECK_THROWS_WITH_AS(read_table(q.string()),
                       doctest::Contains("expected 2 fields"), IoError);

  const fs::path r = scratch_file("table_empty.csv");
  write_text(r, "\n");
  CHECK_THROWS_WITH_AS(read_table(r.string()), doctest::Contains("no data rows"), IoError);

  CHECK_THROWS_AS(read_table((scratch_file("does_not_exist.csv")).string()), IoError);
}

TEST_CASE("campaign files round-trip exactly") {
  Matrix X(3, 2);
  X << 0.1, -3.0, 1e-7, 2.5, 0.0, 3.141592653589793;
  Vector y(3);
  y << 1.0, -0.25, 1e300;
  const fs::path p = scratch_file("campaign_rt.csv");
  write_campaign_csv(p.string(), X, y);

  const RawCampaign c = read_campaign_csv(p.string());
  CHECK(c.X == X);
  CHECK(c.y == y);

  // One lone column cannot be a campaign.
  const fs::path q = scratch_file("campaign_thin.csv");
  write_text(q, "1\n2\n");
  CHECK_THROWS_AS(read_campaign_csv(q.string()), IoError);

  CHECK_THROWS_AS(write_campaign_csv(p.string(), X, Vector::Zero(2)), ConfigError);
}

TEST_CASE("prediction files carry means, sds, and both interval pairs") {
  Matrix X(2, 1);
  X << 0.25, 0.75;
  PredictionResult pred;
  pred.mean.resize(2);
  pred.mean << 1.0, -2.0;
  pred.var_pred.resize(2);
  pred.var_pred << 4.0, 0.25;
  pred.var_conf.resize(2);
  pred.var_conf << 1.0, 0.0625;
  pred.samples = 3;

  const fs::path p = scratch_file("prediction.csv");
  const double level = 0.9;
  write_prediction_csv(p.string(), X, pred, level);

  const Table t = read_table(p.string());
  REQUIRE(t.header.size() == 8);
  CHECK(t.header[0] == "x_1");
  CHECK(t.header[1] == "mean");
  CHECK(t.header[2] == "sd_predictive");
  CHECK(t.header[3] == "sd_confidence");
  CHECK(t.header[4] == "pi_lo");
  CHECK(t.header[5] == "pi_hi");
  CHECK(t.header[6] == "ci_lo");
  CHECK(t.header[7] == "ci_hi");

  const double z = normal_quantile(0.95);
  for (int i = 0; i < 2; ++i) {
    const double sp = std::sqrt(pred.var_pred[i]);
    const double sc = std::sqrt(pred.var_conf[i]);
    CHECK(t.values(i, 1) == pred.mean[i]);
    CHECK(t.values(i, 2) == sp);
    CHECK(t.values(i, 3) == sc);
    CHECK(t.values(i, 4) == doctest::Approx(pred.mean[i] - z * sp).epsilon(1e-14));
    CHECK(t.values(i, 5) == doctest::Approx(pred.mean[i] + z * sp).epsilon(1e-14));
    CHECK(t.values(i, 6) == doctest::Approx(pred.mean[i] - z * sc).epsilon(1e-14));
    CHECK(t.values(i, 7) == doctest::Approx(pred.mean[i] + z * sc).epsilon(1e-14));
  }

  CHECK_THROWS_AS(write_prediction_csv(p.string(), Matrix::Zero(3, 1), pred, level),
                  ConfigError);
}

TEST_CASE("checkpoints round-trip the chain, design, and unit maps bitwise") {
  const ReplicatedDesign d = oracle::design_a();
  McmcConfig cfg;
  cfg.total_iters = 40;
  cfg.burn_in = 10;
  cfg.thin = 3;
  cfg.seed = 77;
  cfg.m = 3;
  cfg.constrain_theta = true;
  cfg.estimate_g = true;
  cfg.g_lambda = 2e-5;
  cfg.init = InitStrategy::ConstantFraction;
  PriorConfig pri;
  pri.theta_shape = 1.7;
  pri.theta_rate_y = 3.0;
  pri.scale_y = {8.0, 3.0};
  pri.g_rate = 250.0;

  Checkpoint cp;
  cp.chain = gibbs_fit(d, cfg, pri);
  cp.design = d;
  cp.design.reps.clear();  // replicate values are never persisted
  cp.preprocess.active = true;
  cp.preprocess.x_min = Vector::Zero(2);
  cp.preprocess.x_max = Vector::Ones(2);
  cp.preprocess.y_mean = 0.85;
  cp.preprocess.y_scale = 1.3;
  cp.fit_seconds = 1.25;

  const fs::path p = scratch_file("checkpoint.json");
  write_checkpoint(p.string(), cp);
  const Checkpoint rt = read_checkpoint(p.string());

  // Wall-clock diagnostics stay out of the file so reruns are byte-identical.
  CHECK(rt.fit_seconds == 0.0);
  CHECK(rt.chain.config.total_iters == cfg.total_iters);
  CHECK(rt.chain.config.burn_in == cfg.burn_in);
  CHECK(rt.chain.config.thin == cfg.thin);
  CHECK(rt.chain.config.seed == cfg.seed);
  CHECK(rt.chain.config.m == cfg.m);
  CHECK(rt.chain.config.constrain_theta == cfg.constrain_theta);
  CHECK(rt.chain.config.freeze_latent == cfg.freeze_latent);
  CHECK(rt.chain.config.g_lambda == cfg.g_lambda);
  CHECK(rt.chain.config.estimate_g == cfg.estimate_g);
  CHECK(rt.chain.config.init == cfg.init);
  CHECK(rt.chain.priors.theta_shape == pri.theta_shape);
  CHECK(rt.chain.priors.theta_rate_y == pri.theta_rate_y);
  CHECK(rt.chain.priors.scale_y.alpha == pri.scale_y.alpha);
  CHECK(rt.chain.priors.scale_y.beta == pri.scale_y.beta);
  CHECK(rt.chain.priors.scale_lambda.alpha == pri.scale_lambda.alpha);
  CHECK(rt.chain.priors.g_shape == pri.g_shape);
  CHECK(rt.chain.priors.g_rate == pri.g_rate);
  CHECK(rt.chain.structure_seed == cp.chain.structure_seed);
  CHECK(rt.chain.accept_theta_y == cp.chain.accept_theta_y);
  CHECK(rt.chain.accept_theta_lambda == cp.chain.accept_theta_lambda);
  CHECK(rt.chain.mh_attempts == cp.chain.mh_attempts);
  CHECK(rt.chain.shrink_counts == cp.chain.shrink_counts);

  REQUIRE(rt.chain.kept.size() == cp.chain.kept.size());
  for (std::size_t t = 0; t < cp.chain.kept.size(); ++t) {
    const HyperState& a = cp.chain.kept[t];
    const HyperState& b = rt.chain.kept[t];
    CHECK(a.theta_y == b.theta_y);
    CHECK(a.theta_lambda == b.theta_lambda);
    CHECK(a.log_lambda == b.log_lambda);
    CHECK(a.tau2_n == b.tau2_n);
    CHECK(a.tau2_lambda == b.tau2_lambda);
    CHECK(a.g == b.g);
  }

  CHECK(rt.design.X == cp.design.X);
  CHECK(rt.design.a == cp.design.a);
  CHECK(rt.design.ybar == cp.design.ybar);
  CHECK(rt.design.s2 == cp.design.s2);
  CHECK(rt.design.N == cp.design.N);
  CHECK_FALSE(rt.design.has_replicates());
  CHECK(rt.preprocess.active == cp.preprocess.active);
  CHECK(rt.preprocess.x_min == cp.preprocess.x_min);
  CHECK(rt.preprocess.x_max == cp.preprocess.x_max);
  CHECK(rt.preprocess.y_mean == cp.preprocess.y_mean);
  CHECK(rt.preprocess.y_scale == cp.preprocess.y_scale);
}

TEST_CASE("damaged checkpoint files are rejected with a clear reason") {
  const fs::path bad = scratch_file("cp_not_json.json");
  write_text(bad, "definitely { not json");
  CHECK_THROWS_WITH_AS(read_checkpoint(bad.string()), doctest::Contains("invalid JSON"),
                       IoError);

  const fs::path other = scratch_file("cp_wrong_format.json");
  write_text(other, "{\"format\": \"something-else\", \"version\": 1}");
  CHECK_THROWS_WITH_AS(read_checkpoint(other.string()),
                       doctest::Contains("not a checkpoint"), IoError);

  const fs::path vsn = scratch_file("cp_wrong_version.json");
  write_text(vsn, "{\"format\": \"hetgp-checkpoint\", \"version\": 99}");
  CHECK_THROWS_WITH_AS(read_checkpoint(vsn.string()),
                       doctest::Contains("unsupported checkpoint version"), IoError);

  const fs::path partial = scratch_file("cp_partial.json");
  write_text(partial, "{\"format\": \"hetgp-checkpoint\", \"version\": 1}");
  CHECK_THROWS_WITH_AS(read_checkpoint(partial.string()),
                       doctest::Contains("malformed checkpoint"), IoError);

  CHECK_THROWS_AS(read_checkpoint(scratch_file("cp_missing.json").string()), IoError);
}

TEST_CASE("metrics export writes the report keys and nulls unavailable coverage") {
  MetricReport m;
  m.rmse_mean = 0.5;
  m.rmse_replicates = 0.75;
  m.score = -1.25;
  m.coverage = std::numeric_limits<double>::quiet_NaN();
  m.mean_pi_width = 2.0;
  m.mean_ci_width = 1.0;
  m.runtime_seconds = 0.125;

  const fs::path p = scratch_file("metrics.json");
  write_metrics_json(p.string(), m);
  std::ifstream in(p);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("rmse").get<double>() == 0.75);
  CHECK(j.at("rmse_mean").get<double>() == 0.5);
  CHECK(j.at("score").get<double>() == -1.25);
  CHECK(j.at("coverage").is_null());
  CHECK(j.at("pi_width").get<double>() == 2.0);
  CHECK(j.at("ci_width").get<double>() == 1.0);
  CHECK(j.at("runtime_seconds").get<double>() == 0.125);

  m.coverage = 0.9;
  write_metrics_json(p.string(), m);
  std::ifstream in2(p);
  const nlohmann::json j2 = nlohmann::json::parse(in2);
  CHECK(j2.at("coverage").get<double>() == 0.9);
}

TEST_SUITE_END();
