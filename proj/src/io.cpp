#include "hetgp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hetgp/mathutil.hpp"

namespace hetgp {

namespace {

using nlohmann::json;

bool parse_field(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  const char* tail = e;
  while (tail > b && (tail[-1] == ' ' || tail[-1] == '\t' || tail[-1] == '\r')) --tail;
  if (b == tail) return false;
  const auto res = std::from_chars(b, tail, out);
  return res.ec == std::errc() && res.ptr == tail;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& x : a) v[i++] = x.get<double>();
  return v;
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix mat_from_json(const json& rows) {
  const auto nr = static_cast<Eigen::Index>(rows.size());
  if (nr == 0) return Matrix(0, 0);
  const auto nc = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(nr, nc);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    if (static_cast<Eigen::Index>(r.size()) != nc) {
      throw IoError("checkpoint: ragged matrix");
    }
    Eigen::Index j = 0;
    for (const auto& x : r) m(i, j++) = x.get<double>();
    ++i;
  }
  return m;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    std::vector<double> vals(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_field(fields[j], vals[j])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && t.header.empty()) {
        t.header = fields;
        width = fields.size();
        continue;
      }
      throw IoError(path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(width) + " fields, found " +
                    std::to_string(fields.size()));
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw IoError(path + ": no data rows");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return t;
}

RawCampaign read_campaign_csv(const std::string& path) {
  const Table t = read_table(path);
  if (t.values.cols() < 2) {
    throw IoError(path + ": a campaign needs at least one input column and an output");
  }
  RawCampaign c;
  c.X = t.values.leftCols(t.values.cols() - 1);
  c.y = t.values.rightCols(1);
  validate_campaign(c);
  return c;
}

void write_campaign_csv(const std::string& path, const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw ConfigError("write_campaign_csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (Eigen::Index k = 0; k < X.cols(); ++k) out << "x_" << (k + 1) << ",";
  out << "y\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) out << format_double(X(i, k)) << ",";
    out << format_double(y[i]) << "\n";
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

void write_prediction_csv(const std::string& path, const Matrix& X,
                          const PredictionResult& pred, double level) {
  if (X.rows() != pred.mean.size()) throw ConfigError("write_prediction_csv: size mismatch");
  const double z = normal_quantile(0.5 + 0.5 * level);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (Eigen::Index k = 0; k < X.cols(); ++k) out << "x_" << (k + 1) << ",";
  out << "mean,sd_predictive,sd_confidence,pi_lo,pi_hi,ci_lo,ci_hi\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) out << format_double(X(i, k)) << ",";
    const double sp = std::sqrt(pred.var_pred[i]);
    const double sc = std::sqrt(pred.var_conf[i]);
    const double m = pred.mean[i];
    out << format_double(m) << "," << format_double(sp) << "," << format_double(sc) << ","
        << format_double(m - z * sp) << "," << format_double(m + z * sp) << ","
        << format_double(m - z * sc) << "," << format_double(m + z * sc) << "\n";
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

void write_checkpoint(const std::string& path, const Checkpoint& cp) {
  json j;
  j["format"] = "hetgp-checkpoint";
  j["version"] = kCheckpointVersion;
  // No wall-clock content: identical fits must serialize byte-identically.
  // Timings are reported in the fit report instead.

  const McmcConfig& c = cp.chain.config;
  j["config"] = {{"total_iters", c.total_iters},
                 {"burn_in", c.burn_in},
                 {"thin", c.thin},
                 {"seed", c.seed},
                 {"m", c.m},
                 {"constrain_theta", c.constrain_theta},
                 {"freeze_latent", c.freeze_latent},
                 {"g_lambda", c.g_lambda},
                 {"estimate_g", c.estimate_g},
                 {"init", c.init == InitStrategy::ConstantFraction ? "constant" : "smoothed"}};
  const PriorConfig& pr = cp.chain.priors;
  j["priors"] = {{"theta_shape", pr.theta_shape},
                 {"theta_rate_y", pr.theta_rate_y},
                 {"theta_rate_lambda", pr.theta_rate_lambda},
                 {"scale_y", {pr.scale_y.alpha, pr.scale_y.beta}},
                 {"scale_lambda", {pr.scale_lambda.alpha, pr.scale_lambda.beta}},
                 {"g_shape", pr.g_shape},
                 {"g_rate", pr.g_rate}};
  j["structure_seed"] = cp.chain.structure_seed;
  j["accept_theta_y"] = cp.chain.accept_theta_y;
  j["accept_theta_lambda"] = cp.chain.accept_theta_lambda;
  j["mh_attempts"] = cp.chain.mh_attempts;
  j["shrink_counts"] = cp.chain.shrink_counts;

  json samples = json::array();
  for (const auto& st : cp.chain.kept) {
    samples.push_back({{"theta_y", vec_to_json(st.theta_y)},
                       {"theta_lambda", vec_to_json(st.theta_lambda)},
                       {"log_lambda", vec_to_json(st.log_lambda)},
                       {"tau2_n", st.tau2_n},
                       {"tau2_lambda", st.tau2_lambda},
                       {"g", st.g}});
  }
  j["samples"] = std::move(samples);

  json d;
  d["X"] = mat_to_json(cp.design.X);
  json a = json::array();
  for (int i = 0; i < cp.design.n(); ++i) a.push_back(cp.design.a[i]);
  d["a"] = std::move(a);
  d["ybar"] = vec_to_json(cp.design.ybar);
  d["s2"] = vec_to_json(cp.design.s2);
  d["N"] = cp.design.N;
  j["design"] = std::move(d);

  j["preprocess"] = {{"active", cp.preprocess.active},
                     {"x_min", vec_to_json(cp.preprocess.x_min)},
                     {"x_max", vec_to_json(cp.preprocess.x_max)},
                     {"y_mean", cp.preprocess.y_mean},
                     {"y_scale", cp.preprocess.y_scale}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw IoError("error while writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path + ": invalid JSON (" + e.what() + ")");
  }
  try {
    if (j.at("format").get<std::string>() != "hetgp-checkpoint") {
      throw IoError(path + ": not a checkpoint file");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw IoError(path + ": unsupported checkpoint version");
    }
    Checkpoint cp;
    const json& c = j.at("config");
    McmcConfig& mc = cp.chain.config;
    mc.total_iters = c.at("total_iters").get<int>();
    mc.burn_in = c.at("burn_in").get<int>();
    mc.thin = c.at("thin").get<int>();
    mc.seed = c.at("seed").get<std::uint64_t>();
    mc.m = c.at("m").get<int>();
    mc.constrain_theta = c.at("constrain_theta").get<bool>();
    mc.freeze_latent = c.at("freeze_latent").get<bool>();
    mc.g_lambda = c.at("g_lambda").get<double>();
    mc.estimate_g = c.at("estimate_g").get<bool>();
    mc.init = c.at("init").get<std::string>() == "constant" ? InitStrategy::ConstantFraction
                                                            : InitStrategy::SmoothedResidual;
    const json& pr = j.at("priors");
    PriorConfig& pc = cp.chain.priors;
    pc.theta_shape = pr.at("theta_shape").get<double>();
    pc.theta_rate_y = pr.at("theta_rate_y").get<double>();
    pc.theta_rate_lambda = pr.at("theta_rate_lambda").get<double>();
    pc.scale_y = {pr.at("scale_y")[0].get<double>(), pr.at("scale_y")[1].get<double>()};
    pc.scale_lambda = {pr.at("scale_lambda")[0].get<double>(),
                       pr.at("scale_lambda")[1].get<double>()};
    pc.g_shape = pr.at("g_shape").get<double>();
    pc.g_rate = pr.at("g_rate").get<double>();

    cp.chain.structure_seed = j.at("structure_seed").get<std::uint64_t>();
    cp.chain.accept_theta_y = j.at("accept_theta_y").get<std::vector<long>>();
    cp.chain.accept_theta_lambda = j.at("accept_theta_lambda").get<std::vector<long>>();
    cp.chain.mh_attempts = j.at("mh_attempts").get<long>();
    cp.chain.shrink_counts = j.at("shrink_counts").get<std::vector<int>>();
    for (const auto& s : j.at("samples")) {
      HyperState st;
      st.theta_y = vec_from_json(s.at("theta_y"));
      st.theta_lambda = vec_from_json(s.at("theta_lambda"));
      st.log_lambda = vec_from_json(s.at("log_lambda"));
      st.tau2_n = s.at("tau2_n").get<double>();
      st.tau2_lambda = s.at("tau2_lambda").get<double>();
      st.g = s.at("g").get<double>();
      cp.chain.kept.push_back(std::move(st));
    }

    const json& d = j.at("design");
    cp.design.X = mat_from_json(d.at("X"));
    const auto& av = d.at("a");
    cp.design.a.resize(static_cast<Eigen::Index>(av.size()));
    Eigen::Index i = 0;
    for (const auto& x : av) cp.design.a[i++] = x.get<int>();
    cp.design.ybar = vec_from_json(d.at("ybar"));
    cp.design.s2 = vec_from_json(d.at("s2"));
    cp.design.N = d.at("N").get<long long>();
    cp.design.validate();

    const json& pp = j.at("preprocess");
    cp.preprocess.active = pp.at("active").get<bool>();
    cp.preprocess.x_min = vec_from_json(pp.at("x_min"));
    cp.preprocess.x_max = vec_from_json(pp.at("x_max"));
    cp.preprocess.y_mean = pp.at("y_mean").get<double>();
    cp.preprocess.y_scale = pp.at("y_scale").get<double>();
    return cp;
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed checkpoint (" + e.what() + ")");
  }
}

void write_metrics_json(const std::string& path, const MetricReport& m) {
  json j;
  j["rmse"] = m.rmse_replicates;
  j["rmse_mean"] = m.rmse_mean;
  j["score"] = m.score;
  if (std::isnan(m.coverage)) {
    j["coverage"] = nullptr;
  } else {
    j["coverage"] = m.coverage;
  }
  j["pi_width"] = m.mean_pi_width;
  j["ci_width"] = m.mean_ci_width;
  j["runtime_seconds"] = m.runtime_seconds;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace hetgp
