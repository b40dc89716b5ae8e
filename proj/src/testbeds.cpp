#include "hetgp/testbeds.hpp"

#include <cmath>

namespace hetgp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double forrester_f(double x, double exponent) {
  return std::pow(6.0 * x - 2.0, exponent) * std::sin(12.0 * x - 4.0);
}

double forrester_r(double x) { return 1.1 + std::sin(kTwoPi * x); }

RepSpec RepSpec::parse(const std::string& text) {
  RepSpec r;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  try {
    if (head == "fixed") {
      if (colon == std::string::npos) throw std::invalid_argument("missing count");
      r.kind = Kind::Fixed;
      r.fixed = std::stoi(text.substr(colon + 1));
      if (r.fixed < 1) throw std::invalid_argument("count < 1");
      return r;
    }
    if (head == "unif") {
      const auto second = text.find(':', colon + 1);
      if (colon == std::string::npos || second == std::string::npos) {
        throw std::invalid_argument("expected unif:lo:hi");
      }
      r.kind = Kind::Uniform;
      r.lo = std::stoi(text.substr(colon + 1, second - colon - 1));
      r.hi = std::stoi(text.substr(second + 1));
      if (r.lo < 1 || r.hi < r.lo) throw std::invalid_argument("bad range");
      return r;
    }
  } catch (const std::exception& e) {
    throw ConfigError("replication spec '" + text + "': " + e.what());
  }
  throw ConfigError("replication spec '" + text + "': expected fixed:<k> or unif:<lo>:<hi>");
}

int RepSpec::draw(Rng& rng) const {
  if (kind == Kind::Fixed) return fixed;
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

TestbedSpec::Kind TestbedSpec::parse_kind(const std::string& name) {
  if (name == "forrester-het") return Kind::ForresterHet;
  if (name == "constant-noise") return Kind::ConstantNoise;
  if (name == "motorcycle-like") {
    throw ConfigError(
        "the motorcycle-like set ships as a fixture (data/motorcycle_like.csv), "
        "not a generator; pass it to fit directly");
  }
  throw ConfigError("unknown testbed '" + name + "'");
}

Matrix latin_hypercube(int n, int d, Rng& rng) {
  if (n < 1 || d < 1) throw ConfigError("latin_hypercube: n and d must be >= 1");
  Matrix X(n, d);
  for (int k = 0; k < d; ++k) {
    const auto strata = rng.permutation(n);
    for (int i = 0; i < n; ++i) {
      X(i, k) = (static_cast<double>(strata[static_cast<std::size_t>(i)]) + rng.uniform01()) /
                static_cast<double>(n);
    }
  }
  return X;
}

SimulatedCampaign simulate(const TestbedSpec& spec, std::uint64_t seed) {
  if (spec.n < 1) throw ConfigError("simulate: n must be >= 1");
  if (spec.kind == TestbedSpec::Kind::ConstantNoise && !(spec.const_noise > 0.0)) {
    throw ConfigError("simulate: constant noise variance must be positive");
  }
  Rng rng(seed);
  SimulatedCampaign out;
  out.sites = latin_hypercube(spec.n, 1, rng);
  out.a.resize(spec.n);
  out.f_truth.resize(spec.n);
  out.r_truth.resize(spec.n);
  long long N = 0;
  for (int i = 0; i < spec.n; ++i) {
    out.a[i] = spec.reps.draw(rng);
    N += out.a[i];
    const double x = out.sites(i, 0);
    out.f_truth[i] = forrester_f(x, spec.exponent);
    out.r_truth[i] =
        spec.kind == TestbedSpec::Kind::ForresterHet ? forrester_r(x) : spec.const_noise;
  }
  out.raw.X.resize(N, 1);
  out.raw.y.resize(N);
  Eigen::Index row = 0;
  for (int i = 0; i < spec.n; ++i) {
    const double sd = std::sqrt(out.r_truth[i]);
    for (int j = 0; j < out.a[i]; ++j) {
      out.raw.X(row, 0) = out.sites(i, 0);
      out.raw.y[row] = out.f_truth[i] + sd * rng.normal();
      ++row;
    }
  }
  return out;
}

}  // namespace hetgp
