#pragma once

#include <cstdint>
#include <string>

#include "hetgp/common.hpp"
#include "hetgp/data.hpp"
#include "hetgp/rng.hpp"

namespace hetgp {

// Multimodal 1d test function (6x-2)^e * sin(12x-4) on [0,1]; the classic
// shape has e = 2 and the exponent stays adjustable.
double forrester_f(double x, double exponent = 2.0);

// Smoothly varying noise variance 1.1 + sin(2 pi x), bounded away from zero.
double forrester_r(double x);

// Replication counts per site: a fixed count or uniform integers on [lo, hi].
struct RepSpec {
  enum class Kind { Fixed, Uniform } kind = Kind::Fixed;
  int fixed = 1;
  int lo = 1, hi = 1;

  static RepSpec parse(const std::string& text);  // "fixed:10" or "unif:5:15"
  int draw(Rng& rng) const;
};

struct TestbedSpec {
  enum class Kind { ForresterHet, ConstantNoise } kind = Kind::ForresterHet;
  int n = 100;              // unique sites
  RepSpec reps;
  double exponent = 2.0;
  double const_noise = 1.0; // variance for the constant-noise testbed

  static TestbedSpec::Kind parse_kind(const std::string& name);
};

struct SimulatedCampaign {
  RawCampaign raw;     // one row per run
  Matrix sites;        // n x 1 unique sites
  IntVector a;
  Vector f_truth;      // mean at each site
  Vector r_truth;      // noise variance at each site
};

// Latin hypercube sites on [0,1]^d: one point per stratum, uniform within.
Matrix latin_hypercube(int n, int d, Rng& rng);

SimulatedCampaign simulate(const TestbedSpec& spec, std::uint64_t seed);

}  // namespace hetgp
