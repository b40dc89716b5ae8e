#pragma once

#include <cstdint>
#include <string>

namespace hetgp {

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile (Wichura's PPND16), full double accuracy.
// p must lie strictly in (0, 1).
double normal_quantile(double p);

// log density of Gamma(shape, rate) at x > 0.
double gamma_log_pdf(double x, double shape, double rate);

// Regularized lower incomplete gamma P(a, x).
double gamma_cdf_lower(double a, double x);

// Quantile of Gamma(shape, rate): smallest x with P(shape, rate*x) >= p.
double gamma_quantile(double p, double shape, double rate);

// Streaming mean/variance (Welford). variance() is the unbiased estimate.
struct RunningMoments {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  }
};

// Shortest decimal string that round-trips to the same double. Keeps CSV and
// JSON output byte-stable across runs.
std::string format_double(double v);

}  // namespace hetgp
