#include "diffest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffest/errors.hpp"

namespace diffest {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Wichura's AS241 (PPND16).
double ppnd16(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r +
           1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r +
         3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r +
           6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r +
         1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r +
             1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r +
           5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r +
         1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r +
           1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r +
         1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r +
           1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r +
         6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r +
           1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r +
         1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

}  // namespace

double normal_quantile_fast(double p) { return ppnd16(p); }

double normal_quantile(double p) {
  double z = ppnd16(p);
  if (!std::isfinite(z)) return z;
  // One Newton step against the erfc-based CDF.
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  if (pdf > 0.0) z -= (normal_cdf(z) - p) / pdf;
  return z;
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EmptyInput("quantile_type7: empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - std::floor(h);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw EmptyInput("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw EmptyInput("sample_variance: need at least 2 values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    const double d = x - m;
    s += d * d;
  }
  return s / static_cast<double>(v.size() - 1);
}

double ks_stat(const std::vector<double>& z) {
  if (z.empty()) throw EmptyInput("ks_stat: empty sample");
  std::vector<double> sorted = z;
  for (double v : sorted)
    if (!std::isfinite(v)) throw NonFiniteResult("ks_stat: non-finite value");
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = normal_cdf(sorted[i]);
    const double up = (static_cast<double>(i) + 1.0) / m - cdf;
    const double dn = cdf - static_cast<double>(i) / m;
    d = std::max(d, std::max(up, dn));
  }
  return d;
}

std::vector<std::pair<double, double>> qq_data(const std::vector<double>& z) {
  if (z.empty()) throw EmptyInput("qq_data: empty sample");
  std::vector<double> sorted = z;
  for (double v : sorted)
    if (!std::isfinite(v)) throw NonFiniteResult("qq_data: non-finite value");
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / m;
    out.emplace_back(normal_quantile(p), sorted[i]);
  }
  return out;
}

double nrd0_bandwidth(const std::vector<double>& samples, bool* degenerate) {
  if (samples.empty()) throw EmptyInput("nrd0_bandwidth: empty sample");
  if (degenerate) *degenerate = false;
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double sd =
      samples.size() > 1 ? std::sqrt(sample_variance(samples)) : 0.0;
  const double iqr =
      quantile_type7(sorted, 0.75) - quantile_type7(sorted, 0.25);
  double lo = std::min(sd, iqr / 1.34);
  if (lo == 0.0) lo = sd;  // R's nrd0 fallback chain
  if (lo == 0.0) {
    if (degenerate) *degenerate = true;
    return 1e-3 * std::fmax(1.0, std::fabs(samples[0]));
  }
  return 0.9 * lo * std::pow(static_cast<double>(samples.size()), -0.2);
}

KdeResult kde(const std::vector<double>& samples,
              const std::vector<double>& eval_points) {
  if (samples.empty()) throw EmptyInput("kde: empty sample");
  KdeResult res;
  res.bandwidth = nrd0_bandwidth(samples, &res.degenerate_fallback);
  const double bw = res.bandwidth;
  const double norm =
      1.0 / (static_cast<double>(samples.size()) * bw * std::sqrt(2.0 * M_PI));
  res.density.reserve(eval_points.size());
  for (double x : eval_points) {
    double s = 0.0;
    for (double xi : samples) {
      const double u = (x - xi) / bw;
      s += std::exp(-0.5 * u * u);
    }
    res.density.push_back(norm * s);
  }
  return res;
}

}  // namespace diffest
