#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace diffest {

// Standard normal CDF.
double normal_cdf(double z);

// Standard normal quantile. AS241 rational approximation followed by one
// Newton step; absolute error well below 1e-9 over (0,1).
double normal_quantile(double p);

// AS241 alone, no polish step. Used in the hot simulation loop.
double normal_quantile_fast(double p);

// R type-7 quantile of a sorted sample.
double quantile_type7(const std::vector<double>& sorted, double p);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

// One-sample Kolmogorov-Smirnov statistic against N(0,1).
double ks_stat(const std::vector<double>& z);

// QQ plot data: i-th order statistic of z paired with
// normal_quantile((i - 0.5)/m).
std::vector<std::pair<double, double>> qq_data(const std::vector<double>& z);

struct KdeResult {
  std::vector<double> density;
  double bandwidth = 0.0;
  bool degenerate_fallback = false;
};

// Gaussian kernel density estimate with R's nrd0 bandwidth rule
// 0.9 * min(sd, IQR/1.34) * m^(-1/5). All-equal samples fall back to
// bandwidth 1e-3 * max(1,|value|) and set the warning flag.
KdeResult kde(const std::vector<double>& samples,
              const std::vector<double>& eval_points);

double nrd0_bandwidth(const std::vector<double>& samples, bool* degenerate);

}  // namespace diffest
