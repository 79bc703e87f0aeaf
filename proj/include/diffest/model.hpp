#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "diffest/grid.hpp"

namespace diffest {

// Open interval, endpoints possibly infinite. Membership is strict.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return std::isfinite(v) && v > lo && v < hi; }
};

// Scalar diffusion dX = a(X) dt + b(X;theta) dW on the open state space.
// d_diffusion_dx is needed by the Milstein scheme; d_diffusion_sq_dtheta
// drives the Fisher information and the efficiency checks.
struct DiffusionModel {
  Interval state_space;
  Interval theta_domain;
  std::function<double(double)> drift;
  std::function<double(double, double)> diffusion;
  std::function<double(double, double)> d_diffusion_dx;
  std::function<double(double, double)> d_diffusion_sq_dtheta;
  std::string name;

  double diffusion_sq(double x, double theta) const {
    const double b = diffusion(x, theta);
    return b * b;
  }
};

// Test function fed to the generator; x and theta are fixed by the caller
// via capture. smoothness_hint is the number of derivatives the caller
// vouches for (informational).
struct ScalarField {
  std::function<double(double)> eval;
  int smoothness_hint = 6;
};

// L f(x) = a(x) f'(x) + 1/2 b^2(x;theta) f''(x). Derivatives of f are
// central finite differences.
double generator_apply(const DiffusionModel& model, const ScalarField& f,
                       double x, double theta);

// L^k f(x) for k in {0,1,2,3}. Powers are expanded via the product rule so
// every term is a direct stencil on f, a and b^2; nothing is differenced
// through an already-noisy value.
double generator_power_apply(const DiffusionModel& model, const ScalarField& f,
                             double x, double theta, int k);

// sum_{i<=k} delta^i/i! L^i f(x); approximates E_theta(f(X_{t+delta})|X_t=x)
// to O(delta^{k+1}).
double conditional_moment_expansion(const DiffusionModel& model,
                                    const ScalarField& f, double x,
                                    double delta, double theta, int k);

// Left-endpoint Riemann approximation of
//   I(theta0) = 1/2 int_0^1 (d_theta b^2 / b^2)^2 ds.
double fisher_info_path(const DiffusionModel& model, const PathGrid& path,
                        double theta0);

// Catalog: ou_sqrt_theta, ergodic_sec4, nonergodic_sec4, pearson_scaled.
DiffusionModel builtin_model(const std::string& name);

}  // namespace diffest
