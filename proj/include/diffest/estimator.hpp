#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "diffest/estfun.hpp"
#include "diffest/grid.hpp"
#include "diffest/model.hpp"

namespace diffest {

// Discrete observations with constant spacing. Samples built from a path
// grid observe on [0,1] so delta*n = 1; the raw constructor admits partial
// samples for hand computations.
struct Sample {
  double delta = 0.0;
  std::vector<double> values;

  long n() const { return static_cast<long>(values.size()) - 1; }

  static Sample from_grid(const PathGrid& grid);
};

enum class MultiplicityPolicy { leftmost, nearest_to_ref };

struct RootSolverConfig {
  double search_lo = 0.01;
  double search_hi = 1.99;
  int scan_points = 256;
  double xtol = 1e-10;
  int max_iter = 200;
  MultiplicityPolicy policy = MultiplicityPolicy::nearest_to_ref;
  // Reference for nearest_to_ref; NaN means the interval midpoint.
  double ref = std::numeric_limits<double>::quiet_NaN();
};

enum class SolveStatus { converged, no_root, multiple_roots_resolved, degenerate_w };

std::string to_string(SolveStatus s);

struct EstimationResult {
  std::optional<double> theta_hat;
  std::optional<double> w_hat;
  SolveStatus status = SolveStatus::no_root;
  int n_roots_found = 0;
  double g_at_root = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;

  std::string to_json() const;
};

// G_n(theta) = sum_i g(delta, values[i], values[i-1]; theta).
double eval_G(const EstimatingFunctionSpec& spec, const Sample& sample,
              double theta);

// sum_i d_theta g, analytic when the spec provides it, else central
// difference with step 1e-6*max(1,|theta|).
double eval_dG(const EstimatingFunctionSpec& spec, const Sample& sample,
               double theta);

// Scan the interval, bracket every sign change, refine each bracket by
// safeguarded bisection/secant, then apply the multiplicity policy.
// Failures are statuses, never exceptions.
EstimationResult solve(const EstimatingFunctionSpec& spec, const Sample& sample,
                       const RootSolverConfig& config);

// What_n = -((1/delta) sum g^2)^(1/2) / sum d_theta g at theta_hat.
// Throws DegenerateNormalizer when the numerator vanishes or the
// denominator underflows its scale.
double compute_What(const EstimatingFunctionSpec& spec, const Sample& sample,
                    double theta_hat);

// solve() followed by compute_What; a degenerate normalizer downgrades the
// status instead of throwing.
EstimationResult estimate(const EstimatingFunctionSpec& spec,
                          const Sample& sample, const RootSolverConfig& config);

// sqrt(n) (theta_hat - theta0) / w_hat.
double normalized_stat(double theta_hat, double w_hat, double theta0, long n);

// Riemann approximation on a fine path of
//   W(theta0) = (int 1/2 b^4 (d2y g)^2)^(1/2) / (int 1/2 d_theta b^2 d2y g).
double mixing_W(const EstimatingFunctionSpec& spec, const DiffusionModel& model,
                const PathGrid& fine_path, double theta0);

struct LimitFunctionals {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

// The limit functionals behind existence/uniqueness and the mixing
// variable; A(theta0;theta0) = 0 identically and
// W(theta0) = -C(theta0;theta0)^(1/2) / B(theta0;theta0).
LimitFunctionals limit_functionals(const EstimatingFunctionSpec& spec,
                                   const DiffusionModel& model,
                                   const PathGrid& fine_path, double theta,
                                   double theta0);

struct FisherConsistency {
  double mixing_w_abs = 0.0;
  double fisher_value = 0.0;  // I(theta0)^(-1/2)
  double ratio = 0.0;
};

// For efficient estimating functions |W(theta0)| must equal
// I(theta0)^(-1/2); reported as a ratio.
FisherConsistency fisher_consistency_check(const EstimatingFunctionSpec& spec,
                                           const DiffusionModel& model,
                                           const PathGrid& fine_path,
                                           double theta0);

}  // namespace diffest
