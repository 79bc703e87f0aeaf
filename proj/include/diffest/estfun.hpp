#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "diffest/model.hpp"

namespace diffest {

// Estimating function g(t,y,x;theta). Analytic partials are optional;
// numeric fallbacks are used when a slot is empty. kappa_claim is the
// approximate-martingale order claimed for the function (infinity marks an
// exact martingale).
struct EstimatingFunctionSpec {
  std::function<double(double t, double y, double x, double theta)> g;
  std::function<double(double, double, double, double)> dg_dtheta;
  std::function<double(double x, double theta)> d2g_dy2_diag;
  double kappa_claim = 2.0;
  std::string name;
};

// d2/dy2 g(0,y,x;theta) at y=x: analytic slot if present, else a 5-point
// central difference.
double diag_d2y(const EstimatingFunctionSpec& spec, double x, double theta);

// Catalog names: efficient_generic, qv, gcj_contrast_score, sec4_g,
// sec4_h, ou_exact, ou_simple. Shape requirements are probed against the
// model; a mismatch throws ModelMismatch.
EstimatingFunctionSpec builtin_estfun(const std::string& name,
                                      const DiffusionModel& model);

struct JacobsenReport {
  bool passed = false;
  double max_defect = 0.0;
  std::vector<double> grid;
  std::vector<double> defects;
};

// Rate-optimality condition d/dy g(0,y,x;theta)|_{y=x} = 0, checked by
// central difference on each grid point.
JacobsenReport check_jacobsen(const EstimatingFunctionSpec& spec,
                              const DiffusionModel& model,
                              const std::vector<double>& x_grid, double theta);

enum class EfficiencyVerdict { efficient, not_efficient, undefined };

std::string to_string(EfficiencyVerdict v);

struct EfficiencyReport {
  std::vector<std::pair<double, double>> K_values;  // (x, K(x))
  double relative_spread = 0.0;
  EfficiencyVerdict verdict = EfficiencyVerdict::undefined;
};

// K(x) = d2y g(0,x,x;theta) b^4(x;theta) / d_theta b^2(x;theta) must be a
// nonzero constant over the grid for the efficiency condition to hold.
EfficiencyReport check_efficiency(const EstimatingFunctionSpec& spec,
                                  const DiffusionModel& model,
                                  const std::vector<double>& x_grid,
                                  double theta);

struct DefectOrderPoint {
  double delta = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  bool censored = false;
};

struct DefectOrderResult {
  double slope = 0.0;
  double slope_stderr = 0.0;
  std::vector<DefectOrderPoint> points;
};

// Monte Carlo estimate of E_theta(g(delta, X_delta, x; theta) | X_0 = x)
// over a ladder of deltas (Milstein sub-paths with sub-step delta/100),
// then a log-log regression of |estimate| on delta. Points whose estimate
// is statistically indistinguishable from zero (within two MC standard
// errors) are censored; with fewer than two uncensored points no slope is
// estimable, the defect is consistent with an exact martingale, and
// AllCensored is thrown.
DefectOrderResult martingale_defect_order(const EstimatingFunctionSpec& spec,
                                          const DiffusionModel& model, double x,
                                          double theta,
                                          const std::vector<double>& deltas,
                                          long mc_reps, std::uint64_t seed);

struct LeadingMomentResult {
  double mc_estimate = 0.0;
  double predicted = 0.0;
  double z_score = 0.0;
  double std_error = 0.0;
};

// Checks the leading term of the conditional moment under theta0:
//   1/2 delta (b^2(x;theta0) - b^2(x;theta)) d2y g(0,x,x;theta).
LeadingMomentResult leading_moment_check(const EstimatingFunctionSpec& spec,
                                         const DiffusionModel& model, double x,
                                         double theta, double theta0,
                                         double delta, long mc_reps,
                                         std::uint64_t seed);

}  // namespace diffest
