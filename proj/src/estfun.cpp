#include "diffest/estfun.hpp"

#include <algorithm>
#include <cmath>

#include "diffest/errors.hpp"
#include "diffest/numdiff.hpp"
#include "diffest/path_sim.hpp"
#include "diffest/rng.hpp"

namespace diffest {

double diag_d2y(const EstimatingFunctionSpec& spec, double x, double theta) {
  if (spec.d2g_dy2_diag) return spec.d2g_dy2_diag(x, theta);
  auto f = [&](double y) { return spec.g(0.0, y, x, theta); };
  return numdiff::d2_5pt(f, x);
}

namespace {

// Probe points for coefficient-shape requirements. Chosen inside the
// catalog domains; clipped into finite intervals if a custom model is
// narrower.
std::vector<double> probe_xs(const DiffusionModel& m) {
  std::vector<double> xs;
  for (double x : {-1.3, 0.0, 0.4, 2.1}) {
    if (m.state_space.contains(x)) xs.push_back(x);
  }
  if (xs.empty()) xs.push_back(0.5 * (m.state_space.lo + m.state_space.hi));
  return xs;
}

std::vector<double> probe_thetas(const DiffusionModel& m) {
  std::vector<double> ts;
  for (double t : {0.3, 1.0, 1.7}) {
    if (m.theta_domain.contains(t)) ts.push_back(t);
  }
  if (ts.empty()) ts.push_back(0.5 * (m.theta_domain.lo + m.theta_domain.hi));
  return ts;
}

bool has_b2_equal_theta(const DiffusionModel& m) {
  for (double x : probe_xs(m))
    for (double t : probe_thetas(m))
      if (std::fabs(m.diffusion_sq(x, t) - t) > 1e-9 * std::fmax(1.0, t))
        return false;
  return true;
}

bool has_sec4_diffusion(const DiffusionModel& m) {
  for (double x : probe_xs(m))
    for (double t : probe_thetas(m)) {
      const double want = 1.0 / (t + x * x);
      if (std::fabs(m.diffusion_sq(x, t) - want) > 1e-9 * want) return false;
    }
  return true;
}

// Linear drift a(x) = c x; returns c or throws.
double linear_drift_coefficient(const DiffusionModel& m, const char* who) {
  const double c = m.drift(1.0);
  for (double x : {-2.0, 0.5, 3.0}) {
    if (!m.state_space.contains(x)) continue;
    if (std::fabs(m.drift(x) - c * x) > 1e-9 * std::fmax(1.0, std::fabs(c * x)))
      throw ModelMismatch(std::string(who) + ": model drift is not linear");
  }
  return c;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ModelMismatch(msg);
}

struct McMoment {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo mean of g(delta, X_delta, x; theta_eval) with X simulated
// under theta_sim by Milstein sub-steps of size delta/100.
McMoment mc_conditional_mean(const EstimatingFunctionSpec& spec,
                             const DiffusionModel& model, double x,
                             double theta_eval, double theta_sim, double delta,
                             long mc_reps, std::uint64_t seed) {
  if (!model.d_diffusion_dx)
    throw MissingDerivative("mc_conditional_mean: Milstein needs d_diffusion_dx");
  const int substeps = 100;
  const double h = delta / substeps;
  const double sqrt_h = std::sqrt(h);
  NormalStream rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (long r = 0; r < mc_reps; ++r) {
    double y = x;
    for (int s = 0; s < substeps; ++s)
      y = milstein_step(model, y, theta_sim, h, rng.normal() * sqrt_h);
    const double v = spec.g(delta, y, x, theta_eval);
    if (!std::isfinite(v))
      throw NonFiniteResult("mc_conditional_mean: non-finite g");
    sum += v;
    sumsq += v * v;
  }
  McMoment m;
  const double n = static_cast<double>(mc_reps);
  m.mean = sum / n;
  const double var = std::fmax(0.0, (sumsq - n * m.mean * m.mean) / (n - 1.0));
  m.std_error = std::sqrt(var / n);
  return m;
}

}  // namespace

EstimatingFunctionSpec builtin_estfun(const std::string& name,
                                      const DiffusionModel& model) {
  EstimatingFunctionSpec spec;
  spec.name = name;

  // Copies of the model closures keep the spec self-contained.
  auto b2 = [d = model.diffusion](double x, double theta) {
    const double b = d(x, theta);
    return b * b;
  };
  auto db2 = model.d_diffusion_sq_dtheta;

  if (name == "efficient_generic") {
    spec.g = [b2, db2](double t, double y, double x, double theta) {
      const double v = b2(x, theta);
      const double c = db2(x, theta) / (v * v);
      const double d = y - x;
      return c * (d * d - t * v);
    };
    spec.d2g_dy2_diag = [b2, db2](double x, double theta) {
      const double v = b2(x, theta);
      return 2.0 * db2(x, theta) / (v * v);
    };
    spec.kappa_claim = 2.0;
  } else if (name == "qv") {
    require(has_b2_equal_theta(model),
            "builtin_estfun: 'qv' needs b^2(x;theta) = theta, model '" +
                model.name + "' does not match");
    spec.g = [](double t, double y, double x, double theta) {
      const double d = y - x;
      return d * d - theta * t;
    };
    spec.dg_dtheta = [](double t, double, double, double) { return -t; };
    spec.d2g_dy2_diag = [](double, double) { return 2.0; };
    spec.kappa_claim = 2.0;
  } else if (name == "gcj_contrast_score") {
    // Minus the theta-derivative of the Genon-Catalot--Jacod contrast
    // t log b^2(x;theta) + (y-x)^2/b^2(x;theta).
    spec.g = [b2, db2](double t, double y, double x, double theta) {
      const double v = b2(x, theta);
      const double dv = db2(x, theta);
      const double d = y - x;
      return d * d * dv / (v * v) - t * dv / v;
    };
    spec.d2g_dy2_diag = [b2, db2](double x, double theta) {
      const double v = b2(x, theta);
      return 2.0 * db2(x, theta) / (v * v);
    };
    spec.kappa_claim = 2.0;
  } else if (name == "sec4_g" || name == "sec4_h") {
    require(has_sec4_diffusion(model),
            "builtin_estfun: '" + name +
                "' needs b^2(x;theta) = (theta+x^2)^-1, model '" + model.name +
                "' does not match");
    const double c = linear_drift_coefficient(model, "builtin_estfun");
    require(std::fabs(std::fabs(c) - 2.0) < 1e-9,
            "builtin_estfun: '" + name + "' expects drift +/-2x");
    if (name == "sec4_g") {
      spec.g = [c](double t, double y, double x, double theta) {
        const double d = y - (1.0 + c * t) * x;
        return d * d - t / (theta + x * x);
      };
      spec.dg_dtheta = [](double t, double, double x, double theta) {
        const double v = theta + x * x;
        return t / (v * v);
      };
      spec.d2g_dy2_diag = [](double, double) { return 2.0; };
    } else {
      spec.g = [c](double t, double y, double x, double theta) {
        const double v = theta + x * x;
        const double d = y - (1.0 + c * t) * x;
        return std::pow(v, 10) * d * d - std::pow(v, 9) * t;
      };
      spec.dg_dtheta = [c](double t, double y, double x, double theta) {
        const double v = theta + x * x;
        const double d = y - (1.0 + c * t) * x;
        return 10.0 * std::pow(v, 9) * d * d - 9.0 * std::pow(v, 8) * t;
      };
      spec.d2g_dy2_diag = [](double x, double theta) {
        return 2.0 * std::pow(theta + x * x, 10);
      };
    }
    spec.kappa_claim = 2.0;
  } else if (name == "ou_exact" || name == "ou_simple") {
    require(has_b2_equal_theta(model),
            "builtin_estfun: '" + name + "' needs b^2(x;theta) = theta");
    const double c = linear_drift_coefficient(model, "builtin_estfun");
    require(std::fabs(c + 1.0) < 1e-9,
            "builtin_estfun: '" + name + "' expects drift -x");
    if (name == "ou_exact") {
      spec.g = [](double t, double y, double x, double theta) {
        const double d = y - std::exp(-t) * x;
        return d * d - 0.5 * theta * (1.0 - std::exp(-2.0 * t));
      };
      spec.dg_dtheta = [](double t, double, double, double) {
        return -0.5 * (1.0 - std::exp(-2.0 * t));
      };
      spec.d2g_dy2_diag = [](double, double) { return 2.0; };
      spec.kappa_claim = std::numeric_limits<double>::infinity();
    } else {
      spec.g = [](double t, double y, double x, double theta) {
        const double d = y - (1.0 - t) * x;
        return d * d - theta * t;
      };
      spec.dg_dtheta = [](double t, double, double, double) { return -t; };
      spec.d2g_dy2_diag = [](double, double) { return 2.0; };
      spec.kappa_claim = 2.0;
    }
  } else {
    throw UnknownEstFun("builtin_estfun: unknown estimating function '" + name +
                        "'");
  }
  return spec;
}

JacobsenReport check_jacobsen(const EstimatingFunctionSpec& spec,
                              const DiffusionModel& model,
                              const std::vector<double>& x_grid, double theta) {
  JacobsenReport report;
  report.grid = x_grid;
  report.defects.reserve(x_grid.size());
  double max_defect = 0.0;
  double threshold = 0.0;
  for (double x : x_grid) {
    if (!model.state_space.contains(x))
      throw DomainError("check_jacobsen: grid point outside state space");
    auto f = [&](double y) { return spec.g(0.0, y, x, theta); };
    const double defect = numdiff::d1(f, x);
    report.defects.push_back(defect);
    max_defect = std::fmax(max_defect, std::fabs(defect));
    const double scale = 1.0 + std::fabs(diag_d2y(spec, x, theta));
    threshold = std::fmax(threshold, 1e-6 * scale);
  }
  report.max_defect = max_defect;
  report.passed = max_defect <= threshold;
  return report;
}

std::string to_string(EfficiencyVerdict v) {
  switch (v) {
    case EfficiencyVerdict::efficient: return "efficient";
    case EfficiencyVerdict::not_efficient: return "not_efficient";
    default: return "undefined";
  }
}

EfficiencyReport check_efficiency(const EstimatingFunctionSpec& spec,
                                  const DiffusionModel& model,
                                  const std::vector<double>& x_grid,
                                  double theta) {
  EfficiencyReport report;
  bool undefined = false;
  for (double x : x_grid) {
    if (!model.state_space.contains(x))
      throw DomainError("check_efficiency: grid point outside state space");
    const double db2 = model.d_diffusion_sq_dtheta(x, theta);
    if (db2 == 0.0) {
      undefined = true;
      break;
    }
    const double b2 = model.diffusion_sq(x, theta);
    const double K = diag_d2y(spec, x, theta) * b2 * b2 / db2;
    report.K_values.emplace_back(x, K);
  }
  if (undefined || report.K_values.empty()) {
    report.verdict = EfficiencyVerdict::undefined;
    return report;
  }
  double kmin = report.K_values.front().second;
  double kmax = kmin;
  double kabs = 0.0;
  bool sign_flip = false, has_zero = false;
  for (const auto& [x, K] : report.K_values) {
    (void)x;
    kmin = std::fmin(kmin, K);
    kmax = std::fmax(kmax, K);
    kabs = std::fmax(kabs, std::fabs(K));
    if (K == 0.0) has_zero = true;
    if (K * report.K_values.front().second < 0.0) sign_flip = true;
  }
  report.relative_spread = kabs > 0.0 ? (kmax - kmin) / kabs : 0.0;
  const bool constant = report.relative_spread <= 1e-3;
  report.verdict = (constant && !sign_flip && !has_zero)
                       ? EfficiencyVerdict::efficient
                       : EfficiencyVerdict::not_efficient;
  return report;
}

DefectOrderResult martingale_defect_order(const EstimatingFunctionSpec& spec,
                                          const DiffusionModel& model, double x,
                                          double theta,
                                          const std::vector<double>& deltas,
                                          long mc_reps, std::uint64_t seed) {
  if (deltas.empty()) throw EmptyInput("martingale_defect_order: no deltas");
  if (mc_reps < 2) throw ConfigError("martingale_defect_order: mc_reps too small");
  DefectOrderResult result;
  std::vector<double> lx, ly, lse;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double delta = deltas[i];
    if (!(delta > 0.0 && delta <= 1.0))
      throw DomainError("martingale_defect_order: delta outside (0,1]");
    const McMoment m = mc_conditional_mean(spec, model, x, theta, theta, delta,
                                           mc_reps, splitmix64(seed + i));
    DefectOrderPoint pt;
    pt.delta = delta;
    pt.estimate = m.mean;
    pt.std_error = m.std_error;
    // Indistinguishable from zero at two standard errors; a one-sigma band
    // would let pure noise through on a third of the points.
    pt.censored = std::fabs(m.mean) < 2.0 * m.std_error;
    result.points.push_back(pt);
    if (!pt.censored) {
      lx.push_back(std::log(delta));
      ly.push_back(std::log(std::fabs(m.mean)));
      // Delta-method standard error of log|mean|.
      lse.push_back(m.std_error / std::fabs(m.mean));
    }
  }
  if (lx.size() < 2)
    throw AllCensored(
        "martingale_defect_order: defect consistent with exact martingale "
        "(all points below Monte Carlo noise)");

  const double n = static_cast<double>(lx.size());
  double mx = 0.0;
  for (double v : lx) mx += v;
  mx /= n;
  double sxx = 0.0, sxy = 0.0, my = 0.0;
  for (double v : ly) my += v;
  my /= n;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  result.slope = sxy / sxx;
  // Propagated MC uncertainty through the OLS weights.
  double var = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double c = (lx[i] - mx) / sxx;
    var += c * c * lse[i] * lse[i];
  }
  // Residual-based term guards against curvature the MC errors miss.
  if (lx.size() > 2) {
    double ss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double fit = my + result.slope * (lx[i] - mx);
      ss += (ly[i] - fit) * (ly[i] - fit);
    }
    var = std::fmax(var, ss / (n - 2.0) / sxx);
  }
  result.slope_stderr = std::sqrt(var);
  return result;
}

LeadingMomentResult leading_moment_check(const EstimatingFunctionSpec& spec,
                                         const DiffusionModel& model, double x,
                                         double theta, double theta0,
                                         double delta, long mc_reps,
                                         std::uint64_t seed) {
  const McMoment m =
      mc_conditional_mean(spec, model, x, theta, theta0, delta, mc_reps, seed);
  LeadingMomentResult r;
  r.mc_estimate = m.mean;
  r.std_error = m.std_error;
  r.predicted = 0.5 * delta *
                (model.diffusion_sq(x, theta0) - model.diffusion_sq(x, theta)) *
                diag_d2y(spec, x, theta);
  r.z_score = m.std_error > 0.0 ? (m.mean - r.predicted) / m.std_error : 0.0;
  return r;
}

}  // namespace diffest
