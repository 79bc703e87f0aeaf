#include "diffest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "diffest/errors.hpp"
#include "diffest/numdiff.hpp"

namespace diffest {

Sample Sample::from_grid(const PathGrid& grid) {
  if (grid.values.size() < 2)
    throw EmptyPath("Sample::from_grid: path has no steps");
  for (double v : grid.values)
    if (!std::isfinite(v))
      throw NonFiniteResult("Sample::from_grid: non-finite observation");
  Sample s;
  s.delta = 1.0 / static_cast<double>(grid.n_steps);
  s.values = grid.values;
  return s;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::no_root: return "no_root";
    case SolveStatus::multiple_roots_resolved: return "multiple_roots_resolved";
    default: return "degenerate_w";
  }
}

double eval_G(const EstimatingFunctionSpec& spec, const Sample& sample,
              double theta) {
  double sum = 0.0;
  for (std::size_t i = 1; i < sample.values.size(); ++i) {
    sum += spec.g(sample.delta, sample.values[i], sample.values[i - 1], theta);
    if (!std::isfinite(sum))
      throw NonFiniteResult("eval_G: non-finite term at increment " +
                            std::to_string(i));
  }
  return sum;
}

double eval_dG(const EstimatingFunctionSpec& spec, const Sample& sample,
               double theta) {
  double sum = 0.0;
  if (spec.dg_dtheta) {
    for (std::size_t i = 1; i < sample.values.size(); ++i)
      sum += spec.dg_dtheta(sample.delta, sample.values[i],
                            sample.values[i - 1], theta);
  } else {
    const double h =
        numdiff::exact_step(theta, 1e-6 * std::fmax(1.0, std::fabs(theta)));
    for (std::size_t i = 1; i < sample.values.size(); ++i) {
      const double up = spec.g(sample.delta, sample.values[i],
                               sample.values[i - 1], theta + h);
      const double dn = spec.g(sample.delta, sample.values[i],
                               sample.values[i - 1], theta - h);
      sum += (up - dn) / (2.0 * h);
    }
  }
  if (!std::isfinite(sum)) throw NonFiniteResult("eval_dG: non-finite result");
  return sum;
}

namespace {

struct Root {
  double theta;
  double residual;
};

// Safeguarded bracketing: bisection with a secant candidate accepted only
// when it stays inside the bracket. fa and fb must have opposite signs.
Root refine_root(const std::function<double(double)>& f, double a, double b,
                 double fa, double fb, double xtol, int max_iter,
                 int* iterations) {
  for (int it = 0; it < max_iter; ++it) {
    ++*iterations;
    const double width = b - a;
    if (width <= xtol * std::fmax(1.0, std::fmax(std::fabs(a), std::fabs(b))))
      break;
    double m;
    const double denom = fb - fa;
    if (denom != 0.0) {
      m = b - fb * (b - a) / denom;  // secant
      const double margin = 0.01 * width;
      if (!(m > a + margin && m < b - margin)) m = 0.5 * (a + b);
    } else {
      m = 0.5 * (a + b);
    }
    const double fm = f(m);
    if (fm == 0.0) return {m, 0.0};
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  return (std::fabs(fa) <= std::fabs(fb)) ? Root{a, fa} : Root{b, fb};
}

}  // namespace

EstimationResult solve(const EstimatingFunctionSpec& spec, const Sample& sample,
                       const RootSolverConfig& config) {
  EstimationResult result;
  if (!(config.search_lo < config.search_hi) || config.scan_points < 2) {
    result.status = SolveStatus::no_root;
    return result;
  }
  auto G = [&](double theta) { return eval_G(spec, sample, theta); };

  const int np = config.scan_points;
  std::vector<double> grid(static_cast<std::size_t>(np));
  std::vector<double> val(static_cast<std::size_t>(np));
  std::vector<bool> ok(static_cast<std::size_t>(np), false);
  for (int i = 0; i < np; ++i) {
    const double t = config.search_lo +
                     (config.search_hi - config.search_lo) * i / (np - 1.0);
    grid[static_cast<std::size_t>(i)] = t;
    try {
      val[static_cast<std::size_t>(i)] = G(t);
      ok[static_cast<std::size_t>(i)] =
          std::isfinite(val[static_cast<std::size_t>(i)]);
    } catch (const NonFiniteResult&) {
      ok[static_cast<std::size_t>(i)] = false;
    }
  }

  int iterations = 0;
  std::vector<Root> roots;
  for (int i = 0; i < np; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!ok[u]) continue;
    if (val[u] == 0.0) {
      if (roots.empty() || roots.back().theta != grid[u])
        roots.push_back({grid[u], 0.0});
      continue;
    }
    if (i + 1 < np) {
      const auto v = u + 1;
      if (ok[v] && val[v] != 0.0 && (val[u] < 0.0) != (val[v] < 0.0)) {
        try {
          roots.push_back(refine_root(G, grid[u], grid[v], val[u], val[v],
                                      config.xtol, config.max_iter,
                                      &iterations));
        } catch (const NonFiniteResult&) {
          // Bracket crossed a numeric blow-up; drop it.
        }
      }
    }
  }

  result.iterations = iterations;
  result.n_roots_found = static_cast<int>(roots.size());
  if (roots.empty()) {
    result.status = SolveStatus::no_root;
    return result;
  }

  std::size_t pick = 0;
  if (roots.size() > 1) {
    if (config.policy == MultiplicityPolicy::leftmost) {
      pick = 0;  // roots are found left to right
    } else {
      const double ref = std::isnan(config.ref)
                             ? 0.5 * (config.search_lo + config.search_hi)
                             : config.ref;
      double best = std::fabs(roots[0].theta - ref);
      for (std::size_t i = 1; i < roots.size(); ++i) {
        const double d = std::fabs(roots[i].theta - ref);
        if (d < best) {  // ties keep the leftmost
          best = d;
          pick = i;
        }
      }
    }
  }
  result.theta_hat = roots[pick].theta;
  result.g_at_root = roots[pick].residual;
  result.status = roots.size() > 1 ? SolveStatus::multiple_roots_resolved
                                   : SolveStatus::converged;
  return result;
}

double compute_What(const EstimatingFunctionSpec& spec, const Sample& sample,
                    double theta_hat) {
  double sumsq = 0.0;
  for (std::size_t i = 1; i < sample.values.size(); ++i) {
    const double gi =
        spec.g(sample.delta, sample.values[i], sample.values[i - 1], theta_hat);
    sumsq += gi * gi;
  }
  const double numerator = std::sqrt(sumsq / sample.delta);
  const double denominator = eval_dG(spec, sample, theta_hat);
  const double scale = std::fmax(1.0, numerator);
  if (numerator == 0.0)
    throw DegenerateNormalizer("compute_What: zero numerator");
  if (std::fabs(denominator) < 1e-12 * scale)
    throw DegenerateNormalizer("compute_What: denominator below scale");
  const double w = -numerator / denominator;
  if (!std::isfinite(w)) throw DegenerateNormalizer("compute_What: non-finite");
  return w;
}

EstimationResult estimate(const EstimatingFunctionSpec& spec,
                          const Sample& sample,
                          const RootSolverConfig& config) {
  EstimationResult result = solve(spec, sample, config);
  if (!result.theta_hat) return result;
  try {
    result.w_hat = compute_What(spec, sample, *result.theta_hat);
  } catch (const DegenerateNormalizer&) {
    result.status = SolveStatus::degenerate_w;
  }
  return result;
}

double normalized_stat(double theta_hat, double w_hat, double theta0, long n) {
  if (w_hat == 0.0 || !std::isfinite(w_hat))
    throw DegenerateNormalizer("normalized_stat: w_hat is zero");
  return std::sqrt(static_cast<double>(n)) * (theta_hat - theta0) / w_hat;
}

namespace {

struct DiagIntegrals {
  double half_b4_d2sq = 0.0;    // int 1/2 b^4 (d2y g)^2
  double half_db2_d2 = 0.0;     // int 1/2 d_theta b^2 d2y g
};

DiagIntegrals diag_integrals(const EstimatingFunctionSpec& spec,
                             const DiffusionModel& model,
                             const PathGrid& fine_path, double theta) {
  if (fine_path.values.size() < 2 || fine_path.n_steps < 1)
    throw EmptyPath("mixing integrals: path has no steps");
  const double dt = fine_path.step();
  DiagIntegrals out;
  for (long i = 0; i < fine_path.n_steps; ++i) {
    const double x = fine_path.values[static_cast<std::size_t>(i)];
    const double d2 = diag_d2y(spec, x, theta);
    const double b2 = model.diffusion_sq(x, theta);
    out.half_b4_d2sq += 0.5 * b2 * b2 * d2 * d2;
    out.half_db2_d2 += 0.5 * model.d_diffusion_sq_dtheta(x, theta) * d2;
  }
  out.half_b4_d2sq *= dt;
  out.half_db2_d2 *= dt;
  return out;
}

}  // namespace

double mixing_W(const EstimatingFunctionSpec& spec, const DiffusionModel& model,
                const PathGrid& fine_path, double theta0) {
  const DiagIntegrals ints = diag_integrals(spec, model, fine_path, theta0);
  const double num = std::sqrt(ints.half_b4_d2sq);
  if (std::fabs(ints.half_db2_d2) < 1e-14 * std::fmax(1.0, num))
    throw ZeroDenominator("mixing_W: int 1/2 d_theta b^2 d2y g vanishes");
  const double w = num / ints.half_db2_d2;
  if (!std::isfinite(w)) throw NonFiniteResult("mixing_W: non-finite result");
  return w;
}

LimitFunctionals limit_functionals(const EstimatingFunctionSpec& spec,
                                   const DiffusionModel& model,
                                   const PathGrid& fine_path, double theta,
                                   double theta0) {
  if (fine_path.values.size() < 2 || fine_path.n_steps < 1)
    throw EmptyPath("limit_functionals: path has no steps");
  const double dt = fine_path.step();
  const double htheta =
      numdiff::step_for(1, theta);
  LimitFunctionals out;
  for (long i = 0; i < fine_path.n_steps; ++i) {
    const double x = fine_path.values[static_cast<std::size_t>(i)];
    const double diff_b2 =
        model.diffusion_sq(x, theta0) - model.diffusion_sq(x, theta);
    const double d2 = diag_d2y(spec, x, theta);
    const double b2_0 = model.diffusion_sq(x, theta0);
    // d_theta of the diagonal second derivative, central difference.
    const double h = numdiff::exact_step(theta, htheta);
    const double d2_dtheta =
        (diag_d2y(spec, x, theta + h) - diag_d2y(spec, x, theta - h)) /
        (2.0 * h);
    out.A += 0.5 * diff_b2 * d2;
    out.B += 0.5 * diff_b2 * d2_dtheta -
             0.5 * model.d_diffusion_sq_dtheta(x, theta) * d2;
    out.C += 0.5 * (b2_0 * b2_0 + 0.5 * diff_b2 * diff_b2) * d2 * d2;
  }
  out.A *= dt;
  out.B *= dt;
  out.C *= dt;
  if (!std::isfinite(out.A) || !std::isfinite(out.B) || !std::isfinite(out.C))
    throw NonFiniteResult("limit_functionals: non-finite result");
  return out;
}

FisherConsistency fisher_consistency_check(const EstimatingFunctionSpec& spec,
                                           const DiffusionModel& model,
                                           const PathGrid& fine_path,
                                           double theta0) {
  FisherConsistency out;
  out.mixing_w_abs = std::fabs(mixing_W(spec, model, fine_path, theta0));
  out.fisher_value = 1.0 / std::sqrt(fisher_info_path(model, fine_path, theta0));
  out.ratio = out.mixing_w_abs / out.fisher_value;
  return out;
}

std::string EstimationResult::to_json() const {
  auto num = [](std::optional<double> v) -> std::string {
    if (!v) return "null";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
  };
  std::ostringstream os;
  os << "{\"theta_hat\":" << num(theta_hat) << ",\"w_hat\":" << num(w_hat)
     << ",\"status\":\"" << to_string(status)
     << "\",\"n_roots_found\":" << n_roots_found << ",\"g_at_root\":"
     << (std::isnan(g_at_root) ? std::string("null") : num(g_at_root))
     << ",\"iterations\":" << iterations << "}";
  return os.str();
}

}  // namespace diffest
