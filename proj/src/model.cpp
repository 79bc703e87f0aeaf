#include "diffest/model.hpp"

#include <array>
#include <cmath>

#include "diffest/errors.hpp"
#include "diffest/numdiff.hpp"

namespace diffest {

namespace {

void check_point(const DiffusionModel& model, double x, double theta,
                 const char* where) {
  if (!model.state_space.contains(x))
    throw DomainError(std::string(where) + ": x outside state space");
  if (!model.theta_domain.contains(theta))
    throw DomainError(std::string(where) + ": theta outside parameter domain");
}

// Derivatives of f at x up to `order`, plus of a(.) and b^2(.;theta) up to
// order-2, as needed by the expanded generator powers.
struct LocalJet {
  std::array<double, 7> f{};  // f[i] = f^(i)(x), i = 0..6
  std::array<double, 5> a{};  // a[i] = a^(i)(x)
  std::array<double, 5> B{};  // B[i] = (b^2)^(i)(x; theta)
};

LocalJet make_jet(const DiffusionModel& model, const ScalarField& field,
                  double x, double theta, int k) {
  LocalJet j;
  const auto& f = field.eval;
  j.f[0] = f(x);
  if (k >= 1) {
    j.f[1] = numdiff::d1(f, x);
    j.f[2] = numdiff::d2(f, x);
  }
  if (k >= 2) {
    j.f[3] = numdiff::d3(f, x);
    j.f[4] = numdiff::d4(f, x);
  }
  if (k >= 3) {
    j.f[5] = numdiff::d5(f, x);
    j.f[6] = numdiff::d6(f, x);
  }

  const auto& a = model.drift;
  auto B = [&](double y) { return model.diffusion_sq(y, theta); };
  j.a[0] = a(x);
  j.B[0] = B(x);
  if (k >= 2) {
    j.a[1] = numdiff::d1(a, x);
    j.a[2] = numdiff::d2(a, x);
    if (model.d_diffusion_dx) {
      // d/dx b^2 = 2 b b_x when the model carries the analytic partial.
      j.B[1] = 2.0 * model.diffusion(x, theta) * model.d_diffusion_dx(x, theta);
    } else {
      j.B[1] = numdiff::d1(B, x);
    }
    j.B[2] = numdiff::d2(B, x);
  }
  if (k >= 3) {
    j.a[3] = numdiff::d3(a, x);
    j.a[4] = numdiff::d4(a, x);
    j.B[3] = numdiff::d3(B, x);
    j.B[4] = numdiff::d4(B, x);
  }
  return j;
}

// L^k f at x for k = 0..3 via the product-rule expansion; every entry of
// the jet is a direct stencil, so no derivative is taken of a value that
// already carries stencil noise.
std::array<double, 4> generator_powers(const LocalJet& j, int k) {
  std::array<double, 4> out{};
  out[0] = j.f[0];
  if (k < 1) return out;
  const auto& a = j.a;
  const auto& B = j.B;
  const auto& f = j.f;

  out[1] = a[0] * f[1] + 0.5 * B[0] * f[2];
  if (k < 2) return out;

  // u = L f; u', u'' by Leibniz on a f' + 1/2 B f''.
  const double u1 = a[1] * f[1] + a[0] * f[2] + 0.5 * B[1] * f[2] + 0.5 * B[0] * f[3];
  const double u2 = a[2] * f[1] + 2.0 * a[1] * f[2] + a[0] * f[3] +
                    0.5 * B[2] * f[2] + B[1] * f[3] + 0.5 * B[0] * f[4];
  out[2] = a[0] * u1 + 0.5 * B[0] * u2;
  if (k < 3) return out;

  const double u3 = a[3] * f[1] + 3.0 * a[2] * f[2] + 3.0 * a[1] * f[3] +
                    a[0] * f[4] + 0.5 * B[3] * f[2] + 1.5 * B[2] * f[3] +
                    1.5 * B[1] * f[4] + 0.5 * B[0] * f[5];
  const double u4 = a[4] * f[1] + 4.0 * a[3] * f[2] + 6.0 * a[2] * f[3] +
                    4.0 * a[1] * f[4] + a[0] * f[5] + 0.5 * B[4] * f[2] +
                    2.0 * B[3] * f[3] + 3.0 * B[2] * f[4] + 2.0 * B[1] * f[5] +
                    0.5 * B[0] * f[6];
  const double v1 = a[1] * u1 + a[0] * u2 + 0.5 * B[1] * u2 + 0.5 * B[0] * u3;
  const double v2 = a[2] * u1 + 2.0 * a[1] * u2 + a[0] * u3 + 0.5 * B[2] * u2 +
                    B[1] * u3 + 0.5 * B[0] * u4;
  out[3] = a[0] * v1 + 0.5 * B[0] * v2;
  return out;
}

}  // namespace

double generator_apply(const DiffusionModel& model, const ScalarField& f,
                       double x, double theta) {
  check_point(model, x, theta, "generator_apply");
  const double d1 = numdiff::d1(f.eval, x);
  const double d2 = numdiff::d2(f.eval, x);
  const double r = model.drift(x) * d1 + 0.5 * model.diffusion_sq(x, theta) * d2;
  if (!std::isfinite(r))
    throw NonFiniteResult("generator_apply: non-finite result");
  return r;
}

double generator_power_apply(const DiffusionModel& model, const ScalarField& f,
                             double x, double theta, int k) {
  if (k < 0 || k > 3)
    throw OrderTooHigh("generator_power_apply: k must be in {0,1,2,3}");
  check_point(model, x, theta, "generator_power_apply");
  const LocalJet jet = make_jet(model, f, x, theta, k);
  const double r = generator_powers(jet, k)[static_cast<std::size_t>(k)];
  if (!std::isfinite(r))
    throw NonFiniteResult("generator_power_apply: non-finite result");
  return r;
}

double conditional_moment_expansion(const DiffusionModel& model,
                                    const ScalarField& f, double x,
                                    double delta, double theta, int k) {
  if (k < 0 || k > 3)
    throw OrderTooHigh("conditional_moment_expansion: k must be in {0,1,2,3}");
  if (!(delta > 0.0 && delta <= 1.0))
    throw DomainError("conditional_moment_expansion: delta outside (0,1]");
  check_point(model, x, theta, "conditional_moment_expansion");
  const LocalJet jet = make_jet(model, f, x, theta, k);
  const auto powers = generator_powers(jet, k);
  double sum = 0.0;
  double coeff = 1.0;  // delta^i / i!
  for (int i = 0; i <= k; ++i) {
    if (i > 0) coeff *= delta / static_cast<double>(i);
    sum += coeff * powers[static_cast<std::size_t>(i)];
  }
  if (!std::isfinite(sum))
    throw NonFiniteResult("conditional_moment_expansion: non-finite result");
  return sum;
}

double fisher_info_path(const DiffusionModel& model, const PathGrid& path,
                        double theta0) {
  if (path.values.size() < 2 || path.n_steps < 1)
    throw EmptyPath("fisher_info_path: path has no steps");
  const double dt = path.step();
  double sum = 0.0;
  for (long i = 0; i < path.n_steps; ++i) {
    const double x = path.values[static_cast<std::size_t>(i)];
    const double ratio =
        model.d_diffusion_sq_dtheta(x, theta0) / model.diffusion_sq(x, theta0);
    sum += 0.5 * ratio * ratio;
  }
  const double r = sum * dt;
  if (!std::isfinite(r))
    throw NonFiniteResult("fisher_info_path: non-finite result");
  return r;
}

DiffusionModel builtin_model(const std::string& name) {
  const double inf = std::numeric_limits<double>::infinity();
  DiffusionModel m;
  m.name = name;
  m.state_space = Interval{-inf, inf};
  m.theta_domain = Interval{0.0, inf};
  if (name == "ou_sqrt_theta") {
    m.drift = [](double x) { return -x; };
    m.diffusion = [](double, double theta) { return std::sqrt(theta); };
    m.d_diffusion_dx = [](double, double) { return 0.0; };
    m.d_diffusion_sq_dtheta = [](double, double) { return 1.0; };
  } else if (name == "ergodic_sec4" || name == "nonergodic_sec4") {
    const double c = (name == "ergodic_sec4") ? -2.0 : 2.0;
    m.drift = [c](double x) { return c * x; };
    m.diffusion = [](double x, double theta) {
      return 1.0 / std::sqrt(theta + x * x);
    };
    m.d_diffusion_dx = [](double x, double theta) {
      return -x * std::pow(theta + x * x, -1.5);
    };
    m.d_diffusion_sq_dtheta = [](double x, double theta) {
      const double v = theta + x * x;
      return -1.0 / (v * v);
    };
  } else if (name == "pearson_scaled") {
    // Multiplicative shape b^2(x;theta) = theta (1 + x^2), so the Fisher
    // information is non-random: I(theta0) = 1/(2 theta0^2).
    m.drift = [](double x) { return -x; };
    m.diffusion = [](double x, double theta) {
      return std::sqrt(theta * (1.0 + x * x));
    };
    m.d_diffusion_dx = [](double x, double theta) {
      return theta * x / std::sqrt(theta * (1.0 + x * x));
    };
    m.d_diffusion_sq_dtheta = [](double x, double) { return 1.0 + x * x; };
  } else {
    throw UnknownModel("builtin_model: unknown model '" + name + "'");
  }
  return m;
}

}  // namespace diffest
