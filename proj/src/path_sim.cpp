#include "diffest/path_sim.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "diffest/errors.hpp"
#include "diffest/rng.hpp"

namespace diffest {

Scheme scheme_from_string(const std::string& s) {
  if (s == "euler") return Scheme::euler;
  if (s == "milstein") return Scheme::milstein;
  throw ConfigError("unknown scheme '" + s + "'");
}

std::string to_string(Scheme s) {
  return s == Scheme::euler ? "euler" : "milstein";
}

double euler_step(const DiffusionModel& model, double x, double theta,
                  double delta, double dW) {
  const double r = x + model.drift(x) * delta + model.diffusion(x, theta) * dW;
  if (!std::isfinite(r)) throw NonFiniteResult("euler_step: non-finite state");
  return r;
}

double milstein_step(const DiffusionModel& model, double x, double theta,
                     double delta, double dW) {
  if (!model.d_diffusion_dx)
    throw MissingDerivative("milstein_step: model lacks d_diffusion_dx");
  const double b = model.diffusion(x, theta);
  const double bx = model.d_diffusion_dx(x, theta);
  const double r = x + model.drift(x) * delta + b * dW +
                   0.5 * b * bx * (dW * dW - delta);
  if (!std::isfinite(r))
    throw NonFiniteResult("milstein_step: non-finite state");
  return r;
}

PathGrid simulate_path(const DiffusionModel& model, double theta,
                       const SimConfig& config) {
  if (config.fine_steps < 1)
    throw ConfigError("simulate_path: fine_steps must be >= 1");
  if (!model.state_space.contains(config.x0))
    throw DomainError("simulate_path: x0 outside state space");
  if (!model.theta_domain.contains(theta))
    throw DomainError("simulate_path: theta outside parameter domain");

  PathGrid path;
  path.n_steps = config.fine_steps;
  path.values.resize(static_cast<std::size_t>(config.fine_steps) + 1);
  path.values[0] = config.x0;

  NormalStream rng(config.seed);
  const double dt = 1.0 / static_cast<double>(config.fine_steps);
  const double sqrt_dt = std::sqrt(dt);
  double x = config.x0;
  for (long i = 1; i <= config.fine_steps; ++i) {
    const double dW = rng.normal() * sqrt_dt;
    x = (config.scheme == Scheme::milstein)
            ? milstein_step(model, x, theta, dt, dW)
            : euler_step(model, x, theta, dt, dW);
    if (!model.state_space.contains(x))
      throw StateEscape(
          "simulate_path: state left the state space at step " +
              std::to_string(i),
          i);
    path.values[static_cast<std::size_t>(i)] = x;
  }
  return path;
}

PathGrid subsample(const PathGrid& path, long n_obs) {
  if (n_obs < 1) throw IndivisibleGrid("subsample: n_obs must be >= 1");
  if (path.n_steps % n_obs != 0)
    throw IndivisibleGrid("subsample: " + std::to_string(path.n_steps) +
                          " steps not divisible by " + std::to_string(n_obs));
  const long stride = path.n_steps / n_obs;
  PathGrid out;
  out.n_steps = n_obs;
  out.values.resize(static_cast<std::size_t>(n_obs) + 1);
  for (long i = 0; i <= n_obs; ++i)
    out.values[static_cast<std::size_t>(i)] =
        path.values[static_cast<std::size_t>(i * stride)];
  return out;
}

double riemann_functional(const PathGrid& path,
                          const std::function<double(double)>& integrand) {
  if (path.values.size() < 2 || path.n_steps < 1)
    throw EmptyPath("riemann_functional: path has no steps");
  const double dt = path.step();
  double sum = 0.0;
  for (long i = 0; i < path.n_steps; ++i)
    sum += integrand(path.values[static_cast<std::size_t>(i)]);
  const double r = sum * dt;
  if (!std::isfinite(r))
    throw NonFiniteResult("riemann_functional: non-finite result");
  return r;
}

void write_path_csv(const PathGrid& path, std::ostream& out) {
  out << "t,x\n";
  char buf[64];
  const double dt = path.step();
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(i) * dt);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", path.values[i]);
    out << buf << '\n';
  }
}

PathGrid read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x", 0) != 0)
    throw IoError("read_path_csv: missing 't,x' header");
  PathGrid path;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError("read_path_csv: malformed row '" + line + "'");
    const double v = std::stod(line.substr(comma + 1));
    if (!std::isfinite(v))
      throw IoError("read_path_csv: non-finite value in '" + line + "'");
    path.values.push_back(v);
  }
  if (path.values.size() < 2) throw IoError("read_path_csv: too few rows");
  path.n_steps = static_cast<long>(path.values.size()) - 1;
  return path;
}

}  // namespace diffest
