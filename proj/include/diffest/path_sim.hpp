#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include "diffest/grid.hpp"
#include "diffest/model.hpp"

namespace diffest {

enum class Scheme { euler, milstein };

Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

struct SimConfig {
  Scheme scheme = Scheme::milstein;
  long fine_steps = 100000;
  std::uint64_t seed = 0;
  double x0 = 0.0;
};

double euler_step(const DiffusionModel& model, double x, double theta,
                  double delta, double dW);

// Adds the 1/2 b b_x (dW^2 - delta) correction; strong order 1.
double milstein_step(const DiffusionModel& model, double x, double theta,
                     double delta, double dW);

// Fine path over [0,1]; Wiener increments are independent normals with
// variance 1/fine_steps from the seeded stream. Identical seed gives a
// bit-identical path.
PathGrid simulate_path(const DiffusionModel& model, double theta,
                       const SimConfig& config);

// Keep every (n_steps/n_obs)-th value; n_steps must be divisible by n_obs.
PathGrid subsample(const PathGrid& path, long n_obs);

// Left-endpoint Riemann sum of integrand(X_s) over [0,1].
double riemann_functional(const PathGrid& path,
                          const std::function<double(double)>& integrand);

// CSV serialization, header "t,x", 17 significant digits.
void write_path_csv(const PathGrid& path, std::ostream& out);
PathGrid read_path_csv(std::istream& in);

}  // namespace diffest
