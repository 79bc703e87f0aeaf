#pragma once

#include <cstddef>
#include <vector>

namespace diffest {

// Equidistant grid of states on [0,1]: values[i] is the state at time
// i/n_steps, so values.size() == n_steps + 1.
struct PathGrid {
  long n_steps = 0;
  std::vector<double> values;

  double t0() const { return 0.0; }
  double t_end() const { return 1.0; }
  double step() const { return 1.0 / static_cast<double>(n_steps); }
};

}  // namespace diffest
