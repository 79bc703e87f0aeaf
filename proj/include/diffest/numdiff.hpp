#pragma once

#include <cmath>
#include <limits>

namespace diffest::numdiff {

// Central-difference stencils for derivative orders 1..6. Step sizes
// follow the usual truncation/roundoff balance eps^(1/(order+2)),
// scaled by max(1,|x|). The step is symmetrized so that x+h and x-h
// are exactly representable offsets of x.

inline double step_for(int order, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double scale = std::fmax(1.0, std::fabs(x));
  return std::pow(eps, 1.0 / (order + 2)) * scale;
}

inline double exact_step(double x, double h) {
  volatile double t = x + h;
  return t - x;
}

template <class F>
double d1(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(1, x);
  h = exact_step(x, h);
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
double d2(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(2, x);
  h = exact_step(x, h);
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// 5-point second derivative, used for the diagonal d2y of estimating
// functions where extra accuracy matters.
template <class F>
double d2_5pt(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(2, x);
  h = exact_step(x, h);
  const double num = -f(x + 2 * h) + 16.0 * f(x + h) - 30.0 * f(x) +
                     16.0 * f(x - h) - f(x - 2 * h);
  return num / (12.0 * h * h);
}

template <class F>
double d3(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(3, x);
  h = exact_step(x, h);
  const double num = f(x + 2 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2 * h);
  return num / (2.0 * h * h * h);
}

template <class F>
double d4(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(4, x);
  h = exact_step(x, h);
  const double num =
      f(x - 2 * h) - 4.0 * f(x - h) + 6.0 * f(x) - 4.0 * f(x + h) + f(x + 2 * h);
  return num / (h * h * h * h);
}

template <class F>
double d5(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(5, x);
  h = exact_step(x, h);
  const double num = -f(x - 3 * h) + 4.0 * f(x - 2 * h) - 5.0 * f(x - h) +
                     5.0 * f(x + h) - 4.0 * f(x + 2 * h) + f(x + 3 * h);
  return num / (2.0 * std::pow(h, 5));
}

template <class F>
double d6(const F& f, double x, double h = 0.0) {
  if (h <= 0.0) h = step_for(6, x);
  h = exact_step(x, h);
  const double num = f(x - 3 * h) - 6.0 * f(x - 2 * h) + 15.0 * f(x - h) -
                     20.0 * f(x) + 15.0 * f(x + h) - 6.0 * f(x + 2 * h) +
                     f(x + 3 * h);
  return num / std::pow(h, 6);
}

}  // namespace diffest::numdiff
