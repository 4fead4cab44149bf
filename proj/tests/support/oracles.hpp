#pragma once

// Independent reference computations for the tests.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "metapop/kernels.hpp"

namespace oracle {

// Probability that one invader takes over a two-type Moran patch of size N:
// the birth-death chain on i invaders moves up at rate i (N - i) c_xy and down
// at rate i (N - i) c_yx. Solved as a linear system on the transient states.
inline double absorption_probability(int N, double c_xy, double c_yx) {
  const int m = N - 1;
  if (m == 0) return 1.0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int i = 1; i <= N - 1; ++i) {
    const double up = c_xy / (c_xy + c_yx);
    const double down = 1.0 - up;
    const int row = i - 1;
    A(row, row) = 1.0;
    if (i + 1 <= N - 1) A(row, row + 1) = -up; else b[row] += up;
    if (i - 1 >= 1) A(row, row - 1) = -down;
  }
  return A.fullPivLu().solve(b)[0];
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
};

inline MeanSe summarize(const std::vector<double>& v) {
  MeanSe out;
  const double n = static_cast<double>(v.size());
  for (double x : v) out.mean += x;
  out.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - out.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  out.variance = m2 / (n - 1.0);
  out.se = std::sqrt(out.variance / n);
  const double mu4 = m4 / n;
  const double s2 = m2 / n;
  out.variance_se = std::sqrt(std::max(0.0, (mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n));
  return out;
}

// Two-type model on traits {0, 1}: a resident 0 is replaced by a 1 at rate
// `up`, a resident 1 by a 0 at rate `down`.
inline metapop::SelectionKernel two_type_selection(double up, double down) {
  return [up, down](double, metapop::TraitView x, metapop::TraitView y) {
    if (x[0] == 0.0 && y[0] == 1.0) return up;
    if (x[0] == 1.0 && y[0] == 0.0) return down;
    return 1.0;
  };
}

inline metapop::MutationRateKernel constant_theta(double v) {
  return [v](double, metapop::TraitView) { return v; };
}

inline metapop::MigrationKernel constant_lambda(double v) {
  return [v](double, metapop::TraitView, double, metapop::TraitView) { return v; };
}

inline metapop::SelectionKernel neutral() {
  return [](double, metapop::TraitView, metapop::TraitView) { return 1.0; };
}

}  // namespace oracle
