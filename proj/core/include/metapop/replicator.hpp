#pragma once

// Small-mutation regime with finitely many traits: the spatial weight system
// on a midpoint r-grid and its homogeneous reduction, the antisymmetric
// replicator equation dw^i/dt = w^i (A w)^i.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "metapop/kernels.hpp"

namespace metapop {

struct InteractionMatrix {
  Eigen::MatrixXd A;
  std::vector<Trait> traits;
  double max_asymmetry = 0.0;  // max |A + A^T| before antisymmetrization
};

// Rate at which a resident x is replaced by a migrant y, lambda(x, y) alpha(y, x).
using ReplacementRate = std::function<double(TraitView x, TraitView y)>;

// a_ij = N^2 (lambda(x^j, x^i) alpha(x^i, x^j) - lambda(x^i, x^j) alpha(x^j, x^i)):
// the net rate at which x^i takes over sites held by x^j. Needs a homogeneous
// model; throws std::invalid_argument on duplicate traits.
InteractionMatrix build_interaction_matrix(const RateModel& model, const std::vector<Trait>& traits, int N);

// Same construction from the product lambda alpha directly.
InteractionMatrix build_interaction_matrix(const ReplacementRate& rate, const std::vector<Trait>& traits, int N);

struct WeightTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> weights;
};

// RK4 at fixed dt without renormalization; keeps every `record_every`-th step
// and the last one. Throws NumericalError if a weight drops below -1e-8.
WeightTrajectory replicator_integrate(const InteractionMatrix& A, const Eigen::VectorXd& w0, double dt,
                                      double horizon, std::size_t record_every = 1);

// Densities w^i(r_g) at r_g = (g + 1/2) / G, stored n x G.
struct SpatialTrajectory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> weights;

  // (1/G) sum_g w^i(r_g) at snapshot k.
  Eigen::VectorXd mean_weights(std::size_t k) const;
};

SpatialTrajectory spatial_weights_integrate(const RateModel& model, const std::vector<Trait>& traits, int N,
                                            const Eigen::MatrixXd& w0, double dt, double horizon,
                                            std::size_t record_every = 1);

// Index i* with w0[i*] > 0 and a_{i* j} > 0 for every j != i*.
std::optional<std::size_t> invasion_check(const InteractionMatrix& A, const Eigen::VectorXd& w0);

// Zero of A on the open simplex, if any (least squares on A w = 0, sum w = 1).
std::optional<Eigen::VectorXd> interior_equilibrium(const InteractionMatrix& A);

// sum_i w*_i log w_i, conserved along the flow when w* is an interior zero.
double replicator_integral(const Eigen::VectorXd& w_star, const Eigen::VectorXd& w);

}  // namespace metapop
