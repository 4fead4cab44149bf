#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metapop/errors.hpp"
#include "metapop/rng.hpp"
#include "metapop/trait.hpp"

namespace metapop {

// c(r, x, y): rate at which, inside the patch at position r, an individual
// with trait x is replaced by a copy of an individual with trait y.
using SelectionKernel = std::function<double(double r, TraitView x, TraitView y)>;
// theta(r, x): per-individual mutation rate (before the gamma factor).
using MutationRateKernel = std::function<double(double r, TraitView x)>;
// lambda((r, x), (rp, y)): migration kernel, resident (r, x) replaced by a
// migrant (rp, y).
using MigrationKernel = std::function<double(double r, TraitView x, double rp, TraitView y)>;
using MutationScaleFn = std::function<double(double r, TraitView x)>;

enum class MutationKind { isotropic_gaussian, uniform_ball, discrete_pm, degenerate };

std::string to_string(MutationKind kind);
std::optional<MutationKind> parse_mutation_kind(const std::string& name);

// Law of the mutant trait: y = x + epsilon * h with h drawn from a centered
// law m(r, x, dh) of the given kind.
//   isotropic_gaussian: h ~ Normal(0, scale^2 I)
//   uniform_ball:       h uniform in the ball of radius `scale`
//   discrete_pm:        independent +-1 on every axis
//   degenerate:         h = 0
struct MutationFamily {
  MutationKind kind = MutationKind::degenerate;
  double scale = 1.0;
  double epsilon = 0.0;
  MutationScaleFn scale_fn;  // overrides `scale` when set

  static MutationFamily gaussian(double s, double eps) { return {MutationKind::isotropic_gaussian, s, eps, {}}; }
  static MutationFamily ball(double radius, double eps) { return {MutationKind::uniform_ball, radius, eps, {}}; }
  static MutationFamily plus_minus(double eps) { return {MutationKind::discrete_pm, 1.0, eps, {}}; }
  static MutationFamily none() { return {}; }

  double scale_at(double r, TraitView x) const { return scale_fn ? scale_fn(r, x) : scale; }
};

struct MutationCovariance {
  Eigen::MatrixXd sigma2;  // Sigma, covariance of h
  Eigen::MatrixXd factor;  // sigma with Sigma = sigma sigma^T
};

// The rate kernels c, theta, lambda, the mutation family and the global
// bound C. Every evaluation through the member functions is checked against
// [0, C]; a violation throws RateBoundError.
class RateModel {
 public:
  RateModel(std::size_t dim, SelectionKernel c, MutationRateKernel theta, MigrationKernel lambda,
            MutationFamily mutation, double bound_C, bool homogeneous = false);

  std::size_t dim() const { return dim_; }
  double bound() const { return bound_C_; }
  bool homogeneous() const { return homogeneous_; }
  const MutationFamily& mutation() const { return mutation_; }

  double c(double r, TraitView x, TraitView y) const { return checked(c_(r, x, y), "c"); }
  double theta(double r, TraitView x) const { return checked(theta_(r, x), "theta"); }
  double lambda(double r, TraitView x, double rp, TraitView y) const {
    return checked(lambda_(r, x, rp, y), "lambda");
  }

  RateModel with_mutation(MutationFamily mutation) const;
  RateModel with_lambda(MigrationKernel lambda) const;
  RateModel with_theta(MutationRateKernel theta) const;

 private:
  double checked(double v, const char* name) const {
    if (!(v >= 0.0 && v <= bound_C_)) throw_bound(v, name);
    return v;
  }
  [[noreturn]] void throw_bound(double v, const char* name) const;

  std::size_t dim_;
  SelectionKernel c_;
  MutationRateKernel theta_;
  MigrationKernel lambda_;
  MutationFamily mutation_;
  double bound_C_;
  bool homogeneous_;
};

// Probability that a single y-individual takes over an N-patch of
// x-residents, from the two replacement rates
//   c_xy = c(r, x, y)  (a resident is replaced by the invader)
//   c_yx = c(r, y, x)  (the invader is replaced by a resident).
// Returns 0 when c_xy == 0, 1/N when the rates are equal.
double fixation_probability(double c_xy, double c_yx, int N);
double fixation_probability(const RateModel& model, double r, TraitView y, TraitView x, int N);

// Fit(r, y, x) = log(c(r, x, y) / c(r, y, x)). Throws DomainError when
// either rate vanishes.
double relative_fitness(const RateModel& model, double r, TraitView y, TraitView x);

// Finite-difference step used for the selection gradients.
double gradient_step(TraitView x);

// Gradient of y -> Fit(r, y, x) at y = x, by central differences.
Eigen::VectorXd fitness_gradient(const RateModel& model, double r, TraitView x);

// Gradient of y -> alpha(r, y, x) at y = x, by central differences.
Eigen::VectorXd fixation_gradient(const RateModel& model, double r, TraitView x, int N);

void sample_mutation_into(const MutationFamily& fam, double r, TraitView x, Rng& rng, std::span<double> out);
Trait sample_mutation(const MutationFamily& fam, double r, TraitView x, Rng& rng);

// Atoms of Q(r, x, dy) for the discrete families; nullopt for the
// continuous ones.
std::optional<std::vector<std::pair<Trait, double>>> mutation_atoms(const MutationFamily& fam, double r,
                                                                    TraitView x);

MutationCovariance mutation_covariance(const MutationFamily& fam, double r, TraitView x);

// Symmetric PSD square root or Cholesky factor of `sigma2`.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma2);

struct ProbeBox {
  double lo = 0.0;
  double hi = 1.0;
};

// Evaluates c, theta and lambda at `probes` uniform random points of
// [0,1] x box^d and throws RateBoundError (naming the kernel and the probe)
// on the first value outside [0, C].
void probe_bounds(const RateModel& model, Rng& rng, std::size_t probes = 10000, ProbeBox box = {});

}  // namespace metapop
