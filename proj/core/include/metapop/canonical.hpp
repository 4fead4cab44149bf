#pragma once

// Accelerated-time limit with slowed migration: every site follows the
// canonical diffusion in trait space and jumps to traits drawn from the
// measure flow xi, which is represented by an equally weighted ensemble.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "metapop/kernels.hpp"

namespace metapop {

// ((N - 1) / 2) theta(r, x) Sigma(r, x) grad_2 Fit(r, x, x).
Eigen::VectorXd canonical_drift(const RateModel& model, int N, double r, TraitView x);

struct XiEnsemble {
  std::size_t d = 0;
  double time = 0.0;
  std::vector<double> r;
  std::vector<double> traits;  // M * d

  std::size_t size() const { return r.size(); }
  TraitView trait(std::size_t i) const { return {traits.data() + i * d, d}; }
  std::span<double> trait_mut(std::size_t i) { return {traits.data() + i * d, d}; }
};

struct EnsembleMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // unbiased, per coordinate
};

EnsembleMoments ensemble_moments(const XiEnsemble& ensemble);

struct CanonicalOptions {
  double snapshot_interval = 0.0;  // 0: initial and final ensembles only
};

struct CanonicalTrajectory {
  std::vector<XiEnsemble> snapshots;
  std::size_t proposed_jumps = 0;
  std::size_t accepted_jumps = 0;
};

// Euler-Maruyama step for every particle against the frozen ensemble, then a
// thinned jump pass (proposal probability N^2 C dt, uniform target, acceptance
// lambda alpha / C). Throws std::invalid_argument if N^2 C dt >= 0.1.
CanonicalTrajectory canonical_ensemble_run(const RateModel& model, int N, XiEnsemble ensemble0, double dt,
                                           double horizon, Rng& rng, CanonicalOptions options = {});

struct TaggedCanonicalPath {
  std::vector<double> times;   // step grid, thinned by snapshot_interval
  std::vector<Trait> traits;
  std::vector<double> jump_times;
};

// One site at position z driven by stored ensembles; at a step starting at t
// the jump targets come from the last snapshot with time <= t.
TaggedCanonicalPath tagged_canonical_run(const RateModel& model, int N, double z, const Trait& x0,
                                         const std::vector<XiEnsemble>& xi, double dt, double horizon, Rng& rng,
                                         CanonicalOptions options = {});

}  // namespace metapop
