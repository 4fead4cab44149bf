#pragma once

// Large-K limit: the deterministic measure flow for finitely many traits,
// tagged sites driven by a given flow, the interacting-particle form of the
// homogeneous McKean-Vlasov process and a propagation-of-chaos scan.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metapop/kernels.hpp"
#include "metapop/measure.hpp"
#include "metapop/tss.hpp"

namespace metapop {

// Time-indexed measures, read as piecewise constant with left limits:
// at time t the measure in effect is the last one stored strictly before t.
struct MeasureTrajectory {
  std::vector<double> times;
  std::vector<AtomicMeasure> measures;

  const AtomicMeasure& left_limit(double t) const;
};

struct FiniteSolveResult {
  MeasureTrajectory trajectory;
  std::vector<std::string> warnings;
  double max_mass_error = 0.0;
};

// Integrates the closed system for the weights of nu on trait_set x {positions
// of the initial atoms} with RK4 at fixed dt. Mutation-fixation moves mass at
// rate N theta alpha Q, migration-fixation at rate N^2 lambda alpha. Throws
// std::invalid_argument when Q puts mass outside trait_set at a point where
// theta > 0, or when the initial atoms use traits outside trait_set.
FiniteSolveResult meanfield_finite_solve(const RateModel& model, int N, const AtomicMeasure& init,
                                         const std::vector<Trait>& trait_set, double horizon, double dt,
                                         double snapshot_interval = 0.0);

struct TaggedSite {
  double z = 0.0;
  Trait x;
};

// Jump path of one site; times[0] = 0 holds the initial trait and every later
// entry is a jump that changed the trait.
struct SitePath {
  std::vector<double> times;
  std::vector<Trait> traits;

  const Trait& at(double t) const;
};

// Each site evolves with its own stream (derived from one draw of `rng`)
// given the deterministic flow `nu`; thinning against N C + N^2 C.
std::vector<SitePath> tagged_sites_run(const RateModel& model, int N, const std::vector<TaggedSite>& sites,
                                       const MeasureTrajectory& nu, double horizon, Rng& rng);

struct McKeanVlasovResult {
  SiteConfiguration final_state;
  MeasureTrajectory law;  // empirical trait law, atoms at r = 0
  TssCounters counters;
};

// M particles drawn i.i.d. from mu0 (positions ignored), evolved as a
// homogeneous substitution sequence with K = M: the empirical law of the
// particles stands in for mu_{t-}.
McKeanVlasovResult mckean_vlasov_run(const RateModel& model, int N, std::size_t M, const AtomicMeasure& mu0,
                                     double horizon, Rng& rng, double snapshot_interval = 0.0);

using SiteStatistic = std::function<double(TraitView)>;

struct ChaosRow {
  std::size_t K = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct ChaosOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// For each K, runs the substitution sequence from i.i.d. mu0 sites to t_star
// and estimates corr(f(X^1), f(X^2)) over replicates (Pearson, with the
// standard error sqrt((1 - rho^2) / (R - 2))).
std::vector<ChaosRow> chaos_decay_scan(const RateModel& model, int N, const std::vector<std::size_t>& K_list,
                                       const AtomicMeasure& mu0, const SiteStatistic& statistic, double t_star,
                                       const ChaosOptions& options);

}  // namespace metapop
