#pragma once

// Coupled trait substitution sequence: K monomorphic sites, each jumping by
// mutation-fixation or by migration-fixation from another site.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "metapop/kernels.hpp"
#include "metapop/measure.hpp"

namespace metapop {

struct SiteConfiguration {
  std::size_t K = 0;
  std::size_t d = 0;
  double time = 0.0;
  std::vector<double> traits;  // K * d

  static SiteConfiguration from_traits(const std::vector<Trait>& sites);

  TraitView site(std::size_t l) const { return {traits.data() + l * d, d}; }
  std::span<double> site_mut(std::size_t l) { return {traits.data() + l * d, d}; }
  double position(std::size_t l) const { return static_cast<double>(l + 1) / static_cast<double>(K); }
  std::vector<Trait> to_traits() const;
};

// (1/K) sum_l delta_{(l/K, x_l)}.
AtomicMeasure site_measure(const SiteConfiguration& config);

struct TssJump {
  double time = 0.0;
  std::size_t site = 0;
  std::size_t source = 0;  // == site for mutation-fixation
  bool migration = false;
  Trait old_trait;
  Trait new_trait;
};

struct TssOptions {
  double snapshot_interval = 0.0;  // 0: only the initial and final configurations
  bool record_jumps = false;
  // Next-jump simulation with exact migration rates up to this many sites;
  // uniformization over the whole configuration above.
  std::size_t exact_max_sites = 64;
};

struct TssCounters {
  std::size_t proposals = 0;
  std::size_t mutation_fixations = 0;
  std::size_t migration_fixations = 0;
};

class TssSimulator {
 public:
  TssSimulator(const RateModel& model, int N, SiteConfiguration init, Rng& rng, TssOptions options = {});

  void advance_to(double t);

  const SiteConfiguration& state() const { return state_; }
  const TssCounters& counters() const { return counters_; }
  const std::vector<TssJump>& jumps() const { return jumps_; }
  std::vector<TssJump> take_jumps() { return std::move(jumps_); }
  bool exact() const { return exact_; }

 private:
  void advance_exact(double t);
  void advance_uniformized(double t);
  bool try_mutation(std::size_t site);
  void set_site(std::size_t site, std::size_t source, bool migration, TraitView y);
  double migration_rate(std::size_t l, std::size_t lp) const;
  void refresh_rates(std::size_t site);

  const RateModel& model_;
  int N_;
  SiteConfiguration state_;
  Rng& rng_;
  TssOptions options_;
  bool exact_;
  TssCounters counters_;
  std::vector<TssJump> jumps_;
  std::vector<double> mig_;  // K x K, exact mode
  std::vector<double> mut_;  // K, exact mode
  std::vector<double> scratch_;
  std::vector<double> old_;
};

struct TssTrajectory {
  std::vector<SiteConfiguration> snapshots;  // at multiples of snapshot_interval, plus the horizon
  std::vector<TssJump> jumps;
  TssCounters counters;
};

TssTrajectory tss_run(const RateModel& model, int N, SiteConfiguration init, double horizon, Rng& rng,
                      TssOptions options = {});

struct CompareOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double max_polymorphic_fraction = 0.05;
};

struct OutcomeFrequency {
  std::string label;  // dominant traits joined by '|', or "polymorphic"
  double micro = 0.0;
  double tss = 0.0;
};

struct CompareReport {
  double gamma = 0.0;
  double t_star = 0.0;
  std::size_t replicates = 0;
  double tv = 0.0;
  double tv_stderr = 0.0;
  double polymorphic_fraction = 0.0;
  std::vector<OutcomeFrequency> outcomes;
};

// Runs the microscopic model to t_star / gamma and the TSS to t_star from the
// same monomorphic sites, and reports the total-variation distance between the
// empirical laws of the dominant-trait vector. Polymorphic micro snapshots
// count as a separate outcome; more than max_polymorphic_fraction of them
// throws (gamma too large for the TSS regime).
CompareReport tss_vs_micro_compare(const RateModel& model, const std::vector<Trait>& init_sites, int N, double gamma,
                                   double t_star, const CompareOptions& options);

}  // namespace metapop
