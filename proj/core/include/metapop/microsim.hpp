#pragma once

// Exact simulation of K coupled Moran models of size N with resampling,
// mutation (rate gamma*theta) and migration (rate gamma*lambda/K per ordered
// cross-patch pair), by uniformization and thinning.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "metapop/kernels.hpp"
#include "metapop/measure.hpp"

namespace metapop {

struct MicroState {
  std::size_t K = 0;
  std::size_t N = 0;
  std::size_t d = 0;
  double gamma = 0.0;
  double time = 0.0;
  std::vector<double> traits;  // patch-major, K * N * d

  // Every patch monomorphic; patch_traits[l] fills patch l.
  static MicroState monomorphic(const std::vector<Trait>& patch_traits, std::size_t N, double gamma);
  // individuals[l][i] is the trait of individual i in patch l.
  static MicroState from_individuals(const std::vector<std::vector<Trait>>& individuals, double gamma);

  TraitView trait(std::size_t patch, std::size_t i) const {
    return {traits.data() + (patch * N + i) * d, d};
  }
  std::span<double> trait_mut(std::size_t patch, std::size_t i) { return {traits.data() + (patch * N + i) * d, d}; }
  // Patch l (0-based) sits at (l + 1) / K.
  double position(std::size_t patch) const { return static_cast<double>(patch + 1) / static_cast<double>(K); }
};

enum class MicroEventKind { resample, mutate, migrate };

const char* to_string(MicroEventKind kind);

struct MicroEvent {
  double time = 0.0;
  MicroEventKind kind = MicroEventKind::resample;
  std::size_t patch = 0;
  std::size_t individual = 0;
  // Origin of the copied trait; equals (patch, individual) for mutations.
  std::size_t source_patch = 0;
  std::size_t source_individual = 0;
  Trait old_trait;
  Trait new_trait;
};

// Accepted events in time order. Resampling between identical traits never
// changes the state and is not simulated, so it never appears here.
struct MicroEventLog {
  std::vector<MicroEvent> events;
};

struct MicroCounters {
  std::size_t candidates = 0;
  std::size_t resample = 0;
  std::size_t mutate = 0;
  std::size_t migrate = 0;
};

class MicroSimulator {
 public:
  MicroSimulator(const RateModel& model, MicroState init, Rng& rng, bool record_events = true);

  // Runs the chain up to time t (>= current time); the state time becomes t.
  void advance_to(double t);

  const MicroState& state() const { return state_; }
  const MicroEventLog& log() const { return log_; }
  const MicroCounters& counters() const { return counters_; }
  std::size_t polymorphic_patches() const { return poly_list_.size(); }
  MicroEventLog take_log() { return std::move(log_); }

 private:
  bool patch_polymorphic(std::size_t patch) const;
  void refresh_patch(std::size_t patch);
  void record(MicroEventKind kind, std::size_t patch, std::size_t i, std::size_t src_patch, std::size_t src_i,
              TraitView old_trait);

  const RateModel& model_;
  MicroState state_;
  Rng& rng_;
  bool record_events_;
  MicroEventLog log_;
  MicroCounters counters_;
  std::vector<std::size_t> poly_slot_;  // slot in poly_list_, or npos
  std::vector<std::size_t> poly_list_;
  std::vector<double> scratch_;
};

struct MicroRunResult {
  MicroState state;
  MicroEventLog log;
  MicroCounters counters;
};

MicroRunResult micro_run(const RateModel& model, MicroState init, double horizon, Rng& rng,
                         bool record_events = true);

// The common trait of a monomorphic patch (bit-exact equality), or nullopt
// when the patch is polymorphic.
std::optional<Trait> dominant_trait(const MicroState& state, std::size_t patch);

// (1 / NK) sum over individuals of delta_{(l/K, x)}, duplicates merged.
AtomicMeasure empirical_measure(const MicroState& state);

}  // namespace metapop
