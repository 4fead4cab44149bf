#include "metapop/microsim.hpp"

#include <limits>
#include <stdexcept>

namespace metapop {

namespace {
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
}

const char* to_string(MicroEventKind kind) {
  switch (kind) {
    case MicroEventKind::resample: return "resample";
    case MicroEventKind::mutate: return "mutate";
    case MicroEventKind::migrate: return "migrate";
  }
  return "unknown";
}

MicroState MicroState::monomorphic(const std::vector<Trait>& patch_traits, std::size_t N, double gamma) {
  std::vector<std::vector<Trait>> individuals;
  individuals.reserve(patch_traits.size());
  for (const auto& x : patch_traits) individuals.emplace_back(N, x);
  return from_individuals(individuals, gamma);
}

MicroState MicroState::from_individuals(const std::vector<std::vector<Trait>>& individuals, double gamma) {
  if (individuals.empty() || individuals.front().empty()) throw std::invalid_argument("micro state needs K >= 1, N >= 1");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  MicroState s;
  s.K = individuals.size();
  s.N = individuals.front().size();
  s.d = individuals.front().front().dim();
  s.gamma = gamma;
  if (s.d == 0) throw std::invalid_argument("trait dimension must be >= 1");
  s.traits.reserve(s.K * s.N * s.d);
  for (const auto& patch : individuals) {
    if (patch.size() != s.N) throw std::invalid_argument("every patch must hold exactly N individuals");
    for (const auto& x : patch) {
      if (x.dim() != s.d) throw std::invalid_argument("all traits must share one dimension");
      if (!x.finite()) throw std::invalid_argument("traits must be finite");
      s.traits.insert(s.traits.end(), x.coords().begin(), x.coords().end());
    }
  }
  return s;
}

MicroSimulator::MicroSimulator(const RateModel& model, MicroState init, Rng& rng, bool record_events)
    : model_(model), state_(std::move(init)), rng_(rng), record_events_(record_events), scratch_(state_.d) {
  if (state_.d != model_.dim()) throw std::invalid_argument("state and model trait dimensions differ");
  poly_slot_.assign(state_.K, kNone);
  for (std::size_t l = 0; l < state_.K; ++l) refresh_patch(l);
}

bool MicroSimulator::patch_polymorphic(std::size_t patch) const {
  const TraitView first = state_.trait(patch, 0);
  for (std::size_t i = 1; i < state_.N; ++i)
    if (!same_bits(first, state_.trait(patch, i))) return true;
  return false;
}

void MicroSimulator::refresh_patch(std::size_t patch) {
  const bool poly = patch_polymorphic(patch);
  const bool listed = poly_slot_[patch] != kNone;
  if (poly && !listed) {
    poly_slot_[patch] = poly_list_.size();
    poly_list_.push_back(patch);
  } else if (!poly && listed) {
    const std::size_t slot = poly_slot_[patch];
    const std::size_t moved = poly_list_.back();
    poly_list_[slot] = moved;
    poly_slot_[moved] = slot;
    poly_list_.pop_back();
    poly_slot_[patch] = kNone;
  }
}

void MicroSimulator::record(MicroEventKind kind, std::size_t patch, std::size_t i, std::size_t src_patch,
                            std::size_t src_i, TraitView old_trait) {
  if (!record_events_) return;
  log_.events.push_back(
      {state_.time, kind, patch, i, src_patch, src_i, Trait(old_trait), Trait(state_.trait(patch, i))});
}

void MicroSimulator::advance_to(double t) {
  if (t < state_.time) throw std::invalid_argument("advance_to: time must not decrease");
  const double C = model_.bound();
  const auto K = static_cast<double>(state_.K);
  const auto N = static_cast<double>(state_.N);
  const std::size_t n = state_.N;
  // Per-block majorants. Resampling is restricted to polymorphic patches:
  // in a monomorphic patch it copies a trait onto an identical one.
  const double resample_per_patch = N * (N - 1.0) * C;
  const double mutate_block = state_.gamma * C * N * K;
  const double migrate_block = state_.K > 1 ? state_.gamma * C * N * N * (K - 1.0) : 0.0;
  std::vector<double> old(state_.d);

  for (;;) {
    const double resample_block = resample_per_patch * static_cast<double>(poly_list_.size());
    const double total = resample_block + mutate_block + migrate_block;
    if (total <= 0.0) break;
    const double next = state_.time + rng_.exponential(total);
    if (next > t) break;
    state_.time = next;
    ++counters_.candidates;

    const double u = rng_.uniform() * total;
    if (u < resample_block) {
      const std::size_t patch = poly_list_[rng_.index(poly_list_.size())];
      const std::size_t i = rng_.index(n);
      std::size_t j = rng_.index(n - 1);
      if (j >= i) ++j;
      const TraitView xi = state_.trait(patch, i);
      const TraitView xj = state_.trait(patch, j);
      if (same_bits(xi, xj)) continue;
      const double rate = model_.c(state_.position(patch), xi, xj);
      if (!rng_.bernoulli(rate / C)) continue;
      std::copy(xi.begin(), xi.end(), old.begin());
      std::copy(xj.begin(), xj.end(), state_.trait_mut(patch, i).begin());
      ++counters_.resample;
      record(MicroEventKind::resample, patch, i, patch, j, old);
      refresh_patch(patch);
    } else if (u < resample_block + mutate_block) {
      const std::size_t patch = rng_.index(state_.K);
      const std::size_t i = rng_.index(n);
      const double r = state_.position(patch);
      const TraitView xi = state_.trait(patch, i);
      const double rate = model_.theta(r, xi);
      if (!rng_.bernoulli(rate / C)) continue;
      std::copy(xi.begin(), xi.end(), old.begin());
      sample_mutation_into(model_.mutation(), r, old, rng_, scratch_);
      std::copy(scratch_.begin(), scratch_.end(), state_.trait_mut(patch, i).begin());
      ++counters_.mutate;
      record(MicroEventKind::mutate, patch, i, patch, i, old);
      refresh_patch(patch);
    } else {
      const std::size_t patch = rng_.index(state_.K);
      std::size_t src = rng_.index(state_.K - 1);
      if (src >= patch) ++src;
      const std::size_t i = rng_.index(n);
      const std::size_t j = rng_.index(n);
      const TraitView xi = state_.trait(patch, i);
      const TraitView yj = state_.trait(src, j);
      const double rate = model_.lambda(state_.position(patch), xi, state_.position(src), yj);
      if (!rng_.bernoulli(rate / C)) continue;
      std::copy(xi.begin(), xi.end(), old.begin());
      std::copy(yj.begin(), yj.end(), state_.trait_mut(patch, i).begin());
      ++counters_.migrate;
      record(MicroEventKind::migrate, patch, i, src, j, old);
      refresh_patch(patch);
    }
  }
  state_.time = t;
}

MicroRunResult micro_run(const RateModel& model, MicroState init, double horizon, Rng& rng, bool record_events) {
  MicroSimulator sim(model, std::move(init), rng, record_events);
  sim.advance_to(horizon);
  return {sim.state(), sim.take_log(), sim.counters()};
}

std::optional<Trait> dominant_trait(const MicroState& state, std::size_t patch) {
  if (patch >= state.K) throw std::out_of_range("dominant_trait: patch index out of range");
  const TraitView first = state.trait(patch, 0);
  for (std::size_t i = 1; i < state.N; ++i)
    if (!same_bits(first, state.trait(patch, i))) return std::nullopt;
  return Trait(first);
}

AtomicMeasure empirical_measure(const MicroState& state) {
  std::vector<Atom> atoms;
  atoms.reserve(state.K * state.N);
  const double w = 1.0 / static_cast<double>(state.K * state.N);
  for (std::size_t l = 0; l < state.K; ++l)
    for (std::size_t i = 0; i < state.N; ++i) atoms.push_back({state.position(l), Trait(state.trait(l, i)), w});
  return AtomicMeasure(std::move(atoms));
}

}  // namespace metapop
