#include "metapop/tss.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "metapop/microsim.hpp"
#include "metapop/parallel.hpp"

namespace metapop {

SiteConfiguration SiteConfiguration::from_traits(const std::vector<Trait>& sites) {
  if (sites.empty()) throw std::invalid_argument("site configuration needs K >= 1");
  SiteConfiguration c;
  c.K = sites.size();
  c.d = sites.front().dim();
  if (c.d == 0) throw std::invalid_argument("trait dimension must be >= 1");
  c.traits.reserve(c.K * c.d);
  for (const auto& x : sites) {
    if (x.dim() != c.d) throw std::invalid_argument("all site traits must share one dimension");
    if (!x.finite()) throw std::invalid_argument("site traits must be finite");
    c.traits.insert(c.traits.end(), x.coords().begin(), x.coords().end());
  }
  return c;
}

std::vector<Trait> SiteConfiguration::to_traits() const {
  std::vector<Trait> out;
  out.reserve(K);
  for (std::size_t l = 0; l < K; ++l) out.emplace_back(site(l));
  return out;
}

AtomicMeasure site_measure(const SiteConfiguration& config) {
  std::vector<Atom> atoms;
  atoms.reserve(config.K);
  const double w = 1.0 / static_cast<double>(config.K);
  for (std::size_t l = 0; l < config.K; ++l) atoms.push_back({config.position(l), Trait(config.site(l)), w});
  return AtomicMeasure(std::move(atoms));
}

TssSimulator::TssSimulator(const RateModel& model, int N, SiteConfiguration init, Rng& rng, TssOptions options)
    : model_(model),
      N_(N),
      state_(std::move(init)),
      rng_(rng),
      options_(options),
      exact_(state_.K <= options.exact_max_sites),
      scratch_(state_.d),
      old_(state_.d) {
  if (N_ < 1) throw std::invalid_argument("N must be >= 1");
  if (state_.K == 0) throw std::invalid_argument("K must be >= 1");
  if (state_.d != model_.dim()) throw std::invalid_argument("site and model trait dimensions differ");
  if (exact_) {
    mig_.assign(state_.K * state_.K, 0.0);
    mut_.assign(state_.K, 0.0);
    for (std::size_t l = 0; l < state_.K; ++l) {
      mut_[l] = N_ * model_.theta(state_.position(l), state_.site(l));
      for (std::size_t lp = 0; lp < state_.K; ++lp) mig_[l * state_.K + lp] = migration_rate(l, lp);
    }
  }
}

double TssSimulator::migration_rate(std::size_t l, std::size_t lp) const {
  if (l == lp) return 0.0;
  const double r = state_.position(l);
  const TraitView x = state_.site(l);
  const TraitView y = state_.site(lp);
  if (same_bits(x, y)) return 0.0;
  const double lam = model_.lambda(r, x, state_.position(lp), y);
  if (lam == 0.0) return 0.0;
  const double n2 = static_cast<double>(N_) * N_;
  return n2 / static_cast<double>(state_.K) * lam * fixation_probability(model_, r, y, x, N_);
}

void TssSimulator::refresh_rates(std::size_t site) {
  const std::size_t K = state_.K;
  mut_[site] = N_ * model_.theta(state_.position(site), state_.site(site));
  for (std::size_t lp = 0; lp < K; ++lp) {
    mig_[site * K + lp] = migration_rate(site, lp);
    mig_[lp * K + site] = migration_rate(lp, site);
  }
}

void TssSimulator::set_site(std::size_t site, std::size_t source, bool migration, TraitView y) {
  const std::span<double> dst = state_.site_mut(site);
  std::copy(dst.begin(), dst.end(), old_.begin());
  std::copy(y.begin(), y.end(), dst.begin());
  if (migration) {
    ++counters_.migration_fixations;
  } else {
    ++counters_.mutation_fixations;
  }
  if (options_.record_jumps)
    jumps_.push_back({state_.time, site, source, migration, Trait(TraitView(old_)), Trait(state_.site(site))});
  if (exact_) refresh_rates(site);
}

bool TssSimulator::try_mutation(std::size_t site) {
  const double r = state_.position(site);
  const TraitView x = state_.site(site);
  sample_mutation_into(model_.mutation(), r, x, rng_, scratch_);
  if (same_bits(x, scratch_)) return false;
  if (!rng_.bernoulli(fixation_probability(model_, r, scratch_, x, N_))) return false;
  set_site(site, site, false, scratch_);
  return true;
}

void TssSimulator::advance_exact(double t) {
  const std::size_t K = state_.K;
  for (;;) {
    const double mut_total = std::accumulate(mut_.begin(), mut_.end(), 0.0);
    const double mig_total = std::accumulate(mig_.begin(), mig_.end(), 0.0);
    const double total = mut_total + mig_total;
    if (total <= 0.0) break;
    const double next = state_.time + rng_.exponential(total);
    if (next > t) break;
    state_.time = next;
    ++counters_.proposals;
    double u = rng_.uniform() * total;
    if (u < mut_total) {
      std::size_t site = 0;
      while (site + 1 < K && u >= mut_[site]) u -= mut_[site++];
      while (mut_[site] == 0.0 && site > 0) --site;
      try_mutation(site);
      continue;
    }
    u -= mut_total;
    std::size_t idx = 0;
    const std::size_t last = K * K - 1;
    while (idx < last && u >= mig_[idx]) u -= mig_[idx++];
    while (mig_[idx] == 0.0 && idx > 0) --idx;  // rounding fell off the end
    const std::size_t l = idx / K;
    const std::size_t lp = idx % K;
    std::copy(state_.site(lp).begin(), state_.site(lp).end(), scratch_.begin());
    set_site(l, lp, true, scratch_);
  }
}

void TssSimulator::advance_uniformized(double t) {
  const double C = model_.bound();
  const auto K = static_cast<double>(state_.K);
  const double n = N_;
  const double mut_block = K * n * C;
  const double mig_block = K * n * n * C;  // K^2 ordered pairs at (N^2 / K) C, self-pairs included
  const double total = mut_block + mig_block;
  for (;;) {
    const double next = state_.time + rng_.exponential(total);
    if (next > t) break;
    state_.time = next;
    ++counters_.proposals;
    if (rng_.uniform() * total < mut_block) {
      const std::size_t site = rng_.index(state_.K);
      if (!rng_.bernoulli(model_.theta(state_.position(site), state_.site(site)) / C)) continue;
      try_mutation(site);
    } else {
      const std::size_t l = rng_.index(state_.K);
      const std::size_t lp = rng_.index(state_.K);
      if (l == lp) continue;
      const double r = state_.position(l);
      const TraitView x = state_.site(l);
      const TraitView y = state_.site(lp);
      if (same_bits(x, y)) continue;
      const double lam = model_.lambda(r, x, state_.position(lp), y);
      if (lam == 0.0) continue;
      const double accept = lam * fixation_probability(model_, r, y, x, N_) / C;
      if (!rng_.bernoulli(accept)) continue;
      std::copy(y.begin(), y.end(), scratch_.begin());
      set_site(l, lp, true, scratch_);
    }
  }
}

void TssSimulator::advance_to(double t) {
  if (t < state_.time) throw std::invalid_argument("advance_to: time must not decrease");
  if (exact_) {
    advance_exact(t);
  } else {
    advance_uniformized(t);
  }
  state_.time = t;
}

TssTrajectory tss_run(const RateModel& model, int N, SiteConfiguration init, double horizon, Rng& rng,
                      TssOptions options) {
  TssTrajectory out;
  TssSimulator sim(model, N, std::move(init), rng, options);
  out.snapshots.push_back(sim.state());
  if (options.snapshot_interval > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * options.snapshot_interval;
      if (t >= horizon) break;
      sim.advance_to(t);
      out.snapshots.push_back(sim.state());
    }
  }
  sim.advance_to(horizon);
  if (horizon > 0.0) out.snapshots.push_back(sim.state());
  out.jumps = sim.take_jumps();
  out.counters = sim.counters();
  return out;
}

namespace {

std::string format_coord(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string outcome_label(const std::vector<Trait>& dominant) {
  std::string s;
  for (std::size_t l = 0; l < dominant.size(); ++l) {
    if (l) s += '|';
    for (std::size_t k = 0; k < dominant[l].dim(); ++k) {
      if (k) s += ',';
      s += format_coord(dominant[l][k]);
    }
  }
  return s;
}

constexpr const char* kPolymorphic = "polymorphic";

}  // namespace

CompareReport tss_vs_micro_compare(const RateModel& model, const std::vector<Trait>& init_sites, int N, double gamma,
                                   double t_star, const CompareOptions& options) {
  if (!(gamma > 0.0)) throw std::invalid_argument("compare: gamma must be > 0");
  if (!(t_star >= 0.0)) throw std::invalid_argument("compare: t_star must be >= 0");
  if (options.replicates == 0) throw std::invalid_argument("compare: replicates must be >= 1");
  const std::size_t R = options.replicates;
  std::vector<std::string> micro_out(R);
  std::vector<std::string> tss_out(R);
  const std::uint64_t micro_master = mix64(options.seed ^ 0x6D6963726FULL);
  const std::uint64_t tss_master = mix64(options.seed ^ 0x747373ULL);

  parallel_for(R, options.threads, [&](std::size_t i) {
    Rng micro_rng(derive_stream_seed(micro_master, i));
    const auto micro = micro_run(model, MicroState::monomorphic(init_sites, static_cast<std::size_t>(N), gamma),
                                 t_star / gamma, micro_rng, false);
    std::vector<Trait> dominant;
    bool poly = false;
    for (std::size_t l = 0; l < micro.state.K && !poly; ++l) {
      auto x = dominant_trait(micro.state, l);
      if (!x) {
        poly = true;
      } else {
        dominant.push_back(std::move(*x));
      }
    }
    micro_out[i] = poly ? kPolymorphic : outcome_label(dominant);

    Rng tss_rng(derive_stream_seed(tss_master, i));
    TssSimulator sim(model, N, SiteConfiguration::from_traits(init_sites), tss_rng);
    sim.advance_to(t_star);
    tss_out[i] = outcome_label(sim.state().to_traits());
  });

  std::map<std::string, std::pair<double, double>> freq;
  for (const auto& s : micro_out) freq[s].first += 1.0;
  for (const auto& s : tss_out) freq[s].second += 1.0;

  CompareReport rep;
  rep.gamma = gamma;
  rep.t_star = t_star;
  rep.replicates = R;
  const double inv = 1.0 / static_cast<double>(R);
  double tv = 0.0;
  double sp = 0.0, sp2 = 0.0, sq = 0.0, sq2 = 0.0;
  for (const auto& [label, f] : freq) {
    const double p = f.first * inv;
    const double q = f.second * inv;
    tv += std::abs(p - q);
    const double s = p > q ? 1.0 : (p < q ? -1.0 : 0.0);
    sp += s * p;
    sp2 += s * s * p;
    sq += s * q;
    sq2 += s * s * q;
    rep.outcomes.push_back({label, p, q});
    if (label == kPolymorphic) rep.polymorphic_fraction = p;
  }
  rep.tv = 0.5 * tv;
  rep.tv_stderr = 0.5 * std::sqrt(std::max(0.0, (sp2 - sp * sp) * inv + (sq2 - sq * sq) * inv));
  if (rep.polymorphic_fraction > options.max_polymorphic_fraction) {
    throw Error("compare: " + std::to_string(rep.polymorphic_fraction * 100.0) +
                "% of micro snapshots are polymorphic at gamma=" + format_coord(gamma) +
                "; gamma is too large for the substitution-sequence regime");
  }
  return rep;
}

}  // namespace metapop
