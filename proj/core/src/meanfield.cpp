#include "metapop/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "metapop/parallel.hpp"

namespace metapop {

const AtomicMeasure& MeasureTrajectory::left_limit(double t) const {
  if (measures.empty()) throw std::invalid_argument("empty measure trajectory");
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  const std::size_t idx = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  return measures[idx];
}

const Trait& SitePath::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t idx = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  return traits[idx];
}

namespace {

bool close_traits(TraitView a, TraitView b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k] - b[k]) > 1e-12 * std::max(1.0, std::abs(b[k]))) return false;
  return true;
}

std::optional<std::size_t> find_trait(const std::vector<Trait>& set, TraitView x) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (close_traits(x, set[i])) return i;
  return std::nullopt;
}

// Weights W[g * n + i] of (r_g, x^i) and precomputed kernel tables.
class FiniteSystem {
 public:
  FiniteSystem(const RateModel& model, int N, std::vector<double> positions, const std::vector<Trait>& traits)
      : G_(positions.size()), n_(traits.size()), N_(N), positions_(std::move(positions)) {
    alpha_.assign(G_ * n_ * n_, 0.0);
    lam_.assign(G_ * n_ * G_ * n_, 0.0);
    mut_.assign(G_ * n_ * n_, 0.0);
    for (std::size_t g = 0; g < G_; ++g) {
      const double r = positions_[g];
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) alpha_[(g * n_ + i) * n_ + j] = fixation_probability(model, r, traits[i], traits[j], N);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t gp = 0; gp < G_; ++gp)
          for (std::size_t j = 0; j < n_; ++j)
            lam_[((g * n_ + i) * G_ + gp) * n_ + j] = model.lambda(r, traits[i], positions_[gp], traits[j]);

      for (std::size_t j = 0; j < n_; ++j) {
        const double th = model.theta(r, traits[j]);
        if (th == 0.0) continue;
        const auto atoms = mutation_atoms(model.mutation(), r, traits[j]);
        if (!atoms) {
          throw std::invalid_argument("mutation kernel " + to_string(model.mutation().kind) +
                                      " is continuous and leaks mass outside the finite trait set");
        }
        for (const auto& [y, p] : *atoms) {
          if (p == 0.0) continue;
          const auto i = find_trait(traits, y);
          if (!i) {
            std::ostringstream os;
            os << "mutation kernel leaks mass outside the trait set (mutant " << y[0] << " of trait index " << j
               << ")";
            throw std::invalid_argument(os.str());
          }
          if (*i == j) continue;
          // j -> i at rate theta(x^j) alpha(x^i, x^j) Q(x^j, {x^i})
          mut_[(g * n_ + j) * n_ + *i] += th * alpha_[(g * n_ + *i) * n_ + j] * p;
          has_mutation_ = true;
        }
      }
    }
    flux_.assign(G_ * n_ * n_, 0.0);
  }

  std::size_t size() const { return G_ * n_; }

  void rhs(const std::vector<double>& w, std::vector<double>& dw) {
    std::fill(dw.begin(), dw.end(), 0.0);
    const double n2 = static_cast<double>(N_) * N_;
    // flux[g][i][j] = sum_{g'} lambda((r_g, x^i), (r_g', x^j)) W[g', j]
    for (std::size_t g = 0; g < G_; ++g)
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
          double s = 0.0;
          for (std::size_t gp = 0; gp < G_; ++gp) s += lam_[((g * n_ + i) * G_ + gp) * n_ + j] * w[gp * n_ + j];
          flux_[(g * n_ + i) * n_ + j] = s;
        }
    for (std::size_t g = 0; g < G_; ++g) {
      for (std::size_t i = 0; i < n_; ++i) {
        double gain = 0.0;
        double loss = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
          if (j == i) continue;
          // residents x^j at g replaced by migrant x^i
          gain += w[g * n_ + j] * alpha_[(g * n_ + i) * n_ + j] * flux_[(g * n_ + j) * n_ + i];
          loss += w[g * n_ + i] * alpha_[(g * n_ + j) * n_ + i] * flux_[(g * n_ + i) * n_ + j];
        }
        dw[g * n_ + i] += n2 * (gain - loss);
        if (has_mutation_) {
          double mgain = 0.0;
          double mloss = 0.0;
          for (std::size_t j = 0; j < n_; ++j) {
            if (j == i) continue;
            mgain += mut_[(g * n_ + j) * n_ + i] * w[g * n_ + j];
            mloss += mut_[(g * n_ + i) * n_ + j] * w[g * n_ + i];
          }
          dw[g * n_ + i] += N_ * (mgain - mloss);
        }
      }
    }
  }

 private:
  std::size_t G_;
  std::size_t n_;
  int N_;
  std::vector<double> positions_;
  std::vector<double> alpha_;  // [g][i][j] = alpha(r_g, x^i, x^j)
  std::vector<double> lam_;    // [g][i][g'][j]
  std::vector<double> mut_;    // [g][j][i] = theta alpha Q, j -> i
  std::vector<double> flux_;
  bool has_mutation_ = false;
};

}  // namespace

FiniteSolveResult meanfield_finite_solve(const RateModel& model, int N, const AtomicMeasure& init,
                                         const std::vector<Trait>& trait_set, double horizon, double dt,
                                         double snapshot_interval) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("need dt > 0 and horizon >= 0");
  if (trait_set.empty()) throw std::invalid_argument("trait set must not be empty");
  for (std::size_t i = 0; i < trait_set.size(); ++i) {
    if (trait_set[i].dim() != model.dim()) throw std::invalid_argument("trait set dimension differs from the model");
    for (std::size_t j = 0; j < i; ++j)
      if (trait_set[i] == trait_set[j]) throw std::invalid_argument("trait set contains duplicates");
  }

  std::vector<double> positions;
  for (const auto& a : init.atoms()) positions.push_back(a.r);
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  const std::size_t n = trait_set.size();
  std::vector<double> w(positions.size() * n, 0.0);
  for (const auto& a : init.atoms()) {
    const auto i = find_trait(trait_set, a.x);
    if (!i) throw std::invalid_argument("initial atom trait is not in the trait set");
    const auto g = static_cast<std::size_t>(std::lower_bound(positions.begin(), positions.end(), a.r) - positions.begin());
    w[g * n + *i] += a.w;
  }

  FiniteSystem sys(model, N, positions, trait_set);
  FiniteSolveResult out;
  auto snapshot = [&](double t) {
    std::vector<Atom> atoms;
    for (std::size_t g = 0; g < positions.size(); ++g)
      for (std::size_t i = 0; i < n; ++i)
        if (w[g * n + i] > 0.0) atoms.push_back({positions[g], trait_set[i], w[g * n + i]});
    out.trajectory.times.push_back(t);
    out.trajectory.measures.emplace_back(std::move(atoms));
  };
  snapshot(0.0);

  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const std::size_t every =
      snapshot_interval > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(snapshot_interval / dt)))
                              : steps + 1;
  const std::size_t m = w.size();
  std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double h = std::min(dt, horizon - t);
    sys.rhs(w, k1);
    for (std::size_t q = 0; q < m; ++q) tmp[q] = w[q] + 0.5 * h * k1[q];
    sys.rhs(tmp, k2);
    for (std::size_t q = 0; q < m; ++q) tmp[q] = w[q] + 0.5 * h * k2[q];
    sys.rhs(tmp, k3);
    for (std::size_t q = 0; q < m; ++q) tmp[q] = w[q] + h * k3[q];
    sys.rhs(tmp, k4);
    for (std::size_t q = 0; q < m; ++q) w[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    t = s == steps ? horizon : t + h;

    double mass = 0.0;
    for (auto& v : w) {
      if (v < 0.0) {
        if (v < -1e-12) {
          throw NumericalError("mean-field weight fell to " + std::to_string(v) + " at t=" + std::to_string(t));
        }
        out.warnings.push_back("clipped weight " + std::to_string(v) + " to 0 at t=" + std::to_string(t));
        v = 0.0;
      }
      mass += v;
    }
    out.max_mass_error = std::max(out.max_mass_error, std::abs(mass - 1.0));
    if (s % every == 0 || s == steps) snapshot(t);
  }
  return out;
}

std::vector<SitePath> tagged_sites_run(const RateModel& model, int N, const std::vector<TaggedSite>& sites,
                                       const MeasureTrajectory& nu, double horizon, Rng& rng) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (nu.measures.empty() || nu.times.size() != nu.measures.size() || nu.times.front() > 0.0)
    throw std::invalid_argument("measure trajectory must start at t = 0");
  const double C = model.bound();
  const double n = N;
  const double mut_block = n * C;
  const double total = mut_block + n * n * C;
  const std::uint64_t master = rng.next_u64();
  std::vector<SitePath> paths;
  paths.reserve(sites.size());
  std::vector<double> y(model.dim());
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto& site = sites[j];
    if (!(site.z >= 0.0 && site.z <= 1.0)) throw std::invalid_argument("tagged site position must lie in [0, 1]");
    if (site.x.dim() != model.dim()) throw std::invalid_argument("tagged site trait dimension differs from the model");
    Rng site_rng(derive_stream_seed(master, j));
    SitePath path;
    path.times.push_back(0.0);
    path.traits.push_back(site.x);
    Trait x = site.x;
    double t = 0.0;
    for (;;) {
      t += site_rng.exponential(total);
      if (t > horizon) break;
      if (site_rng.uniform() * total < mut_block) {
        if (!site_rng.bernoulli(model.theta(site.z, x) / C)) continue;
        sample_mutation_into(model.mutation(), site.z, x, site_rng, y);
        if (!site_rng.bernoulli(fixation_probability(model, site.z, y, x, N))) continue;
      } else {
        const AtomicMeasure& m = nu.left_limit(t);
        const Atom& a = m.atoms()[m.sample_index(site_rng)];
        const double lam = model.lambda(site.z, x, a.r, a.x);
        if (lam == 0.0) continue;
        if (!site_rng.bernoulli(lam * fixation_probability(model, site.z, a.x, x, N) / C)) continue;
        std::copy(a.x.coords().begin(), a.x.coords().end(), y.begin());
      }
      if (same_bits(x, y)) continue;
      x = Trait(TraitView(y));
      path.times.push_back(t);
      path.traits.push_back(x);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

namespace {

std::vector<Trait> sample_sites(const AtomicMeasure& mu0, std::size_t count, Rng& rng) {
  std::vector<Trait> sites;
  sites.reserve(count);
  for (std::size_t i = 0; i < count; ++i) sites.push_back(mu0.atoms()[mu0.sample_index(rng)].x);
  return sites;
}

AtomicMeasure trait_law(const SiteConfiguration& s) {
  std::vector<Atom> atoms;
  atoms.reserve(s.K);
  const double w = 1.0 / static_cast<double>(s.K);
  for (std::size_t l = 0; l < s.K; ++l) atoms.push_back({0.0, Trait(s.site(l)), w});
  return AtomicMeasure(std::move(atoms));
}

}  // namespace

McKeanVlasovResult mckean_vlasov_run(const RateModel& model, int N, std::size_t M, const AtomicMeasure& mu0,
                                     double horizon, Rng& rng, double snapshot_interval) {
  if (M < 2) throw std::invalid_argument("McKean-Vlasov particle system needs M >= 2");
  if (!model.homogeneous()) throw std::invalid_argument("McKean-Vlasov particle system needs a homogeneous model");
  if (mu0.empty()) throw std::invalid_argument("initial law must not be empty");
  McKeanVlasovResult out;
  TssSimulator sim(model, N, SiteConfiguration::from_traits(sample_sites(mu0, M, rng)), rng);
  out.law.times.push_back(0.0);
  out.law.measures.push_back(trait_law(sim.state()));
  if (snapshot_interval > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * snapshot_interval;
      if (t >= horizon * (1.0 - 1e-12)) break;
      sim.advance_to(t);
      out.law.times.push_back(t);
      out.law.measures.push_back(trait_law(sim.state()));
    }
  }
  sim.advance_to(horizon);
  if (horizon > 0.0) {
    out.law.times.push_back(horizon);
    out.law.measures.push_back(trait_law(sim.state()));
  }
  out.final_state = sim.state();
  out.counters = sim.counters();
  return out;
}

std::vector<ChaosRow> chaos_decay_scan(const RateModel& model, int N, const std::vector<std::size_t>& K_list,
                                       const AtomicMeasure& mu0, const SiteStatistic& statistic, double t_star,
                                       const ChaosOptions& options) {
  if (!model.homogeneous()) throw std::invalid_argument("chaos scan needs a homogeneous model");
  if (options.replicates < 3) throw std::invalid_argument("chaos scan needs at least 3 replicates");
  for (std::size_t k = 0; k < K_list.size(); ++k) {
    if (K_list[k] < 2) throw std::invalid_argument("chaos scan needs K >= 2");
    if (k > 0 && K_list[k] <= K_list[k - 1]) throw std::invalid_argument("K list must be increasing");
  }
  std::vector<ChaosRow> rows;
  const std::size_t R = options.replicates;
  for (const std::size_t K : K_list) {
    std::vector<double> a(R), b(R);
    const std::uint64_t master = mix64(options.seed ^ (0xC4A05ULL * (K + 1)));
    parallel_for(R, options.threads, [&](std::size_t i) {
      Rng rng(derive_stream_seed(master, i));
      TssSimulator sim(model, N, SiteConfiguration::from_traits(sample_sites(mu0, K, rng)), rng);
      sim.advance_to(t_star);
      a[i] = statistic(sim.state().site(0));
      b[i] = statistic(sim.state().site(1));
    });
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= static_cast<double>(R);
    mb /= static_cast<double>(R);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
      sab += (a[i] - ma) * (b[i] - mb);
    }
    ChaosRow row;
    row.K = K;
    if (saa > 0.0 && sbb > 0.0) {
      row.estimate = sab / std::sqrt(saa * sbb);
      row.std_error = std::sqrt(std::max(0.0, 1.0 - row.estimate * row.estimate) / static_cast<double>(R - 2));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace metapop
