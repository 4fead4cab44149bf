#include "metapop/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace metapop {

Eigen::VectorXd canonical_drift(const RateModel& model, int N, double r, TraitView x) {
  const double th = model.theta(r, x);
  if (th == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  const MutationCovariance cov = mutation_covariance(model.mutation(), r, x);
  return 0.5 * (N - 1) * th * cov.sigma2 * fitness_gradient(model, r, x);
}

EnsembleMoments ensemble_moments(const XiEnsemble& ensemble) {
  const std::size_t M = ensemble.size();
  const auto d = static_cast<Eigen::Index>(ensemble.d);
  EnsembleMoments out{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  if (M == 0) return out;
  for (std::size_t i = 0; i < M; ++i)
    for (Eigen::Index k = 0; k < d; ++k) out.mean[k] += ensemble.trait(i)[k];
  out.mean /= static_cast<double>(M);
  if (M < 2) return out;
  for (std::size_t i = 0; i < M; ++i)
    for (Eigen::Index k = 0; k < d; ++k) {
      const double dev = ensemble.trait(i)[k] - out.mean[k];
      out.variance[k] += dev * dev;
    }
  out.variance /= static_cast<double>(M - 1);
  return out;
}

namespace {

double jump_probability(const RateModel& model, int N, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double p = static_cast<double>(N) * N * model.bound() * dt;
  if (p >= 0.1) throw std::invalid_argument("per-step jump probability N^2 C dt = " + std::to_string(p) + " >= 0.1");
  return p;
}

// x <- x + drift dt + sqrt(theta) sigma dB
void diffuse(const RateModel& model, int N, double r, std::span<double> x, double dt, Rng& rng, Eigen::VectorXd& dB) {
  const double th = model.theta(r, x);
  if (th == 0.0) return;
  const Eigen::VectorXd drift = canonical_drift(model, N, r, x);
  const MutationCovariance cov = mutation_covariance(model.mutation(), r, x);
  const double sd = std::sqrt(dt);
  for (Eigen::Index k = 0; k < dB.size(); ++k) dB[k] = sd * rng.normal();
  const Eigen::VectorXd step = drift * dt + std::sqrt(th) * (cov.factor * dB);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += step[static_cast<Eigen::Index>(k)];
}

bool accept_jump(const RateModel& model, int N, double z, TraitView x, double rp, TraitView y, Rng& rng) {
  const double lam = model.lambda(z, x, rp, y);
  if (lam == 0.0) return false;
  return rng.bernoulli(lam * fixation_probability(model, z, y, x, N) / model.bound());
}

std::size_t step_count(double dt, double horizon) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

std::size_t snapshot_every(double interval, double dt, std::size_t steps) {
  if (!(interval > 0.0)) return steps + 1;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(interval / dt)));
}

}  // namespace

CanonicalTrajectory canonical_ensemble_run(const RateModel& model, int N, XiEnsemble ensemble0, double dt,
                                           double horizon, Rng& rng, CanonicalOptions options) {
  const std::size_t M = ensemble0.size();
  if (M < 2) throw std::invalid_argument("ensemble needs M >= 2 particles");
  if (ensemble0.d != model.dim() || ensemble0.traits.size() != M * ensemble0.d)
    throw std::invalid_argument("ensemble dimension differs from the model");
  const double p_jump = jump_probability(model, N, dt);
  const std::size_t steps = step_count(dt, horizon);
  const std::size_t every = snapshot_every(options.snapshot_interval, dt, steps);

  CanonicalTrajectory out;
  XiEnsemble cur = std::move(ensemble0);
  cur.time = 0.0;
  out.snapshots.push_back(cur);
  XiEnsemble frozen = cur;
  Eigen::VectorXd dB(static_cast<Eigen::Index>(cur.d));
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double h = std::min(dt, horizon - t);
    frozen.traits = cur.traits;
    for (std::size_t i = 0; i < M; ++i) diffuse(model, N, cur.r[i], cur.trait_mut(i), h, rng, dB);
    for (std::size_t i = 0; i < M; ++i) {
      if (!rng.bernoulli(p_jump * h / dt)) continue;
      ++out.proposed_jumps;
      const std::size_t j = rng.index(M);
      if (!accept_jump(model, N, cur.r[i], cur.trait(i), frozen.r[j], frozen.trait(j), rng)) continue;
      ++out.accepted_jumps;
      std::copy(frozen.trait(j).begin(), frozen.trait(j).end(), cur.trait_mut(i).begin());
    }
    t = s == steps ? horizon : static_cast<double>(s) * dt;
    cur.time = t;
    if (s % every == 0 || s == steps) out.snapshots.push_back(cur);
  }
  return out;
}

TaggedCanonicalPath tagged_canonical_run(const RateModel& model, int N, double z, const Trait& x0,
                                         const std::vector<XiEnsemble>& xi, double dt, double horizon, Rng& rng,
                                         CanonicalOptions options) {
  if (xi.empty() || xi.front().time > 0.0) throw std::invalid_argument("xi snapshots must start at t = 0");
  if (x0.dim() != model.dim()) throw std::invalid_argument("initial trait dimension differs from the model");
  for (const auto& e : xi)
    if (e.size() == 0 || e.d != model.dim()) throw std::invalid_argument("xi snapshot is empty or has the wrong dimension");
  const double p_jump = jump_probability(model, N, dt);
  const std::size_t steps = step_count(dt, horizon);
  const std::size_t every = snapshot_every(options.snapshot_interval, dt, steps);

  TaggedCanonicalPath out;
  std::vector<double> x(x0.coords().begin(), x0.coords().end());
  out.times.push_back(0.0);
  out.traits.push_back(x0);
  Eigen::VectorXd dB(static_cast<Eigen::Index>(model.dim()));
  std::size_t snap = 0;
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double h = std::min(dt, horizon - t);
    while (snap + 1 < xi.size() && xi[snap + 1].time <= t) ++snap;
    const XiEnsemble& e = xi[snap];
    diffuse(model, N, z, x, h, rng, dB);
    if (rng.bernoulli(p_jump * h / dt)) {
      const std::size_t j = rng.index(e.size());
      if (accept_jump(model, N, z, x, e.r[j], e.trait(j), rng)) {
        std::copy(e.trait(j).begin(), e.trait(j).end(), x.begin());
        out.jump_times.push_back(t + h);
      }
    }
    t = s == steps ? horizon : static_cast<double>(s) * dt;
    if (s % every == 0 || s == steps) {
      out.times.push_back(t);
      out.traits.emplace_back(TraitView(x));
    }
  }
  return out;
}

}  // namespace metapop
