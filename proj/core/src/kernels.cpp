#include "metapop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metapop {

std::string to_string(MutationKind kind) {
  switch (kind) {
    case MutationKind::isotropic_gaussian: return "isotropic-gaussian";
    case MutationKind::uniform_ball: return "uniform-ball";
    case MutationKind::discrete_pm: return "discrete-pm";
    case MutationKind::degenerate: return "degenerate";
  }
  return "unknown";
}

std::optional<MutationKind> parse_mutation_kind(const std::string& name) {
  for (auto k : {MutationKind::isotropic_gaussian, MutationKind::uniform_ball, MutationKind::discrete_pm,
                 MutationKind::degenerate}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

RateModel::RateModel(std::size_t dim, SelectionKernel c, MutationRateKernel theta, MigrationKernel lambda,
                     MutationFamily mutation, double bound_C, bool homogeneous)
    : dim_(dim),
      c_(std::move(c)),
      theta_(std::move(theta)),
      lambda_(std::move(lambda)),
      mutation_(std::move(mutation)),
      bound_C_(bound_C),
      homogeneous_(homogeneous) {
  if (dim_ == 0) throw std::invalid_argument("trait dimension must be at least 1");
  if (!(bound_C_ > 0.0) || !std::isfinite(bound_C_)) throw std::invalid_argument("bound_C must be positive and finite");
  if (!c_ || !theta_ || !lambda_) throw std::invalid_argument("rate kernels c, theta, lambda must all be set");
  if (!(mutation_.epsilon >= 0.0)) throw std::invalid_argument("mutation scale epsilon must be nonnegative");
}

void RateModel::throw_bound(double v, const char* name) const {
  std::ostringstream os;
  os << "rate kernel " << name << " evaluated to " << v << ", outside [0, C=" << bound_C_ << "]";
  throw RateBoundError(os.str());
}

RateModel RateModel::with_mutation(MutationFamily mutation) const {
  RateModel m = *this;
  m.mutation_ = std::move(mutation);
  return m;
}

RateModel RateModel::with_lambda(MigrationKernel lambda) const {
  RateModel m = *this;
  m.lambda_ = std::move(lambda);
  return m;
}

RateModel RateModel::with_theta(MutationRateKernel theta) const {
  RateModel m = *this;
  m.theta_ = std::move(theta);
  return m;
}

double fixation_probability(double c_xy, double c_yx, int N) {
  if (N <= 0) throw std::invalid_argument("fixation_probability: N must be >= 1");
  if (!(c_xy >= 0.0) || !(c_yx >= 0.0)) throw std::invalid_argument("fixation_probability: negative rate");
  if (c_xy == 0.0) return 0.0;
  if (N == 1) return 1.0;
  const double rho = c_yx / c_xy;
  if (rho == 1.0) return 1.0 / N;
  if (std::abs(rho - 1.0) < 1e-12) {
    double sum = 1.0;
    for (int k = 1; k < N; ++k) sum = 1.0 + rho * sum;
    return 1.0 / sum;
  }
  // 1 / sum_{k<N} rho^k = (rho - 1) / (rho^N - 1), with rho^N - 1 computed
  // without cancellation.
  const double t = (c_yx - c_xy) / c_xy;
  const double denom = std::expm1(N * std::log1p(t));
  if (std::isinf(denom)) return 0.0;
  return t / denom;
}

double fixation_probability(const RateModel& model, double r, TraitView y, TraitView x, int N) {
  return fixation_probability(model.c(r, x, y), model.c(r, y, x), N);
}

double relative_fitness(const RateModel& model, double r, TraitView y, TraitView x) {
  const double c_xy = model.c(r, x, y);
  const double c_yx = model.c(r, y, x);
  if (c_xy == 0.0 || c_yx == 0.0) throw DomainError("relative fitness undefined: a replacement rate is zero");
  return std::log(c_xy / c_yx);
}

double gradient_step(TraitView x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return 1e-5 * std::max(1.0, std::sqrt(s));
}

namespace {

template <class F>
Eigen::VectorXd central_gradient(TraitView x, F&& f) {
  const double h = gradient_step(x);
  Eigen::VectorXd g(static_cast<Eigen::Index>(x.size()));
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < x.size(); ++k) {
    y[k] = x[k] + h;
    const double up = f(TraitView(y));
    y[k] = x[k] - h;
    const double down = f(TraitView(y));
    y[k] = x[k];
    g[static_cast<Eigen::Index>(k)] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

Eigen::VectorXd fitness_gradient(const RateModel& model, double r, TraitView x) {
  return central_gradient(x, [&](TraitView y) { return relative_fitness(model, r, y, x); });
}

Eigen::VectorXd fixation_gradient(const RateModel& model, double r, TraitView x, int N) {
  return central_gradient(x, [&](TraitView y) { return fixation_probability(model, r, y, x, N); });
}

void sample_mutation_into(const MutationFamily& fam, double r, TraitView x, Rng& rng, std::span<double> out) {
  const std::size_t d = x.size();
  std::copy(x.begin(), x.end(), out.begin());
  if (fam.epsilon == 0.0 || fam.kind == MutationKind::degenerate) return;
  switch (fam.kind) {
    case MutationKind::isotropic_gaussian: {
      const double s = fam.scale_at(r, x);
      for (std::size_t i = 0; i < d; ++i) out[i] += fam.epsilon * s * rng.normal();
      break;
    }
    case MutationKind::uniform_ball: {
      const double radius = fam.scale_at(r, x);
      std::vector<double> dir(d);
      double n2 = 0.0;
      do {
        n2 = 0.0;
        for (auto& v : dir) {
          v = rng.normal();
          n2 += v * v;
        }
      } while (n2 == 0.0);
      const double len = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(n2);
      for (std::size_t i = 0; i < d; ++i) out[i] += fam.epsilon * len * dir[i];
      break;
    }
    case MutationKind::discrete_pm:
      for (std::size_t i = 0; i < d; ++i) out[i] += (rng.next_u64() >> 63) ? fam.epsilon : -fam.epsilon;
      break;
    case MutationKind::degenerate:
      break;
  }
}

Trait sample_mutation(const MutationFamily& fam, double r, TraitView x, Rng& rng) {
  Trait y(x.size());
  sample_mutation_into(fam, r, x, rng, y.mutable_view());
  return y;
}

std::optional<std::vector<std::pair<Trait, double>>> mutation_atoms(const MutationFamily& fam, double /*r*/,
                                                                    TraitView x) {
  std::vector<std::pair<Trait, double>> atoms;
  if (fam.kind == MutationKind::degenerate || fam.epsilon == 0.0) {
    atoms.emplace_back(Trait(x), 1.0);
    return atoms;
  }
  if (fam.kind != MutationKind::discrete_pm) return std::nullopt;
  const std::size_t d = x.size();
  if (d > 20) throw std::invalid_argument("discrete-pm atom enumeration limited to d <= 20");
  const std::size_t count = std::size_t{1} << d;
  const double p = 1.0 / static_cast<double>(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    Trait y(x);
    for (std::size_t i = 0; i < d; ++i) y[i] += ((mask >> i) & 1U) ? fam.epsilon : -fam.epsilon;
    atoms.emplace_back(std::move(y), p);
  }
  return atoms;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& sigma2) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma2);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma2);
  if (eig.info() != Eigen::Success) throw NumericalError("covariance eigen-decomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

MutationCovariance mutation_covariance(const MutationFamily& fam, double r, TraitView x) {
  const auto d = static_cast<Eigen::Index>(x.size());
  if (d == 0) throw std::invalid_argument("mutation_covariance: empty trait");
  double per_axis = 0.0;
  switch (fam.kind) {
    case MutationKind::isotropic_gaussian: {
      const double s = fam.scale_at(r, x);
      if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("isotropic-gaussian scale must be >= 0");
      per_axis = s * s;
      break;
    }
    case MutationKind::uniform_ball: {
      const double radius = fam.scale_at(r, x);
      if (!(radius >= 0.0) || !std::isfinite(radius)) throw std::invalid_argument("uniform-ball radius must be >= 0");
      per_axis = radius * radius / static_cast<double>(d + 2);
      break;
    }
    case MutationKind::discrete_pm:
      per_axis = 1.0;
      break;
    case MutationKind::degenerate:
      per_axis = 0.0;
      break;
  }
  MutationCovariance cov;
  cov.sigma2 = per_axis * Eigen::MatrixXd::Identity(d, d);
  cov.factor = covariance_factor(cov.sigma2);
  return cov;
}

void probe_bounds(const RateModel& model, Rng& rng, std::size_t probes, ProbeBox box) {
  const std::size_t d = model.dim();
  std::vector<double> x(d), y(d);
  auto draw = [&](std::vector<double>& v) {
    for (auto& c : v) c = box.lo + (box.hi - box.lo) * rng.uniform();
  };
  for (std::size_t i = 0; i < probes; ++i) {
    const double r = rng.uniform();
    const double rp = rng.uniform();
    draw(x);
    draw(y);
    try {
      model.c(r, x, y);
      model.theta(r, x);
      model.lambda(r, x, rp, y);
    } catch (const RateBoundError& e) {
      std::ostringstream os;
      os << e.what() << " (probe " << i << " at r=" << r << ", rp=" << rp << ", x[0]=" << x[0] << ", y[0]=" << y[0]
         << ")";
      throw RateBoundError(os.str());
    }
  }
}

}  // namespace metapop
