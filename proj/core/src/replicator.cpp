#include "metapop/replicator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace metapop {

namespace {

void check_distinct(const std::vector<Trait>& traits) {
  if (traits.empty()) throw std::invalid_argument("need at least one trait");
  for (std::size_t i = 0; i < traits.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (traits[i] == traits[j]) {
        throw std::invalid_argument("duplicate traits at indices " + std::to_string(j + 1) + " and " +
                                    std::to_string(i + 1));
      }
}

void check_simplex(const Eigen::VectorXd& w, std::size_t n) {
  if (static_cast<std::size_t>(w.size()) != n) throw std::invalid_argument("weight vector has the wrong length");
  if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("initial weights must lie on the simplex");
}

void check_step(double dt, double horizon) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("need dt > 0 and horizon >= 0");
}

}  // namespace

InteractionMatrix build_interaction_matrix(const ReplacementRate& rate, const std::vector<Trait>& traits, int N) {
  check_distinct(traits);
  const auto n = static_cast<Eigen::Index>(traits.size());
  const double n2 = static_cast<double>(N) * N;
  Eigen::MatrixXd L(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) L(i, j) = rate(traits[i], traits[j]);
  InteractionMatrix out;
  const Eigen::MatrixXd raw = n2 * (L.transpose() - L);
  out.max_asymmetry = (raw + raw.transpose()).cwiseAbs().maxCoeff();
  out.A = 0.5 * (raw - raw.transpose());
  out.traits = traits;
  return out;
}

InteractionMatrix build_interaction_matrix(const RateModel& model, const std::vector<Trait>& traits, int N) {
  if (!model.homogeneous()) throw std::invalid_argument("interaction matrix needs a homogeneous model");
  constexpr double r = 0.5;
  return build_interaction_matrix(
      [&](TraitView x, TraitView y) { return model.lambda(r, x, r, y) * fixation_probability(model, r, y, x, N); },
      traits, N);
}

WeightTrajectory replicator_integrate(const InteractionMatrix& A, const Eigen::VectorXd& w0, double dt,
                                      double horizon, std::size_t record_every) {
  check_simplex(w0, A.traits.empty() ? static_cast<std::size_t>(A.A.rows()) : A.traits.size());
  check_step(dt, horizon);
  record_every = std::max<std::size_t>(record_every, 1);
  auto f = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return w.cwiseProduct(A.A * w); };
  WeightTrajectory out;
  Eigen::VectorXd w = w0;
  out.times.push_back(0.0);
  out.weights.push_back(w);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double h = std::min(dt, horizon - t);
    const Eigen::VectorXd k1 = f(w);
    const Eigen::VectorXd k2 = f(w + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(w + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(w + h * k3);
    w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = s == steps ? horizon : static_cast<double>(s) * dt;
    if (w.minCoeff() < -1e-8) throw NumericalError("replicator weight below -1e-8 at t=" + std::to_string(t));
    if (s % record_every == 0 || s == steps) {
      out.times.push_back(t);
      out.weights.push_back(w);
    }
  }
  return out;
}

Eigen::VectorXd SpatialTrajectory::mean_weights(std::size_t k) const { return weights.at(k).rowwise().mean(); }

SpatialTrajectory spatial_weights_integrate(const RateModel& model, const std::vector<Trait>& traits, int N,
                                            const Eigen::MatrixXd& w0, double dt, double horizon,
                                            std::size_t record_every) {
  check_distinct(traits);
  check_step(dt, horizon);
  const auto n = static_cast<Eigen::Index>(traits.size());
  const Eigen::Index G = w0.cols();
  if (w0.rows() != n || G < 1) throw std::invalid_argument("initial weights must be n x G with G >= 1");
  if ((w0.array() < 0.0).any() || std::abs(w0.sum() / static_cast<double>(G) - 1.0) > 1e-10)
    throw std::invalid_argument("initial weights must be nonnegative with total mass 1");
  record_every = std::max<std::size_t>(record_every, 1);

  std::vector<double> r(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) r[g] = (static_cast<double>(g) + 0.5) / static_cast<double>(G);
  // alpha[g](i, j) = alpha(r_g, x^i, x^j); lam[(i, j)](g, g') = lambda((r_g, x^i), (r_g', x^j))
  std::vector<Eigen::MatrixXd> alpha(static_cast<std::size_t>(G), Eigen::MatrixXd(n, n));
  std::vector<Eigen::MatrixXd> lam(static_cast<std::size_t>(n * n), Eigen::MatrixXd(G, G));
  for (Eigen::Index g = 0; g < G; ++g)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) alpha[g](i, j) = fixation_probability(model, r[g], traits[i], traits[j], N);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index g = 0; g < G; ++g)
        for (Eigen::Index gp = 0; gp < G; ++gp) lam[i * n + j](g, gp) = model.lambda(r[g], traits[i], r[gp], traits[j]);

  const double n2 = static_cast<double>(N) * N;
  const double cell = 1.0 / static_cast<double>(G);
  auto f = [&](const Eigen::MatrixXd& w) -> Eigen::MatrixXd {
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(n, G);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        // integrals over r' of lambda((r, x^i), (r', x^j)) w^j(r') and the reverse
        const Eigen::VectorXd out_ij = cell * lam[i * n + j] * w.row(j).transpose();
        const Eigen::VectorXd in_ji = cell * lam[j * n + i] * w.row(i).transpose();
        for (Eigen::Index g = 0; g < G; ++g)
          dw(i, g) += n2 * (w(j, g) * alpha[g](i, j) * in_ji(g) - w(i, g) * alpha[g](j, i) * out_ij(g));
      }
    return dw;
  };

  SpatialTrajectory out;
  Eigen::MatrixXd w = w0;
  out.times.push_back(0.0);
  out.weights.push_back(w);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  double t = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double h = std::min(dt, horizon - t);
    const Eigen::MatrixXd k1 = f(w);
    const Eigen::MatrixXd k2 = f(w + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = f(w + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = f(w + h * k3);
    w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = s == steps ? horizon : static_cast<double>(s) * dt;
    if (w.minCoeff() < -1e-8) throw NumericalError("spatial weight below -1e-8 at t=" + std::to_string(t));
    if (s % record_every == 0 || s == steps) {
      out.times.push_back(t);
      out.weights.push_back(w);
    }
  }
  return out;
}

std::optional<std::size_t> invasion_check(const InteractionMatrix& A, const Eigen::VectorXd& w0) {
  const Eigen::Index n = A.A.rows();
  check_simplex(w0, static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w0[i] > 0.0)) continue;
    bool dominates = true;
    for (Eigen::Index j = 0; j < n && dominates; ++j)
      if (j != i && !(A.A(i, j) > 0.0)) dominates = false;
    if (dominates) return static_cast<std::size_t>(i);
  }
  return std::nullopt;
}

std::optional<Eigen::VectorXd> interior_equilibrium(const InteractionMatrix& A) {
  const Eigen::Index n = A.A.rows();
  Eigen::MatrixXd M(n + 1, n);
  M.topRows(n) = A.A;
  M.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b[n] = 1.0;
  const Eigen::VectorXd w = M.colPivHouseholderQr().solve(b);
  if ((M * w - b).norm() > 1e-9 || !(w.minCoeff() > 0.0)) return std::nullopt;
  return w;
}

double replicator_integral(const Eigen::VectorXd& w_star, const Eigen::VectorXd& w) {
  return w_star.dot(w.array().log().matrix());
}

}  // namespace metapop
