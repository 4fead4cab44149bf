// One PASS/FAIL line per cross-regime check; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "metapop/canonical.hpp"
#include "metapop/exprlang.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/microsim.hpp"
#include "metapop/parallel.hpp"
#include "metapop/replicator.hpp"
#include "metapop/tss.hpp"
#include "metapop_app/config.hpp"
#include "metapop_app/runner.hpp"
#include "oracles.hpp"

using namespace metapop;
namespace fs = std::filesystem;

namespace {

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Two-type Moran patch: invader 1 against residents 0 with replacement rates
// c(0 -> 1) = 1 and c(1 -> 0) = rho.
Verdict fixation_monte_carlo() {
  const std::vector<int> Ns{2, 3, 5, 10};
  const std::vector<double> rhos{0.25, 0.5, 1.0, 2.0, 4.0};
  const std::size_t runs = 100000;
  struct Cell {
    int N;
    double rho, alpha, freq, se;
    bool closed_form_ok;
  };
  std::vector<Cell> cells;
  for (int N : Ns)
    for (double rho : rhos) cells.push_back({N, rho, 0.0, 0.0, 0.0, false});

  parallel_for(cells.size(), worker_threads(), [&](std::size_t idx) {
    Cell& cell = cells[idx];
    const RateModel model(1, oracle::two_type_selection(1.0, cell.rho), oracle::constant_theta(0.0),
                          oracle::constant_lambda(0.0), MutationFamily::none(), std::max(1.0, cell.rho), true);
    double sum = 0.0;
    for (int k = 0; k < cell.N; ++k) sum += std::pow(cell.rho, k);
    cell.alpha = 1.0 / sum;
    const double lib = fixation_probability(model, 0.5, Trait{1.0}, Trait{0.0}, cell.N);
    cell.closed_form_ok = std::abs(lib - cell.alpha) <= 1e-12 &&
                          std::abs(lib - oracle::absorption_probability(cell.N, 1.0, cell.rho)) <= 1e-10;
    std::vector<std::vector<Trait>> patch(1, std::vector<Trait>(cell.N, Trait{0.0}));
    patch[0][0] = Trait{1.0};
    const MicroState init = MicroState::from_individuals(patch, 0.0);
    Rng rng(derive_stream_seed(0xF1CA7104ULL, idx));
    std::size_t wins = 0;
    for (std::size_t run = 0; run < runs; ++run) {
      MicroSimulator sim(model, init, rng, false);
      sim.advance_to(1e9);
      const auto x = dominant_trait(sim.state(), 0);
      if (x && (*x)[0] == 1.0) ++wins;
    }
    cell.freq = static_cast<double>(wins) / static_cast<double>(runs);
    cell.se = std::sqrt(cell.alpha * (1.0 - cell.alpha) / static_cast<double>(runs));
  });

  Verdict v{true, ""};
  double worst = 0.0;
  for (const auto& c : cells) {
    const double z = std::abs(c.freq - c.alpha) / c.se;
    worst = std::max(worst, z);
    const bool neutral_ok = c.rho != 1.0 || std::abs(c.alpha - 1.0 / c.N) <= 1e-15;
    if (z > 4.0 || !c.closed_form_ok || !neutral_ok) {
      v.pass = false;
      v.detail += fmt(" [N=%d rho=%g freq=%.5f alpha=%.5f z=%.2f]", c.N, c.rho, c.freq, c.alpha, z);
    }
  }
  v.detail = fmt("20 cells x %zu runs, max |z| = %.2f (limit 4)", runs, worst) + v.detail;
  return v;
}

// Local adaptation: the lower trait is favoured at patch position 1/2, the
// higher one at position 1.
Verdict micro_to_tss() {
  const RateModel model(1, expr::selection_kernel(expr::parse("exp((y-x)*(4*r-3))")), oracle::constant_theta(0.0),
                        oracle::constant_lambda(0.5), MutationFamily::none(), 21.0, false);
  const std::vector<double> gammas{1e-2, 1e-3, 1e-4};
  CompareOptions opt;
  opt.replicates = 10000;
  opt.seed = 1;
  opt.threads = worker_threads();
  std::vector<double> tv;
  std::string detail;
  for (double g : gammas) {
    const auto rep = tss_vs_micro_compare(model, {Trait{0.0}, Trait{1.0}}, 5, g, 1.0, opt);
    tv.push_back(rep.tv);
    detail += fmt("gamma=%g tv=%.4f (se %.4f, polymorphic %.4f); ", g, rep.tv, rep.tv_stderr,
                  rep.polymorphic_fraction);
  }
  const bool monotone = tv[0] > tv[1] && tv[1] > tv[2];
  return {monotone && tv[2] < 0.05, detail + (monotone ? "monotone" : "not monotone")};
}

Verdict propagation_of_chaos() {
  const RateModel model(1, oracle::neutral(), oracle::constant_theta(0.0), oracle::constant_lambda(1.0),
                        MutationFamily::none(), 1.0, true);
  const AtomicMeasure mu0({{0.0, Trait{0.0}, 0.5}, {0.0, Trait{1.0}, 0.5}});
  const ChaosOptions opt{10000, 3, worker_threads()};
  const auto rows = chaos_decay_scan(model, 5, {10, 100, 1000}, mu0, [](TraitView x) { return x[0]; }, 1.0, opt);
  std::string detail;
  for (const auto& r : rows) detail += fmt("K=%zu corr=%.4f (se %.4f); ", r.K, r.estimate, r.std_error);
  const bool decreasing = rows[0].estimate > rows[1].estimate && rows[1].estimate > rows[2].estimate;
  const bool small = std::abs(rows[2].estimate) < 0.05;
  return {decreasing && small, detail + (decreasing ? "decreasing" : "not decreasing")};
}

Verdict mckean_vlasov_vs_replicator() {
  const int N = 5;
  const RateModel model(
      1, oracle::neutral(), oracle::constant_theta(0.0),
      [](double, TraitView x, double, TraitView y) { return x[0] * (1.0 + y[0]) / 5.0; }, MutationFamily::none(),
      1.0, true);
  const AtomicMeasure mu0({{0.0, Trait{0.2}, 0.5}, {0.0, Trait{0.5}, 0.5}});
  Rng rng(4);
  const auto mv = mckean_vlasov_run(model, N, 10000, mu0, 50.0, rng, 0.1);
  const auto A = build_interaction_matrix(model, {Trait{0.2}, Trait{0.5}}, N);
  const auto ode = replicator_integrate(A, Eigen::Vector2d(0.5, 0.5), 1e-3, 50.0, 100);
  if (mv.law.times.size() != ode.times.size()) return {false, "snapshot grids differ"};
  double err = 0.0;
  for (std::size_t k = 0; k < ode.times.size(); ++k) {
    if (std::abs(mv.law.times[k] - ode.times[k]) > 1e-9) return {false, "snapshot times differ"};
    err = std::max(err, std::abs(mv.law.measures[k].trait_mass(Trait{0.2}) - ode.weights[k][0]));
  }
  return {err <= 0.02, fmt("M=10000, a12=%.4f, sup error %.4f over %zu snapshots (limit 0.02)", A.A(0, 1), err,
                           ode.times.size())};
}

InteractionMatrix example1() {
  return build_interaction_matrix([](TraitView x, TraitView y) { return x[0] * (1.0 + y[0]) / 25.0; },
                                  {Trait{0.2}, Trait{0.5}, Trait{0.9}}, 5);
}

InteractionMatrix example2() {
  return build_interaction_matrix(
      [](TraitView x, TraitView y) { return (1.0 + std::sin(2.0 * std::numbers::pi * (x[0] - y[0]))) / 25.0; },
      {Trait{0.0}, Trait{1.0 / 3.0}, Trait{2.0 / 3.0}}, 5);
}

Verdict replicator_invariants() {
  Verdict v{true, ""};
  const std::vector<std::pair<InteractionMatrix, Eigen::Vector3d>> systems{
      {example1(), Eigen::Vector3d::Constant(1.0 / 3.0)}, {example2(), Eigen::Vector3d(0.5, 0.3, 0.2)}};
  for (std::size_t s = 0; s < systems.size(); ++s) {
    const auto tr = replicator_integrate(systems[s].first, systems[s].second, 1e-3, 200.0);
    double drift = 0.0, low = 1.0;
    for (const auto& w : tr.weights) {
      drift = std::max(drift, std::abs(w.sum() - 1.0));
      low = std::min(low, w.minCoeff());
    }
    v.pass = v.pass && drift <= 1e-10 && low > 0.0;
    v.detail += fmt("example %zu: max|sum-1|=%.2e min w=%.3e; ", s + 1, drift, low);
  }
  return v;
}

Verdict smallest_trait_invades() {
  const auto A = example1();
  const auto tr = replicator_integrate(A, Eigen::Vector3d::Constant(1.0 / 3.0), 1e-3, 200.0);
  double worst_rise = 0.0;
  for (std::size_t k = 1; k < tr.weights.size(); ++k)
    worst_rise = std::max(worst_rise, tr.weights[k - 1][0] - tr.weights[k][0]);
  const double final_w = tr.weights.back()[0];
  return {final_w > 0.99 && worst_rise <= 1e-9,
          fmt("a12=%.3f, w1(200)=%.6f, max increase of S_t %.2e (slack 1e-9)", A.A(0, 1), final_w, worst_rise)};
}

Verdict cyclic_trajectories() {
  const auto A = example2();
  const auto tr = replicator_integrate(A, Eigen::Vector3d(0.5, 0.3, 0.2), 1e-3, 200.0);
  std::size_t maxima = 0;
  for (std::size_t k = 1; k + 1 < tr.weights.size(); ++k)
    if (tr.weights[k][0] > tr.weights[k - 1][0] && tr.weights[k][0] >= tr.weights[k + 1][0]) ++maxima;
  double lo = 1.0, hi = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    if (tr.times[k] < 150.0 - 1e-9) continue;
    lo = std::min(lo, tr.weights[k][0]);
    hi = std::max(hi, tr.weights[k][0]);
  }
  return {maxima >= 5 && hi - lo > 0.05,
          fmt("a12=%.4f, %zu local maxima of w1, range on [150,200] = %.4f", A.A(0, 1), maxima, hi - lo)};
}

Verdict canonical_moments() {
  const RateModel model(
      1, [](double, TraitView a, TraitView b) { return std::exp(b[0] - a[0]); }, oracle::constant_theta(1.0),
      oracle::constant_lambda(0.0), MutationFamily::plus_minus(1.0), 3.0, true);
  XiEnsemble e;
  e.d = 1;
  e.r.assign(10000, 0.5);
  e.traits.assign(10000, 0.0);
  Rng rng(8);
  const auto tr = canonical_ensemble_run(model, 2, e, 1e-3, 1.0, rng);
  const auto s = oracle::summarize(tr.snapshots.back().traits);
  const double zm = std::abs(s.mean - 1.0) / s.se;
  const double zv = std::abs(s.variance - 1.0) / s.variance_se;
  return {zm <= 4.0 && zv <= 4.0,
          fmt("mean %.4f (z=%.2f), variance %.4f (z=%.2f)", s.mean, zm, s.variance, zv)};
}

Verdict drift_identity() {
  Rng rng(9);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t d = 1 + rng.index(3);
    std::vector<double> u(d), v(d), w(d), q(d);
    for (std::size_t i = 0; i < d; ++i) {
      u[i] = 2.0 * rng.uniform() - 1.0;
      v[i] = 2.0 * rng.uniform() - 1.0;
      w[i] = 2.0 * rng.uniform() - 1.0;
      q[i] = 2.0 * rng.uniform() - 1.0;
    }
    const RateModel model(
        d,
        [=](double r, TraitView a, TraitView b) {
          double e = 0.0;
          for (std::size_t i = 0; i < a.size(); ++i)
            e += u[i] * (b[i] - a[i]) + v[i] * std::sin(b[i]) - w[i] * std::cos(a[i]) + q[i] * r * a[i] * b[i];
          return std::exp(e);
        },
        oracle::constant_theta(0.0), oracle::constant_lambda(0.0), MutationFamily::none(), 1e6, true);
    const int N = 2 + static_cast<int>(rng.index(9));
    const double z = rng.uniform();
    Trait x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = 2.0 * rng.uniform() - 1.0;
    const Eigen::VectorXd lhs = N * fixation_gradient(model, z, x, N);
    const Eigen::VectorXd rhs = 0.5 * (N - 1) * fitness_gradient(model, z, x);
    worst = std::max(worst, (lhs - rhs).norm() / std::max(rhs.norm(), 1e-12));
  }
  return {worst <= 1e-4, fmt("100 kernels, max relative deviation %.2e (limit 1e-4)", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Compares every file except the manifest, which carries timestamps.
bool same_outputs(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(a))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
      files.push_back(fs::relative(entry.path(), a));
  if (files.empty()) {
    why = "no outputs in " + a.string();
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "metapop_determinism";
  fs::remove_all(root);
  std::size_t configs = 0, files = 0;
  for (const auto& entry : fs::directory_iterator(METAPOP_CONFIG_DIR)) {
    const auto doc = nlohmann::json::parse(slurp(entry.path()));
    if (doc.contains("sweep")) continue;
    const auto cfg = app::parse_config(doc);
    const std::string stem = entry.path().stem().string();
    const fs::path a = root / (stem + "_a"), b = root / (stem + "_b"), c = root / (stem + "_par");
    app::run(cfg, {a, 1});
    app::run(cfg, {b, 1});
    app::run(cfg, {c, 2});
    std::string why;
    if (!same_outputs(a, b, why)) return {false, stem + ": rerun " + why};
    if (!same_outputs(a, c, why)) return {false, stem + ": two threads " + why};
    ++configs;
    for (const auto& f : fs::directory_iterator(a)) files += f.path().extension() == ".csv";
  }
  const fs::path cfg = fs::path(METAPOP_CONFIG_DIR) / "micro.json";
  for (const char* tag : {"cli_a", "cli_b"}) {
    const std::string cmd = std::string("\"") + METAPOP_CLI_PATH + "\" run --config \"" + cfg.string() +
                            "\" --seed 5 --threads 2 --out \"" + (root / tag).string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
  }
  std::string why;
  if (!same_outputs(root / "cli_a", root / "cli_b", why)) return {false, "CLI rerun " + why};
  fs::remove_all(root);
  return {true, fmt("%zu configs, %zu CSV files identical across reruns and thread counts; CLI rerun identical",
                    configs, files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"fixation probability vs Monte Carlo", fixation_monte_carlo},
      {"micro to TSS convergence", micro_to_tss},
      {"propagation of chaos", propagation_of_chaos},
      {"McKean-Vlasov vs replicator", mckean_vlasov_vs_replicator},
      {"replicator conservation and positivity", replicator_invariants},
      {"smallest trait invades", smallest_trait_invades},
      {"cyclic trajectories", cyclic_trajectories},
      {"canonical SDE moments", canonical_moments},
      {"drift identity", drift_identity},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
