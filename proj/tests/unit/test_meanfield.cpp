#include <doctest.h>

#include <cmath>

#include "metapop/meanfield.hpp"
#include "metapop/replicator.hpp"
#include "oracles.hpp"

using namespace metapop;

namespace {

// lambda(x, y) alpha(y, x) = x (1 + y) / N^2 with a neutral kernel.
RateModel example_one(int N) {
  return RateModel(
      1, oracle::neutral(), oracle::constant_theta(0.0),
      [N](double, TraitView x, double, TraitView y) { return x[0] * (1.0 + y[0]) / N; }, MutationFamily::none(), 1.0,
      true);
}

}  // namespace

TEST_CASE("finite mean-field flow reduces to the replicator equation") {
  const int N = 5;
  const auto m = example_one(N);
  const std::vector<Trait> traits{Trait{0.2}, Trait{0.5}};
  const AtomicMeasure init({{0.5, Trait{0.2}, 0.3}, {0.5, Trait{0.5}, 0.7}});
  const auto flow = meanfield_finite_solve(m, N, init, traits, 20.0, 1e-3, 0.1);
  const auto A = build_interaction_matrix(m, traits, N);
  const auto rep = replicator_integrate(A, Eigen::Vector2d(0.3, 0.7), 1e-3, 20.0, 100);
  REQUIRE(flow.trajectory.times.size() == rep.times.size());
  double err = 0.0;
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    CHECK(flow.trajectory.times[k] == doctest::Approx(rep.times[k]));
    err = std::max(err, std::abs(flow.trajectory.measures[k].trait_mass(Trait{0.2}) - rep.weights[k][0]));
  }
  CHECK(err <= 1e-6);
  CHECK(flow.max_mass_error <= 1e-10);
}

TEST_CASE("finite mean-field flow conserves mass with mutation") {
  const RateModel m(
      1, [](double r, TraitView x, TraitView y) { return 1.0 + 0.5 * r * (y[0] - x[0]); },
      [](double, TraitView x) { return std::abs(x[0]) < 0.05 ? 0.5 : 0.0; },
      [](double r, TraitView, double rp, TraitView) { return 1.0 + 0.5 * r * rp; }, MutationFamily::plus_minus(0.1),
      2.0);
  const AtomicMeasure init({{0.25, Trait{0.0}, 0.5}, {0.75, Trait{0.0}, 0.5}});
  const auto res = meanfield_finite_solve(m, 4, init, {Trait{-0.1}, Trait{0.0}, Trait{0.1}}, 3.0, 1e-3);
  CHECK(res.max_mass_error <= 1e-10);
  CHECK(res.trajectory.measures.back().trait_mass(Trait{0.1}) > 0.0);
}

TEST_CASE("finite mean-field flow rejects leaking mutation") {
  const RateModel m(1, oracle::neutral(), oracle::constant_theta(1.0), oracle::constant_lambda(0.0),
                    MutationFamily::plus_minus(0.1), 1.0, true);
  const AtomicMeasure init({{0.5, Trait{0.0}, 1.0}});
  CHECK_THROWS_AS(meanfield_finite_solve(m, 3, init, {Trait{0.0}, Trait{0.1}}, 1.0, 1e-3), std::invalid_argument);
  const RateModel g(1, oracle::neutral(), oracle::constant_theta(1.0), oracle::constant_lambda(0.0),
                    MutationFamily::gaussian(1.0, 0.1), 1.0, true);
  CHECK_THROWS_AS(meanfield_finite_solve(g, 3, init, {Trait{0.0}}, 1.0, 1e-3), std::invalid_argument);
}

TEST_CASE("left limits of measure trajectories") {
  MeasureTrajectory tr;
  tr.times = {0.0, 1.0};
  tr.measures = {AtomicMeasure({{0.0, Trait{0.0}, 1.0}}), AtomicMeasure({{0.0, Trait{1.0}, 1.0}})};
  CHECK(tr.left_limit(0.5).atoms()[0].x == Trait{0.0});
  CHECK(tr.left_limit(1.0).atoms()[0].x == Trait{0.0});
  CHECK(tr.left_limit(1.5).atoms()[0].x == Trait{1.0});
}

TEST_CASE("tagged site holding time against a Dirac flow") {
  const int N = 3;
  const auto m = RateModel(1, oracle::two_type_selection(1.0, 0.6), oracle::constant_theta(0.0),
                           oracle::constant_lambda(0.8), MutationFamily::none(), 1.0, true);
  MeasureTrajectory nu;
  nu.times = {0.0};
  nu.measures = {AtomicMeasure({{0.7, Trait{1.0}, 1.0}})};
  const double rate = N * N * 0.8 * fixation_probability(m, 0.2, Trait{1.0}, Trait{0.0}, N);
  std::vector<TaggedSite> sites(20000, TaggedSite{0.2, Trait{0.0}});
  Rng rng(8);
  const auto paths = tagged_sites_run(m, N, sites, nu, 20.0, rng);
  std::vector<double> hold;
  for (const auto& p : paths) {
    REQUIRE(p.times.size() == 2);
    hold.push_back(p.times[1]);
    CHECK(p.at(p.times[1]) == Trait{1.0});
    CHECK(p.at(0.5 * p.times[1]) == Trait{0.0});
  }
  const auto s = oracle::summarize(hold);
  CHECK(std::abs(s.mean - 1.0 / rate) <= 4.0 * s.se);
}

TEST_CASE("McKean-Vlasov particles follow the replicator equation") {
  const int N = 5;
  const auto m = example_one(N);
  const AtomicMeasure mu0({{0.0, Trait{0.2}, 0.5}, {0.0, Trait{0.5}, 0.5}});
  Rng rng(9);
  const auto res = mckean_vlasov_run(m, N, 4000, mu0, 10.0, rng, 1.0);
  const auto A = build_interaction_matrix(m, {Trait{0.2}, Trait{0.5}}, N);
  const auto ode = replicator_integrate(A, Eigen::Vector2d(0.5, 0.5), 1e-3, 10.0, 1000);
  REQUIRE(res.law.times.size() == ode.times.size());
  for (std::size_t k = 0; k < ode.times.size(); ++k)
    CHECK(std::abs(res.law.measures[k].trait_mass(Trait{0.2}) - ode.weights[k][0]) <= 0.05);
  CHECK_THROWS_AS(mckean_vlasov_run(m, N, 1, mu0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("chaos scan on a neutral voter-like model") {
  const auto m = RateModel(1, oracle::neutral(), oracle::constant_theta(0.0), oracle::constant_lambda(1.0),
                           MutationFamily::none(), 1.0, true);
  const AtomicMeasure mu0({{0.0, Trait{0.0}, 0.5}, {0.0, Trait{1.0}, 0.5}});
  ChaosOptions opt{2000, 11, 1};
  const auto rows = chaos_decay_scan(m, 5, {4, 40}, mu0, [](TraitView x) { return x[0]; }, 1.0, opt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].estimate > rows[1].estimate);
  CHECK(rows[0].estimate > 4.0 * rows[0].std_error);
  CHECK_THROWS_AS(chaos_decay_scan(m, 5, {40, 4}, mu0, [](TraitView x) { return x[0]; }, 1.0, opt),
                  std::invalid_argument);
}
