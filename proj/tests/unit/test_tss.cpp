#include <doctest.h>

#include <cmath>

#include "metapop/tss.hpp"
#include "oracles.hpp"

using namespace metapop;

namespace {

RateModel two_type(double lambda, double theta = 0.0) {
  return RateModel(1, oracle::two_type_selection(1.0, 0.5), oracle::constant_theta(theta),
                   oracle::constant_lambda(lambda), MutationFamily::none(), 1.0, true);
}

}  // namespace

TEST_CASE("site configuration helpers") {
  const auto s = SiteConfiguration::from_traits({Trait{0.1}, Trait{0.2}, Trait{0.3}, Trait{0.4}});
  CHECK(s.position(0) == 0.25);
  CHECK(s.position(3) == 1.0);
  CHECK(site_measure(s).size() == 4);
  CHECK(s.to_traits()[2] == Trait{0.3});
}

TEST_CASE("frozen dynamics") {
  Rng rng(1);
  const auto init = SiteConfiguration::from_traits({Trait{0.0}, Trait{1.0}});
  const auto res = tss_run(two_type(0.0), 5, init, 10.0, rng);
  CHECK(res.snapshots.back().traits == init.traits);
  CHECK(res.counters.migration_fixations == 0);
}

TEST_CASE("two-site absorption matches the embedded chain") {
  // From (0, 1): site 0 flips to 1 at (N^2/K) lambda alpha(1, 0), site 1 flips to
  // 0 at (N^2/K) lambda alpha(0, 1). Either flip absorbs.
  const int N = 4;
  const auto m = two_type(0.7);
  const double up = fixation_probability(m, 0.5, Trait{1.0}, Trait{0.0}, N);
  const double down = fixation_probability(m, 1.0, Trait{0.0}, Trait{1.0}, N);
  const double p = up / (up + down);
  for (std::size_t exact_max : {64ul, 0ul}) {
    Rng rng(2 + exact_max);
    const int runs = 40000;
    int ones = 0;
    for (int k = 0; k < runs; ++k) {
      TssOptions opt;
      opt.exact_max_sites = exact_max;
      const auto res = tss_run(m, N, SiteConfiguration::from_traits({Trait{0.0}, Trait{1.0}}), 100.0, rng, opt);
      ones += res.snapshots.back().site(0)[0] == 1.0;
    }
    const double f = static_cast<double>(ones) / runs;
    CHECK(std::abs(f - p) <= 4.0 * std::sqrt(p * (1 - p) / runs));
  }
}

TEST_CASE("holding time of a two-site configuration") {
  const int N = 3;
  const auto m = two_type(0.9);
  const double rate = N * N / 2.0 * 0.9 *
                      (fixation_probability(m, 0.5, Trait{1.0}, Trait{0.0}, N) +
                       fixation_probability(m, 1.0, Trait{0.0}, Trait{1.0}, N));
  Rng rng(3);
  const int runs = 40000;
  std::vector<double> times;
  for (int k = 0; k < runs; ++k) {
    TssOptions opt;
    opt.record_jumps = true;
    const auto res = tss_run(m, N, SiteConfiguration::from_traits({Trait{0.0}, Trait{1.0}}), 1e6, rng, opt);
    REQUIRE(res.jumps.size() == 1);
    times.push_back(res.jumps.front().time);
  }
  const auto s = oracle::summarize(times);
  CHECK(std::abs(s.mean - 1.0 / rate) <= 4.0 * s.se);
}

TEST_CASE("mutation-fixation count audit") {
  // One site, constant theta, discrete +-eps mutations under a neutral kernel:
  // every mutant fixes with probability 1/N, so fixations are Poisson(T N theta / N).
  const RateModel m(1, oracle::neutral(), oracle::constant_theta(0.6), oracle::constant_lambda(0.0),
                    MutationFamily::plus_minus(0.1), 1.0, true);
  const int N = 5;
  const double T = 10.0;
  const double mean = T * N * 0.6 * (1.0 / N);
  Rng rng(4);
  const int runs = 5000;
  double total = 0.0;
  for (int k = 0; k < runs; ++k)
    total += static_cast<double>(
        tss_run(m, N, SiteConfiguration::from_traits({Trait{0.0}}), T, rng).counters.mutation_fixations);
  CHECK(std::abs(total / runs - mean) <= 4.0 * std::sqrt(mean / runs));
}

TEST_CASE("exchangeability under a homogeneous model") {
  const auto m = RateModel(1, oracle::two_type_selection(1.0, 0.8), oracle::constant_theta(0.0),
                           oracle::constant_lambda(1.0), MutationFamily::none(), 1.0, true);
  Rng rng(5);
  const int runs = 20000;
  std::vector<double> diff;
  for (int k = 0; k < runs; ++k) {
    std::vector<Trait> init;
    for (int l = 0; l < 3; ++l) init.push_back(Trait{rng.bernoulli(0.5) ? 1.0 : 0.0});
    const auto res = tss_run(m, 3, SiteConfiguration::from_traits(init), 0.3, rng);
    diff.push_back(res.snapshots.back().site(0)[0] - res.snapshots.back().site(1)[0]);
  }
  const auto s = oracle::summarize(diff);
  CHECK(std::abs(s.mean) <= 4.0 * s.se);
}

TEST_CASE("snapshots at the requested interval") {
  Rng rng(6);
  TssOptions opt;
  opt.snapshot_interval = 0.5;
  const auto res = tss_run(two_type(0.3), 3, SiteConfiguration::from_traits({Trait{0.0}, Trait{1.0}}), 2.0, rng, opt);
  REQUIRE(res.snapshots.size() == 5);
  CHECK(res.snapshots[1].time == 0.5);
  CHECK(res.snapshots.back().time == 2.0);
}

TEST_CASE("compare report trivial cases") {
  CompareOptions opt;
  opt.replicates = 200;
  opt.seed = 7;
  const auto frozen = RateModel(1, oracle::two_type_selection(1.0, 0.5), oracle::constant_theta(0.0),
                                oracle::constant_lambda(0.0), MutationFamily::none(), 1.0, true);
  const auto rep = tss_vs_micro_compare(frozen, {Trait{0.0}, Trait{1.0}}, 5, 0.01, 1.0, opt);
  CHECK(rep.tv == 0.0);
  const auto zero = tss_vs_micro_compare(two_type(1.0), {Trait{0.0}, Trait{1.0}}, 5, 0.01, 0.0, opt);
  CHECK(zero.tv == 0.0);
}

TEST_CASE("compare refuses a gamma outside the regime") {
  CompareOptions opt;
  opt.replicates = 500;
  const auto m = RateModel(1, oracle::neutral(), oracle::constant_theta(0.0), oracle::constant_lambda(1.0),
                           MutationFamily::none(), 1.0, true);
  CHECK_THROWS_AS(tss_vs_micro_compare(m, {Trait{0.0}, Trait{1.0}}, 5, 0.5, 1.0, opt), Error);
}
