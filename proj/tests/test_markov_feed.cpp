#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dualq/core.hpp"
#include "dualq/gamma.hpp"
#include "dualq/markov_feed.hpp"
#include "support/oracles.hpp"

using namespace dualq;
using namespace dualq::markov;

TEST_CASE("erlang stats at the front of the queue") {
  auto s = erlang_stats(1, 1.0, 0.0);
  CHECK(s.mean == doctest::Approx(1.0));
  CHECK(s.pdf == doctest::Approx(1.0));
  CHECK(s.cdf == doctest::Approx(0.0));

  s = erlang_stats(0, 2.0, 0.5);
  CHECK(s.mean == 0.0);
  CHECK(s.cdf == 1.0);

  s = erlang_stats(4, 2.0, 3.0);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.cdf == doctest::Approx(erlang_cdf(4, 2.0, 3.0)));
}

TEST_CASE("renege probability complements the service-in-time cdf") {
  CHECK(renege_probability(0, 1.0, 0.0) == 0.0);
  CHECK(renege_probability(0, 1.0, 3.0) == 0.0);
  for (auto [k, rate, T] :
       {std::tuple<int64_t, double, double>{1, 1.0, 1.0}, {4, 2.0, 1.5}, {12, 3.0, 4.0}}) {
    CHECK(renege_probability(k, rate, T) ==
          doctest::Approx(1.0 - erlang_cdf(k, rate, T)).epsilon(1e-12));
  }
  // more work ahead means more reneging, more budget means less
  CHECK(renege_probability(6, 1.0, 4.0) > renege_probability(5, 1.0, 4.0));
  CHECK(renege_probability(5, 1.0, 5.0) < renege_probability(5, 1.0, 4.0));
}

TEST_CASE("renege-fail probability consumes the budget from entry") {
  // exhausted budget: no chance of finishing, even with nothing ahead
  CHECK(renege_fail_probability(0, 1.0, 2.0, 2.0) == 0.0);
  CHECK(renege_fail_probability(0, 1.0, 2.0, 3.5) == 0.0);
  CHECK(renege_fail_probability(7, 1.0, 2.0, 2.0) == 0.0);
  // empty backlog with budget left finishes surely
  CHECK(renege_fail_probability(0, 1.0, 2.0, 1.0) == 1.0);
  // otherwise it is the Erlang cdf at the remaining budget
  CHECK(renege_fail_probability(3, 2.0, 5.0, 1.5) ==
        doctest::Approx(erlang_cdf(3, 2.0, 3.5)).epsilon(1e-12));
}

TEST_CASE("pure-death occupancy is binomial thinning") {
  auto at0 = pure_death_pmf(5, 1.0, 0.0);
  REQUIRE(at0.size() == 6);
  CHECK(at0[5] == doctest::Approx(1.0));

  double rate = 0.8, t = 0.9;
  double p = std::exp(-rate * t);
  auto pmf = pure_death_pmf(2, rate, t);
  REQUIRE(pmf.size() == 3);
  CHECK(pmf[0] == doctest::Approx((1 - p) * (1 - p)).epsilon(1e-12));
  CHECK(pmf[1] == doctest::Approx(2 * p * (1 - p)).epsilon(1e-12));
  CHECK(pmf[2] == doctest::Approx(p * p).epsilon(1e-12));

  auto big = pure_death_pmf(40, 1.3, 0.7);
  CHECK(std::accumulate(big.begin(), big.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pure-death occupancy against lifetime sampling") {
  Rng rng(31, 4);
  int64_t samples = 200000;
  auto pmf = pure_death_pmf(12, 0.8, 1.0);
  auto mc = oracle::mc_pure_death_pmf(12, 0.8, 1.0, samples, rng);
  REQUIRE(mc.size() == pmf.size());
  for (size_t i = 0; i < pmf.size(); ++i) {
    double se = std::sqrt(pmf[i] * (1 - pmf[i]) / (double)samples);
    CHECK(std::abs(pmf[i] - mc[i]) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("jockey landing wait in a draining queue") {
  CHECK(pure_death_jockey_time(0, 1.0) == 0.0);
  CHECK(pure_death_jockey_time(1, 1.0) == 0.0);
  CHECK(pure_death_jockey_time(3, 1.0) == doctest::Approx(1.0));
  CHECK(pure_death_jockey_time(5, 2.0) == doctest::Approx(1.0));

  Rng rng(32, 5);
  double cf = expected_pure_death_jockey_time(8, 1.2, 0.6);
  auto mc = oracle::mc_pure_death_jockey_time(8, 1.2, 0.6, 150000, rng);
  CHECK(std::abs(cf - mc.mean) <= 3.0 * mc.se + 1e-9);
}

TEST_CASE("jockey wait closed form with slot-ahead arrivals") {
  CHECK(jockey_wait_closed_form(0, 2.0, 1.0) == 0.0);
  CHECK(jockey_wait_closed_form(1, 2.0, 1.0) == 0.0);
  CHECK(jockey_wait_closed_form(5, 2.0, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(jockey_wait_closed_form(2, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(jockey_wait_closed_form(3, 1.0, 2.0), std::domain_error);

  // mean and cdf describe the same Erlang(k-1, 2mu - lambda_tar) law
  CHECK(jockey_wait_mean(5, 2.0, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(jockey_wait_cdf(1, 2.0, 1.0, 0.0) == 1.0);
  CHECK(jockey_wait_cdf(4, 2.0, 1.0, 2.0) ==
        doctest::Approx(erlang_cdf(3, 3.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("first-passage walk confirms the net-drain mean") {
  Rng rng(33, 6);
  for (auto [k, mu, ltar] :
       {std::tuple<int64_t, double, double>{5, 2.0, 1.0}, {2, 1.0, 0.0}, {9, 1.5, 2.0}}) {
    auto mc = oracle::mc_first_passage_jockey_time(k, mu, ltar, 120000, rng);
    CHECK(std::abs(jockey_wait_closed_form(k, mu, ltar) - mc.mean) <= 3.0 * mc.se + 1e-9);
  }
}

TEST_CASE("uniformized chain rows are stochastic with the documented entries") {
  auto chain = build_uniformized_chain(1.0, 1.0);
  CHECK(chain.q == doctest::Approx(3.0));
  // row 0: no deaths, births at 1/3
  CHECK(chain.down(0) == 0.0);
  CHECK(chain.up(0) == doctest::Approx(1.0 / 3.0));
  CHECK(chain.stay(0) == doctest::Approx(2.0 / 3.0));
  // row 1: one busy server
  CHECK(chain.down(1) == doctest::Approx(1.0 / 3.0));
  CHECK(chain.up(1) == doctest::Approx(1.0 / 3.0));
  CHECK(chain.stay(1) == doctest::Approx(1.0 / 3.0));
  // row 2 and up: both servers busy
  CHECK(chain.down(2) == doctest::Approx(2.0 / 3.0));
  for (int n = 0; n <= chain.n_max; ++n) {
    CHECK(chain.up(n) + chain.down(n) + chain.stay(n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(chain.up(n) >= 0.0);
    CHECK(chain.down(n) >= 0.0);
    CHECK(chain.stay(n) >= 0.0);
  }
  CHECK_THROWS_AS(build_uniformized_chain(2.0, 1.0), std::domain_error);
}

TEST_CASE("stationary two-server occupancy") {
  auto pi = initial_distribution(0.5);
  REQUIRE(pi.size() >= 3);
  CHECK(pi[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(pi[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  auto empty = initial_distribution(0.0);
  REQUIRE(empty.size() == 1);
  CHECK(empty[0] == 1.0);
  CHECK_THROWS_AS(initial_distribution(1.0), std::domain_error);
}

TEST_CASE("transient occupancy at t = 0 is the initial distribution") {
  auto chain = build_uniformized_chain(0.5, 1.0);
  auto pi0 = initial_distribution(0.25);
  auto pmf = transient_pmf(chain, pi0, 0.0);
  REQUIRE(pmf.mass.size() == pi0.size());
  for (size_t i = 0; i < pi0.size(); ++i) CHECK(pmf.mass[i] == pi0[i]);
  CHECK(pmf.truncation_error == 0.0);
}

TEST_CASE("transient occupancy conserves probability") {
  auto chain = build_uniformized_chain(0.8, 1.0);
  auto pi0 = initial_distribution(0.4);
  for (double t : {0.3, 1.0, 4.0, 15.0}) {
    auto pmf = transient_pmf(chain, pi0, t);
    double total = std::accumulate(pmf.mass.begin(), pmf.mass.end(), 0.0);
    CHECK(total + pmf.truncation_error == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pmf.truncation_error <= kDefaultEps);
    for (double m : pmf.mass) CHECK(m >= 0.0);
  }
  CHECK_THROWS_AS(transient_pmf(chain, pi0, 1e9), std::overflow_error);
}

TEST_CASE("transient occupancy matches a dense matrix exponential") {
  // utilizations across the stable range, mixed starts
  for (double rho : {0.3, 0.6, 0.9}) {
    double mu = 1.0, ltar = 2.0 * mu * rho;
    auto chain = build_uniformized_chain(ltar, mu);
    auto start = point_mass_pmf(3);
    auto pmf = transient_pmf(chain, start.mass, 1.3);
    auto ref = oracle::expm_transient(chain, start.mass, 1.3, (int)pmf.mass.size());
    REQUIRE(ref.size() == pmf.mass.size());
    for (size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(pmf.mass[i] - ref[i]) <= 1e-6);
  }
}

TEST_CASE("uniformized single-server chain reproduces binomial thinning") {
  // with no arrivals and one server per job the chain is the iid-lifetime
  // model, so the transient law must match the closed-form binomial
  int n0 = 20;
  double mu = 0.7, t = 0.8;
  auto chain = build_uniformized_chain_c(0.0, mu, 64);
  auto start = point_mass_pmf(n0);
  auto pmf = transient_pmf(chain, start.mass, t, 1e-12);
  auto binom = pure_death_pmf(n0, mu, t);
  double tv = 0.0;
  for (size_t i = 0; i < std::max(pmf.mass.size(), binom.size()); ++i) {
    double a = i < pmf.mass.size() ? pmf.mass[i] : 0.0;
    double b = i < binom.size() ? binom[i] : 0.0;
    tv += std::abs(a - b);
  }
  CHECK(tv / 2.0 <= 1e-6);
}

TEST_CASE("expected jockey time over a transient landing law") {
  auto chain = build_uniformized_chain(0.6, 1.0);
  auto pi0 = initial_distribution(0.3);
  auto pmf = transient_pmf(chain, pi0, 0.7);
  double cf = expected_jockey_time(pmf, 1.0, 0.6);
  Rng rng(34, 7);
  auto mc = oracle::mc_expected_jockey_time(pmf, 1.0, 0.6, 120000, rng);
  CHECK(std::abs(cf - mc.mean) <= 3.0 * mc.se + 1e-9);
}

TEST_CASE("switch benefit: closed form, quadrature, and sampling agree") {
  auto chain = build_uniformized_chain(0.5, 1.2);
  auto pi0 = initial_distribution(0.5 / 2.4);
  auto pmf = transient_pmf(chain, pi0, 0.4);
  Rng rng(35, 8);
  for (int64_t k_i : {1, 3, 10, 40}) {
    double cf = jockey_benefit_probability(k_i, 0.9, pmf, 1.2, 0.5);
    double quad = jockey_benefit_probability_quad(k_i, 0.9, pmf, 1.2, 0.5);
    CHECK(cf == doctest::Approx(quad).epsilon(1e-6));
    // sampling band only where the probability is interior; at k_i = 40 it
    // sits within ~4e-6 of 1, so the binomial standard error collapses
    if (cf < 0.999) {
      auto mc = oracle::mc_jockey_benefit(k_i, 0.9, pmf, 1.2, 0.5, 120000, rng);
      CHECK(std::abs(cf - mc.mean) <= 3.0 * mc.se + 1e-9);
    }
    CHECK(cf >= 0.0);
    CHECK(cf <= 1.0);
  }
  // an empty own queue never benefits from switching
  CHECK(jockey_benefit_probability(0, 0.9, pmf, 1.2, 0.5) == 0.0);
  // the longer the own backlog, the more attractive the other queue
  CHECK(jockey_benefit_probability(10, 0.9, pmf, 1.2, 0.5) >
        jockey_benefit_probability(3, 0.9, pmf, 1.2, 0.5));
}

TEST_CASE("switch outcome split is an exact complement") {
  auto pmf = point_mass_pmf(4);
  auto out = switch_outcome_probabilities(pmf, 1.5, 0.0, 2.0, 0.5);
  CHECK(out.fail + out.success == 1.0);
  CHECK(out.success == doctest::Approx(erlang_cdf(3, 3.0, 1.5)).epsilon(1e-12));

  // exhausted budgets always fail
  out = switch_outcome_probabilities(pmf, 1.5, 0.0, 2.0, 2.0);
  CHECK(out.fail == 1.0);
  CHECK(out.success == 0.0);

  // sampling cross-check on a mixed landing law
  auto chain = build_uniformized_chain(0.4, 1.0);
  auto pi0 = initial_distribution(0.2);
  auto mix = transient_pmf(chain, pi0, 0.6);
  auto split = switch_outcome_probabilities(mix, 1.0, 0.4, 3.0, 1.0);
  CHECK(split.fail + split.success == 1.0);
  Rng rng(36, 9);
  auto mc = oracle::mc_switch_outcome(mix, 1.0, 0.4, 3.0, 1.0, 120000, rng);
  CHECK(std::abs(split.success - mc.success.mean) <= 3.0 * mc.success.se + 1e-9);
}
