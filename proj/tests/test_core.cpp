#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dualq/core.hpp"

using namespace dualq;

TEST_CASE("service rates derived from arrival rates and the split parameter") {
  auto r = derive_service_rates(4.0, 4.0, 2.0);
  CHECK(r.mu_i == doctest::Approx(3.0));
  CHECK(r.mu_j == doctest::Approx(1.0));

  r = derive_service_rates(3.0, 5.0, -1.0);
  CHECK(r.mu_i == doctest::Approx(1.0));
  CHECK(r.mu_j == doctest::Approx(3.0));

  // delta = 0 halves both arrival rates
  r = derive_service_rates(6.0, 2.0, 0.0);
  CHECK(r.mu_i == doctest::Approx(3.0));
  CHECK(r.mu_j == doctest::Approx(1.0));
}

TEST_CASE("degenerate service rates are rejected") {
  CHECK_THROWS_AS(derive_service_rates(2.0, 2.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(derive_service_rates(2.0, 2.0, -2.0), std::domain_error);
  CHECK_THROWS_AS(derive_service_rates(1.0, 1.0, 5.0), std::domain_error);
}

TEST_CASE("make_config splits traffic evenly and passes validation") {
  auto cfg = make_config(8.0, 2.0, PatienceModel::constant(4.0), 1.5, 0.5, 7);
  CHECK(cfg.lambda_i == doctest::Approx(4.0));
  CHECK(cfg.lambda_j == doctest::Approx(4.0));
  CHECK(cfg.delta_lambda == doctest::Approx(2.0));
  CHECK(cfg.mu_i == doctest::Approx(3.0));
  CHECK(cfg.mu_j == doctest::Approx(1.0));
  CHECK(cfg.t_local == doctest::Approx(1.5));
  CHECK(cfg.lambda_tar == doctest::Approx(0.5));
  CHECK(cfg.seed == 7);
  CHECK(cfg.lambda_total() == doctest::Approx(8.0));
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config validation catches inconsistent setups") {
  auto good = make_config(8.0, 2.0, PatienceModel::constant(4.0), 1.0, 0.0, 1);

  auto bad = good;
  bad.lambda_i = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = good;
  bad.mu_j = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = good;
  bad.lambda_tar = bad.lambda_j + 1.0;  // cannot slot ahead faster than the feed arrives
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = good;
  bad.t_local = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // the patience factory rejects a bad mean before any config sees it
  CHECK_THROWS_AS(PatienceModel::exponential_mean(-2.0), std::invalid_argument);
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  bool same = true, diff = false;
  for (int i = 0; i < 64; ++i) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    same = same && (x == y);
    diff = diff || (x != z);
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("uniform and exponential draws have the right first moments") {
  Rng rng(123, 0);
  int64_t n = 1000000;
  double su = 0.0, se = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    su += rng.uniform();
    se += rng.exponential(2.0);
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(se / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers its whole range") {
  Rng rng(5, 9);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    int64_t v = rng.uniform_int(6);
    REQUIRE(v >= 0);
    REQUIRE(v < 6);
    counts[(size_t)v]++;
  }
  for (int c : counts) CHECK(c > 9000);  // ~10000 expected each
}

TEST_CASE("poisson draws match their mean") {
  Rng rng(77, 1);
  int64_t n = 200000;
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += (double)rng.poisson(3.0);
  CHECK(s / n == doctest::Approx(3.0).epsilon(0.02));
  // zero and tiny rates never go negative
  CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("patience models sample what they promise") {
  Rng rng(9, 2);
  auto fixed = PatienceModel::constant(4.0);
  for (int i = 0; i < 8; ++i) CHECK(sample_patience(fixed, rng) == 4.0);

  auto exp2 = PatienceModel::exponential_mean(2.0);
  int64_t n = 1000000;
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += sample_patience(exp2, rng);
  CHECK(s / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("utilization flags instability") {
  auto u = utilization(1.0, 2, 1.0);
  CHECK(u.rho == doctest::Approx(0.5));
  CHECK(u.stable);
  u = utilization(4.0, 2, 1.0);
  CHECK(u.rho == doctest::Approx(2.0));
  CHECK_FALSE(u.stable);
}

TEST_CASE("patience budget bookkeeping") {
  Patience p{4.0, 1.5};
  CHECK(p.remaining() == doctest::Approx(2.5));
  p.consumed = 5.0;
  CHECK(p.remaining() < 0.0);  // overdrawn budgets stay negative, feeds must renege
}

TEST_CASE("provenance labels render for reporting") {
  CHECK(to_string(Provenance::markov) == std::string("markov"));
  CHECK(to_string(Provenance::learned) == std::string("learned"));
  CHECK(to_string(Provenance::baseline) == std::string("baseline"));
}
