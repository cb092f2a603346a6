#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dualq::markov {

inline constexpr double kDefaultEps = 1e-9;

// Remaining-work law for a tenant with k jobs ahead, each served at `rate`:
// the k-stage Erlang.  mean = k/rate.
struct ErlangStats {
  double mean;
  double pdf;
  double cdf;
};
ErlangStats erlang_stats(int64_t k, double rate, double t);

// P{W(k) > patience}: the chance the backlog outlasts the full budget.
double renege_probability(int64_t k, double rate, double patience);

// F_{W(k)}(patience - elapsed): the chance of reaching service inside the
// remaining budget when `elapsed` of it is already gone.  An exhausted
// budget (elapsed >= patience) returns 0 for every k, including k = 0.
double renege_fail_probability(int64_t k, double rate, double patience, double elapsed);

// Occupancy of a queue that started at n and only loses customers, each
// departing independently at `rate`: Binomial(n, e^{-rate t}).
std::vector<double> pure_death_pmf(int64_t n, double rate, double t);

// Remaining wait for a jockey landing at position n of a two-server queue
// with per-server rate mu and no further arrivals: (n-1)/(2 mu) for n >= 2.
double pure_death_jockey_time(int64_t n, double mu);

// Mixture of the above over the pure-death occupancy at time t.
double expected_pure_death_jockey_time(int64_t n, double mu, double t);

// Uniformized birth-death chain for the target queue: births lambda_tar,
// deaths min(n, servers) * mu, uniformization rate q = lambda_tar + servers*mu.
// Row n of the one-step matrix is (down, stay, up) = (death(n)/q, ., birth/q);
// the last row folds the would-be up-move into stay so rows stay stochastic.
struct UniformizedChain {
  double lambda_tar = 0.0;
  double mu = 1.0;
  int servers = 2;
  double q = 0.0;
  int n_max = 0;

  double death_rate(int n) const;
  double up(int n) const;
  double down(int n) const;
  double stay(int n) const;
};

// servers is fixed at 2 for the feed; the general builder exists so the
// chain can be validated against single-server death-rate references.
UniformizedChain build_uniformized_chain(double lambda_tar, double mu,
                                         double eps = kDefaultEps);
UniformizedChain build_uniformized_chain_c(double lambda_tar, double mu, int servers,
                                           double eps = kDefaultEps);

// Occupancy distribution at time t via the Poisson-weighted power series.
// mass sums to 1 - (Poisson tail); truncation_error adds the boundary leak.
struct TransientPmf {
  double t = 0.0;
  std::vector<double> mass;
  double truncation_error = 0.0;
};
TransientPmf transient_pmf(const UniformizedChain& chain, std::span<const double> pi0,
                           double t, double eps = kDefaultEps);
TransientPmf point_mass_pmf(int k);

// Stationary two-server occupancy for utilization rho = lambda/(2 mu):
// pi_0 = (1 + 2 rho + 2 rho^2/(1-rho))^-1, pi_n = 2 rho^n pi_0 for n >= 1.
// Truncated at a 1e-15 relative tail and renormalized.
std::vector<double> initial_distribution(double rho);

// (k-1)/(2 mu - lambda_tar) for k >= 2, zero below.  Requires 2 mu > lambda_tar.
double jockey_wait_closed_form(int64_t k, double mu, double lambda_tar);

// Mixture of the closed form over an occupancy pmf.
double expected_jockey_time(const TransientPmf& pmf, double mu, double lambda_tar);

// Law of the jockey's wait at landing position k: point mass at zero for
// k <= 1, Erlang(k-1, 2 mu - lambda_tar) otherwise.
double jockey_wait_cdf(int64_t k, double mu, double lambda_tar, double x);
double jockey_wait_mean(int64_t k, double mu, double lambda_tar);

// P{switching beats staying} = sum_k pmf[k] P{T_jockey(k) < W(k_i)} with
// W(k_i) ~ Erlang(k_i, mu_i).  Closed form via gamma_before_gamma; the _quad
// variant integrates f_W * G_k directly and exists as the independent route.
double jockey_benefit_probability(int64_t k_i, double mu_i, const TransientPmf& pmf,
                                  double mu_j, double lambda_tar);
double jockey_benefit_probability_quad(int64_t k_i, double mu_i, const TransientPmf& pmf,
                                       double mu_j, double lambda_tar,
                                       double tol = 1e-8);

// Post-switch outcome split: fail = P{T_jockey > patience - elapsed} mixed
// over the landing pmf, success its exact complement.
struct SwitchOutcome {
  double fail;
  double success;
};
SwitchOutcome switch_outcome_probabilities(const TransientPmf& pmf, double mu_j,
                                           double lambda_tar, double patience,
                                           double elapsed);

}  // namespace dualq::markov
