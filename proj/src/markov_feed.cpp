#include "dualq/markov_feed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dualq/gamma.hpp"

namespace dualq::markov {

namespace {

constexpr int kMaxUniformizationSteps = 400000;
constexpr int kMaxChainStates = 1 << 21;

void require_positive_rate(double mu, const char* who) {
  if (!(mu > 0.0)) throw std::domain_error(std::string(who) + ": rate must be positive");
}

}  // namespace

ErlangStats erlang_stats(int64_t k, double rate, double t) {
  if (k < 0) throw std::domain_error("erlang_stats: negative backlog");
  require_positive_rate(rate, "erlang_stats");
  ErlangStats out;
  out.mean = double(k) / rate;
  out.pdf = erlang_pdf(k, rate, t);
  out.cdf = erlang_cdf(k, rate, t);
  return out;
}

double renege_probability(int64_t k, double rate, double patience) {
  if (patience < 0.0) throw std::domain_error("renege_probability: negative patience");
  return 1.0 - erlang_cdf(k, rate, patience);
}

double renege_fail_probability(int64_t k, double rate, double patience, double elapsed) {
  if (patience < 0.0 || elapsed < 0.0)
    throw std::domain_error("renege_fail_probability: negative time");
  require_positive_rate(rate, "renege_fail_probability");
  double remaining = patience - elapsed;
  if (remaining <= 0.0) return 0.0;  // budget exhausted, even with nobody ahead
  return erlang_cdf(k, rate, remaining);
}

std::vector<double> pure_death_pmf(int64_t n, double rate, double t) {
  if (n < 0) throw std::domain_error("pure_death_pmf: negative occupancy");
  require_positive_rate(rate, "pure_death_pmf");
  if (t < 0.0) throw std::domain_error("pure_death_pmf: negative time");
  std::vector<double> pmf(size_t(n) + 1, 0.0);
  if (t == 0.0) {
    pmf[size_t(n)] = 1.0;
    return pmf;
  }
  // survivor count ~ Binomial(n, e^{-rate t}), masses assembled in log space
  double log_p = -rate * t;
  double log_1mp = std::log1p(-std::exp(log_p));
  for (int64_t k = 0; k <= n; ++k)
    pmf[size_t(k)] = std::exp(log_choose(n, k) + k * log_p + (n - k) * log_1mp);
  return pmf;
}

double pure_death_jockey_time(int64_t n, double mu) {
  if (n < 0) throw std::domain_error("pure_death_jockey_time: negative position");
  require_positive_rate(mu, "pure_death_jockey_time");
  if (n < 2) return 0.0;
  return double(n - 1) / (2.0 * mu);
}

double expected_pure_death_jockey_time(int64_t n, double mu, double t) {
  auto pmf = pure_death_pmf(n, mu, t);
  double out = 0.0;
  for (size_t k = 0; k < pmf.size(); ++k)
    out += pmf[k] * pure_death_jockey_time(int64_t(k), mu);
  return out;
}

double UniformizedChain::death_rate(int n) const {
  return std::min(n, servers) * mu;
}

double UniformizedChain::up(int n) const {
  return n < n_max ? lambda_tar / q : 0.0;
}

double UniformizedChain::down(int n) const {
  return death_rate(n) / q;
}

double UniformizedChain::stay(int n) const {
  return 1.0 - up(n) - down(n);
}

UniformizedChain build_uniformized_chain_c(double lambda_tar, double mu, int servers,
                                           double eps) {
  if (lambda_tar < 0.0) throw std::domain_error("build_uniformized_chain: negative lambda_tar");
  require_positive_rate(mu, "build_uniformized_chain");
  if (servers < 1) throw std::domain_error("build_uniformized_chain: need at least one server");
  if (!(eps > 0.0)) throw std::domain_error("build_uniformized_chain: eps must be positive");
  double capacity = servers * mu;
  if (lambda_tar >= capacity)
    throw std::domain_error(
        "build_uniformized_chain: lambda_tar >= total service rate, occupancy grows without "
        "bound and no finite truncation meets eps");
  UniformizedChain chain;
  chain.lambda_tar = lambda_tar;
  chain.mu = mu;
  chain.servers = servers;
  chain.q = lambda_tar + capacity;
  // size from the geometric stationary tail, floor keeps tiny cases workable
  int n = 8;
  if (lambda_tar > 0.0) {
    double r = lambda_tar / capacity;
    double tail = std::log(eps * (1.0 - r) * 0.5) / std::log(r);
    n = std::max(n, int(std::ceil(tail)) + 4);
  }
  chain.n_max = n;
  return chain;
}

UniformizedChain build_uniformized_chain(double lambda_tar, double mu, double eps) {
  return build_uniformized_chain_c(lambda_tar, mu, 2, eps);
}

TransientPmf point_mass_pmf(int k) {
  if (k < 0) throw std::domain_error("point_mass_pmf: negative state");
  TransientPmf pmf;
  pmf.mass.assign(size_t(k) + 1, 0.0);
  pmf.mass[size_t(k)] = 1.0;
  return pmf;
}

TransientPmf transient_pmf(const UniformizedChain& chain, std::span<const double> pi0,
                           double t, double eps) {
  if (t < 0.0) throw std::domain_error("transient_pmf: negative time");
  if (!(eps > 0.0)) throw std::domain_error("transient_pmf: eps must be positive");
  if (pi0.empty()) throw std::invalid_argument("transient_pmf: empty initial distribution");
  double pi0_sum = std::accumulate(pi0.begin(), pi0.end(), 0.0);
  if (std::abs(pi0_sum - 1.0) > 1e-9)
    throw std::invalid_argument("transient_pmf: initial distribution must sum to 1");

  TransientPmf out;
  out.t = t;
  if (t == 0.0) {
    out.mass.assign(pi0.begin(), pi0.end());
    out.truncation_error = 0.0;
    return out;
  }

  double qt = chain.q * t;
  // Poisson step budget; past this the series itself is the bottleneck.  Vet
  // the cap in double first: for huge q*t the int conversion would overflow.
  double m_cap_wide = qt + 10.0 * std::sqrt(qt + 1.0) + 60.0;
  if (m_cap_wide > double(kMaxUniformizationSteps))
    throw std::overflow_error(
        "transient_pmf: q*t exceeds the series budget; reduce t or step the interval");
  int m_cap = int(m_cap_wide);

  int n = std::max<int>(chain.n_max, int(pi0.size()) - 1);
  double p_up = chain.lambda_tar / chain.q;
  for (;;) {
    if (n + 1 > kMaxChainStates)
      throw std::overflow_error("transient_pmf: state truncation grew past the hard cap");
    std::vector<double> v(size_t(n) + 1, 0.0);
    std::copy(pi0.begin(), pi0.end(), v.begin());
    std::vector<double> acc(size_t(n) + 1, 0.0);
    std::vector<double> next(size_t(n) + 1, 0.0);

    double log_qt = std::log(qt);
    double boundary_leak = 0.0;
    double cum_weight = 0.0;
    int m = 0;
    for (;; ++m) {
      double log_w = -qt + m * log_qt - std::lgamma(double(m) + 1.0);
      double w = std::exp(log_w);
      cum_weight += w;
      for (size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
      if (cum_weight >= 1.0 - 0.5 * eps || m >= m_cap) break;
      // mass that would have crossed the reflecting boundary this step
      boundary_leak += v[size_t(n)] * p_up;
      // one uniformized step: next = v P (tri-diagonal)
      for (int i = 0; i <= n; ++i) {
        double m0 = v[size_t(i)];
        if (m0 == 0.0) continue;
        double up = i < n ? p_up : 0.0;
        double down = chain.death_rate(i) / chain.q;
        next[size_t(i)] += m0 * (1.0 - up - down);
        if (i < n) next[size_t(i) + 1] += m0 * up;
        if (i > 0) next[size_t(i) - 1] += m0 * down;
      }
      std::swap(v, next);
      std::fill(next.begin(), next.end(), 0.0);
    }

    if (boundary_leak > 0.5 * eps) {
      n *= 2;  // reflecting boundary was touched too hard; widen and redo
      continue;
    }
    out.mass = std::move(acc);
    out.truncation_error = (1.0 - cum_weight) + boundary_leak;
    return out;
  }
}

std::vector<double> initial_distribution(double rho) {
  if (rho < 0.0 || rho >= 1.0)
    throw std::domain_error("initial_distribution: rho must lie in [0, 1)");
  double pi0 = 1.0 / (1.0 + 2.0 * rho + 2.0 * rho * rho / (1.0 - rho));
  std::vector<double> pi{pi0};
  if (rho > 0.0) {
    double term = 2.0 * pi0 * rho;
    while (true) {
      pi.push_back(term);
      double tail = term * rho / (1.0 - rho);  // everything past this entry
      if (tail < 1e-15) break;
      term *= rho;
    }
  }
  double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& p : pi) p /= sum;
  return pi;
}

double jockey_wait_closed_form(int64_t k, double mu, double lambda_tar) {
  if (k < 0) throw std::domain_error("jockey_wait_closed_form: negative position");
  require_positive_rate(mu, "jockey_wait_closed_form");
  if (!(2.0 * mu > lambda_tar))
    throw std::domain_error("jockey_wait_closed_form: requires 2 mu > lambda_tar");
  if (k < 2) return 0.0;
  return double(k - 1) / (2.0 * mu - lambda_tar);
}

double jockey_wait_mean(int64_t k, double mu, double lambda_tar) {
  return jockey_wait_closed_form(k, mu, lambda_tar);
}

double expected_jockey_time(const TransientPmf& pmf, double mu, double lambda_tar) {
  double out = 0.0;
  for (size_t k = 0; k < pmf.mass.size(); ++k)
    out += pmf.mass[k] * jockey_wait_closed_form(int64_t(k), mu, lambda_tar);
  return out;
}

double jockey_wait_cdf(int64_t k, double mu, double lambda_tar, double x) {
  if (k < 0) throw std::domain_error("jockey_wait_cdf: negative position");
  require_positive_rate(mu, "jockey_wait_cdf");
  if (!(2.0 * mu > lambda_tar))
    throw std::domain_error("jockey_wait_cdf: requires 2 mu > lambda_tar");
  if (k < 2) return x >= 0.0 ? 1.0 : 0.0;
  return erlang_cdf(k - 1, 2.0 * mu - lambda_tar, x);
}

double jockey_benefit_probability(int64_t k_i, double mu_i, const TransientPmf& pmf,
                                  double mu_j, double lambda_tar) {
  if (k_i < 0) throw std::domain_error("jockey_benefit_probability: negative backlog");
  require_positive_rate(mu_i, "jockey_benefit_probability");
  require_positive_rate(mu_j, "jockey_benefit_probability");
  if (!(2.0 * mu_j > lambda_tar))
    throw std::domain_error("jockey_benefit_probability: requires 2 mu_j > lambda_tar");
  if (k_i == 0) return 0.0;  // own wait is already zero, nothing can beat it
  double rate_j = 2.0 * mu_j - lambda_tar;
  double out = 0.0;
  for (size_t k = 0; k < pmf.mass.size(); ++k) {
    double w = pmf.mass[k];
    if (w == 0.0) continue;
    double inner = k < 2 ? 1.0 : gamma_before_gamma(int64_t(k) - 1, rate_j, k_i, mu_i);
    out += w * inner;
  }
  return std::min(out, 1.0);
}

double jockey_benefit_probability_quad(int64_t k_i, double mu_i, const TransientPmf& pmf,
                                       double mu_j, double lambda_tar, double tol) {
  if (k_i == 0) return 0.0;
  require_positive_rate(mu_i, "jockey_benefit_probability_quad");
  if (!(2.0 * mu_j > lambda_tar))
    throw std::domain_error("jockey_benefit_probability_quad: requires 2 mu_j > lambda_tar");
  // integrate f_{W(k_i)}(u) * G_k(u) over the bulk of W's support
  double hi = (double(k_i) + 12.0 * std::sqrt(double(k_i)) + 12.0) / mu_i;
  double out = 0.0;
  for (size_t k = 0; k < pmf.mass.size(); ++k) {
    double w = pmf.mass[k];
    if (w == 0.0) continue;
    if (k < 2) {
      out += w;  // G_k == 1 on [0, inf)
      continue;
    }
    auto integrand = [&](double u) {
      return erlang_pdf(k_i, mu_i, u) * jockey_wait_cdf(int64_t(k), mu_j, lambda_tar, u);
    };
    out += w * integrate(integrand, 0.0, hi, tol);
  }
  return std::min(out, 1.0);
}

SwitchOutcome switch_outcome_probabilities(const TransientPmf& pmf, double mu_j,
                                           double lambda_tar, double patience,
                                           double elapsed) {
  if (patience < 0.0 || elapsed < 0.0)
    throw std::domain_error("switch_outcome_probabilities: negative time");
  require_positive_rate(mu_j, "switch_outcome_probabilities");
  if (!(2.0 * mu_j > lambda_tar))
    throw std::domain_error("switch_outcome_probabilities: requires 2 mu_j > lambda_tar");
  double remaining = patience - elapsed;
  if (remaining <= 0.0) return {1.0, 0.0};
  double success = 0.0;
  for (size_t k = 0; k < pmf.mass.size(); ++k) {
    double w = pmf.mass[k];
    if (w == 0.0) continue;
    success += w * jockey_wait_cdf(int64_t(k), mu_j, lambda_tar, remaining);
  }
  success = std::min(success, 1.0);
  return {1.0 - success, success};
}

}  // namespace dualq::markov
