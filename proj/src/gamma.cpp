#include "dualq/gamma.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dualq {

namespace {

constexpr int kMaxIter = 200000;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// series for P(a, x), valid for x < a + 1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("regularized_gamma_p: series did not converge");
}

// modified Lentz continued fraction for Q(a, x), valid for x >= a + 1
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("regularized_gamma_p: continued fraction did not converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("regularized_gamma_p: shape must be positive");
  if (x < 0.0) throw std::domain_error("regularized_gamma_p: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  double q = gamma_q_cf(a, x);
  return 1.0 - q;
}

double log_choose(int64_t n, int64_t k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

double erlang_log_pdf(int64_t k, double rate, double t) {
  if (k < 0) throw std::domain_error("erlang_log_pdf: negative shape");
  if (!(rate > 0.0)) throw std::domain_error("erlang_log_pdf: rate must be positive");
  if (k == 0) return -std::numeric_limits<double>::infinity();
  if (t < 0.0) return -std::numeric_limits<double>::infinity();
  if (t == 0.0)  // finite only for the single-stage case
    return k == 1 ? std::log(rate) : -std::numeric_limits<double>::infinity();
  return k * std::log(rate) + (k - 1) * std::log(t) - rate * t - std::lgamma(double(k));
}

double erlang_pdf(int64_t k, double rate, double t) {
  return std::exp(erlang_log_pdf(k, rate, t));
}

double erlang_cdf(int64_t k, double rate, double t) {
  if (k < 0) throw std::domain_error("erlang_cdf: negative shape");
  if (!(rate > 0.0)) throw std::domain_error("erlang_cdf: rate must be positive");
  if (k == 0) return t >= 0.0 ? 1.0 : 0.0;
  if (t <= 0.0) return 0.0;
  return regularized_gamma_p(double(k), rate * t);
}

double gamma_before_gamma(int64_t a, double alpha, int64_t b, double beta) {
  if (a < 0 || b < 0) throw std::domain_error("gamma_before_gamma: negative shape");
  if (b == 0) return 0.0;  // Y is the point mass at zero
  if (a == 0) return 1.0;  // X is the point mass at zero, Y > 0 a.s.
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::domain_error("gamma_before_gamma: rates must be positive");

  // P{X < Y} = 1 - sum_{m=0}^{a-1} C(m+b-1, m) p^m q^b,  p = alpha/(alpha+beta).
  double log_p = std::log(alpha) - std::log(alpha + beta);
  double log_q = std::log(beta) - std::log(alpha + beta);
  // online log-sum-exp over the a terms
  double log_term = b * log_q;  // m = 0
  double max_log = log_term;
  double scaled_sum = 1.0;
  for (int64_t m = 1; m < a; ++m) {
    log_term += log_p + std::log(double(m + b - 1)) - std::log(double(m));
    if (log_term > max_log) {
      scaled_sum = scaled_sum * std::exp(max_log - log_term) + 1.0;
      max_log = log_term;
    } else {
      scaled_sum += std::exp(log_term - max_log);
    }
  }
  double tail = std::exp(max_log) * scaled_sum;
  double p = 1.0 - tail;
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  return p;
}

}  // namespace dualq
