#pragma once

#include <cmath>
#include <cstdint>

// Log-space gamma/Erlang numerics.  Everything here has to stay finite and
// well conditioned for shapes up to ~1e6, so cdfs go through the regularized
// incomplete gamma rather than naive series over the pdf.

namespace dualq {

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
// Series expansion for x < a + 1, Lentz continued fraction otherwise.
double regularized_gamma_p(double a, double x);

// log C(n, k) via lgamma.
double log_choose(int64_t n, int64_t k);

// Erlang(k, rate): density and distribution of the sum of k iid Exp(rate).
// k = 0 is the point mass at zero (log_pdf is -inf by convention, cdf 1).
double erlang_log_pdf(int64_t k, double rate, double t);
double erlang_pdf(int64_t k, double rate, double t);
double erlang_cdf(int64_t k, double rate, double t);

// P{X < Y} for independent X ~ Gamma(a, alpha), Y ~ Gamma(b, beta) with
// integer shapes (rates, not scales).  Closed form: the negative-binomial
// tail sum, accumulated in log space.  a = 0 gives 1 for b >= 1; b = 0
// gives 0.
double gamma_before_gamma(int64_t a, double alpha, int64_t b, double beta);

// Adaptive Simpson integration, absolute tolerance tol.
template <typename F>
double integrate(F&& f, double lo, double hi, double tol);

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_step(F& f, double a, double m, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_step(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <typename F>
double integrate(F&& f, double lo, double hi, double tol) {
  if (!(hi > lo)) return 0.0;
  double m = 0.5 * (lo + hi);
  double fa = f(lo), fm = f(m), fb = f(hi);
  double whole = detail::simpson(lo, hi, fa, fm, fb);
  return detail::adaptive_step(f, lo, m, hi, fa, fm, fb, whole, tol, 48);
}

}  // namespace dualq
