#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dualq/core.hpp"
#include "dualq/simulator.hpp"

namespace dualq::asym {

// Large-deviation rate for the mean of exponentials: I(x) = x - 1 - ln x,
// zero exactly at x = 1 and strictly convex.  Throws for x <= 0.
double rate_function(double x);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval; default z covers 95%.
Interval wilson_interval(int64_t successes, int64_t trials,
                         double z = 1.959963984540054);

// Weighted pool-adjacent-violators fit, non-decreasing.
std::vector<double> isotonic_non_decreasing_fit(std::span<const double> y,
                                                std::span<const double> w);

// ---- backlog sweep ------------------------------------------------------------

// Tagged tenant behind n jobs, other queue at m, repeated; measures how the
// feed's outcome mix moves as the backlog grows.
struct SweepConfig {
  std::vector<int> grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
  int reps = 2000;
  int m_other = 3;
  double patience = 2.0;
  uint64_t seed = 1;
};

struct SweepPoint {
  int n = 0;
  int64_t reps = 0;
  int64_t reneged = 0;
  int64_t jockeyed = 0;  // tenants that switched at least once
  int64_t successful_jockeys = 0;
  double renege_frac = 0.0;
  Interval renege_ci;
  double success_frac = 0.0;
  Interval success_ci;
  double mean_sojourn = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool renege_monotone = false;  // isotonic fit stays inside every Wilson band
  double final_renege = 0.0;     // point estimate at the largest n
  double final_success = 0.0;
};

SweepResult sweep_backlog(const SystemConfig& config, sim::InformationFeed& feed,
                          const SweepConfig& sweep);

// ---- estimator error profile ---------------------------------------------------

// Compares a feed's wait estimate with realized Erlang(n, mu) waits and
// tracks the per-job error |estimate - W| / n across backlogs.  A consistent
// estimator sends the profile to zero; the constant-zero reference keeps it
// pinned near 1/mu.
struct ProfileConfig {
  double mu = 1.0;
  std::vector<int> grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
  int reps = 400;
  double patience_feature = 8.0;  // remaining-budget feature handed to the feed
  uint64_t seed = 1;
};

struct ProfilePoint {
  int n = 0;
  double estimate = 0.0;
  double median_rel = 0.0;  // median of |estimate - W| / n
  double q1 = 0.0;
  double q3 = 0.0;
};

struct ErrorProfile {
  std::vector<ProfilePoint> points;
  double slope = 0.0;      // least-squares slope of median_rel against ln n
  bool vanishing = false;  // median at the largest n < half the median at the smallest
};

ErrorProfile sublinear_error_profile(sim::InformationFeed& feed, const ProfileConfig& cfg);

// ---- queue-choice agreement ------------------------------------------------------

// Whether two feeds order the queues the same way, and whether each matches
// the true mean-wait ordering n/mu_i vs m/mu_j, across random (m, budget).
struct AgreementConfig {
  double mu_i = 1.0;
  double mu_j = 1.5;
  std::vector<int> grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
  int m_other = 3;  // fixed backlog of the alternative queue
  int reps = 200;
  PatienceModel patience = PatienceModel::exponential_mean(2.0);
  uint64_t seed = 1;
};

struct AgreementPoint {
  int n = 0;
  double feed_feed = 0.0;
  double truth_a = 0.0;
  double truth_b = 0.0;
};

struct AgreementResult {
  std::vector<AgreementPoint> points;
  double overall_feed_feed = 0.0;
  double overall_truth_a = 0.0;
  double overall_truth_b = 0.0;
};

AgreementResult decision_agreement(sim::InformationFeed& a, sim::InformationFeed& b,
                                   const AgreementConfig& cfg);

// ---- tail bound check --------------------------------------------------------------

// Empirical tails of the mean of n Exp(mu) draws against exp(-n I(x mu)):
// upper tail for x above the mean 1/mu, lower tail below it.
struct ChernoffConfig {
  double mu = 1.0;
  std::vector<int> ns{10, 50, 200};
  std::vector<double> xs{1.5, 2.0};
  int64_t reps = 200000;
  uint64_t seed = 1;
};

struct ChernoffPoint {
  int n = 0;
  double x = 0.0;
  bool upper = false;    // which tail was tested
  double phat = 0.0;
  double se = 0.0;
  double bound = 0.0;    // exp(-n I(x mu))
  double exact = 0.0;    // regularized gamma tail, for reference
  bool ok = false;       // phat <= bound + 3 se
};

struct ChernoffResult {
  std::vector<ChernoffPoint> points;
  bool all_ok = false;
};

ChernoffResult chernoff_check(const ChernoffConfig& cfg);

}  // namespace dualq::asym
