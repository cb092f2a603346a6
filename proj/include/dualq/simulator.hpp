#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dualq/actor_critic.hpp"
#include "dualq/core.hpp"
#include "dualq/markov_feed.hpp"

namespace dualq::sim {

enum class Decision { stay, renege, jockey };

// What a waiting tenant sees at a decision review: its own backlog, the
// other queue's occupancy, rates, and how much of its budget is gone.
struct Observation {
  int k_i = 0;
  int k_j = 0;
  double mu_i = 1.0;
  double mu_j = 1.0;
  double budget = 0.0;
  double elapsed = 0.0;
  double t_local = 0.0;
  double lambda_tar = 0.0;

  double remaining() const { return budget - elapsed; }
};

struct FeedDecision {
  Decision action = Decision::stay;
  WaitEstimate estimate;
};

// Information feed contract.  decide() may mutate feed state (sampling
// policies keep their own rng); estimate_wait() must be pure.
class InformationFeed {
 public:
  virtual ~InformationFeed() = default;
  virtual FeedDecision decide(const Observation& obs) = 0;
  virtual WaitEstimate estimate_wait(const rl::PolicyState& s) const = 0;
  virtual std::string_view name() const = 0;
};

// Closed-form feed.  Reneges when the backlog probably outlasts the
// remaining budget and local processing is faster; jockeys when switching
// probably shortens the wait and improves the completion odds.  The jockey
// quantities are evaluated for the queue actually joined: landing position
// k_j + 1 and per-server rate mu_j / 2, so the two-server forms reduce to
// the single-server law Erlang(k_j, mu_j - lambda_tar).  A near-certain
// switch (success >= preempt_success) wins over reneging.
struct MarkovFeedParams {
  double renege_threshold = 0.5;
  double benefit_threshold = 0.5;
  double preempt_success = 0.99;
  double transit_time = 0.0;  // staleness of the observed occupancy; 0 = instantaneous
};

class MarkovFeed : public InformationFeed {
 public:
  explicit MarkovFeed(MarkovFeedParams params = {}) : params_(params) {}
  FeedDecision decide(const Observation& obs) override;
  WaitEstimate estimate_wait(const rl::PolicyState& s) const override;
  std::string_view name() const override { return "markov"; }

 private:
  MarkovFeedParams params_;
};

// Stays put forever; the no-information reference.
class NeverActFeed : public InformationFeed {
 public:
  FeedDecision decide(const Observation&) override {
    return {Decision::stay, {0.0, Provenance::baseline}};
  }
  WaitEstimate estimate_wait(const rl::PolicyState&) const override {
    return {0.0, Provenance::baseline};
  }
  std::string_view name() const override { return "baseline"; }
};

// Debug estimator that always answers zero; exists so the asymptotic error
// harness has a known-bad reference to flag.
class ZeroEstimateFeed : public InformationFeed {
 public:
  FeedDecision decide(const Observation&) override {
    return {Decision::stay, {0.0, Provenance::baseline}};
  }
  WaitEstimate estimate_wait(const rl::PolicyState&) const override {
    return {0.0, Provenance::baseline};
  }
  std::string_view name() const override { return "debug-zero"; }
};

// Trained policy as a feed.  Samples an action from the actor, then gates
// it on the reward margins so "act" only fires when the corresponding
// sigmoid favours it: renege needs k_i/mu_i > remaining budget, jockey
// needs k_i/mu_i > k_j/mu_j.
class LearnedFeed : public InformationFeed {
 public:
  LearnedFeed(rl::ActorNetwork actor, rl::CriticNetwork critic, rl::WaitCalibration calib,
              rl::FeatureScaling scaling, uint64_t seed);
  static LearnedFeed from_checkpoint(const std::string& path, uint64_t seed);
  FeedDecision decide(const Observation& obs) override;
  WaitEstimate estimate_wait(const rl::PolicyState& s) const override;
  std::string_view name() const override { return "learned"; }

 private:
  rl::ActorNetwork actor_;
  rl::CriticNetwork critic_;
  rl::WaitCalibration calib_;
  rl::FeatureScaling scaling_;
  Rng rng_;
};

// ---- event engine ----------------------------------------------------------

// Tie-break order for simultaneous events; reviews run as a synchronous
// phase directly after the event that triggered them.
enum class EventKind { departure = 0, arrival = 1, expiry = 2, review = 3 };

std::string to_string(EventKind k);
std::string to_string(Decision d);

// One trace row per effective event.  Field use by kind:
//   arrival:   value = patience budget
//   review:    a = k_i, b = k_j, decision set, value = feed's wait estimate
//   expiry:    a = k_i at expiry (forced renege)
//   departure: a = jockey count, b = 1 if sojourn <= budget
// len_i/len_j are the post-event queue lengths.
struct TraceEvent {
  double time = 0.0;
  EventKind kind = EventKind::arrival;
  int queue = 0;
  int64_t request = -1;
  int a = 0;
  int b = 0;
  int len_i = 0;
  int len_j = 0;
  double value = 0.0;
  int decision = -1;  // Decision enum when kind == review
};

struct Trace {
  SystemConfig config;
  double horizon = 0.0;
  double warmup = 0.0;
  double timeseries_interval = 0.0;
  std::vector<TraceEvent> events;
};

struct BacklogBin {
  int64_t reviews = 0;
  int64_t reneges = 0;
  int64_t jockeys = 0;
};

struct QueueTotals {
  int64_t admitted = 0;
  int64_t served = 0;
  int64_t reneged = 0;
  int64_t forced_reneges = 0;  // subset of reneged: patience ran out
  int64_t jockeys_out = 0;
  int64_t jockeys_in = 0;
  int64_t served_after_jockey = 0;
  std::vector<double> sojourns;  // local fallback time included for reneges
};

struct TimePoint {
  double time = 0.0;
  int len_i = 0;
  int len_j = 0;
  int64_t cum_reneges = 0;
  int64_t cum_jockeys = 0;
};

struct SimMetrics {
  QueueTotals queue[2];
  int64_t jockey_attempts = 0;
  std::vector<BacklogBin> backlog;  // indexed by k_i at review time
  std::vector<TimePoint> series;
  double occupancy_integral[2] = {0.0, 0.0};  // over [warmup, horizon]
  double window = 0.0;

  int64_t admitted() const;
  int64_t served() const;
  int64_t reneged() const;
  int64_t served_after_jockey() const;
  double successful_jockey_fraction() const;  // served-after-jockey / attempts
  double renege_rate_per_time(int q) const;
  double jockey_rate_per_time(int q) const;
  double mean_sojourn(int q) const;           // q = -1 for both queues pooled
  double sojourn_percentile(int q, double p) const;
  double mean_queue_length(int q) const;
};

struct RunOptions {
  double timeseries_interval = 0.0;  // 0 disables sampling
  bool thinned_jockey_insert = false;
  uint64_t stream = 0;
};

struct RunResult {
  SimMetrics metrics;
  Trace trace;
};

// Runs arrivals over [0, horizon), then drains.  Tenants admitted inside
// [warmup, horizon) are the measured population.  Deterministic for a fixed
// (config.seed, options.stream).
RunResult run(const SystemConfig& config, InformationFeed& feed, double horizon,
              double warmup, const RunOptions& options = {});

// Replays a trace through the same bookkeeping; must equal the online
// metrics exactly.
SimMetrics drain_statistics(const Trace& trace);

void write_trace_csv(const Trace& trace, const std::string& path);

// ---- tagged-tenant absorbing run (backlog sweeps) ---------------------------

// One tenant enters queue 1 behind n jobs while queue 2 holds m; background
// jobs never act, no fresh arrivals.  Runs until the tenant is served or
// reneges, with a review at entry and after every departure.
struct TaggedOutcome {
  bool reneged = false;
  bool served = false;
  int jockeys = 0;
  bool successful_jockey = false;  // switched and finished inside the budget
  double sojourn = 0.0;
};

TaggedOutcome run_tagged(const SystemConfig& config, InformationFeed& feed, int n_ahead,
                         int m_other, double patience, Rng& rng);

// ---- training environment ----------------------------------------------------

// Tagged-tenant view used to train the policy.  Each reset() starts an
// episode with a fresh arrival-rate draw from lambda_set and a heterogeneity
// shift from delta_frac; each step() is one decision review.  Reviews are
// clock-driven, spaced review_dt apart in simulated time, with the queues
// evolving exactly in between: this keeps the number of reviews a tenant sees
// tied to its remaining patience rather than to the event rates, so value
// scales stay comparable across arrival-rate draws.  Backlogs are seeded
// uniformly up to explore_max_k so the value function sees states far beyond
// what a stable queue would visit.
struct EnvConfig {
  std::vector<double> lambda_set{3, 5, 7, 9, 11, 13, 15};
  double delta_frac_lo = -0.25;  // delta_lambda = frac * lambda_total
  double delta_frac_hi = 0.25;
  PatienceModel patience = PatienceModel::constant(4.0);
  int explore_max_k = 300;
  double review_dt = 0.1;  // simulated time between decision reviews
  uint64_t seed = 1;
};

class DecisionEnv : public rl::Environment {
 public:
  explicit DecisionEnv(EnvConfig config);
  rl::PolicyState reset() override;
  Step step(int action) override;
  double observe_remaining_wait() override;

 private:
  rl::PolicyState state() const;
  void fresh_tenant();

  EnvConfig config_;
  Rng rng_;
  double lambda_j_ = 0.0;
  double mu_i_ = 1.0;   // rate of the tagged tenant's current queue
  double mu_j_ = 1.0;
  int k_i_ = 0;
  int k_j_ = 0;
  double budget_ = 0.0;
  double elapsed_ = 0.0;
};

}  // namespace dualq::sim
