#include "dualq/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <utility>

#include "dualq/csv.hpp"

namespace dualq::sim {

namespace {

// Budgets at or beyond this never get an expiry event scheduled; they stand
// in for "patient forever" without flooding the heap.
constexpr double kNeverExpires = 1e17;

}  // namespace

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::departure: return "departure";
    case EventKind::arrival: return "arrival";
    case EventKind::expiry: return "expiry";
    case EventKind::review: return "review";
  }
  return "?";
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::stay: return "stay";
    case Decision::renege: return "renege";
    case Decision::jockey: return "jockey";
  }
  return "?";
}

// ---- feeds -----------------------------------------------------------------

FeedDecision MarkovFeed::decide(const Observation& obs) {
  WaitEstimate est{obs.k_i / obs.mu_i, Provenance::markov};
  double rem = obs.remaining();
  if (rem <= 0.0) return {Decision::renege, est};

  bool jockey_ok = false;
  double success = 0.0;
  if (obs.k_i > 0 && obs.lambda_tar < obs.mu_j) {
    markov::TransientPmf landing;
    if (params_.transit_time > 0.0) {
      // the occupancy snapshot is transit_time old; evolve it, then land
      // behind whatever is there on arrival
      auto chain = markov::build_uniformized_chain(obs.lambda_tar, obs.mu_j / 2);
      auto evolved = markov::transient_pmf(chain, markov::point_mass_pmf(obs.k_j).mass,
                                           params_.transit_time);
      landing.t = evolved.t;
      landing.truncation_error = evolved.truncation_error;
      landing.mass.assign(evolved.mass.size() + 1, 0.0);
      std::copy(evolved.mass.begin(), evolved.mass.end(), landing.mass.begin() + 1);
    } else {
      landing = markov::point_mass_pmf(obs.k_j + 1);
    }
    double benefit = markov::jockey_benefit_probability(obs.k_i, obs.mu_i, landing,
                                                        obs.mu_j / 2, obs.lambda_tar);
    auto outcome = markov::switch_outcome_probabilities(landing, obs.mu_j / 2,
                                                        obs.lambda_tar, obs.budget,
                                                        obs.elapsed);
    success = outcome.success;
    double stay_finish =
        markov::renege_fail_probability(obs.k_i, obs.mu_i, obs.budget, obs.elapsed);
    jockey_ok = benefit > params_.benefit_threshold && success > stay_finish;
  }
  if (jockey_ok && success >= params_.preempt_success) return {Decision::jockey, est};
  if (markov::renege_probability(obs.k_i, obs.mu_i, rem) > params_.renege_threshold &&
      est.value > obs.t_local)
    return {Decision::renege, est};
  if (jockey_ok) return {Decision::jockey, est};
  return {Decision::stay, est};
}

WaitEstimate MarkovFeed::estimate_wait(const rl::PolicyState& s) const {
  return {s.k_i / s.mu_i, Provenance::markov};
}

LearnedFeed::LearnedFeed(rl::ActorNetwork actor, rl::CriticNetwork critic,
                         rl::WaitCalibration calib, rl::FeatureScaling scaling, uint64_t seed)
    : actor_(std::move(actor)),
      critic_(std::move(critic)),
      calib_(calib),
      scaling_(scaling),
      rng_(seed, 0x66656564) {}

LearnedFeed LearnedFeed::from_checkpoint(const std::string& path, uint64_t seed) {
  rl::TrainerConfig cfg;
  rl::TrainResult result = rl::load_checkpoint(path, cfg);
  return LearnedFeed(std::move(result.actor), std::move(result.critic), result.calibration,
                     cfg.scaling, seed);
}

FeedDecision LearnedFeed::decide(const Observation& obs) {
  rl::PolicyState s{obs.k_i, obs.k_j, obs.mu_i, obs.mu_j, obs.remaining()};
  WaitEstimate est = estimate_wait(s);
  if (obs.remaining() <= 0.0) return {Decision::renege, est};
  auto pick = rl::act(s, actor_, rng_, scaling_);
  double drain_own = obs.k_i / obs.mu_i;
  if (pick.action == 0 && drain_own > obs.remaining()) return {Decision::renege, est};
  if (pick.action == 1 && obs.k_i > 0 && drain_own > obs.k_j / obs.mu_j)
    return {Decision::jockey, est};
  return {Decision::stay, est};
}

WaitEstimate LearnedFeed::estimate_wait(const rl::PolicyState& s) const {
  return rl::estimate_wait(s, critic_, calib_, scaling_);
}

// ---- metrics bookkeeping -----------------------------------------------------

namespace {

// Single source of truth for turning the event stream into SimMetrics.  The
// engine feeds it rows as they happen; drain_statistics() feeds it the stored
// trace.  Both paths must land on identical numbers.
class MetricsBuilder {
 public:
  MetricsBuilder(const SystemConfig& config, double horizon, double warmup, double interval)
      : t_local_(config.t_local), horizon_(horizon), warmup_(warmup), interval_(interval) {}

  void process(const TraceEvent& ev) {
    advance_to(ev.time);
    switch (ev.kind) {
      case EventKind::arrival: {
        if ((int64_t)entries_.size() <= ev.request) entries_.resize(ev.request + 1);
        entries_[ev.request] = {ev.time, ev.time >= warmup_};
        if (entries_[ev.request].counted) m_.queue[ev.queue].admitted++;
        break;
      }
      case EventKind::review: {
        auto d = static_cast<Decision>(ev.decision);
        bool c = entries_[ev.request].counted;
        if (c) {
          auto& bin = backlog_bin(ev.a);
          bin.reviews++;
          if (d == Decision::renege) bin.reneges++;
          if (d == Decision::jockey) bin.jockeys++;
        }
        if (d == Decision::renege) {
          cum_reneges_++;
          if (c) {
            auto& qt = m_.queue[ev.queue];
            qt.reneged++;
            qt.sojourns.push_back(ev.time - entries_[ev.request].time + t_local_);
          }
        } else if (d == Decision::jockey) {
          cum_jockeys_++;
          if (c) {
            m_.queue[ev.queue].jockeys_out++;
            m_.queue[1 - ev.queue].jockeys_in++;
            m_.jockey_attempts++;
          }
        }
        break;
      }
      case EventKind::expiry: {
        cum_reneges_++;
        if (entries_[ev.request].counted) {
          auto& qt = m_.queue[ev.queue];
          qt.reneged++;
          qt.forced_reneges++;
          qt.sojourns.push_back(ev.time - entries_[ev.request].time + t_local_);
        }
        break;
      }
      case EventKind::departure: {
        if (entries_[ev.request].counted) {
          auto& qt = m_.queue[ev.queue];
          qt.served++;
          qt.sojourns.push_back(ev.value);
          if (ev.a >= 1 && ev.b == 1) qt.served_after_jockey++;
        }
        break;
      }
    }
    len_[0] = ev.len_i;
    len_[1] = ev.len_j;
  }

  SimMetrics finish() {
    advance_to(horizon_);
    m_.window = horizon_ - warmup_;
    return std::move(m_);
  }

 private:
  struct Entry {
    double time = 0.0;
    bool counted = false;
  };

  BacklogBin& backlog_bin(int k) {
    if ((int)m_.backlog.size() <= k) m_.backlog.resize(k + 1);
    return m_.backlog[(size_t)k];
  }

  // Samples the time series (left limits) and accumulates the occupancy
  // integral over [warmup, horizon] up to time t.
  void advance_to(double t) {
    if (interval_ > 0.0) {
      while (next_sample_ <= t) {
        m_.series.push_back({next_sample_, len_[0], len_[1], cum_reneges_, cum_jockeys_});
        next_sample_ += interval_;
      }
    }
    double lo = std::max(prev_time_, warmup_);
    double hi = std::min(t, horizon_);
    if (hi > lo) {
      m_.occupancy_integral[0] += (hi - lo) * len_[0];
      m_.occupancy_integral[1] += (hi - lo) * len_[1];
    }
    prev_time_ = std::max(prev_time_, t);
  }

  double t_local_;
  double horizon_;
  double warmup_;
  double interval_;
  SimMetrics m_;
  std::vector<Entry> entries_;
  double prev_time_ = 0.0;
  double next_sample_ = 0.0;
  int len_[2] = {0, 0};
  int64_t cum_reneges_ = 0;
  int64_t cum_jockeys_ = 0;
};

// ---- event engine ----------------------------------------------------------

constexpr int kDeparture = 0;
constexpr int kArrival = 1;
constexpr int kExpiry = 2;

struct Ev {
  double time;
  int kind;
  int queue;  // departure: queue; arrival: stream tag (-1 = shared)
  int64_t id;
  uint64_t seq;
};

struct EvAfter {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

struct Request {
  double entry = 0.0;
  double budget = 0.0;
  int queue = 0;
  int jockeys = 0;
  bool started = false;
  bool resolved = false;
};

class Engine {
 public:
  Engine(const SystemConfig& config, InformationFeed& feed, double horizon, double warmup,
         const RunOptions& options)
      : config_(config),
        feed_(feed),
        horizon_(horizon),
        warmup_(warmup),
        options_(options),
        rng_(config.seed, options.stream),
        builder_(config, horizon, warmup, options.timeseries_interval) {
    trace_.config = config;
    trace_.horizon = horizon;
    trace_.warmup = warmup;
    trace_.timeseries_interval = options.timeseries_interval;
  }

  RunResult run() {
    schedule_first_arrivals();
    while (!heap_.empty()) {
      Ev ev = heap_.top();
      heap_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case kDeparture: on_departure(ev); break;
        case kArrival: on_arrival(ev); break;
        case kExpiry: on_expiry(ev); break;
      }
    }
    assert(live_ == 0);
    RunResult out;
    out.metrics = builder_.finish();
    out.trace = std::move(trace_);
    return out;
  }

 private:
  void schedule_first_arrivals() {
    if (config_.router == Router::join_shorter) {
      push_arrival(-1, rng_.exponential(config_.lambda_total()));
    } else {
      if (config_.lambda_i > 0) push_arrival(0, rng_.exponential(config_.lambda_i));
      if (config_.lambda_j > 0) push_arrival(1, rng_.exponential(config_.lambda_j));
    }
  }

  void push_arrival(int stream, double t) {
    if (t < horizon_) heap_.push({t, kArrival, stream, -1, seq_++});
  }

  double stream_rate(int stream) const {
    if (stream < 0) return config_.lambda_total();
    return stream == 0 ? config_.lambda_i : config_.lambda_j;
  }

  void emit(TraceEvent ev) {
    ev.len_i = (int)queue_[0].size();
    ev.len_j = (int)queue_[1].size();
    trace_.events.push_back(ev);
    builder_.process(ev);
  }

  void start_service(int q) {
    int64_t id = queue_[q].front();
    requests_[id].started = true;
    double mu = q == 0 ? config_.mu_i : config_.mu_j;
    heap_.push({now_ + rng_.exponential(mu), kDeparture, q, id, seq_++});
  }

  int64_t admit(int q) {
    int64_t id = (int64_t)requests_.size();
    double budget = sample_patience(config_.patience, rng_);
    requests_.push_back({now_, budget, q, 0, false, false});
    queue_[q].push_back(id);
    live_++;
    if (budget < kNeverExpires) heap_.push({now_ + budget, kExpiry, q, id, seq_++});
    emit({now_, EventKind::arrival, q, id, 0, 0, 0, 0, budget, -1});
    if (queue_[q].size() == 1) start_service(q);
    return id;
  }

  void on_arrival(const Ev& ev) {
    int q;
    if (config_.router == Router::join_shorter) {
      q = queue_[0].size() <= queue_[1].size() ? 0 : 1;
    } else {
      q = ev.queue;
    }
    admit(q);
    push_arrival(ev.queue, now_ + rng_.exponential(stream_rate(ev.queue)));
    sweep();
  }

  void on_departure(const Ev& ev) {
    // service is never preempted and the head never reneges or jockeys, so
    // a departure event is always live
    int q = ev.queue;
    queue_[q].pop_front();
    Request& r = requests_[ev.id];
    r.resolved = true;
    live_--;
    double sojourn = now_ - r.entry;
    emit({now_, EventKind::departure, q, ev.id, r.jockeys, sojourn <= r.budget ? 1 : 0, 0, 0,
          sojourn, -1});
    if (!queue_[q].empty()) start_service(q);
    sweep();
  }

  void on_expiry(const Ev& ev) {
    Request& r = requests_[ev.id];
    if (r.resolved || r.started) return;  // stale
    auto& dq = queue_[r.queue];
    auto it = std::find(dq.begin(), dq.end(), ev.id);
    int idx = (int)(it - dq.begin());
    dq.erase(it);
    r.resolved = true;
    live_--;
    emit({now_, EventKind::expiry, r.queue, ev.id, idx, 0, 0, 0, 0.0, -1});
    sweep();
  }

  // Reviews every waiting tenant (the head is in service and does not act),
  // queue 1 first, each at most once per sweep even if it moves.
  void sweep() {
    double delta = now_ - last_sweep_;
    last_sweep_ = now_;
    stamp_++;
    order_.clear();
    for (int q : {0, 1})
      for (size_t i = 1; i < queue_[q].size(); ++i) order_.push_back(queue_[q][i]);
    for (int64_t id : order_) {
      Request& r = requests_[id];
      if (r.resolved || r.started) continue;
      if ((size_t)id >= stamped_.size()) stamped_.resize(id + 1, 0);
      if (stamped_[id] == stamp_) continue;
      stamped_[id] = stamp_;
      auto& dq = queue_[r.queue];
      auto it = std::find(dq.begin(), dq.end(), id);
      int idx = (int)(it - dq.begin());
      if (idx == 0) continue;
      Observation obs{idx,
                      (int)queue_[1 - r.queue].size(),
                      r.queue == 0 ? config_.mu_i : config_.mu_j,
                      r.queue == 0 ? config_.mu_j : config_.mu_i,
                      r.budget,
                      now_ - r.entry,
                      config_.t_local,
                      config_.lambda_tar};
      FeedDecision d = feed_.decide(obs);
      int from_q = r.queue;
      if (d.action == Decision::renege) {
        dq.erase(it);
        r.resolved = true;
        live_--;
      } else if (d.action == Decision::jockey) {
        dq.erase(it);
        int tq = 1 - from_q;
        if (options_.thinned_jockey_insert && config_.lambda_tar > 0 && delta > 0) {
          // competing lambda_tar arrivals since the last sweep slot in ahead
          int extra = rng_.poisson(config_.lambda_tar * delta);
          for (int i = 0; i < extra; ++i) admit(tq);
        }
        r.queue = tq;
        r.jockeys++;
        queue_[tq].push_back(id);
        if (queue_[tq].size() == 1) start_service(tq);
      }
      emit({now_, EventKind::review, from_q, id, idx, obs.k_j, 0, 0, d.estimate.value,
            (int)d.action});
    }
  }

  SystemConfig config_;
  InformationFeed& feed_;
  double horizon_;
  double warmup_;
  RunOptions options_;
  Rng rng_;
  MetricsBuilder builder_;
  Trace trace_;
  std::priority_queue<Ev, std::vector<Ev>, EvAfter> heap_;
  std::deque<int64_t> queue_[2];
  std::vector<Request> requests_;
  std::vector<uint64_t> stamped_;
  std::vector<int64_t> order_;
  uint64_t seq_ = 0;
  uint64_t stamp_ = 0;
  int64_t live_ = 0;
  double now_ = 0.0;
  double last_sweep_ = 0.0;
};

}  // namespace

RunResult run(const SystemConfig& config, InformationFeed& feed, double horizon,
              double warmup, const RunOptions& options) {
  config.validate();
  if (!(horizon > 0) || warmup < 0 || warmup >= horizon)
    throw std::invalid_argument("run: need 0 <= warmup < horizon");
  Engine engine(config, feed, horizon, warmup, options);
  return engine.run();
}

SimMetrics drain_statistics(const Trace& trace) {
  MetricsBuilder builder(trace.config, trace.horizon, trace.warmup,
                         trace.timeseries_interval);
  for (const auto& ev : trace.events) builder.process(ev);
  return builder.finish();
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  csv::Writer w(path, "trace");
  w.header({"time", "kind", "queue", "request", "a", "b", "len_i", "len_j", "value",
            "decision"});
  for (const auto& ev : trace.events) {
    w.field(ev.time)
        .field(to_string(ev.kind))
        .field(ev.queue)
        .field(ev.request)
        .field(ev.a)
        .field(ev.b)
        .field(ev.len_i)
        .field(ev.len_j)
        .field(ev.value)
        .field(ev.decision < 0 ? std::string() : to_string((Decision)ev.decision));
    w.end_row();
  }
}

// ---- metric accessors --------------------------------------------------------

int64_t SimMetrics::admitted() const { return queue[0].admitted + queue[1].admitted; }
int64_t SimMetrics::served() const { return queue[0].served + queue[1].served; }
int64_t SimMetrics::reneged() const { return queue[0].reneged + queue[1].reneged; }
int64_t SimMetrics::served_after_jockey() const {
  return queue[0].served_after_jockey + queue[1].served_after_jockey;
}

double SimMetrics::successful_jockey_fraction() const {
  if (jockey_attempts == 0) return 0.0;
  return (double)served_after_jockey() / (double)jockey_attempts;
}

double SimMetrics::renege_rate_per_time(int q) const {
  return window > 0 ? queue[q].reneged / window : 0.0;
}

double SimMetrics::jockey_rate_per_time(int q) const {
  return window > 0 ? queue[q].jockeys_out / window : 0.0;
}

double SimMetrics::mean_sojourn(int q) const {
  double sum = 0.0;
  int64_t n = 0;
  for (int i = 0; i < 2; ++i) {
    if (q >= 0 && q != i) continue;
    for (double s : queue[i].sojourns) sum += s;
    n += (int64_t)queue[i].sojourns.size();
  }
  return n > 0 ? sum / n : 0.0;
}

double SimMetrics::sojourn_percentile(int q, double p) const {
  std::vector<double> pool;
  for (int i = 0; i < 2; ++i) {
    if (q >= 0 && q != i) continue;
    pool.insert(pool.end(), queue[i].sojourns.begin(), queue[i].sojourns.end());
  }
  if (pool.empty()) return 0.0;
  p = std::clamp(p, 0.0, 1.0);
  size_t idx = (size_t)std::llround(p * (double)(pool.size() - 1));
  std::nth_element(pool.begin(), pool.begin() + idx, pool.end());
  return pool[idx];
}

double SimMetrics::mean_queue_length(int q) const {
  return window > 0 ? occupancy_integral[q] / window : 0.0;
}

// ---- tagged tenant -----------------------------------------------------------

TaggedOutcome run_tagged(const SystemConfig& config, InformationFeed& feed, int n_ahead,
                         int m_other, double patience, Rng& rng) {
  if (n_ahead < 0 || m_other < 0 || !(patience > 0))
    throw std::invalid_argument("run_tagged: bad initial state");
  TaggedOutcome out;
  int own = n_ahead;
  int other = m_other;
  double mu_own = config.mu_i;
  double mu_other = config.mu_j;
  double t = 0.0;

  auto review = [&]() -> bool {  // true once the tenant reneges
    Observation obs{own,   other, mu_own,          mu_other,
                    patience, t,    config.t_local, config.lambda_tar};
    FeedDecision d = feed.decide(obs);
    if (d.action == Decision::renege) {
      out.reneged = true;
      out.sojourn = t + config.t_local;
      return true;
    }
    if (d.action == Decision::jockey) {
      out.jockeys++;
      std::swap(own, other);        // lands behind the other queue's occupancy
      std::swap(mu_own, mu_other);
    }
    return false;
  };

  if (own > 0 && review()) return out;
  while (own > 0) {
    double r_own = mu_own;
    double r_other = other > 0 ? mu_other : 0.0;
    double dt = rng.exponential(r_own + r_other);
    if (t + dt >= patience) {  // budget dies before the next departure
      out.reneged = true;
      out.sojourn = patience + config.t_local;
      return out;
    }
    t += dt;
    if (rng.uniform() * (r_own + r_other) < r_own) {
      own--;
    } else {
      other--;
    }
    if (own > 0 && review()) return out;
  }
  // reached the server; completion happens even if the budget runs out
  out.served = true;
  out.sojourn = t + rng.exponential(mu_own);
  out.successful_jockey = out.jockeys >= 1 && out.sojourn <= patience;
  return out;
}

// ---- training environment ------------------------------------------------------

DecisionEnv::DecisionEnv(EnvConfig config)
    : config_(std::move(config)), rng_(config_.seed, 0x656e76) {
  if (config_.lambda_set.empty()) throw std::invalid_argument("DecisionEnv: empty lambda set");
  if (config_.explore_max_k < 1) throw std::invalid_argument("DecisionEnv: explore_max_k < 1");
  if (!(config_.review_dt > 0.0)) throw std::invalid_argument("DecisionEnv: review_dt <= 0");
}

rl::PolicyState DecisionEnv::state() const {
  return {k_i_, k_j_, mu_i_, mu_j_, budget_ - elapsed_};
}

void DecisionEnv::fresh_tenant() {
  k_i_ = 1 + rng_.uniform_int(config_.explore_max_k);
  k_j_ = rng_.uniform_int(config_.explore_max_k + 1);
  budget_ = sample_patience(config_.patience, rng_);
  elapsed_ = 0.0;
}

rl::PolicyState DecisionEnv::reset() {
  double lambda_total = config_.lambda_set[rng_.uniform_int((int)config_.lambda_set.size())];
  double frac = config_.delta_frac_lo +
                (config_.delta_frac_hi - config_.delta_frac_lo) * rng_.uniform();
  auto rates = derive_service_rates(lambda_total / 2, lambda_total / 2, frac * lambda_total);
  mu_i_ = rates.mu_i;
  mu_j_ = rates.mu_j;
  lambda_j_ = lambda_total / 2;
  fresh_tenant();
  return state();
}

DecisionEnv::Step DecisionEnv::step(int action) {
  if (action == 0) {  // renege ends this tenant's run
    fresh_tenant();
    return {state(), true};
  }
  if (action == 1 && k_i_ > 0) {  // switch queues, landing at the other tail
    std::swap(k_i_, k_j_);
    std::swap(mu_i_, mu_j_);
  }
  if (k_i_ == 0) {  // already at the server: this tenant is done
    fresh_tenant();
    return {state(), true};
  }
  // run the queues exactly until the next review, service, or patience expiry
  double slice_end = elapsed_ + config_.review_dt;
  while (true) {
    double r_dep_own = mu_i_;
    double r_arr_other = lambda_j_;
    double r_dep_other = k_j_ > 0 ? mu_j_ : 0.0;
    double total = r_dep_own + r_arr_other + r_dep_other;
    double t_next = elapsed_ + rng_.exponential(total);
    if (t_next >= budget_ && budget_ <= slice_end) {  // patience expires first
      fresh_tenant();
      return {state(), true};
    }
    if (t_next >= slice_end) {  // quiet until the review
      elapsed_ = slice_end;
      return {state(), false};
    }
    elapsed_ = t_next;
    double u = rng_.uniform() * total;
    if (u < r_dep_own) {
      k_i_--;
    } else if (u < r_dep_own + r_arr_other) {
      k_j_++;
    } else {
      k_j_--;
    }
    if (k_i_ == 0) {  // reached the server
      fresh_tenant();
      return {state(), true};
    }
  }
}

double DecisionEnv::observe_remaining_wait() {
  double w = 0.0;
  for (int i = 0; i < k_i_; ++i) w += rng_.exponential(mu_i_);
  return w;
}

}  // namespace dualq::sim
