// dualq: seeded experiment runner for the dual-queue impatience library.
// Subcommands: simulate | train | asymptotics | estimate | version.
// Exit codes: 0 ok, 1 usage/config error, 2 check failure, 3 divergence.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualq/actor_critic.hpp"
#include "dualq/asymptotics.hpp"
#include "dualq/core.hpp"
#include "dualq/csv.hpp"
#include "dualq/gamma.hpp"
#include "dualq/markov_feed.hpp"
#include "dualq/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualq;

namespace {

constexpr const char* kVersion = "0.1.0";

PatienceModel make_patience(const std::string& dist, double value) {
  if (dist == "constant") return PatienceModel::constant(value);
  if (dist == "exponential") return PatienceModel::exponential_mean(value);
  throw std::invalid_argument("unknown patience distribution: " + dist);
}

// Feed-under-test factory shared by simulate and asymptotics.  "learned"
// loads a checkpoint when given one, otherwise trains in process with the
// default protocol so the subcommands work standalone.
struct FeedSpec {
  std::string name = "markov";
  std::string checkpoint;
  uint64_t seed = 1;
  sim::MarkovFeedParams markov;
  int episodes = 100;
  int epochs = 100;
  std::vector<double> lambda_set{3, 5, 7, 9, 11, 13, 15};
  PatienceModel env_patience = PatienceModel::constant(4.0);
};

std::unique_ptr<sim::InformationFeed> make_feed(const FeedSpec& spec) {
  if (spec.name == "markov") return std::make_unique<sim::MarkovFeed>(spec.markov);
  if (spec.name == "baseline") return std::make_unique<sim::NeverActFeed>();
  if (spec.name == "debug-zero") return std::make_unique<sim::ZeroEstimateFeed>();
  if (spec.name == "learned") {
    if (!spec.checkpoint.empty())
      return std::make_unique<sim::LearnedFeed>(
          sim::LearnedFeed::from_checkpoint(spec.checkpoint, spec.seed));
    std::cerr << "training learned feed in process (" << spec.episodes << " episodes x "
              << spec.epochs << " epochs)\n";
    rl::TrainerConfig cfg;
    cfg.episodes = spec.episodes;
    cfg.epochs_per_episode = spec.epochs;
    cfg.seed = spec.seed;
    sim::EnvConfig env_cfg;
    env_cfg.lambda_set = spec.lambda_set;
    env_cfg.patience = spec.env_patience;
    env_cfg.seed = spec.seed;
    sim::DecisionEnv env(env_cfg);
    rl::TrainResult result = rl::train(env, cfg);
    return std::make_unique<sim::LearnedFeed>(std::move(result.actor),
                                              std::move(result.critic), result.calibration,
                                              cfg.scaling, spec.seed);
  }
  throw std::invalid_argument("unknown feed: " + spec.name);
}

// ---- simulate -----------------------------------------------------------------

struct SimulateOpts {
  std::string name = "default";
  std::vector<double> lambdas{3, 5, 7, 9, 11, 13, 15};
  std::vector<std::string> feeds{"markov"};
  int reps = 5;
  double horizon = 240.0;
  double warmup = 40.0;
  std::string patience_dist = "constant";
  double t_patience = 4.0;
  double t_local = 2.0;
  double lambda_tar = 0.0;
  std::optional<double> delta;  // fixed heterogeneity; default re-drawn per rep
  double delta_frac_lo = -0.25;
  double delta_frac_hi = 0.25;
  std::string router = "split";
  bool thinned = false;
  double timeseries = 0.0;
  bool trace = false;
  uint64_t seed = 1;
  std::string out = "out";
  std::string checkpoint;
  int episodes = 100;
  int epochs = 100;
  sim::MarkovFeedParams markov;
};

int cmd_simulate(const SimulateOpts& o) {
  fs::create_directories(o.out);
  PatienceModel patience = make_patience(o.patience_dist, o.t_patience);

  // one delta draw per (lambda, rep), shared across feeds so comparisons pair up
  Rng delta_rng(o.seed, 0x64656c74);
  std::vector<std::vector<double>> deltas(o.lambdas.size());
  for (size_t li = 0; li < o.lambdas.size(); ++li)
    for (int r = 0; r < o.reps; ++r) {
      double lt = o.lambdas[li];
      double frac = o.delta_frac_lo + (o.delta_frac_hi - o.delta_frac_lo) * delta_rng.uniform();
      deltas[li].push_back(o.delta ? *o.delta : frac * lt);
    }

  csv::Writer metrics(o.out + "/metrics.csv", "metrics");
  metrics.header({"feed", "lambda", "delta", "rep", "admitted", "served", "reneged",
                  "forced_reneges", "jockey_attempts", "served_after_jockey",
                  "successful_jockey_fraction", "mean_sojourn", "p50_sojourn", "p95_sojourn",
                  "mean_len_1", "mean_len_2", "renege_rate_1", "renege_rate_2",
                  "jockey_rate_1", "jockey_rate_2"});
  csv::Writer curves(o.out + "/curves.csv", "curves");
  curves.header({"feed", "lambda", "queue_size", "reviews", "reneges", "jockeys",
                 "renege_rate", "jockey_rate"});
  std::unique_ptr<csv::Writer> series;
  if (o.timeseries > 0) {
    series = std::make_unique<csv::Writer>(o.out + "/timeseries.csv", "timeseries");
    series->header({"feed", "lambda", "rep", "time", "len_1", "len_2", "cum_reneges",
                    "cum_jockeys"});
  }

  for (size_t fi = 0; fi < o.feeds.size(); ++fi) {
    FeedSpec fspec;
    fspec.name = o.feeds[fi];
    fspec.checkpoint = o.checkpoint;
    fspec.seed = o.seed;
    fspec.markov = o.markov;
    fspec.episodes = o.episodes;
    fspec.epochs = o.epochs;
    fspec.lambda_set = o.lambdas;
    auto feed = make_feed(fspec);

    for (size_t li = 0; li < o.lambdas.size(); ++li) {
      std::vector<sim::BacklogBin> agg;
      for (int r = 0; r < o.reps; ++r) {
        SystemConfig cfg = make_config(o.lambdas[li], deltas[li][r], patience, o.t_local,
                                       o.lambda_tar, o.seed);
        cfg.router = o.router == "join" ? Router::join_shorter : Router::split;
        sim::RunOptions ropts;
        ropts.timeseries_interval = o.timeseries;
        ropts.thinned_jockey_insert = o.thinned;
        ropts.stream = fi * 1000000ull + li * 10000ull + (uint64_t)r;
        sim::RunResult res = sim::run(cfg, *feed, o.horizon, o.warmup, ropts);
        const sim::SimMetrics& m = res.metrics;

        metrics.field(feed->name())
            .field(o.lambdas[li])
            .field(deltas[li][r])
            .field(r)
            .field(m.admitted())
            .field(m.served())
            .field(m.reneged())
            .field(m.queue[0].forced_reneges + m.queue[1].forced_reneges)
            .field(m.jockey_attempts)
            .field(m.served_after_jockey())
            .field(m.successful_jockey_fraction())
            .field(m.mean_sojourn(-1))
            .field(m.sojourn_percentile(-1, 0.5))
            .field(m.sojourn_percentile(-1, 0.95))
            .field(m.mean_queue_length(0))
            .field(m.mean_queue_length(1))
            .field(m.renege_rate_per_time(0))
            .field(m.renege_rate_per_time(1))
            .field(m.jockey_rate_per_time(0))
            .field(m.jockey_rate_per_time(1));
        metrics.end_row();

        if (agg.size() < m.backlog.size()) agg.resize(m.backlog.size());
        for (size_t k = 0; k < m.backlog.size(); ++k) {
          agg[k].reviews += m.backlog[k].reviews;
          agg[k].reneges += m.backlog[k].reneges;
          agg[k].jockeys += m.backlog[k].jockeys;
        }
        if (series) {
          for (const auto& pt : m.series) {
            series->field(feed->name())
                .field(o.lambdas[li])
                .field(r)
                .field(pt.time)
                .field(pt.len_i)
                .field(pt.len_j)
                .field(pt.cum_reneges)
                .field(pt.cum_jockeys);
            series->end_row();
          }
        }
        if (o.trace && li == 0 && r == 0)
          sim::write_trace_csv(res.trace,
                               o.out + "/trace_" + std::string(feed->name()) + ".csv");
      }
      for (size_t k = 0; k < agg.size(); ++k) {
        double rv = agg[k].reviews > 0 ? (double)agg[k].reneges / agg[k].reviews : 0.0;
        double jv = agg[k].reviews > 0 ? (double)agg[k].jockeys / agg[k].reviews : 0.0;
        curves.field(feed->name())
            .field(o.lambdas[li])
            .field((int64_t)k)
            .field(agg[k].reviews)
            .field(agg[k].reneges)
            .field(agg[k].jockeys)
            .field(rv)
            .field(jv);
        curves.end_row();
      }
    }
    std::cout << "feed " << o.feeds[fi] << ": " << o.lambdas.size() << " lambda values x "
              << o.reps << " replications\n";
  }
  std::cout << "experiment " << o.name << ": wrote " << o.out << "/metrics.csv, "
            << o.out << "/curves.csv\n";
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainOpts {
  int episodes = 100;
  int epochs = 100;
  int hidden = 128;
  double lr = 1e-3;
  double gamma = rl::TrainerConfig{}.gamma;
  double tau = rl::TrainerConfig{}.tau;
  int calibration_stride = rl::TrainerConfig{}.calibration_stride;
  uint64_t seed = 1;
  std::string out = "out";
  std::string resume;
  bool check = false;
  std::vector<double> lambdas{3, 5, 7, 9, 11, 13, 15};
  std::string patience_dist = "constant";
  double t_patience = 4.0;
  double delta_frac_lo = -0.25;
  double delta_frac_hi = 0.25;
  int explore_max = 300;
};

int cmd_train(const TrainOpts& o) {
  fs::create_directories(o.out);

  rl::TrainerConfig cfg;
  cfg.episodes = o.episodes;
  cfg.epochs_per_episode = o.epochs;
  cfg.hidden = o.hidden;
  cfg.learning_rate = o.lr;
  cfg.gamma = o.gamma;
  cfg.tau = o.tau;
  cfg.calibration_stride = o.calibration_stride;
  cfg.seed = o.seed;

  sim::EnvConfig env_cfg;
  env_cfg.lambda_set = o.lambdas;
  env_cfg.delta_frac_lo = o.delta_frac_lo;
  env_cfg.delta_frac_hi = o.delta_frac_hi;
  env_cfg.patience = make_patience(o.patience_dist, o.t_patience);
  env_cfg.explore_max_k = o.explore_max;
  env_cfg.seed = o.seed;
  sim::DecisionEnv env(env_cfg);

  rl::TrainResult result;
  if (!o.resume.empty()) {
    // hyperparameters travel with the checkpoint; only the episode budget is new
    rl::TrainerConfig stored;
    result = rl::load_checkpoint(o.resume, stored);
    stored.episodes = o.episodes;
    rl::train_more(result, env, stored);
    cfg = stored;
  } else {
    result = rl::train(env, cfg);
  }

  std::string ckpt = o.out + "/checkpoint.json";
  rl::save_checkpoint(ckpt, result, cfg);

  csv::Writer loss(o.out + "/loss.csv", "loss");
  loss.header({"episode", "actor_loss", "critic_loss"});
  for (size_t i = 0; i < result.losses.size(); ++i) {
    loss.field((int64_t)(i + 1)).field(result.losses[i].actor).field(result.losses[i].critic);
    loss.end_row();
  }

  std::cout << "trained " << result.episodes_done << " episodes; calibration scale "
            << csv::format_double(result.calibration.scale) << " offset "
            << csv::format_double(result.calibration.offset) << "\n";
  std::cout << "wrote " << ckpt << " and " << o.out << "/loss.csv\n";

  if (o.check) {
    size_t n = result.losses.size();
    if (n < 30) {
      std::cerr << "check: need at least 30 episodes of loss history, have " << n << "\n";
      return 2;
    }
    double first = 0, last = 0;
    for (size_t i = 0; i < 10; ++i)
      first += result.losses[i].actor + result.losses[i].critic;
    for (size_t i = n - 20; i < n; ++i)
      last += result.losses[i].actor + result.losses[i].critic;
    first /= 10;
    last /= 20;
    bool ok = last < first;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " loss decrease: first-10 mean "
              << csv::format_double(first) << ", final-20 mean " << csv::format_double(last)
              << "\n";
    if (!ok) return 2;
  }
  return 0;
}

// ---- asymptotics ----------------------------------------------------------------

struct AsymOpts {
  std::string feed = "markov";
  std::string checkpoint;
  std::vector<int> grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
  int sweep_reps = 2000;
  int m_other = 3;
  double sweep_patience = 2.0;
  double mu1 = 1.0;
  double mu2 = 1.5;
  double t_local = 1.0;
  double lambda_tar = 0.0;
  int profile_reps = 400;
  double profile_mu = 2.0;  // service rate of the profile's reference queue
  int agreement_reps = 200;
  int64_t chernoff_reps = 200000;
  uint64_t seed = 1;
  std::string out = "out";
  int episodes = 100;
  int epochs = 100;
};

int cmd_asymptotics(const AsymOpts& o) {
  fs::create_directories(o.out);

  FeedSpec fspec;
  fspec.name = o.feed;
  fspec.checkpoint = o.checkpoint;
  fspec.seed = o.seed;
  fspec.episodes = o.episodes;
  fspec.epochs = o.epochs;
  auto feed = make_feed(fspec);
  sim::MarkovFeed markov_ref;

  SystemConfig cfg;
  cfg.mu_i = o.mu1;
  cfg.mu_j = o.mu2;
  cfg.patience = PatienceModel::constant(o.sweep_patience);
  cfg.t_local = o.t_local;
  cfg.lambda_tar = o.lambda_tar;
  cfg.seed = o.seed;

  asym::SweepConfig sweep_cfg;
  sweep_cfg.grid = o.grid;
  sweep_cfg.reps = o.sweep_reps;
  sweep_cfg.m_other = o.m_other;
  sweep_cfg.patience = o.sweep_patience;
  sweep_cfg.seed = o.seed;
  auto sweep = asym::sweep_backlog(cfg, *feed, sweep_cfg);

  asym::ProfileConfig prof_cfg;
  prof_cfg.mu = o.profile_mu;
  prof_cfg.grid = o.grid;
  prof_cfg.reps = o.profile_reps;
  prof_cfg.patience_feature = 4.0;
  prof_cfg.seed = o.seed;
  auto profile = asym::sublinear_error_profile(*feed, prof_cfg);

  asym::AgreementConfig agree_cfg;
  agree_cfg.mu_i = o.mu1;
  agree_cfg.mu_j = o.mu2;
  agree_cfg.grid = o.grid;
  agree_cfg.m_other = o.m_other;
  agree_cfg.reps = o.agreement_reps;
  agree_cfg.seed = o.seed;
  auto agreement = asym::decision_agreement(markov_ref, *feed, agree_cfg);

  asym::ChernoffConfig chern_cfg;
  chern_cfg.reps = o.chernoff_reps;
  chern_cfg.seed = o.seed;
  auto chern = asym::chernoff_check(chern_cfg);

  {
    csv::Writer w(o.out + "/sweep.csv", "sweep");
    w.header({"n", "reps", "reneged", "jockeyed", "successful_jockeys", "renege_frac",
              "renege_lo", "renege_hi", "success_frac", "success_lo", "success_hi",
              "mean_sojourn"});
    for (const auto& pt : sweep.points) {
      w.field(pt.n)
          .field(pt.reps)
          .field(pt.reneged)
          .field(pt.jockeyed)
          .field(pt.successful_jockeys)
          .field(pt.renege_frac)
          .field(pt.renege_ci.lo)
          .field(pt.renege_ci.hi)
          .field(pt.success_frac)
          .field(pt.success_ci.lo)
          .field(pt.success_ci.hi)
          .field(pt.mean_sojourn);
      w.end_row();
    }
  }
  {
    csv::Writer w(o.out + "/profile.csv", "profile");
    w.header({"n", "estimate", "median_rel", "q1", "q3"});
    for (const auto& pt : profile.points) {
      w.field(pt.n).field(pt.estimate).field(pt.median_rel).field(pt.q1).field(pt.q3);
      w.end_row();
    }
  }
  {
    csv::Writer w(o.out + "/agreement.csv", "agreement");
    w.header({"n", "feed_feed", "truth_a", "truth_b"});
    for (const auto& pt : agreement.points) {
      w.field(pt.n).field(pt.feed_feed).field(pt.truth_a).field(pt.truth_b);
      w.end_row();
    }
  }
  {
    csv::Writer w(o.out + "/chernoff.csv", "chernoff");
    w.header({"n", "x", "tail", "phat", "se", "bound", "exact", "ok"});
    for (const auto& pt : chern.points) {
      w.field(pt.n)
          .field(pt.x)
          .field(pt.upper ? "upper" : "lower")
          .field(pt.phat)
          .field(pt.se)
          .field(pt.bound)
          .field(pt.exact)
          .field((int)pt.ok);
      w.end_row();
    }
  }

  // pinned desk-scale thresholds
  bool sweep_pass =
      sweep.renege_monotone && sweep.final_renege >= 0.99 && sweep.final_success <= 0.01;
  bool sublinear_pass = profile.vanishing;
  double agree_last = agreement.points.back().feed_feed;
  bool agree_pass = agree_last >= 0.9;
  bool chern_pass = chern.all_ok;
  bool all_pass = sweep_pass && sublinear_pass && agree_pass && chern_pass;

  json report{
      {"feed", o.feed},
      {"checks",
       {{"backlog_sweep",
         {{"pass", sweep_pass},
          {"renege_monotone", sweep.renege_monotone},
          {"final_renege", sweep.final_renege},
          {"final_success", sweep.final_success},
          {"thresholds", {{"final_renege_min", 0.99}, {"final_success_max", 0.01}}}}},
        {"sublinear_error",
         {{"pass", sublinear_pass},
          {"median_first", profile.points.front().median_rel},
          {"median_last", profile.points.back().median_rel},
          {"slope", profile.slope}}},
        {"decision_agreement",
         {{"pass", agree_pass},
          {"at_largest_n", agree_last},
          {"overall", agreement.overall_feed_feed},
          {"threshold", 0.9}}},
        {"chernoff_bound", {{"pass", chern_pass}}}}},
      {"all_pass", all_pass},
  };
  std::ofstream rep(o.out + "/report.json");
  rep << report.dump(2) << "\n";

  auto line = [](bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
  };
  line(sweep_pass, "backlog_sweep",
       "final renege " + csv::format_double(sweep.final_renege) + ", final success " +
           csv::format_double(sweep.final_success) +
           (sweep.renege_monotone ? ", monotone" : ", NOT monotone"));
  line(sublinear_pass, "sublinear_error",
       "median/n " + csv::format_double(profile.points.front().median_rel) + " -> " +
           csv::format_double(profile.points.back().median_rel));
  line(agree_pass, "decision_agreement",
       "at n=" + std::to_string(agreement.points.back().n) + ": " +
           csv::format_double(agree_last));
  line(chern_pass, "chernoff_bound",
       std::to_string(chern.points.size()) + " tail points within bound + 3se");
  std::cout << "report: " << o.out << "/report.json\n";
  return all_pass ? 0 : 2;
}

// ---- estimate -----------------------------------------------------------------

struct EstimateOpts {
  int k = 10;
  double mu = 2.0;
  double t_patience = 4.0;
  double t0 = 0.0;
  double lambda_tar = 0.0;
  double t = 0.5;
  int pmf_head = 8;
  std::string csv_path;
};

int cmd_estimate(const EstimateOpts& o) {
  if (o.lambda_tar >= 2 * o.mu) {
    std::cerr << "estimate: lambda_tar (" << o.lambda_tar << ") must be below 2*mu ("
              << 2 * o.mu << "); the target queue would grow without bound\n";
    return 1;
  }

  auto stats = markov::erlang_stats(o.k, o.mu, o.t_patience);
  double renege = markov::renege_probability(o.k, o.mu, o.t_patience);
  double finish = markov::renege_fail_probability(o.k, o.mu, o.t_patience, o.t0);

  auto chain = markov::build_uniformized_chain(o.lambda_tar, o.mu);
  auto pi0 = markov::initial_distribution(o.lambda_tar / (2 * o.mu));
  auto pmf = markov::transient_pmf(chain, pi0, o.t);
  double jockey_now = markov::jockey_wait_closed_form(o.k, o.mu, o.lambda_tar);
  double jockey_mix = markov::expected_jockey_time(pmf, o.mu, o.lambda_tar);
  double jockey_pd = markov::expected_pure_death_jockey_time(o.k, o.mu, o.t);
  double benefit = markov::jockey_benefit_probability(o.k, o.mu, pmf, o.mu, o.lambda_tar);
  auto outcome =
      markov::switch_outcome_probabilities(pmf, o.mu, o.lambda_tar, o.t_patience, o.t0);

  std::vector<std::pair<std::string, double>> rows{
      {"mean_wait", stats.mean},
      {"wait_pdf_at_patience", stats.pdf},
      {"wait_cdf_at_patience", stats.cdf},
      {"renege_probability", renege},
      {"service_within_remaining", finish},
      {"jockey_wait_at_k", jockey_now},
      {"expected_jockey_wait_transient", jockey_mix},
      {"expected_jockey_wait_pure_death", jockey_pd},
      {"jockey_benefit_probability", benefit},
      {"switch_success", outcome.success},
      {"switch_fail", outcome.fail},
  };
  int head = std::min<int>(o.pmf_head, (int)pmf.mass.size());
  for (int i = 0; i < head; ++i)
    rows.push_back({"occupancy_pmf_" + std::to_string(i), pmf.mass[i]});
  rows.push_back({"pmf_truncation_error", pmf.truncation_error});

  std::printf("state: k=%d mu=%s T=%s t0=%s lambda_tar=%s t=%s\n", o.k,
              csv::format_double(o.mu).c_str(), csv::format_double(o.t_patience).c_str(),
              csv::format_double(o.t0).c_str(), csv::format_double(o.lambda_tar).c_str(),
              csv::format_double(o.t).c_str());
  for (const auto& [name, value] : rows)
    std::printf("%-34s %s\n", name.c_str(), csv::format_double(value).c_str());

  if (!o.csv_path.empty()) {
    csv::Writer w(o.csv_path, "estimate");
    w.header({"quantity", "value"});
    for (const auto& [name, value] : rows) {
      w.field(name).field(value);
      w.end_row();
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-queue impatience simulator and analysis harness"};
  app.set_config("--config", "", "INI config file; command-line flags take precedence");
  app.require_subcommand(1);

  SimulateOpts so;
  CLI::App* sc = app.add_subcommand("simulate", "run the two-queue simulator across a lambda set");
  sc->add_option("--name", so.name, "experiment label");
  sc->add_option("--lambda", so.lambdas, "total arrival rates to sweep")->expected(-1);
  sc->add_option("--feed", so.feeds, "information feeds: markov, learned, baseline, debug-zero")
      ->expected(-1)
      ->check(CLI::IsMember({"markov", "learned", "baseline", "debug-zero"}));
  sc->add_option("--reps", so.reps, "replications per lambda")->check(CLI::PositiveNumber);
  sc->add_option("--horizon", so.horizon, "arrival horizon")->check(CLI::PositiveNumber);
  sc->add_option("--warmup", so.warmup, "warmup cutoff; earlier arrivals are uncounted")
      ->check(CLI::NonNegativeNumber);
  sc->add_option("--patience-dist", so.patience_dist, "constant or exponential")
      ->check(CLI::IsMember({"constant", "exponential"}));
  sc->add_option("--t-patience", so.t_patience, "patience budget (value or mean)")
      ->check(CLI::PositiveNumber);
  sc->add_option("--t-local", so.t_local, "local processing time charged on renege")
      ->check(CLI::NonNegativeNumber);
  sc->add_option("--lambda-tar", so.lambda_tar, "rate of arrivals slotting ahead of a jockey")
      ->check(CLI::NonNegativeNumber);
  sc->add_option("--delta", so.delta, "fix the heterogeneity shift instead of sampling");
  sc->add_option("--delta-frac-lo", so.delta_frac_lo, "delta sample range lower fraction");
  sc->add_option("--delta-frac-hi", so.delta_frac_hi, "delta sample range upper fraction");
  sc->add_option("--router", so.router, "arrival routing")
      ->check(CLI::IsMember({"split", "join"}));
  sc->add_flag("--thinned-jockey", so.thinned,
               "insert Poisson(lambda_tar * dt) arrivals ahead of each jockey");
  sc->add_option("--timeseries", so.timeseries, "queue-length sample interval (0 = off)")
      ->check(CLI::NonNegativeNumber);
  sc->add_flag("--trace", so.trace, "write the full event trace of the first run per feed");
  sc->add_option("--seed", so.seed, "master seed");
  sc->add_option("--out", so.out, "output directory")->envname("DUALQ_OUT_DIR");
  sc->add_option("--checkpoint", so.checkpoint, "checkpoint for the learned feed");
  sc->add_option("--episodes", so.episodes, "episodes when training in process");
  sc->add_option("--epochs", so.epochs, "epochs per episode when training in process");
  sc->add_option("--renege-threshold", so.markov.renege_threshold,
                 "markov feed renege probability threshold");
  sc->add_option("--benefit-threshold", so.markov.benefit_threshold,
                 "markov feed switch benefit threshold");
  sc->add_option("--preempt-success", so.markov.preempt_success,
                 "switch success level that overrides reneging");
  sc->add_option("--transit-time", so.markov.transit_time,
                 "staleness applied to the observed occupancy");

  TrainOpts to;
  CLI::App* tc = app.add_subcommand("train", "train the actor-critic feed");
  tc->add_option("--episodes", to.episodes)->check(CLI::PositiveNumber);
  tc->add_option("--epochs", to.epochs)->check(CLI::PositiveNumber);
  tc->add_option("--hidden", to.hidden)->check(CLI::PositiveNumber);
  tc->add_option("--lr", to.lr)->check(CLI::PositiveNumber);
  tc->add_option("--gamma", to.gamma);
  tc->add_option("--tau", to.tau, "reward sigmoid slope");
  tc->add_option("--calibration-stride", to.calibration_stride)->check(CLI::PositiveNumber);
  tc->add_option("--seed", to.seed);
  tc->add_option("--out", to.out)->envname("DUALQ_OUT_DIR");
  tc->add_option("--resume", to.resume, "continue from a checkpoint");
  tc->add_flag("--check", to.check, "fail unless late losses beat early losses");
  tc->add_option("--lambda", to.lambdas, "training arrival-rate set")->expected(-1);
  tc->add_option("--patience-dist", to.patience_dist)
      ->check(CLI::IsMember({"constant", "exponential"}));
  tc->add_option("--t-patience", to.t_patience)->check(CLI::PositiveNumber);
  tc->add_option("--delta-frac-lo", to.delta_frac_lo);
  tc->add_option("--delta-frac-hi", to.delta_frac_hi);
  tc->add_option("--explore-max", to.explore_max, "largest seeded backlog")
      ->check(CLI::PositiveNumber);

  AsymOpts ao;
  CLI::App* ac = app.add_subcommand("asymptotics", "run the four limit checks");
  ac->add_option("--feed", ao.feed, "feed under test")
      ->check(CLI::IsMember({"markov", "learned", "baseline", "debug-zero"}));
  ac->add_option("--checkpoint", ao.checkpoint, "checkpoint for the learned feed");
  ac->add_option("--grid", ao.grid, "backlog grid")->expected(-1);
  ac->add_option("--sweep-reps", ao.sweep_reps)->check(CLI::PositiveNumber);
  ac->add_option("--m-other", ao.m_other)->check(CLI::NonNegativeNumber);
  ac->add_option("--t-patience", ao.sweep_patience)->check(CLI::PositiveNumber);
  ac->add_option("--mu1", ao.mu1)->check(CLI::PositiveNumber);
  ac->add_option("--mu2", ao.mu2)->check(CLI::PositiveNumber);
  ac->add_option("--t-local", ao.t_local)->check(CLI::NonNegativeNumber);
  ac->add_option("--lambda-tar", ao.lambda_tar)->check(CLI::NonNegativeNumber);
  ac->add_option("--profile-reps", ao.profile_reps)->check(CLI::PositiveNumber);
  ac->add_option("--profile-mu", ao.profile_mu, "service rate of the profile's reference queue")
      ->check(CLI::PositiveNumber);
  ac->add_option("--agreement-reps", ao.agreement_reps)->check(CLI::PositiveNumber);
  ac->add_option("--chernoff-reps", ao.chernoff_reps)->check(CLI::PositiveNumber);
  ac->add_option("--seed", ao.seed);
  ac->add_option("--out", ao.out)->envname("DUALQ_OUT_DIR");
  ac->add_option("--episodes", ao.episodes, "episodes when training in process");
  ac->add_option("--epochs", ao.epochs, "epochs per episode when training in process");

  EstimateOpts eo;
  CLI::App* ec = app.add_subcommand("estimate", "closed-form quantities for one state");
  ec->add_option("--k", eo.k, "jobs ahead")->required()->check(CLI::NonNegativeNumber);
  ec->add_option("--mu", eo.mu, "per-server service rate")->required()->check(CLI::PositiveNumber);
  ec->add_option("--t-patience", eo.t_patience, "patience budget")->check(CLI::PositiveNumber);
  ec->add_option("--t0", eo.t0, "budget already consumed")->check(CLI::NonNegativeNumber);
  ec->add_option("--lambda-tar", eo.lambda_tar)->check(CLI::NonNegativeNumber);
  ec->add_option("--t", eo.t, "transient evaluation time")->check(CLI::NonNegativeNumber);
  ec->add_option("--pmf-head", eo.pmf_head, "occupancy entries to print")
      ->check(CLI::PositiveNumber);
  ec->add_option("--csv", eo.csv_path, "also write the table as CSV");

  CLI::App* vc = app.add_subcommand("version", "print version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(vc)) {
      std::cout << "dualq " << kVersion << "\n";
      return 0;
    }
    if (app.got_subcommand(sc)) return cmd_simulate(so);
    if (app.got_subcommand(tc)) return cmd_train(to);
    if (app.got_subcommand(ac)) return cmd_asymptotics(ao);
    if (app.got_subcommand(ec)) return cmd_estimate(eo);
  } catch (const rl::divergence_error& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
