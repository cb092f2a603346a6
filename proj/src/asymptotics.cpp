#include "dualq/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dualq/gamma.hpp"

namespace dualq::asym {

double rate_function(double x) {
  if (!(x > 0)) throw std::domain_error("rate_function: x must be positive");
  return x - 1.0 - std::log(x);
}

Interval wilson_interval(int64_t successes, int64_t trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  double n = (double)trials;
  double p = (double)successes / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<double> isotonic_non_decreasing_fit(std::span<const double> y,
                                                std::span<const double> w) {
  if (y.size() != w.size()) throw std::invalid_argument("isotonic fit: size mismatch");
  struct Block {
    double wsum, mean;
    size_t count;
  };
  std::vector<Block> blocks;
  for (size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({w[i], y[i], 1});
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      a.mean = (a.wsum * a.mean + b.wsum * b.mean) / (a.wsum + b.wsum);
      a.wsum += b.wsum;
      a.count += b.count;
    }
  }
  std::vector<double> fit;
  fit.reserve(y.size());
  for (const Block& b : blocks) fit.insert(fit.end(), b.count, b.mean);
  return fit;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  size_t idx = (size_t)std::llround(p * (double)(sorted.size() - 1));
  return sorted[std::min(idx, sorted.size() - 1)];
}

int sgn(double d, double tol = 1e-12) { return d > tol ? 1 : (d < -tol ? -1 : 0); }

}  // namespace

SweepResult sweep_backlog(const SystemConfig& config, sim::InformationFeed& feed,
                          const SweepConfig& sweep) {
  if (sweep.grid.empty() || sweep.reps <= 0)
    throw std::invalid_argument("sweep_backlog: empty grid or no reps");
  SweepResult out;
  for (int n : sweep.grid) {
    Rng rng(sweep.seed, 0x73776570u + (uint64_t)n);
    SweepPoint pt;
    pt.n = n;
    pt.reps = sweep.reps;
    double sojourn_sum = 0.0;
    for (int r = 0; r < sweep.reps; ++r) {
      auto o = sim::run_tagged(config, feed, n, sweep.m_other, sweep.patience, rng);
      pt.reneged += o.reneged;
      pt.jockeyed += o.jockeys >= 1;
      pt.successful_jockeys += o.successful_jockey;
      sojourn_sum += o.sojourn;
    }
    pt.renege_frac = (double)pt.reneged / sweep.reps;
    pt.renege_ci = wilson_interval(pt.reneged, sweep.reps);
    pt.success_frac = (double)pt.successful_jockeys / sweep.reps;
    pt.success_ci = wilson_interval(pt.successful_jockeys, sweep.reps);
    pt.mean_sojourn = sojourn_sum / sweep.reps;
    out.points.push_back(pt);
  }
  std::vector<double> frac, weight;
  for (const auto& pt : out.points) {
    frac.push_back(pt.renege_frac);
    weight.push_back((double)pt.reps);
  }
  auto fit = isotonic_non_decreasing_fit(frac, weight);
  out.renege_monotone = true;
  for (size_t i = 0; i < fit.size(); ++i) {
    const auto& ci = out.points[i].renege_ci;
    if (fit[i] < ci.lo - 1e-12 || fit[i] > ci.hi + 1e-12) out.renege_monotone = false;
  }
  out.final_renege = out.points.back().renege_frac;
  out.final_success = out.points.back().success_frac;
  return out;
}

ErrorProfile sublinear_error_profile(sim::InformationFeed& feed, const ProfileConfig& cfg) {
  if (cfg.grid.empty() || cfg.reps <= 0 || !(cfg.mu > 0))
    throw std::invalid_argument("sublinear_error_profile: bad config");
  ErrorProfile out;
  for (int n : cfg.grid) {
    Rng rng(cfg.seed, 0x70726f66u + (uint64_t)n);
    rl::PolicyState s{n, n, cfg.mu, cfg.mu, cfg.patience_feature};
    double est = feed.estimate_wait(s).value;
    std::vector<double> rel;
    rel.reserve(cfg.reps);
    for (int r = 0; r < cfg.reps; ++r) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) w += rng.exponential(cfg.mu);
      rel.push_back(std::abs(est - w) / n);
    }
    std::sort(rel.begin(), rel.end());
    ProfilePoint pt;
    pt.n = n;
    pt.estimate = est;
    pt.median_rel = quantile_sorted(rel, 0.5);
    pt.q1 = quantile_sorted(rel, 0.25);
    pt.q3 = quantile_sorted(rel, 0.75);
    out.points.push_back(pt);
  }
  // slope of median against ln n
  size_t k = out.points.size();
  if (k >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& pt : out.points) {
      double x = std::log((double)pt.n);
      sx += x;
      sy += pt.median_rel;
      sxx += x * x;
      sxy += x * pt.median_rel;
    }
    double denom = k * sxx - sx * sx;
    out.slope = denom != 0 ? (k * sxy - sx * sy) / denom : 0.0;
  }
  out.vanishing = out.points.back().median_rel < 0.5 * out.points.front().median_rel;
  return out;
}

AgreementResult decision_agreement(sim::InformationFeed& a, sim::InformationFeed& b,
                                   const AgreementConfig& cfg) {
  if (cfg.grid.empty() || cfg.reps <= 0 || cfg.m_other < 0)
    throw std::invalid_argument("decision_agreement: bad config");
  AgreementResult out;
  int64_t total = 0, ff = 0, ta = 0, tb = 0;
  // the alternative queue holds a fixed backlog m while n grows, so the true
  // comparison is eventually decided by n/mu_i alone
  int m = cfg.m_other;
  for (int n : cfg.grid) {
    Rng rng(cfg.seed, 0x61677265u + (uint64_t)n);
    int64_t n_ff = 0, n_ta = 0, n_tb = 0;
    for (int r = 0; r < cfg.reps; ++r) {
      double t = sample_patience(cfg.patience, rng);
      auto diff = [&](sim::InformationFeed& f) {
        double wi = f.estimate_wait({n, m, cfg.mu_i, cfg.mu_j, t}).value;
        double wj = f.estimate_wait({m, n, cfg.mu_j, cfg.mu_i, t}).value;
        return wi - wj;
      };
      int sa = sgn(diff(a));
      int sb = sgn(diff(b));
      int st = sgn(n / cfg.mu_i - m / cfg.mu_j);
      n_ff += sa == sb;
      n_ta += sa == st;
      n_tb += sb == st;
    }
    out.points.push_back({n, (double)n_ff / cfg.reps, (double)n_ta / cfg.reps,
                          (double)n_tb / cfg.reps});
    ff += n_ff;
    ta += n_ta;
    tb += n_tb;
    total += cfg.reps;
  }
  out.overall_feed_feed = (double)ff / total;
  out.overall_truth_a = (double)ta / total;
  out.overall_truth_b = (double)tb / total;
  return out;
}

ChernoffResult chernoff_check(const ChernoffConfig& cfg) {
  if (cfg.ns.empty() || cfg.xs.empty() || cfg.reps <= 0 || !(cfg.mu > 0))
    throw std::invalid_argument("chernoff_check: bad config");
  ChernoffResult out;
  out.all_ok = true;
  for (int n : cfg.ns) {
    Rng rng(cfg.seed, 0x7461696cu + (uint64_t)n);
    std::vector<int64_t> hits(cfg.xs.size(), 0);
    for (int64_t r = 0; r < cfg.reps; ++r) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) w += rng.exponential(cfg.mu);
      double mean = w / n;
      for (size_t xi = 0; xi < cfg.xs.size(); ++xi) {
        bool upper = cfg.xs[xi] * cfg.mu > 1.0;
        hits[xi] += upper ? mean >= cfg.xs[xi] : mean <= cfg.xs[xi];
      }
    }
    for (size_t xi = 0; xi < cfg.xs.size(); ++xi) {
      ChernoffPoint pt;
      pt.n = n;
      pt.x = cfg.xs[xi];
      pt.upper = pt.x * cfg.mu > 1.0;
      pt.phat = (double)hits[xi] / (double)cfg.reps;
      pt.se = std::sqrt(std::max(pt.phat * (1.0 - pt.phat), 0.0) / (double)cfg.reps);
      pt.bound = std::exp(-n * rate_function(pt.x * cfg.mu));
      double p_low = regularized_gamma_p(n, cfg.mu * n * pt.x);
      pt.exact = pt.upper ? 1.0 - p_low : p_low;
      pt.ok = pt.phat <= pt.bound + 3.0 * pt.se;
      out.all_ok = out.all_ok && pt.ok;
      out.points.push_back(pt);
    }
  }
  return out;
}

}  // namespace dualq::asym
