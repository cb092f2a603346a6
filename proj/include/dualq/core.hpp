#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dualq {

// Seeded generator with independent, reproducible streams.  Stream s of seed
// x always yields the same draw sequence; distinct streams are decorrelated
// by a splitmix64 mix of (seed, stream).  All variate transforms are done
// here from raw uniforms so draws do not depend on libstdc++ internals.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64() { return engine_(); }
  double uniform();                       // [0, 1)
  double exponential(double rate);
  int uniform_int(int n);                 // {0, ..., n-1}
  int poisson(double mean);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Patience budget model.  "constant" is a deterministic budget, "exponential"
// draws each tenant's budget with the given mean.
struct PatienceModel {
  enum class Kind { constant, exponential };
  Kind kind = Kind::constant;
  double value = 1.0;

  static PatienceModel constant(double t);
  static PatienceModel exponential_mean(double mean);
};

double sample_patience(const PatienceModel& model, Rng& rng);

// Patience is a total-time budget: it runs from queue entry and is never
// reset by switching queues.  remaining() is what a feed gets to work with.
struct Patience {
  double budget = 0.0;
  double consumed = 0.0;
  double remaining() const { return budget - consumed; }
};

enum class Router { split, join_shorter };

struct SystemConfig {
  double lambda_i = 0.0;       // arrival rate, queue 1
  double lambda_j = 0.0;       // arrival rate, queue 2
  double delta_lambda = 0.0;   // heterogeneity shift used to derive rates
  double mu_i = 1.0;           // service rate, queue 1
  double mu_j = 1.0;           // service rate, queue 2
  PatienceModel patience;
  double t_local = 1.0;        // local-processing time charged on renege
  double lambda_tar = 0.0;     // arrivals that slot in ahead of a jockey
  Router router = Router::split;
  uint64_t seed = 1;

  double lambda_total() const { return lambda_i + lambda_j; }
  void validate() const;       // throws std::invalid_argument
};

// mu_i = (lambda_i + delta)/2, mu_j = (lambda_j - delta)/2.  Throws
// std::domain_error if either derived rate is non-positive.
struct ServiceRates {
  double mu_i;
  double mu_j;
};
ServiceRates derive_service_rates(double lambda_i, double lambda_j, double delta_lambda);

// Builds a config with an even arrival split and derived service rates.
SystemConfig make_config(double lambda_total, double delta_lambda, PatienceModel patience,
                         double t_local, double lambda_tar, uint64_t seed);

struct Utilization {
  double rho;
  bool stable;
};
Utilization utilization(double lambda, int servers, double mu);

// Shared wait-estimate record: every information feed reports its remaining
// wait guess along with which estimator produced it.
enum class Provenance { markov, learned, baseline };

struct WaitEstimate {
  double value = 0.0;
  Provenance provenance = Provenance::baseline;
};

std::string to_string(Provenance p);

}  // namespace dualq
