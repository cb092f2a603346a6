#include "dualq/core.hpp"

#include <cmath>
#include <stdexcept>

namespace dualq {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) {
  uint64_t state = seed ^ (stream * 0xA24BAED4963EE407ULL + 0x9FB21C651E98DF25ULL);
  splitmix64(state);
  engine_.seed(splitmix64(state));
}

double Rng::uniform() {
  return double(engine_() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::domain_error("Rng::exponential: rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::domain_error("Rng::uniform_int: n must be positive");
  return int(double(n) * uniform());
}

int Rng::poisson(double mean) {
  if (mean < 0.0) throw std::domain_error("Rng::poisson: negative mean");
  // Knuth's product method, chunked so the running product never underflows.
  int count = 0;
  double remaining = mean;
  double threshold, product;
  while (remaining > 500.0) {
    threshold = std::exp(-500.0);
    product = uniform();
    while (product > threshold) {
      ++count;
      product *= uniform();
    }
    remaining -= 500.0;
  }
  threshold = std::exp(-remaining);
  product = uniform();
  while (product > threshold) {
    ++count;
    product *= uniform();
  }
  return count;
}

PatienceModel PatienceModel::constant(double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("PatienceModel: constant budget must be >= 0");
  return PatienceModel{Kind::constant, t};
}

PatienceModel PatienceModel::exponential_mean(double mean) {
  if (!(mean > 0.0)) throw std::invalid_argument("PatienceModel: exponential mean must be > 0");
  return PatienceModel{Kind::exponential, mean};
}

double sample_patience(const PatienceModel& model, Rng& rng) {
  switch (model.kind) {
    case PatienceModel::Kind::constant:
      return model.value;
    case PatienceModel::Kind::exponential:
      return rng.exponential(1.0 / model.value);
  }
  throw std::logic_error("sample_patience: unknown patience model");
}

ServiceRates derive_service_rates(double lambda_i, double lambda_j, double delta_lambda) {
  double mu_i = 0.5 * (lambda_i + delta_lambda);
  double mu_j = 0.5 * (lambda_j - delta_lambda);
  if (!(mu_i > 0.0) || !(mu_j > 0.0))
    throw std::domain_error("derive_service_rates: heterogeneity shift yields a non-positive rate");
  return {mu_i, mu_j};
}

SystemConfig make_config(double lambda_total, double delta_lambda, PatienceModel patience,
                         double t_local, double lambda_tar, uint64_t seed) {
  SystemConfig cfg;
  cfg.lambda_i = 0.5 * lambda_total;
  cfg.lambda_j = 0.5 * lambda_total;
  cfg.delta_lambda = delta_lambda;
  auto rates = derive_service_rates(cfg.lambda_i, cfg.lambda_j, delta_lambda);
  cfg.mu_i = rates.mu_i;
  cfg.mu_j = rates.mu_j;
  cfg.patience = patience;
  cfg.t_local = t_local;
  cfg.lambda_tar = lambda_tar;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

void SystemConfig::validate() const {
  if (lambda_i < 0.0 || lambda_j < 0.0)
    throw std::invalid_argument("SystemConfig: arrival rates must be non-negative");
  if (!(mu_i > 0.0) || !(mu_j > 0.0))
    throw std::invalid_argument("SystemConfig: service rates must be positive");
  if (t_local < 0.0)
    throw std::invalid_argument("SystemConfig: t_local must be non-negative");
  if (lambda_tar < 0.0 || lambda_tar > lambda_j)
    throw std::invalid_argument("SystemConfig: lambda_tar must lie in [0, lambda_j]");
  if (patience.kind == PatienceModel::Kind::exponential && !(patience.value > 0.0))
    throw std::invalid_argument("SystemConfig: exponential patience needs a positive mean");
}

Utilization utilization(double lambda, int servers, double mu) {
  if (servers <= 0 || !(mu > 0.0))
    throw std::invalid_argument("utilization: need servers >= 1 and mu > 0");
  double rho = lambda / (servers * mu);
  return {rho, rho < 1.0};
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::markov: return "markov";
    case Provenance::learned: return "learned";
    case Provenance::baseline: return "baseline";
  }
  return "unknown";
}

}  // namespace dualq
