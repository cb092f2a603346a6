#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualq/core.hpp"

namespace dualq::rl {

// Raised when a loss or gradient stops being finite.
struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decision-time snapshot handed to the policy: own backlog, alternative
// occupancy, both service rates, and the remaining patience budget.
struct PolicyState {
  int k_i = 0;
  int k_j = 0;
  double mu_i = 1.0;
  double mu_j = 1.0;
  double patience = 0.0;
};

// Inputs are scaled by fixed constants so logits stay in a sane range:
// backlogs by k_scale, rates by mu_scale (the top of the arrival-rate set),
// patience by t_scale.
struct FeatureScaling {
  double k_scale = 100.0;
  double mu_scale = 15.0;
  double t_scale = 10.0;

  std::array<double, 5> apply(const PolicyState& s) const {
    return {s.k_i / k_scale, s.k_j / k_scale, s.mu_i / mu_scale, s.mu_j / mu_scale,
            s.patience / t_scale};
  }
};

struct TrainerConfig {
  int episodes = 100;
  int epochs_per_episode = 100;
  int hidden = 128;            // two hidden layers of this width
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double gamma = 0.99;         // discount
  double tau = 1.0;            // sigmoid slope in the rewards
  double delta = 1.0;          // reserved scaling knob; the default reward only uses tau
  FeatureScaling scaling;
  uint64_t seed = 1;
  int calibration_stride = 1;  // collect a calibration pair every n-th tenant start
};

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major [out][in]
  std::vector<double> b;
};

struct LayerGrad {
  std::vector<double> w;
  std::vector<double> b;
};

// Plain fully connected net, ReLU between layers, linear head.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::span<const int> sizes, Rng& rng);  // uniform(+-sqrt(6/(fan_in+fan_out)))

  struct Workspace {
    std::vector<std::vector<double>> act;  // act[0] = input, act.back() = output
  };

  std::vector<double> forward(std::span<const double> x) const;
  const std::vector<double>& forward(std::span<const double> x, Workspace& ws) const;
  // dout = dLoss/d(output); accumulates nothing, overwrites grads
  void backward(const Workspace& ws, std::span<const double> dout,
                std::vector<LayerGrad>& grads) const;
  std::vector<LayerGrad> zero_grads() const;
  size_t parameter_count() const;

  std::vector<Layer> layers;
};

// First-moment/second-moment optimizer state for one Mlp.
class Adam {
 public:
  void step(Mlp& net, const std::vector<LayerGrad>& grads, double lr, double beta1,
            double beta2, double eps);
  int64_t t = 0;
  std::vector<LayerGrad> m;
  std::vector<LayerGrad> v;
};

struct ActorNetwork {
  Mlp net;   // 5 -> hidden -> hidden -> 2 logits
  Adam opt;
};

struct CriticNetwork {
  Mlp net;   // 5 -> hidden -> hidden -> 1
  Adam opt;
};

ActorNetwork make_actor(const TrainerConfig& cfg, Rng& rng);
CriticNetwork make_critic(const TrainerConfig& cfg, Rng& rng);

std::array<double, 2> softmax2(double l0, double l1);
double sigmoid(double x);

// Action-utility rewards, both gated by the policy's own probability of the
// action: renege (0) scores sigmoid(k_i/mu_i - T), jockey (1) scores
// sigmoid(k_i/mu_i - k_j/mu_j).  Always in [0, 1].
double reward(const PolicyState& s, int action, double pi, double tau = 1.0);

double discounted_return(std::span<const double> rewards, double gamma);

struct ActionSample {
  int action;
  double probability;       // pi(action | s)
  std::array<double, 2> probs;
};
ActionSample act(const PolicyState& s, const ActorNetwork& actor, Rng& rng,
                 const FeatureScaling& scaling);

// argmax with ties to action 0.
int greedy_action(double q0, double q1);

struct Transition {
  PolicyState s;
  int action = 0;
  double reward = 0.0;
  PolicyState next;
  bool terminal = false;
};

struct TdLosses {
  double actor_loss;
  double critic_loss;
};

// One TD(0) step: critic regresses onto r + gamma V(s') (r alone when
// terminal); the actor ascends -log pi(a|s) * advantage with the advantage
// treated as a constant.  One Adam step each.
TdLosses td_update(const Transition& tr, ActorNetwork& actor, CriticNetwork& critic,
                   const TrainerConfig& cfg);

// Environment contract for training: one step = one decision review of a
// tagged tenant.  When a step ends the tenant's episode-within-the-episode
// (served or reneged) the environment starts a fresh tenant internally and
// reports terminal = true so the TD target does not bootstrap across it.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual PolicyState reset() = 0;  // new training episode
  struct Step {
    PolicyState next;
    bool terminal;
  };
  virtual Step step(int action) = 0;
  // realized drain time of the current backlog (sum of k_i service draws);
  // used only to calibrate the critic-to-wait map
  virtual double observe_remaining_wait() = 0;
};

// Affine critic-to-wait map fitted on (value, observed wait) pairs.
struct WaitCalibration {
  double scale = 0.0;
  double offset = 0.0;
  bool fitted = false;
};
WaitCalibration fit_calibration(std::span<const double> values,
                                std::span<const double> waits);
// Constrained variant: the fitted line is forced through (anchor, 0), so a
// critic value typical of an empty own queue maps to a zero wait.  With
// non-negative waits this pins the slope sign to how the critic ranks
// backlogged states against empty ones.
WaitCalibration fit_calibration(std::span<const double> values, std::span<const double> waits,
                                double anchor);

double critic_value(const PolicyState& s, const CriticNetwork& critic,
                    const FeatureScaling& scaling);

// Remaining-wait estimate from the critic head.  The map input is the critic
// value of s relative to the same state with an emptied own queue, so the
// estimate is anchored at zero for empty queues and the context (other queue,
// rates, remaining budget) cancels.  Returns max(0, scale * dV + offset).
WaitEstimate estimate_wait(const PolicyState& s, const CriticNetwork& critic,
                           const WaitCalibration& calib, const FeatureScaling& scaling);

struct EpisodeLoss {
  double actor;
  double critic;
};

struct TrainResult {
  ActorNetwork actor;
  CriticNetwork critic;
  WaitCalibration calibration;
  std::vector<EpisodeLoss> losses;   // per-episode means, full history
  int episodes_done = 0;
  std::vector<double> calib_values;  // anchored values V(s) - V(s emptied); kept so resumes refit
  std::vector<double> calib_waits;
};

TrainResult train(Environment& env, const TrainerConfig& cfg);
// Continues a previous result in place for cfg.episodes more episodes.
void train_more(TrainResult& result, Environment& env, const TrainerConfig& cfg);

// JSON checkpoint: layer shapes, row-major weights, Adam moments,
// calibration, episode counter.
void save_checkpoint(const std::string& path, const TrainResult& result,
                     const TrainerConfig& cfg);
TrainResult load_checkpoint(const std::string& path, TrainerConfig& cfg_out);

}  // namespace dualq::rl
