#include "dualq/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace dualq::rl {

using nlohmann::json;

Mlp::Mlp(std::span<const int> sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least two sizes");
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    Layer layer;
    layer.in = sizes[i];
    layer.out = sizes[i + 1];
    layer.w.resize(size_t(layer.in) * layer.out);
    layer.b.assign(size_t(layer.out), 0.0);
    double bound = std::sqrt(6.0 / (layer.in + layer.out));
    for (double& w : layer.w) w = (2.0 * rng.uniform() - 1.0) * bound;
    layers.push_back(std::move(layer));
  }
}

const std::vector<double>& Mlp::forward(std::span<const double> x, Workspace& ws) const {
  ws.act.resize(layers.size() + 1);
  ws.act[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    const std::vector<double>& in = ws.act[l];
    std::vector<double>& out = ws.act[l + 1];
    out.assign(size_t(layer.out), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double* wrow = layer.w.data() + size_t(o) * layer.in;
      double z = layer.b[size_t(o)];
      for (int i = 0; i < layer.in; ++i) z += wrow[i] * in[size_t(i)];
      out[size_t(o)] = (l + 1 < layers.size() && z < 0.0) ? 0.0 : z;  // ReLU except head
    }
  }
  return ws.act.back();
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Workspace ws;
  return forward(x, ws);
}

void Mlp::backward(const Workspace& ws, std::span<const double> dout,
                   std::vector<LayerGrad>& grads) const {
  if (grads.size() != layers.size()) grads = zero_grads();
  std::vector<double> delta(dout.begin(), dout.end());
  for (size_t l = layers.size(); l-- > 0;) {
    const Layer& layer = layers[l];
    const std::vector<double>& in = ws.act[l];
    const std::vector<double>& out = ws.act[l + 1];
    LayerGrad& g = grads[l];
    g.w.assign(layer.w.size(), 0.0);
    g.b.assign(layer.b.size(), 0.0);
    if (l + 1 < layers.size())  // kill gradient where ReLU clipped
      for (int o = 0; o < layer.out; ++o)
        if (out[size_t(o)] <= 0.0) delta[size_t(o)] = 0.0;
    for (int o = 0; o < layer.out; ++o) {
      double d = delta[size_t(o)];
      g.b[size_t(o)] = d;
      double* gw = g.w.data() + size_t(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gw[i] = d * in[size_t(i)];
    }
    if (l > 0) {
      std::vector<double> prev(size_t(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        double d = delta[size_t(o)];
        const double* wrow = layer.w.data() + size_t(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) prev[size_t(i)] += d * wrow[i];
      }
      delta = std::move(prev);
    }
  }
}

std::vector<LayerGrad> Mlp::zero_grads() const {
  std::vector<LayerGrad> grads(layers.size());
  for (size_t l = 0; l < layers.size(); ++l) {
    grads[l].w.assign(layers[l].w.size(), 0.0);
    grads[l].b.assign(layers[l].b.size(), 0.0);
  }
  return grads;
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void Adam::step(Mlp& net, const std::vector<LayerGrad>& grads, double lr, double beta1,
                double beta2, double eps) {
  if (m.size() != net.layers.size()) {
    m = net.zero_grads();
    v = net.zero_grads();
    t = 0;
  }
  ++t;
  double c1 = 1.0 - std::pow(beta1, double(t));
  double c2 = 1.0 - std::pow(beta2, double(t));
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                      std::vector<double>& mm, std::vector<double>& vv) {
      for (size_t i = 0; i < p.size(); ++i) {
        mm[i] = beta1 * mm[i] + (1.0 - beta1) * g[i];
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
      }
    };
    update(net.layers[l].w, grads[l].w, m[l].w, v[l].w);
    update(net.layers[l].b, grads[l].b, m[l].b, v[l].b);
  }
}

ActorNetwork make_actor(const TrainerConfig& cfg, Rng& rng) {
  std::array<int, 4> sizes{5, cfg.hidden, cfg.hidden, 2};
  return ActorNetwork{Mlp(sizes, rng), Adam{}};
}

CriticNetwork make_critic(const TrainerConfig& cfg, Rng& rng) {
  std::array<int, 4> sizes{5, cfg.hidden, cfg.hidden, 1};
  return CriticNetwork{Mlp(sizes, rng), Adam{}};
}

std::array<double, 2> softmax2(double l0, double l1) {
  double m = std::max(l0, l1);
  double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
  double z = e0 + e1;
  return {e0 / z, e1 / z};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double reward(const PolicyState& s, int action, double pi, double tau) {
  if (!(s.mu_i > 0.0) || !(s.mu_j > 0.0))
    throw std::domain_error("reward: service rates must be positive");
  if (action != 0 && action != 1) throw std::invalid_argument("reward: action must be 0 or 1");
  double own_wait = s.k_i / s.mu_i;
  double margin = action == 0 ? own_wait - s.patience : own_wait - s.k_j / s.mu_j;
  return pi * sigmoid(tau * margin);
}

double discounted_return(std::span<const double> rewards, double gamma) {
  double g = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) g = rewards[i] + gamma * g;
  return g;
}

ActionSample act(const PolicyState& s, const ActorNetwork& actor, Rng& rng,
                 const FeatureScaling& scaling) {
  auto features = scaling.apply(s);
  auto logits = actor.net.forward(features);
  if (!std::isfinite(logits[0]) || !std::isfinite(logits[1]))
    throw divergence_error("act: actor produced non-finite logits");
  auto probs = softmax2(logits[0], logits[1]);
  int a = rng.uniform() < probs[0] ? 0 : 1;
  return {a, probs[size_t(a)], probs};
}

int greedy_action(double q0, double q1) {
  return q1 > q0 ? 1 : 0;
}

double critic_value(const PolicyState& s, const CriticNetwork& critic,
                    const FeatureScaling& scaling) {
  auto features = scaling.apply(s);
  return critic.net.forward(features)[0];
}

TdLosses td_update(const Transition& tr, ActorNetwork& actor, CriticNetwork& critic,
                   const TrainerConfig& cfg) {
  auto features = cfg.scaling.apply(tr.s);

  Mlp::Workspace critic_ws;
  double v = critic.net.forward(features, critic_ws)[0];
  double target = tr.reward;
  if (!tr.terminal) target += cfg.gamma * critic_value(tr.next, critic, cfg.scaling);
  double err = v - target;
  double critic_loss = err * err;
  double advantage = target - v;

  std::vector<LayerGrad> critic_grads;
  std::array<double, 1> dv{2.0 * err};
  critic.net.backward(critic_ws, dv, critic_grads);

  Mlp::Workspace actor_ws;
  const auto& logits = actor.net.forward(features, actor_ws);
  auto probs = softmax2(logits[0], logits[1]);
  double p_a = probs[size_t(tr.action)];
  double actor_loss = -std::log(std::max(p_a, 1e-300)) * advantage;

  // d(-log pi_a * A)/dlogits = A * (probs - onehot_a), advantage held constant
  std::array<double, 2> dlogits{advantage * probs[0], advantage * probs[1]};
  dlogits[size_t(tr.action)] -= advantage;
  std::vector<LayerGrad> actor_grads;
  actor.net.backward(actor_ws, dlogits, actor_grads);

  if (!std::isfinite(critic_loss) || !std::isfinite(actor_loss))
    throw divergence_error("td_update: non-finite loss");

  critic.opt.step(critic.net, critic_grads, cfg.learning_rate, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps);
  actor.opt.step(actor.net, actor_grads, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                 cfg.adam_eps);
  return {actor_loss, critic_loss};
}

WaitCalibration fit_calibration(std::span<const double> values, std::span<const double> waits) {
  WaitCalibration out;
  if (values.size() != waits.size() || values.size() < 2) return out;
  double n = double(values.size());
  double mv = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double mw = std::accumulate(waits.begin(), waits.end(), 0.0) / n;
  double cov = 0.0, var = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    cov += (values[i] - mv) * (waits[i] - mw);
    var += (values[i] - mv) * (values[i] - mv);
  }
  if (var <= 1e-12) {  // flat critic: fall back to the mean observed wait
    out.scale = 0.0;
    out.offset = mw;
  } else {
    out.scale = cov / var;
    out.offset = mw - out.scale * mv;
  }
  out.fitted = true;
  return out;
}

WaitCalibration fit_calibration(std::span<const double> values, std::span<const double> waits,
                                double anchor) {
  WaitCalibration out;
  if (values.size() != waits.size() || values.size() < 2) return out;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    double d = values[i] - anchor;
    num += d * waits[i];
    den += d * d;
  }
  if (den <= 1e-12) {  // flat critic: fall back to the mean observed wait
    out.scale = 0.0;
    out.offset = std::accumulate(waits.begin(), waits.end(), 0.0) / double(waits.size());
  } else {
    out.scale = num / den;
    out.offset = -out.scale * anchor;
  }
  out.fitted = true;
  return out;
}

WaitEstimate estimate_wait(const PolicyState& s, const CriticNetwork& critic,
                           const WaitCalibration& calib, const FeatureScaling& scaling) {
  if (!calib.fitted)
    throw std::logic_error("estimate_wait: calibration has not been fitted");
  if (s.k_i == 0) return {0.0, Provenance::learned};
  // the map input is the value relative to the same state with the own queue
  // emptied: the context (other queue, rates, budget) cancels in the
  // difference, leaving the backlog's own contribution
  PolicyState emptied = s;
  emptied.k_i = 0;
  double dv = critic_value(s, critic, scaling) - critic_value(emptied, critic, scaling);
  double estimate = calib.scale * dv + calib.offset;
  return {std::max(0.0, estimate), Provenance::learned};
}

namespace {

void run_episodes(TrainResult& result, Environment& env, const TrainerConfig& cfg) {
  Rng rng(cfg.seed, 0x7261696eULL + uint64_t(result.episodes_done));
  // calibration material: states sampled at tenant starts, where the remaining
  // budget is at its full draw, so the critic-vs-wait relation is not blurred
  // by the value's dependence on how much patience is left.  The wait is
  // observed immediately; the critic value is taken once training settles.
  std::vector<PolicyState> calib_states;
  std::vector<double> calib_waits;
  int64_t tenant_starts = 0;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    PolicyState s = env.reset();
    bool fresh = true;  // s is a tenant-start state
    double actor_sum = 0.0, critic_sum = 0.0;
    for (int epoch = 0; epoch < cfg.epochs_per_episode; ++epoch) {
      ActionSample a = act(s, result.actor, rng, cfg.scaling);
      double r = reward(s, a.action, a.probability, cfg.tau);
      if (cfg.calibration_stride > 0 && fresh) {
        if (tenant_starts % cfg.calibration_stride == 0) {
          calib_states.push_back(s);
          calib_waits.push_back(env.observe_remaining_wait());
        }
        ++tenant_starts;
      }
      Environment::Step step = env.step(a.action);
      TdLosses losses =
          td_update({s, a.action, r, step.next, step.terminal}, result.actor, result.critic, cfg);
      actor_sum += losses.actor_loss;
      critic_sum += losses.critic_loss;
      s = step.next;
      fresh = step.terminal;
    }
    result.losses.push_back(
        {actor_sum / cfg.epochs_per_episode, critic_sum / cfg.epochs_per_episode});
    ++result.episodes_done;
  }
  if (!calib_states.empty()) {
    for (size_t i = 0; i < calib_states.size(); ++i) {
      PolicyState emptied = calib_states[i];
      emptied.k_i = 0;
      double dv = critic_value(calib_states[i], result.critic, cfg.scaling) -
                  critic_value(emptied, result.critic, cfg.scaling);
      result.calib_values.push_back(dv);
      result.calib_waits.push_back(calib_waits[i]);
    }
    result.calibration = fit_calibration(result.calib_values, result.calib_waits, 0.0);
  } else if (!result.calibration.fitted && !result.calib_values.empty()) {
    result.calibration = fit_calibration(result.calib_values, result.calib_waits);
  }
}

}  // namespace

TrainResult train(Environment& env, const TrainerConfig& cfg) {
  Rng init_rng(cfg.seed, 0x696e6974ULL);
  TrainResult result{make_actor(cfg, init_rng), make_critic(cfg, init_rng), {}, {}, 0, {}, {}};
  run_episodes(result, env, cfg);
  return result;
}

void train_more(TrainResult& result, Environment& env, const TrainerConfig& cfg) {
  run_episodes(result, env, cfg);
}

namespace {

json layer_to_json(const Layer& l) {
  return json{{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}};
}

Layer layer_from_json(const json& j) {
  Layer l;
  l.in = j.at("in").get<int>();
  l.out = j.at("out").get<int>();
  l.w = j.at("w").get<std::vector<double>>();
  l.b = j.at("b").get<std::vector<double>>();
  if (l.w.size() != size_t(l.in) * l.out || l.b.size() != size_t(l.out))
    throw std::runtime_error("checkpoint: layer shape mismatch");
  return l;
}

json grads_to_json(const std::vector<LayerGrad>& gs) {
  json arr = json::array();
  for (const auto& g : gs) arr.push_back(json{{"w", g.w}, {"b", g.b}});
  return arr;
}

std::vector<LayerGrad> grads_from_json(const json& j) {
  std::vector<LayerGrad> gs;
  for (const auto& e : j) {
    LayerGrad g;
    g.w = e.at("w").get<std::vector<double>>();
    g.b = e.at("b").get<std::vector<double>>();
    gs.push_back(std::move(g));
  }
  return gs;
}

json net_to_json(const Mlp& net, const Adam& opt) {
  json layers = json::array();
  for (const Layer& l : net.layers) layers.push_back(layer_to_json(l));
  return json{{"layers", layers},
              {"adam", json{{"t", opt.t}, {"m", grads_to_json(opt.m)}, {"v", grads_to_json(opt.v)}}}};
}

void net_from_json(const json& j, Mlp& net, Adam& opt) {
  net.layers.clear();
  for (const auto& e : j.at("layers")) net.layers.push_back(layer_from_json(e));
  const json& a = j.at("adam");
  opt.t = a.at("t").get<int64_t>();
  opt.m = grads_from_json(a.at("m"));
  opt.v = grads_from_json(a.at("v"));
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainResult& result,
                     const TrainerConfig& cfg) {
  json j{
      {"format", "dualq-checkpoint"},
      {"version", 1},
      {"episodes_done", result.episodes_done},
      {"trainer",
       {{"episodes", cfg.episodes},
        {"epochs_per_episode", cfg.epochs_per_episode},
        {"hidden", cfg.hidden},
        {"learning_rate", cfg.learning_rate},
        {"adam_beta1", cfg.adam_beta1},
        {"adam_beta2", cfg.adam_beta2},
        {"adam_eps", cfg.adam_eps},
        {"gamma", cfg.gamma},
        {"tau", cfg.tau},
        {"delta", cfg.delta},
        {"seed", cfg.seed},
        {"calibration_stride", cfg.calibration_stride},
        {"scaling",
         {{"k_scale", cfg.scaling.k_scale},
          {"mu_scale", cfg.scaling.mu_scale},
          {"t_scale", cfg.scaling.t_scale}}}}},
      {"actor", net_to_json(result.actor.net, result.actor.opt)},
      {"critic", net_to_json(result.critic.net, result.critic.opt)},
      {"calibration",
       {{"scale", result.calibration.scale},
        {"offset", result.calibration.offset},
        {"fitted", result.calibration.fitted}}},
      {"calib_values", result.calib_values},
      {"calib_waits", result.calib_waits},
      {"actor_losses", json::array()},
      {"critic_losses", json::array()},
  };
  for (const auto& l : result.losses) {
    j["actor_losses"].push_back(l.actor);
    j["critic_losses"].push_back(l.critic);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump();
}

TrainResult load_checkpoint(const std::string& path, TrainerConfig& cfg_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "dualq-checkpoint")
    throw std::runtime_error("load_checkpoint: not a checkpoint file");
  const json& t = j.at("trainer");
  cfg_out.episodes = t.at("episodes").get<int>();
  cfg_out.epochs_per_episode = t.at("epochs_per_episode").get<int>();
  cfg_out.hidden = t.at("hidden").get<int>();
  cfg_out.learning_rate = t.at("learning_rate").get<double>();
  cfg_out.adam_beta1 = t.at("adam_beta1").get<double>();
  cfg_out.adam_beta2 = t.at("adam_beta2").get<double>();
  cfg_out.adam_eps = t.at("adam_eps").get<double>();
  cfg_out.gamma = t.at("gamma").get<double>();
  cfg_out.tau = t.at("tau").get<double>();
  cfg_out.delta = t.value("delta", 1.0);
  cfg_out.seed = t.at("seed").get<uint64_t>();
  cfg_out.calibration_stride = t.at("calibration_stride").get<int>();
  const json& s = t.at("scaling");
  cfg_out.scaling.k_scale = s.at("k_scale").get<double>();
  cfg_out.scaling.mu_scale = s.at("mu_scale").get<double>();
  cfg_out.scaling.t_scale = s.at("t_scale").get<double>();

  TrainResult result;
  net_from_json(j.at("actor"), result.actor.net, result.actor.opt);
  net_from_json(j.at("critic"), result.critic.net, result.critic.opt);
  result.episodes_done = j.at("episodes_done").get<int>();
  result.calibration.scale = j.at("calibration").at("scale").get<double>();
  result.calibration.offset = j.at("calibration").at("offset").get<double>();
  result.calibration.fitted = j.at("calibration").at("fitted").get<bool>();
  result.calib_values = j.at("calib_values").get<std::vector<double>>();
  result.calib_waits = j.at("calib_waits").get<std::vector<double>>();
  auto la = j.at("actor_losses").get<std::vector<double>>();
  auto lc = j.at("critic_losses").get<std::vector<double>>();
  if (la.size() != lc.size() || (int64_t)la.size() != result.episodes_done)
    throw std::runtime_error("load_checkpoint: loss history inconsistent");
  for (size_t i = 0; i < la.size(); ++i) result.losses.push_back({la[i], lc[i]});
  return result;
}

}  // namespace dualq::rl
