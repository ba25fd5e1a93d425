#include "twinforge/twin_space.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace twinforge {

namespace {

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

void check_noise(const NoiseModel& noise) {
  for (double s : noise.state_noise_std) {
    if (s < 0.0) throw Error(ErrorCode::config_error, "noise: negative state std");
  }
  if (noise.reward_noise_std < 0.0) {
    throw Error(ErrorCode::config_error, "noise: negative reward std");
  }
}

double broadcast(const std::vector<double>& v, std::size_t i) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  return v[i];
}

}  // namespace

bool NoiseModel::is_zero() const {
  return reward_noise_std == 0.0 && all_zero(state_noise_std) && all_zero(bias);
}

Transition apply_noise(const Transition& t, const NoiseModel& noise, RngStream& rng) {
  check_noise(noise);
  Transition out = t;
  const std::size_t dim = out.next_state.values.size();
  if ((noise.state_noise_std.size() > 1 && noise.state_noise_std.size() != dim) ||
      (noise.bias.size() > 1 && noise.bias.size() != dim)) {
    throw Error(ErrorCode::shape_error, "noise: per-feature vector does not match state width");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    double v = out.next_state.values[i] + broadcast(noise.bias, i);
    const double sd = broadcast(noise.state_noise_std, i);
    if (sd > 0.0) v += rng.gaussian(0.0, sd);
    out.next_state.values[i] = v;
  }
  if (noise.reward_noise_std > 0.0) {
    out.reward += rng.gaussian(0.0, noise.reward_noise_std);
  }
  return out;
}

TwinSpace::TwinSpace(const Environment& prototype, std::size_t divergent_count, NoiseModel noise,
                     std::uint64_t seed)
    : identical_{kIdenticalDomain, prototype.clone(),   NoiseModel{},
                 {},               nullptr,             RngStream(seed, "noise-mirror")},
      rollout_policy_rng_(seed, "rollout"),
      rollout_seed_rng_(seed, "rollout-seed") {
  if (divergent_count < 1) {
    throw Error(ErrorCode::config_error, "twin space: need at least one divergent domain");
  }
  check_noise(noise);
  divergent_.reserve(divergent_count);
  for (std::size_t i = 0; i < divergent_count; ++i) {
    divergent_.push_back(DigitalDomain{divergent_domain(static_cast<int>(i)), prototype.clone(),
                                       noise, {}, nullptr,
                                       RngStream(seed, "noise-d" + std::to_string(i))});
  }
}

void TwinSpace::begin_episode(const Environment& physical) {
  identical_.env->restore(physical.snapshot());
}

void TwinSpace::sync_identical(const Transition& physical_t) {
  if (physical_t.kind != TransitionKind::physical) {
    throw Error(ErrorCode::invalid_state, "mirror sync expects a physical transition");
  }
  Environment& env = *identical_.env;
  if (env.done()) {
    throw Error(ErrorCode::mirror_divergence, "mirror episode ended before the physical one");
  }
  StateVec pre = env.observe();
  const StepResult res = env.step(physical_t.action);
  Transition replayed{std::move(pre),  physical_t.action, res.reward,
                      res.observation, res.terminal,      physical_t.domain,
                      physical_t.kind};
  if (replayed != physical_t) {
    throw Error(ErrorCode::mirror_divergence, "mirror replay disagrees with the physical record");
  }
  identical_.buffer.push_back(std::move(replayed));
  ++mirror_records_;
}

std::vector<Transition> TwinSpace::fanout_trials(const EnvSnapshot& snapshot,
                                                 std::span<const ActionId> actions) {
  if (actions.empty()) {
    throw Error(ErrorCode::empty_group, "fanout: need at least one action");
  }
  std::vector<ActionId> order(actions.begin(), actions.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw Error(ErrorCode::config_error, "fanout: actions must be distinct");
  }
  std::vector<Transition> out;
  out.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    DigitalDomain& dom = divergent_slot(i);
    dom.env->restore(snapshot);
    StateVec pre = dom.env->observe();
    const StepResult res = dom.env->step(order[i]);
    Transition t{std::move(pre),  order[i],     res.reward,
                 res.observation, res.terminal, dom.id,
                 TransitionKind::twin_fanout};
    if (!dom.noise.is_zero()) t = apply_noise(t, dom.noise, dom.noise_rng);
    dom.buffer.push_back(t);
    if (log_) log_->write(t);
    ++fanout_records_;
    out.push_back(std::move(t));
  }
  return out;
}

double TwinSpace::predict_target(const FirstStep& first, double eps, std::uint32_t k,
                                 std::uint32_t trajectories, double gamma) {
  if (k < 1) throw Error(ErrorCode::config_error, "prediction: depth k must be >= 1");
  if (trajectories < 1) throw Error(ErrorCode::config_error, "prediction: need >= 1 trajectories");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::config_error, "prediction: gamma must be in (0, 1]");
  }
  if (!synced_) {
    throw Error(ErrorCode::invalid_state, "prediction: twin parameters never synced");
  }
  const std::shared_ptr<const SyncedParams> bundle = synced_;

  double total = 0.0;
  for (std::uint32_t j = 0; j < trajectories; ++j) {
    DigitalDomain& dom = divergent_slot(j);
    dom.env->restore(first.after);
    // Each trajectory samples an independent future from the same snapshot.
    dom.env->reseed(rollout_seed_rng_.draw_u64());
    double g = first.reward;
    double discount = gamma;
    bool terminated = first.terminal || dom.env->done();
    for (std::uint32_t step = 1; step < k && !terminated; ++step) {
      StateVec s = dom.env->observe();
      const ActionId a = params_select(bundle->online, s, eps, rollout_policy_rng_);
      const StepResult res = dom.env->step(a);
      g += discount * res.reward;
      discount *= gamma;
      terminated = res.terminal;
      ++rollout_steps_;
      if (log_) {
        log_->write(Transition{std::move(s), a, res.reward, res.observation, res.terminal, dom.id,
                               TransitionKind::twin_rollout});
      }
    }
    if (!terminated) {
      g += discount * params_max_q(bundle->bootstrap_or_online(), dom.env->observe());
    }
    total += g;
  }
  return total / trajectories;
}

Transition TwinSpace::replicate_and_average(const EnvSnapshot& snapshot, ActionId action,
                                            std::size_t replicas) {
  if (replicas < 1) {
    throw Error(ErrorCode::empty_group, "replicate: need at least one replica");
  }
  std::vector<Transition> group;
  group.reserve(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    DigitalDomain& dom = divergent_slot(i);
    dom.env->restore(snapshot);
    StateVec pre = dom.env->observe();
    const StepResult res = dom.env->step(action);
    Transition t{std::move(pre),  action,       res.reward,
                 res.observation, res.terminal, dom.id,
                 TransitionKind::twin_fanout};
    if (!dom.noise.is_zero()) t = apply_noise(t, dom.noise, dom.noise_rng);
    group.push_back(std::move(t));
  }
  return transition_average(group);
}

void TwinSpace::sync_params(AgentParams online, std::optional<AgentParams> bootstrap) {
  auto next = std::make_shared<SyncedParams>();
  next->online = std::move(online);
  next->bootstrap = std::move(bootstrap);
  synced_ = std::move(next);
  identical_.params = synced_;
  for (DigitalDomain& d : divergent_) d.params = synced_;
}

const SyncedParams& TwinSpace::params() const {
  if (!synced_) throw Error(ErrorCode::invalid_state, "twin parameters never synced");
  return *synced_;
}

void TwinSpace::clear_buffers() {
  identical_.buffer.clear();
  for (DigitalDomain& d : divergent_) d.buffer.clear();
}

}  // namespace twinforge
