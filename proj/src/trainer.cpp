#include "twinforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace twinforge {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr std::size_t kTabularBufferCapacity = 50000;

std::size_t replay_capacity_of(const Learner& learner) {
  if (const auto* dqn = std::get_if<DqnLearner>(&learner)) return dqn->cfg.replay_capacity;
  return kTabularBufferCapacity;
}

double learner_gamma(const Learner& learner) {
  if (const auto* dqn = std::get_if<DqnLearner>(&learner)) return dqn->cfg.gamma;
  return std::get<QlLearner>(learner).table.gamma;
}

double max_q(const MlpParams& p, const StateVec& s, MlpScratch& scratch) {
  mlp_forward(p, s.values, scratch);
  const std::vector<double>& out = scratch.activations.back();
  return out[argmax_index(out)];
}

}  // namespace

const char* strategy_kind_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::physical: return "physical";
    case StrategyKind::multiaction: return "multiaction";
    case StrategyKind::prediction: return "prediction";
  }
  return "?";
}

void StrategyConfig::validate() const {
  if (kind == StrategyKind::multiaction && n < 2) {
    throw Error(ErrorCode::config_error, "strategy: MULTIACTION needs n >= 2");
  }
  if (kind == StrategyKind::prediction && (k < 1 || trajectories < 1)) {
    throw Error(ErrorCode::config_error, "strategy: PREDICTION needs k >= 1 and trajectories >= 1");
  }
  if (!(sample_mix >= 0.0 && sample_mix <= 1.0)) {
    throw Error(ErrorCode::config_error, "strategy: sample_mix must be in [0, 1]");
  }
}

QlLearner make_ql_learner(const Environment& env, const QlConfig& cfg) {
  const std::optional<std::uint32_t> states = env.discrete_state_count();
  if (!states) {
    throw Error(ErrorCode::config_error,
                "tabular agent needs an environment with a discrete state encoding");
  }
  QlLearner ql{cfg, QTable(*states, env.action_count(), cfg.alpha, cfg.gamma, cfg.init_q), {}};
  ql.visit_counts.assign(static_cast<std::size_t>(*states) * env.action_count(), 0);
  return ql;
}

DqnLearner make_dqn_learner(const Environment& env, const DqnConfig& cfg, std::uint64_t seed) {
  if (cfg.batch_size < 1 || cfg.target_sync_interval < 1) {
    throw Error(ErrorCode::config_error, "dqn: batch size and target sync interval must be >= 1");
  }
  if (cfg.replay_capacity < cfg.batch_size) {
    throw Error(ErrorCode::config_error, "dqn: replay capacity smaller than batch size");
  }
  if (!(cfg.lr > 0.0) || !(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) {
    throw Error(ErrorCode::config_error, "dqn: lr must be positive and gamma in (0, 1]");
  }
  std::vector<std::uint32_t> sizes;
  sizes.push_back(static_cast<std::uint32_t>(env.observation_dim()));
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(env.action_count());
  RngStream init(seed, "agent-init");
  DqnLearner dqn{cfg, mlp_random_init(sizes, init), {}, {}, 0};
  dqn.target = dqn.online;
  return dqn;
}

Trainer::Trainer(Environment& env, Learner learner, EpsilonSchedule schedule,
                 StrategyConfig strategy, TwinSpace* twins, std::uint64_t seed)
    : env_(env),
      learner_(std::move(learner)),
      schedule_(schedule),
      strategy_(strategy),
      twins_(twins),
      physical_replay_(replay_capacity_of(learner_)),
      explore_rng_(seed, "agent-explore"),
      fanout_alt_rng_(seed, "fanout-alt"),
      replay_rng_(seed, "replay-sample") {
  if (strategy_.kind != StrategyKind::physical && !twins_) {
    throw Error(ErrorCode::config_error, "twin strategies need a digital space");
  }
  if (strategy_.kind == StrategyKind::multiaction && strategy_.n < 1) {
    throw Error(ErrorCode::config_error, "multiaction: n must be >= 1");
  }
  if (strategy_.kind == StrategyKind::prediction &&
      (strategy_.k < 1 || strategy_.trajectories < 1)) {
    throw Error(ErrorCode::config_error, "prediction: k and trajectories must be >= 1");
  }
  if (!(strategy_.sample_mix >= 0.0 && strategy_.sample_mix <= 1.0)) {
    throw Error(ErrorCode::config_error, "sample_mix must be in [0, 1]");
  }
  if (!(schedule_.eps_start >= schedule_.eps_end) || schedule_.eps_start > 1.0 ||
      schedule_.eps_end < 0.0 || schedule_.decay_episodes < 1) {
    throw Error(ErrorCode::config_error, "epsilon schedule: need 1 >= start >= end >= 0 and "
                                         "decay_episodes >= 1");
  }
  std::visit(overloaded{[&](const QlLearner& ql) {
                          const auto states = env_.discrete_state_count();
                          if (!states || ql.table.state_count != *states ||
                              ql.table.action_count != env_.action_count()) {
                            throw Error(ErrorCode::config_error,
                                        "tabular learner does not match the environment");
                          }
                        },
                        [&](const DqnLearner& dqn) {
                          if (dqn.online.input_dim() != env_.observation_dim() ||
                              dqn.online.output_dim() != env_.action_count()) {
                            throw Error(ErrorCode::config_error,
                                        "network shape does not match the environment");
                          }
                        }},
             learner_);
  sync_twins();
}

ActionId Trainer::select_action(const StateVec& s, double eps) {
  return std::visit(
      overloaded{[&](const QlLearner& ql) {
                   if (!s.discrete_id) {
                     throw Error(ErrorCode::invalid_state,
                                 "tabular selection needs a discrete observation");
                   }
                   return ql_select(ql.table, *s.discrete_id, eps, explore_rng_);
                 },
                 [&](const DqnLearner& dqn) {
                   if (explore_rng_.uniform01() < eps) {
                     return ActionId{explore_rng_.uniform_int(env_.action_count())};
                   }
                   mlp_forward(dqn.online, s.values, scratch_);
                   const std::vector<double>& q = scratch_.activations.back();
                   return ActionId{argmax_index(q)};
                 }},
      learner_);
}

void Trainer::push_twin_visit(std::uint32_t state, std::uint32_t action) {
  if (auto* ql = std::get_if<QlLearner>(&learner_)) {
    ql->visit_counts[static_cast<std::size_t>(state) * ql->table.action_count + action] += 1;
  }
}

void Trainer::sync_twins() {
  if (!twins_) return;
  std::visit(overloaded{[&](const QlLearner& ql) { twins_->sync_params(AgentParams{ql.table}); },
                        [&](const DqnLearner& dqn) {
                          twins_->sync_params(AgentParams{dqn.online}, AgentParams{dqn.target});
                        }},
             learner_);
}

std::size_t Trainer::twin_pool_size() const {
  if (!twins_) return 0;
  std::size_t total = 0;
  for (const DigitalDomain& d : std::as_const(*twins_).divergent()) total += d.buffer.size();
  return total;
}

const Transition& Trainer::twin_pool_at(std::size_t index) const {
  for (const DigitalDomain& d : std::as_const(*twins_).divergent()) {
    if (index < d.buffer.size()) return d.buffer[index];
    index -= d.buffer.size();
  }
  throw Error(ErrorCode::invalid_state, "twin pool index out of range");
}

double Trainer::dqn_update(DqnLearner& dqn, std::uint32_t twin_quota) {
  const std::uint32_t batch_size = dqn.cfg.batch_size;
  twin_quota = std::min(twin_quota, batch_size);
  std::vector<MlpBatchEntry> batch;
  batch.reserve(batch_size);
  auto add = [&](const Transition& t, const std::optional<double>& stored) {
    const double target =
        stored ? *stored
               : t.reward + dqn.cfg.gamma * (t.terminal ? 0.0 : max_q(dqn.target, t.next_state,
                                                                      scratch_));
    batch.push_back(MlpBatchEntry{&t.state.values, t.action.index, target});
  };
  for (std::uint32_t i = 0; i < batch_size - twin_quota; ++i) {
    const StoredRecord& rec = physical_replay_.sample(replay_rng_);
    add(rec.transition, rec.target);
  }
  const std::size_t pool = twin_pool_size();
  for (std::uint32_t i = 0; i < twin_quota; ++i) {
    add(twin_pool_at(replay_rng_.uniform_int(static_cast<std::uint32_t>(pool))), std::nullopt);
  }
  const double loss = mlp_loss_and_gradients(dqn.online, batch, grads_, scratch_);
  adam_apply(dqn.online, dqn.adam, grads_, dqn.cfg.lr);
  ++dqn.updates;
  if (dqn.updates % dqn.cfg.target_sync_interval == 0) dqn.target = dqn.online;
  episode_loss_sum_ += loss;
  ++episode_loss_count_;
  return loss;
}

void Trainer::learn_physical(const StoredRecord& record) {
  std::visit(overloaded{[&](QlLearner& ql) {
                          ql_update(ql.table, record.transition, record.target);
                          push_twin_visit(*record.transition.state.discrete_id,
                                          record.transition.action.index);
                          sync_twins();
                        },
                        [&](DqnLearner& dqn) {
                          if (physical_replay_.size() >= dqn.cfg.batch_size) {
                            dqn_update(dqn, 0);
                            sync_twins();
                          }
                        }},
             learner_);
}

std::vector<ActionId> Trainer::choose_fanout_actions(const StateVec& s, ActionId taken,
                                                     std::uint32_t budget) {
  const std::uint32_t actions = env_.action_count();
  std::vector<bool> used(actions, false);
  std::vector<ActionId> out;
  used[taken.index] = true;
  if (strategy_.fanout_includes_taken) out.push_back(taken);
  while (out.size() < budget) {
    std::uint32_t pick = actions;
    if (const auto* ql = std::get_if<QlLearner>(&learner_)) {
      // Coverage priority: the alternative tried least often at this state.
      const std::uint32_t row = *s.discrete_id;
      std::uint32_t best_count = 0;
      for (std::uint32_t a = 0; a < actions; ++a) {
        if (used[a]) continue;
        const std::uint32_t c =
            ql->visit_counts[static_cast<std::size_t>(row) * actions + a];
        if (pick == actions || c < best_count) {
          pick = a;
          best_count = c;
        }
      }
    } else {
      std::vector<std::uint32_t> unused;
      unused.reserve(actions);
      for (std::uint32_t a = 0; a < actions; ++a) {
        if (!used[a]) unused.push_back(a);
      }
      if (!unused.empty()) {
        pick = unused[fanout_alt_rng_.uniform_int(static_cast<std::uint32_t>(unused.size()))];
      }
    }
    if (pick == actions) break;  // budget exceeds distinct actions; callers clamp, but stay safe
    used[pick] = true;
    out.push_back(ActionId{pick});
  }
  return out;
}

EpisodeMetrics Trainer::run_episode_physical(double eps) {
  EpisodeMetrics m;
  StateVec s = env_.reset();
  if (twins_) twins_->begin_episode(env_);
  while (!env_.done()) {
    const ActionId a = select_action(s, eps);
    StepResult res = env_.step(a);
    Transition t{std::move(s),      a,
                 res.reward,        res.observation,
                 res.terminal,      kPhysicalDomain,
                 TransitionKind::physical};
    if (log_) log_->write(t);
    if (twins_) twins_->sync_identical(t);
    StoredRecord rec{std::move(t), std::nullopt};
    physical_replay_.push(rec);
    learn_physical(physical_replay_.at(physical_replay_.size() - 1));
    m.total_reward += res.reward;
    ++m.physical_steps;
    s = std::move(res.observation);
  }
  return m;
}

EpisodeMetrics Trainer::run_episode_multiaction(double eps) {
  EpisodeMetrics m;
  StateVec s = env_.reset();
  twins_->begin_episode(env_);
  const std::uint32_t actions = env_.action_count();
  while (!env_.done()) {
    const EnvSnapshot snap = env_.snapshot();
    const ActionId a = select_action(s, eps);
    StepResult res = env_.step(a);
    Transition t{s,            a,
                 res.reward,   res.observation,
                 res.terminal, kPhysicalDomain,
                 TransitionKind::physical};
    if (log_) log_->write(t);
    twins_->sync_identical(t);
    physical_replay_.push(StoredRecord{t, std::nullopt});

    // Fan the snapshot out across divergent domains. The budget clamps to
    // the action space; the taken action's mirror counts against it when
    // configured to.
    const std::uint32_t budget =
        strategy_.fanout_includes_taken
            ? std::min(strategy_.n, actions)
            : std::min(strategy_.n, actions > 0 ? actions - 1 : 0);
    std::vector<ActionId> fan_actions = choose_fanout_actions(s, a, budget);
    std::vector<Transition> fan;
    if (!fan_actions.empty()) fan = twins_->fanout_trials(snap, fan_actions);
    m.fanout_records += fan.size();

    std::visit(overloaded{[&](QlLearner& ql) {
                            if (!strategy_.fanout_includes_taken) {
                              ql_update(ql.table, t, std::nullopt);
                              push_twin_visit(*t.state.discrete_id, a.index);
                              sync_twins();
                            }
                            for (const Transition& ft : fan) {
                              ql_update(ql.table, ft, std::nullopt);
                              push_twin_visit(*ft.state.discrete_id, ft.action.index);
                              sync_twins();
                            }
                          },
                          [&](DqnLearner& dqn) {
                            if (physical_replay_.size() >= dqn.cfg.batch_size) {
                              std::uint32_t quota = 0;
                              if (twin_pool_size() > 0) {
                                quota = static_cast<std::uint32_t>(
                                    std::llround(strategy_.sample_mix * dqn.cfg.batch_size));
                              }
                              dqn_update(dqn, quota);
                              sync_twins();
                            }
                          }},
               learner_);

    m.total_reward += res.reward;
    ++m.physical_steps;
    s = std::move(res.observation);
  }
  return m;
}

EpisodeMetrics Trainer::run_episode_prediction(double eps) {
  EpisodeMetrics m;
  StateVec s = env_.reset();
  twins_->begin_episode(env_);
  const double gamma = learner_gamma(learner_);
  while (!env_.done()) {
    const ActionId a = select_action(s, eps);
    StepResult res = env_.step(a);
    Transition t{std::move(s),      a,
                 res.reward,        res.observation,
                 res.terminal,      kPhysicalDomain,
                 TransitionKind::physical};
    if (log_) log_->write(t);
    twins_->sync_identical(t);

    const std::uint64_t rollouts_before = twins_->rollout_steps();
    FirstStep first{a, res.reward, res.terminal, env_.snapshot()};
    const double target =
        twins_->predict_target(first, eps, strategy_.k, strategy_.trajectories, gamma);
    m.rollout_steps += twins_->rollout_steps() - rollouts_before;

    physical_replay_.push(StoredRecord{std::move(t), target});
    learn_physical(physical_replay_.at(physical_replay_.size() - 1));
    m.total_reward += res.reward;
    ++m.physical_steps;
    s = std::move(res.observation);
  }
  return m;
}

EpisodeMetrics Trainer::run_episode() {
  const double eps = schedule_.at(episode_index_);
  episode_loss_sum_ = 0.0;
  episode_loss_count_ = 0;
  const bool twins_engaged = episode_index_ >= strategy_.dt_warmup_episodes;
  EpisodeMetrics m;
  switch (strategy_.kind) {
    case StrategyKind::physical:
      m = run_episode_physical(eps);
      break;
    case StrategyKind::multiaction:
      m = twins_engaged ? run_episode_multiaction(eps) : run_episode_physical(eps);
      break;
    case StrategyKind::prediction:
      m = twins_engaged ? run_episode_prediction(eps) : run_episode_physical(eps);
      break;
  }
  m.episode = episode_index_;
  m.epsilon = eps;
  m.loss_mean = episode_loss_count_ > 0 ? episode_loss_sum_ / episode_loss_count_ : 0.0;
  ++episode_index_;
  return m;
}

AgentParams Trainer::agent_params() const {
  if (const auto* ql = std::get_if<QlLearner>(&learner_)) return AgentParams{ql->table};
  return AgentParams{std::get<DqnLearner>(learner_).online};
}

}  // namespace twinforge
