#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "twinforge/agent.hpp"
#include "twinforge/env.hpp"
#include "twinforge/twin_space.hpp"

namespace twinforge {

enum class StrategyKind : std::uint8_t { physical, multiaction, prediction };

const char* strategy_kind_name(StrategyKind kind);

// How the digital space participates in training.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::physical;
  std::uint32_t n = 2;             // MULTIACTION: actions tried per physical state
  std::uint32_t k = 1;             // PREDICTION: rollout depth
  std::uint32_t trajectories = 4;  // PREDICTION: trajectories averaged per target
  double sample_mix = 0.5;         // twin fraction of each minibatch
  std::uint32_t dt_warmup_episodes = 0;  // episodes before twin strategies engage
  // When set, the taken action's mirror counts against the fanout budget n;
  // otherwise fanout covers n alternatives and the physical record trains
  // the agent directly.
  bool fanout_includes_taken = true;

  bool operator==(const StrategyConfig&) const = default;

  void validate() const;  // config-level invariants (n >= 2 for MULTIACTION, ...)
};

// Per-episode training record, one CSV row downstream.
struct EpisodeMetrics {
  std::uint32_t episode = 0;
  double total_reward = 0.0;
  double epsilon = 0.0;
  double loss_mean = 0.0;  // mean minibatch loss; 0 for tabular agents
  std::uint64_t physical_steps = 0;
  std::uint64_t fanout_records = 0;
  std::uint64_t rollout_steps = 0;
};

struct QlConfig {
  double alpha = 0.1;
  double gamma = 0.95;
  double init_q = 0.0;

  bool operator==(const QlConfig&) const = default;
};

struct DqnConfig {
  std::vector<std::uint32_t> hidden = {128, 128};
  std::size_t replay_capacity = 50000;
  std::uint32_t batch_size = 64;
  double lr = 1e-3;
  std::uint32_t target_sync_interval = 500;  // online->target copies, in updates
  double gamma = 0.95;

  bool operator==(const DqnConfig&) const = default;
};

struct QlLearner {
  QlConfig cfg;
  QTable table;
  std::vector<std::uint32_t> visit_counts;  // state-major, like the table
};

struct DqnLearner {
  DqnConfig cfg;
  MlpParams online;
  MlpParams target;
  AdamState adam;
  std::uint64_t updates = 0;
};

using Learner = std::variant<QlLearner, DqnLearner>;

// Requires a discrete state encoding on the environment.
QlLearner make_ql_learner(const Environment& env, const QlConfig& cfg);
// Network shape is [observation_dim, hidden..., action_count]; weights drawn
// from stream "agent-init".
DqnLearner make_dqn_learner(const Environment& env, const DqnConfig& cfg, std::uint64_t seed);

// Runs episodes of one strategy against one physical environment, keeping the
// digital space in lockstep: the mirror replays every physical step, twin
// parameters are re-synced after every learning update, and twin-generated
// data flows back through the storage space.
class Trainer {
 public:
  // `twins` may be null only for the PHYSICAL strategy; when present, the
  // mirror audit runs for every strategy.
  Trainer(Environment& env, Learner learner, EpsilonSchedule schedule, StrategyConfig strategy,
          TwinSpace* twins, std::uint64_t seed);

  EpisodeMetrics run_episode();

  std::uint32_t episodes_run() const { return episode_index_; }
  const Learner& learner() const { return learner_; }
  const ReplayBuffer& physical_buffer() const { return physical_replay_; }
  AgentParams agent_params() const;  // online parameters, for checkpointing

  void set_log(TransitionLogWriter* log) { log_ = log; }

 private:
  ActionId select_action(const StateVec& s, double eps);
  void learn_physical(const StoredRecord& record);
  double dqn_update(DqnLearner& dqn, std::uint32_t twin_quota);
  void push_twin_visit(std::uint32_t state, std::uint32_t action);
  std::vector<ActionId> choose_fanout_actions(const StateVec& s, ActionId taken,
                                              std::uint32_t budget);
  void sync_twins();
  std::size_t twin_pool_size() const;
  const Transition& twin_pool_at(std::size_t index) const;

  EpisodeMetrics run_episode_physical(double eps);
  EpisodeMetrics run_episode_multiaction(double eps);
  EpisodeMetrics run_episode_prediction(double eps);

  Environment& env_;
  Learner learner_;
  EpsilonSchedule schedule_;
  StrategyConfig strategy_;
  TwinSpace* twins_;
  ReplayBuffer physical_replay_;
  RngStream explore_rng_;
  RngStream fanout_alt_rng_;
  RngStream replay_rng_;
  std::uint32_t episode_index_ = 0;
  TransitionLogWriter* log_ = nullptr;
  MlpScratch scratch_;
  MlpGrads grads_;
  double episode_loss_sum_ = 0.0;
  std::uint64_t episode_loss_count_ = 0;
};

}  // namespace twinforge
