#pragma once

#include <memory>
#include <span>
#include <vector>

#include "twinforge/agent.hpp"
#include "twinforge/core.hpp"
#include "twinforge/env.hpp"

namespace twinforge {

// Additive corruption applied to twin-generated transitions. Std/bias vectors
// broadcast: empty means zero everywhere, a single entry applies to every
// feature, otherwise the length must match the state dimension.
struct NoiseModel {
  std::vector<double> state_noise_std;
  double reward_noise_std = 0.0;
  std::vector<double> bias;

  bool is_zero() const;
};

// Returns a copy of `t` with next_state values shifted by bias plus Gaussian
// noise and the reward jittered. State, action and flags are untouched. A
// zero model consumes no randomness.
Transition apply_noise(const Transition& t, const NoiseModel& noise, RngStream& rng);

// One replica of the physical environment living in the digital space.
struct DigitalDomain {
  DomainId id;
  std::unique_ptr<Environment> env;
  NoiseModel noise;
  std::vector<Transition> buffer;
  // Twin copy of the agent parameters; swapped wholesale at every sync so
  // an equality audit against the physical agent is exact.
  std::shared_ptr<const SyncedParams> params;
  RngStream noise_rng;
};

// The physically-taken first step a predictive rollout continues from.
struct FirstStep {
  ActionId action;
  double reward = 0.0;
  bool terminal = false;
  EnvSnapshot after;  // physical env state once the action has been applied
};

// The digital space: one identical mirror domain plus a pool of divergent
// domains, each owning an environment replica, a noise model, a transition
// buffer and a synced copy of the agent parameters.
class TwinSpace {
 public:
  // `prototype` is cloned once per domain. All divergent domains share the
  // same noise model; the mirror is always noise-free.
  TwinSpace(const Environment& prototype, std::size_t divergent_count, NoiseModel noise,
            std::uint64_t seed);

  // Aligns the mirror with the physical environment at episode start.
  void begin_episode(const Environment& physical);

  // Re-executes the physical action in the mirror and asserts bit-exact
  // agreement; the verified record lands in the mirror buffer. Throws
  // MIRROR_DIVERGENCE on any mismatch.
  void sync_identical(const Transition& physical_t);

  // Runs each action once from `snapshot` across divergent domains (domains
  // are reused by re-restoring when actions outnumber them). Output is
  // ordered by action index; every transition shares the same pre-state and
  // carries the executing domain's noise.
  std::vector<Transition> fanout_trials(const EnvSnapshot& snapshot,
                                        std::span<const ActionId> actions);

  // Trajectory-averaged k-step TD target seeded by a physically-taken first
  // step. Each trajectory replays `first.after` into a divergent domain,
  // reseeds it for an independent future, rolls the synced twin policy
  // epsilon-greedily for up to k-1 steps and bootstraps with the bundle's
  // target-network view. Terminals truncate the bootstrap.
  double predict_target(const FirstStep& first, double eps, std::uint32_t k,
                        std::uint32_t trajectories, double gamma);

  // Executes the same action from the same snapshot in `replicas` domains
  // (noise applied per domain) and returns the aggregate transition.
  Transition replicate_and_average(const EnvSnapshot& snapshot, ActionId action,
                                   std::size_t replicas);

  // Replaces every domain's twin parameter copy. Called after each learning
  // update; pass the target network as `bootstrap` when one exists.
  void sync_params(AgentParams online, std::optional<AgentParams> bootstrap = std::nullopt);
  bool has_params() const { return synced_ != nullptr; }
  const SyncedParams& params() const;

  DigitalDomain& identical() { return identical_; }
  const DigitalDomain& identical() const { return identical_; }
  std::span<DigitalDomain> divergent() { return divergent_; }
  std::span<const DigitalDomain> divergent() const { return divergent_; }

  void clear_buffers();

  // Cumulative generation counters, by transition kind.
  std::uint64_t mirror_records() const { return mirror_records_; }
  std::uint64_t fanout_records() const { return fanout_records_; }
  std::uint64_t rollout_steps() const { return rollout_steps_; }

  // Optional transition sink; rows are appended as twin work happens.
  void set_log(TransitionLogWriter* log) { log_ = log; }

 private:
  DigitalDomain& divergent_slot(std::size_t i) { return divergent_[i % divergent_.size()]; }

  DigitalDomain identical_;
  std::vector<DigitalDomain> divergent_;
  std::shared_ptr<const SyncedParams> synced_;
  RngStream rollout_policy_rng_;
  RngStream rollout_seed_rng_;
  std::uint64_t mirror_records_ = 0;
  std::uint64_t fanout_records_ = 0;
  std::uint64_t rollout_steps_ = 0;
  TransitionLogWriter* log_ = nullptr;
};

}  // namespace twinforge
