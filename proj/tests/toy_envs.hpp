#pragma once

// Small fully-enumerable environments for exact-value tests.

#include <any>
#include <utility>

#include "twinforge/env.hpp"
#include "twinforge/rng.hpp"

namespace twinforge::testenv {

struct ChainConfig {
  std::uint32_t length = 6;
  std::uint32_t max_steps = 32;
  double hold_reward = -0.25;
  std::vector<double> advance_reward;  // length-1 entries; default 1,2,3,...
  bool operator==(const ChainConfig&) const = default;
};

// Deterministic corridor: action 0 holds in place, action 1 advances one
// state. The last state is terminal and a step cap keeps hold-forever
// policies finite, so every return is computable by hand.
class ChainEnv final : public Environment {
 public:
  using Config = ChainConfig;

  explicit ChainEnv(Config cfg = {}, std::uint64_t seed = 1)
      : cfg_(std::move(cfg)), rng_(seed, "env") {
    if (cfg_.length < 2) throw Error(ErrorCode::config_error, "chain: need >= 2 states");
    if (cfg_.advance_reward.empty()) {
      for (std::uint32_t i = 0; i + 1 < cfg_.length; ++i) {
        cfg_.advance_reward.push_back(static_cast<double>(i + 1));
      }
    }
    if (cfg_.advance_reward.size() + 1 != cfg_.length) {
      throw Error(ErrorCode::config_error, "chain: advance_reward needs length-1 entries");
    }
  }

  StateVec reset() override {
    pos_ = 0;
    steps_ = 0;
    return observe();
  }

  StepResult step(ActionId action) override {
    if (done()) throw Error(ErrorCode::episode_over, "chain: step after episode end");
    if (action.index > 1) throw Error(ErrorCode::invalid_state, "chain: action out of range");
    double reward = cfg_.hold_reward;
    if (action.index == 1) {
      reward = cfg_.advance_reward[pos_];
      ++pos_;
    }
    ++steps_;
    StepResult r;
    r.observation = observe();
    r.reward = reward;
    r.terminal = done();
    return r;
  }

  StateVec observe() const override {
    return StateVec{{static_cast<double>(pos_)}, pos_};
  }
  StateVec observe_full() const override { return observe(); }
  bool done() const override { return pos_ + 1 >= cfg_.length || steps_ >= cfg_.max_steps; }
  std::uint32_t action_count() const override { return 2; }
  std::size_t observation_dim() const override { return 1; }
  std::optional<std::uint32_t> discrete_state_count() const override { return cfg_.length; }

  EnvSnapshot snapshot() const override {
    return EnvSnapshot{"chain", FullState{cfg_, pos_, steps_, rng_}};
  }

  void restore(const EnvSnapshot& snap) override {
    if (snap.env_type != "chain") {
      throw Error(ErrorCode::invalid_state, "chain: snapshot type mismatch: " + snap.env_type);
    }
    const auto* s = std::any_cast<FullState>(&snap.state);
    if (s == nullptr) throw Error(ErrorCode::invalid_state, "chain: snapshot payload mismatch");
    cfg_ = s->cfg;
    pos_ = s->pos;
    steps_ = s->steps;
    rng_ = s->rng;
  }

  void reseed(std::uint64_t seed) override { rng_.reseed(seed); }

  std::vector<std::uint8_t> serialize_state() const override {
    ByteSink sink;
    sink.put_str("chain");
    sink.put_u32(cfg_.length);
    sink.put_u32(cfg_.max_steps);
    sink.put_f64(cfg_.hold_reward);
    for (double v : cfg_.advance_reward) sink.put_f64(v);
    sink.put_u32(pos_);
    sink.put_u32(steps_);
    sink.put_str(rng_.state_string());
    return std::move(sink).take();
  }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<ChainEnv>(*this); }
  std::string_view type_name() const override { return "chain"; }

 private:
  struct FullState {
    Config cfg;
    std::uint32_t pos;
    std::uint32_t steps;
    RngStream rng;
  };

  Config cfg_;
  std::uint32_t pos_ = 0;
  std::uint32_t steps_ = 0;
  RngStream rng_;
};

// Six-state two-action MDP with two-way random branches. Each (state,
// action) pair moves to major[s][a] with probability branch_p, otherwise to
// minor[s][a]; rewards depend on the branch taken. State 5 is terminal.
// branch_p = 1 gives the deterministic variant. The tables are the MDP's
// definition and are shared with the exact-enumeration oracles in tests.
class BranchMdp final : public Environment {
 public:
  static constexpr std::uint32_t kStates = 6;
  static constexpr std::uint32_t kTerminal = 5;
  static constexpr std::uint32_t kMajor[6][2] = {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 5}, {5, 5}};
  static constexpr std::uint32_t kMinor[6][2] = {{2, 3}, {3, 1}, {4, 5}, {5, 0}, {5, 3}, {5, 5}};
  // reward[branch] for (s, a); major branch first
  static constexpr double kReward[6][2][2] = {
      {{1.0, 0.4}, {0.7, 1.3}},  {{1.5, 0.9}, {1.2, 1.8}}, {{2.0, 1.4}, {1.7, 2.3}},
      {{2.5, 1.9}, {2.2, 2.8}},  {{3.0, 2.4}, {2.7, 3.3}}, {{0.0, 0.0}, {0.0, 0.0}},
  };

  explicit BranchMdp(double branch_p = 0.7, std::uint64_t seed = 1)
      : branch_p_(branch_p), rng_(seed, "env") {
    if (branch_p_ < 0.0 || branch_p_ > 1.0) {
      throw Error(ErrorCode::config_error, "branchMDP: p must be in [0, 1]");
    }
  }

  StateVec reset() override {
    pos_ = 0;
    steps_ = 0;
    return observe();
  }

  StepResult step(ActionId action) override {
    if (done()) throw Error(ErrorCode::episode_over, "branch MDP: step after episode end");
    if (action.index > 1) throw Error(ErrorCode::invalid_state, "branch MDP: action out of range");
    // the draw happens on every step so p=1 keeps the same stream positions
    const bool major = rng_.uniform01() < branch_p_;
    const StepResult r = apply(pos_, action.index, major);
    pos_ = major ? kMajor[pos_][action.index] : kMinor[pos_][action.index];
    ++steps_;
    return r;
  }

  // Outcome of one step from `s` for a known branch; shared by oracles.
  StepResult apply(std::uint32_t s, std::uint32_t a, bool major) const {
    const std::uint32_t next = major ? kMajor[s][a] : kMinor[s][a];
    StepResult r;
    r.observation = StateVec{{static_cast<double>(next)}, next};
    r.reward = kReward[s][a][major ? 0 : 1];
    r.terminal = next == kTerminal || steps_ + 1 >= kMaxSteps;
    return r;
  }

  StateVec observe() const override {
    return StateVec{{static_cast<double>(pos_)}, pos_};
  }
  StateVec observe_full() const override { return observe(); }
  bool done() const override { return pos_ == kTerminal || steps_ >= kMaxSteps; }
  std::uint32_t action_count() const override { return 2; }
  std::size_t observation_dim() const override { return 1; }
  std::optional<std::uint32_t> discrete_state_count() const override { return kStates; }

  EnvSnapshot snapshot() const override {
    return EnvSnapshot{"branch-mdp", FullState{branch_p_, pos_, steps_, rng_}};
  }

  void restore(const EnvSnapshot& snap) override {
    if (snap.env_type != "branch-mdp") {
      throw Error(ErrorCode::invalid_state, "branch MDP: snapshot type mismatch");
    }
    const auto* s = std::any_cast<FullState>(&snap.state);
    if (s == nullptr) throw Error(ErrorCode::invalid_state, "branch MDP: payload mismatch");
    branch_p_ = s->branch_p;
    pos_ = s->pos;
    steps_ = s->steps;
    rng_ = s->rng;
  }

  void reseed(std::uint64_t seed) override { rng_.reseed(seed); }

  std::vector<std::uint8_t> serialize_state() const override {
    ByteSink sink;
    sink.put_str("branch-mdp");
    sink.put_f64(branch_p_);
    sink.put_u32(pos_);
    sink.put_u32(steps_);
    sink.put_str(rng_.state_string());
    return std::move(sink).take();
  }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<BranchMdp>(*this); }
  std::string_view type_name() const override { return "branch-mdp"; }

  std::uint32_t state() const { return pos_; }

 private:
  static constexpr std::uint32_t kMaxSteps = 64;

  struct FullState {
    double branch_p;
    std::uint32_t pos;
    std::uint32_t steps;
    RngStream rng;
  };

  double branch_p_;
  std::uint32_t pos_ = kTerminal;  // not in an episode until reset
  std::uint32_t steps_ = 0;
  RngStream rng_;
};

}  // namespace twinforge::testenv
