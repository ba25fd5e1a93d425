#pragma once

#include <vector>

#include "twinforge/env.hpp"
#include "twinforge/rng.hpp"

namespace twinforge::urllc {

struct AccessPoint {
  double position = 0.0;         // meters along the road
  double radius = 0.0;           // coverage half-width, meters
  double rate = 0.0;             // bits/second
  double cost_per_second = 0.0;  // reward units per second of transmission

  bool operator==(const AccessPoint&) const = default;
};

struct Task {
  double size_bits = 0.0;
  double deadline_s = 0.0;

  bool operator==(const Task&) const = default;
};

struct Config {
  double road_length = 2000.0;  // meters
  double vehicle_speed = 20.0;  // meters/second, +x direction only
  std::vector<AccessPoint> aps;
  Task task{20e6, 6.0};
  double w_success = 100.0;
  double w_latency = 5.0;
  double w_cost = 1.0;
  std::uint32_t position_bins = 100;
  bool full_observation = false;

  bool operator==(const Config&) const = default;
};

// The shipped default instance: 4 APs differing in coverage, rate, and cost.
Config default_config();

enum class Outcome : int {
  success = 0,
  fail_no_coverage = 1,
  fail_left_coverage = 2,
  fail_deadline = 3,
};

const char* outcome_name(Outcome o);

// Single-decision deadline-bound transmission environment: a vehicle moving
// at constant speed picks one access point per task; the whole transmission
// is then rolled out analytically to success or failure.
//
// Reward accounting per outcome:
//   success        w_success - w_latency*(wait+tx) - w_cost*cost*tx
//   no coverage    0 (transmission never starts; no latency, no cost)
//   left coverage  -w_latency*(wait+residence) - w_cost*cost*residence
//   past deadline  -w_latency*(wait+tx) - w_cost*cost*tx
class UrllcEnv final : public Environment {
 public:
  enum class Phase : std::uint8_t { choosing, done };

  UrllcEnv(Config config, std::uint64_t seed);

  StateVec reset() override;
  StepResult step(ActionId action) override;
  StateVec observe() const override;
  StateVec observe_full() const override;
  bool done() const override { return phase_ == Phase::done; }
  std::uint32_t action_count() const override { return static_cast<std::uint32_t>(config_.aps.size()); }
  std::size_t observation_dim() const override;
  std::optional<std::uint32_t> discrete_state_count() const override { return config_.position_bins; }
  EnvSnapshot snapshot() const override;
  void restore(const EnvSnapshot& snap) override;
  void reseed(std::uint64_t seed) override { rng_.reseed(seed); }
  std::vector<std::uint8_t> serialize_state() const override;
  std::unique_ptr<Environment> clone() const override;
  std::string_view type_name() const override { return "urllc"; }

  const Config& config() const { return config_; }
  double vehicle_position() const { return vehicle_pos_; }
  Outcome last_outcome() const { return last_outcome_; }

 private:
  struct FullState {
    Config config;
    double vehicle_pos;
    double elapsed;
    Phase phase;
    Outcome last_outcome;
    RngStream rng;
  };

  StateVec make_observation(bool full) const;

  Config config_;
  double vehicle_pos_ = 0.0;
  double elapsed_ = 0.0;
  Phase phase_ = Phase::done;
  Outcome last_outcome_ = Outcome::success;
  RngStream rng_;
};

}  // namespace twinforge::urllc
