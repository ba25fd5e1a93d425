#pragma once

#include <span>
#include <vector>

#include "twinforge/env.hpp"
#include "twinforge/rng.hpp"

namespace twinforge::uav {

struct LinkBudget {
  double tx_power_w = 0.1;           // p = 100 mW
  double noise_psd_w_per_hz = 0.0;   // from noise_psd_dbm_per_hz; see make_default
  double bandwidth_hz = 1e6;         // per-user OFDM subband
  double wavelength_m = 0.125;       // 2.4 GHz carrier
  double tx_gain = 1.0;
  double rx_gain = 1.0;

  bool operator==(const LinkBudget&) const = default;
};

double dbm_per_hz_to_w_per_hz(double dbm_per_hz);

// sigma^2 = -174 dBm/Hz.
LinkBudget default_link_budget();

// Free-space received power: p * g_t * g_r * (lambda / (4*pi*d))^2.
double friis_received_power_w(double distance_m, const LinkBudget& lb);

// Shannon rate over the link bandwidth, bits/second.
double friis_rate_bps(double distance_m, const LinkBudget& lb);

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

struct Config {
  double arena_w = 100.0;  // meters
  double arena_h = 100.0;
  Point hangar{0.0, 0.0};
  std::uint32_t num_uavs = 4;
  std::uint32_t num_users = 10;
  std::uint32_t horizon = 100;   // one-second steps
  double speed_mps = 8.0;
  double step_dt_s = 1.0;
  double height_m = 5.0;
  LinkBudget link = default_link_budget();
  double rate_scale_bps = 0.0;  // 0 = auto: friis_rate at UAV height
  bool full_observation = false;

  bool operator==(const Config&) const = default;
};

// Per-UAV moves; a joint action is the base-5 digit string over all UAVs.
enum class Move : int { hover = 0, pos_x = 1, neg_x = 2, pos_y = 3, neg_y = 4 };

std::vector<Move> decode_joint_action(std::uint32_t index, std::uint32_t num_uavs);
std::uint32_t encode_joint_action(std::span<const Move> moves);

// Mean over users of the best UAV's rate, bits/second. UAV-user distance is
// 3-D: ground offset plus the fixed flight height.
double average_best_rate_bps(std::span<const Point> uav_pos, std::span<const Point> user_pos,
                             double height_m, const LinkBudget& lb);

// Multi-UAV coverage environment: fixed users, UAVs start at a common hangar
// and move on a 5-way grid of unit-time displacements; reward is the average
// per-user best rate normalized by rate_scale.
class UavEnv final : public Environment {
 public:
  UavEnv(Config config, std::uint64_t seed);

  StateVec reset() override;
  StepResult step(ActionId action) override;
  StateVec observe() const override;
  StateVec observe_full() const override;
  bool done() const override { return t_ >= config_.horizon; }
  std::uint32_t action_count() const override { return action_count_; }
  std::size_t observation_dim() const override;
  std::optional<std::uint32_t> discrete_state_count() const override { return std::nullopt; }
  EnvSnapshot snapshot() const override;
  void restore(const EnvSnapshot& snap) override;
  void reseed(std::uint64_t seed) override { rng_.reseed(seed); }
  std::vector<std::uint8_t> serialize_state() const override;
  std::unique_ptr<Environment> clone() const override;
  std::string_view type_name() const override { return "uav"; }

  const Config& config() const { return config_; }
  std::span<const Point> uav_positions() const { return uav_pos_; }
  std::span<const Point> user_positions() const { return user_pos_; }
  std::uint32_t step_index() const { return t_; }
  double rate_scale_bps() const { return rate_scale_; }

  // Current normalized reward (average best rate / rate_scale).
  double current_reward() const;

 private:
  struct FullState {
    Config config;
    std::vector<Point> uav_pos;
    std::vector<Point> user_pos;
    std::uint32_t t;
    RngStream rng;
  };

  StateVec make_observation(bool full) const;

  Config config_;
  std::uint32_t action_count_ = 0;
  double rate_scale_ = 0.0;
  std::vector<Point> uav_pos_;
  std::vector<Point> user_pos_;
  std::uint32_t t_ = 0;
  RngStream rng_;
};

}  // namespace twinforge::uav
