#include "twinforge/uav_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace twinforge::uav {

double dbm_per_hz_to_w_per_hz(double dbm_per_hz) {
  return 1e-3 * std::pow(10.0, dbm_per_hz / 10.0);
}

LinkBudget default_link_budget() {
  LinkBudget lb;
  lb.noise_psd_w_per_hz = dbm_per_hz_to_w_per_hz(-174.0);
  return lb;
}

double friis_received_power_w(double distance_m, const LinkBudget& lb) {
  if (distance_m <= 0.0) {
    throw Error(ErrorCode::invalid_distance, "friis: distance must be > 0");
  }
  const double term = lb.wavelength_m / (4.0 * std::numbers::pi * distance_m);
  return lb.tx_power_w * lb.tx_gain * lb.rx_gain * term * term;
}

double friis_rate_bps(double distance_m, const LinkBudget& lb) {
  const double received = friis_received_power_w(distance_m, lb);
  const double noise = lb.noise_psd_w_per_hz * lb.bandwidth_hz;
  return lb.bandwidth_hz * std::log2(1.0 + received / noise);
}

std::vector<Move> decode_joint_action(std::uint32_t index, std::uint32_t num_uavs) {
  std::vector<Move> moves(num_uavs);
  for (std::uint32_t m = 0; m < num_uavs; ++m) {
    moves[m] = static_cast<Move>(index % 5);
    index /= 5;
  }
  if (index != 0) {
    throw Error(ErrorCode::invalid_state, "uav: joint action index out of range");
  }
  return moves;
}

std::uint32_t encode_joint_action(std::span<const Move> moves) {
  std::uint32_t index = 0;
  std::uint32_t base = 1;
  for (Move m : moves) {
    index += static_cast<std::uint32_t>(m) * base;
    base *= 5;
  }
  return index;
}

double average_best_rate_bps(std::span<const Point> uav_pos, std::span<const Point> user_pos,
                             double height_m, const LinkBudget& lb) {
  double sum = 0.0;
  for (const Point& user : user_pos) {
    double best = 0.0;
    for (const Point& uavp : uav_pos) {
      const double dx = user.x - uavp.x;
      const double dy = user.y - uavp.y;
      const double d = std::sqrt(dx * dx + dy * dy + height_m * height_m);
      best = std::max(best, friis_rate_bps(d, lb));
    }
    sum += best;
  }
  return sum / static_cast<double>(user_pos.size());
}

namespace {

void validate(const Config& c) {
  if (c.arena_w <= 0.0 || c.arena_h <= 0.0) {
    throw Error(ErrorCode::config_error, "uav: arena dimensions must be > 0");
  }
  if (c.hangar.x < 0.0 || c.hangar.x > c.arena_w || c.hangar.y < 0.0 || c.hangar.y > c.arena_h) {
    throw Error(ErrorCode::config_error, "uav: hangar outside arena");
  }
  if (c.num_uavs < 1 || c.num_uavs > 8) {
    throw Error(ErrorCode::config_error, "uav: num_uavs must be in [1, 8]");
  }
  if (c.num_users < 1) throw Error(ErrorCode::config_error, "uav: num_users must be >= 1");
  if (c.horizon < 1) throw Error(ErrorCode::config_error, "uav: horizon must be >= 1");
  if (c.speed_mps <= 0.0) throw Error(ErrorCode::config_error, "uav: speed must be > 0");
  if (c.step_dt_s <= 0.0) throw Error(ErrorCode::config_error, "uav: step_dt must be > 0");
  if (c.height_m <= 0.0) throw Error(ErrorCode::config_error, "uav: height must be > 0");
  const LinkBudget& lb = c.link;
  if (lb.tx_power_w <= 0.0 || lb.noise_psd_w_per_hz <= 0.0 || lb.bandwidth_hz <= 0.0 ||
      lb.wavelength_m <= 0.0 || lb.tx_gain <= 0.0 || lb.rx_gain <= 0.0) {
    throw Error(ErrorCode::config_error, "uav: link budget fields must be > 0");
  }
  if (c.rate_scale_bps < 0.0) throw Error(ErrorCode::config_error, "uav: rate_scale must be >= 0");
}

}  // namespace

UavEnv::UavEnv(Config config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed, "env") {
  validate(config_);
  action_count_ = 1;
  for (std::uint32_t i = 0; i < config_.num_uavs; ++i) action_count_ *= 5;
  rate_scale_ = config_.rate_scale_bps > 0.0 ? config_.rate_scale_bps
                                             : friis_rate_bps(config_.height_m, config_.link);
  // User layout is drawn once per experiment and held fixed across episodes.
  user_pos_.resize(config_.num_users);
  for (Point& p : user_pos_) {
    p.x = rng_.uniform(0.0, config_.arena_w);
    p.y = rng_.uniform(0.0, config_.arena_h);
  }
  uav_pos_.assign(config_.num_uavs, config_.hangar);
  t_ = config_.horizon;  // not in an episode until reset
}

StateVec UavEnv::reset() {
  uav_pos_.assign(config_.num_uavs, config_.hangar);
  t_ = 0;
  return observe();
}

StateVec UavEnv::make_observation(bool full) const {
  StateVec s;
  s.values.reserve(2 * (uav_pos_.size() + (full ? user_pos_.size() : 0)));
  for (const Point& p : uav_pos_) {
    s.values.push_back(p.x / config_.arena_w);
    s.values.push_back(p.y / config_.arena_h);
  }
  if (full) {
    for (const Point& p : user_pos_) {
      s.values.push_back(p.x / config_.arena_w);
      s.values.push_back(p.y / config_.arena_h);
    }
  }
  return s;
}

StateVec UavEnv::observe() const { return make_observation(config_.full_observation); }

StateVec UavEnv::observe_full() const { return make_observation(true); }

std::size_t UavEnv::observation_dim() const {
  return 2 * (config_.num_uavs + (config_.full_observation ? config_.num_users : 0));
}

double UavEnv::current_reward() const {
  return average_best_rate_bps(uav_pos_, user_pos_, config_.height_m, config_.link) / rate_scale_;
}

StepResult UavEnv::step(ActionId action) {
  if (t_ >= config_.horizon) {
    throw Error(ErrorCode::episode_over, "uav: step past horizon");
  }
  if (action.index >= action_count_) {
    throw Error(ErrorCode::invalid_state, "uav: action index out of range");
  }
  const std::vector<Move> moves = decode_joint_action(action.index, config_.num_uavs);
  const double dist = config_.speed_mps * config_.step_dt_s;
  for (std::uint32_t m = 0; m < config_.num_uavs; ++m) {
    Point& p = uav_pos_[m];
    switch (moves[m]) {
      case Move::hover: break;
      case Move::pos_x: p.x += dist; break;
      case Move::neg_x: p.x -= dist; break;
      case Move::pos_y: p.y += dist; break;
      case Move::neg_y: p.y -= dist; break;
    }
    p.x = std::clamp(p.x, 0.0, config_.arena_w);
    p.y = std::clamp(p.y, 0.0, config_.arena_h);
  }
  ++t_;

  StepResult r;
  r.observation = observe();
  r.reward = current_reward();
  r.terminal = t_ >= config_.horizon;
  return r;
}

EnvSnapshot UavEnv::snapshot() const {
  FullState s{config_, uav_pos_, user_pos_, t_, rng_};
  return EnvSnapshot{"uav", std::move(s)};
}

void UavEnv::restore(const EnvSnapshot& snap) {
  if (snap.env_type != "uav") {
    throw Error(ErrorCode::invalid_state, "uav: snapshot type mismatch: " + snap.env_type);
  }
  const auto* s = std::any_cast<FullState>(&snap.state);
  if (s == nullptr) {
    throw Error(ErrorCode::invalid_state, "uav: snapshot payload type mismatch");
  }
  config_ = s->config;
  uav_pos_ = s->uav_pos;
  user_pos_ = s->user_pos;
  t_ = s->t;
  rng_ = s->rng;
  action_count_ = 1;
  for (std::uint32_t i = 0; i < config_.num_uavs; ++i) action_count_ *= 5;
  rate_scale_ = config_.rate_scale_bps > 0.0 ? config_.rate_scale_bps
                                             : friis_rate_bps(config_.height_m, config_.link);
}

std::vector<std::uint8_t> UavEnv::serialize_state() const {
  ByteSink sink;
  sink.put_str("uav");
  sink.put_f64(config_.arena_w);
  sink.put_f64(config_.arena_h);
  sink.put_f64(config_.hangar.x);
  sink.put_f64(config_.hangar.y);
  sink.put_u32(config_.num_uavs);
  sink.put_u32(config_.num_users);
  sink.put_u32(config_.horizon);
  sink.put_f64(config_.speed_mps);
  sink.put_f64(config_.step_dt_s);
  sink.put_f64(config_.height_m);
  sink.put_f64(config_.link.tx_power_w);
  sink.put_f64(config_.link.noise_psd_w_per_hz);
  sink.put_f64(config_.link.bandwidth_hz);
  sink.put_f64(config_.link.wavelength_m);
  sink.put_f64(config_.link.tx_gain);
  sink.put_f64(config_.link.rx_gain);
  sink.put_f64(config_.rate_scale_bps);
  sink.put_u8(config_.full_observation ? 1 : 0);
  for (const Point& p : uav_pos_) {
    sink.put_f64(p.x);
    sink.put_f64(p.y);
  }
  for (const Point& p : user_pos_) {
    sink.put_f64(p.x);
    sink.put_f64(p.y);
  }
  sink.put_u32(t_);
  sink.put_str(rng_.state_string());
  return std::move(sink).take();
}

std::unique_ptr<Environment> UavEnv::clone() const { return std::make_unique<UavEnv>(*this); }

}  // namespace twinforge::uav
