#include "twinforge/urllc_env.hpp"

#include <cmath>

namespace twinforge::urllc {

Config default_config() {
  Config c;
  c.aps = {
      {400.0, 250.0, 10e6, 1.0},
      {900.0, 150.0, 50e6, 4.0},
      {1300.0, 300.0, 20e6, 2.0},
      {1800.0, 200.0, 40e6, 3.0},
  };
  return c;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::success: return "SUCCESS";
    case Outcome::fail_no_coverage: return "FAIL_NO_COVERAGE";
    case Outcome::fail_left_coverage: return "FAIL_LEFT_COVERAGE";
    case Outcome::fail_deadline: return "FAIL_DEADLINE";
  }
  return "UNKNOWN";
}

namespace {

void validate(const Config& c) {
  if (c.road_length <= 0.0) throw Error(ErrorCode::config_error, "urllc: road_length must be > 0");
  if (c.vehicle_speed <= 0.0) throw Error(ErrorCode::config_error, "urllc: vehicle_speed must be > 0");
  if (c.aps.empty()) throw Error(ErrorCode::config_error, "urllc: at least one access point required");
  for (const AccessPoint& ap : c.aps) {
    if (ap.radius <= 0.0) throw Error(ErrorCode::config_error, "urllc: ap radius must be > 0");
    if (ap.rate <= 0.0) throw Error(ErrorCode::config_error, "urllc: ap rate must be > 0");
    if (ap.cost_per_second < 0.0) throw Error(ErrorCode::config_error, "urllc: ap cost must be >= 0");
  }
  if (c.task.size_bits <= 0.0) throw Error(ErrorCode::config_error, "urllc: task size must be > 0");
  if (c.task.deadline_s <= 0.0) throw Error(ErrorCode::config_error, "urllc: deadline must be > 0");
  if (c.position_bins < 1) throw Error(ErrorCode::config_error, "urllc: position_bins must be >= 1");
}

}  // namespace

UrllcEnv::UrllcEnv(Config config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed, "env") {
  validate(config_);
}

StateVec UrllcEnv::reset() {
  vehicle_pos_ = rng_.uniform(0.0, config_.road_length * 0.5);
  elapsed_ = 0.0;
  phase_ = Phase::choosing;
  last_outcome_ = Outcome::success;
  return observe();
}

StateVec UrllcEnv::make_observation(bool full) const {
  StateVec s;
  s.values.push_back(vehicle_pos_);
  if (full) {
    for (const AccessPoint& ap : config_.aps) {
      s.values.push_back(ap.position);
      s.values.push_back(ap.radius);
      s.values.push_back(ap.rate);
      s.values.push_back(ap.cost_per_second);
    }
  }
  StateVec pos_only{{vehicle_pos_}, std::nullopt};
  s.discrete_id = encode_discrete(pos_only, config_.position_bins, 0.0, config_.road_length);
  return s;
}

StateVec UrllcEnv::observe() const { return make_observation(config_.full_observation); }

StateVec UrllcEnv::observe_full() const { return make_observation(true); }

std::size_t UrllcEnv::observation_dim() const {
  return config_.full_observation ? 1 + 4 * config_.aps.size() : 1;
}

StepResult UrllcEnv::step(ActionId action) {
  if (phase_ != Phase::choosing) {
    throw Error(ErrorCode::episode_over, "urllc: step after episode end");
  }
  if (action.index >= config_.aps.size()) {
    throw Error(ErrorCode::invalid_state, "urllc: action index out of range");
  }
  const AccessPoint& ap = config_.aps[action.index];
  const double speed = config_.vehicle_speed;
  const double cover_lo = ap.position - ap.radius;
  const double cover_hi = ap.position + ap.radius;
  const double tx_time = config_.task.size_bits / ap.rate;

  Outcome outcome;
  double latency = 0.0;
  double charged_tx = 0.0;  // seconds of actual transmission
  if (cover_hi < vehicle_pos_) {
    // Coverage entirely behind a forward-only vehicle: never starts.
    outcome = Outcome::fail_no_coverage;
  } else {
    const double wait = vehicle_pos_ < cover_lo ? (cover_lo - vehicle_pos_) / speed : 0.0;
    const double start_pos = vehicle_pos_ + wait * speed;
    const double residence = (cover_hi - start_pos) / speed;
    if (tx_time > residence) {
      // Vehicle exits coverage mid-transmission.
      outcome = Outcome::fail_left_coverage;
      latency = wait + residence;
      charged_tx = residence;
    } else if (wait + tx_time > config_.task.deadline_s) {
      outcome = Outcome::fail_deadline;
      latency = wait + tx_time;
      charged_tx = tx_time;
    } else {
      outcome = Outcome::success;
      latency = wait + tx_time;
      charged_tx = tx_time;
    }
  }

  const double reward = (outcome == Outcome::success ? config_.w_success : 0.0) -
                        config_.w_latency * latency -
                        config_.w_cost * ap.cost_per_second * charged_tx;

  elapsed_ = latency;
  vehicle_pos_ += speed * latency;
  phase_ = Phase::done;
  last_outcome_ = outcome;

  StepResult r;
  r.observation = observe();
  r.reward = reward;
  r.terminal = true;
  r.info = static_cast<int>(outcome);
  return r;
}

EnvSnapshot UrllcEnv::snapshot() const {
  FullState s{config_, vehicle_pos_, elapsed_, phase_, last_outcome_, rng_};
  return EnvSnapshot{"urllc", std::move(s)};
}

void UrllcEnv::restore(const EnvSnapshot& snap) {
  if (snap.env_type != "urllc") {
    throw Error(ErrorCode::invalid_state, "urllc: snapshot type mismatch: " + snap.env_type);
  }
  const auto* s = std::any_cast<FullState>(&snap.state);
  if (s == nullptr) {
    throw Error(ErrorCode::invalid_state, "urllc: snapshot payload type mismatch");
  }
  config_ = s->config;
  vehicle_pos_ = s->vehicle_pos;
  elapsed_ = s->elapsed;
  phase_ = s->phase;
  last_outcome_ = s->last_outcome;
  rng_ = s->rng;
}

std::vector<std::uint8_t> UrllcEnv::serialize_state() const {
  ByteSink sink;
  sink.put_str("urllc");
  sink.put_f64(config_.road_length);
  sink.put_f64(config_.vehicle_speed);
  sink.put_u64(config_.aps.size());
  for (const AccessPoint& ap : config_.aps) {
    sink.put_f64(ap.position);
    sink.put_f64(ap.radius);
    sink.put_f64(ap.rate);
    sink.put_f64(ap.cost_per_second);
  }
  sink.put_f64(config_.task.size_bits);
  sink.put_f64(config_.task.deadline_s);
  sink.put_f64(config_.w_success);
  sink.put_f64(config_.w_latency);
  sink.put_f64(config_.w_cost);
  sink.put_u32(config_.position_bins);
  sink.put_u8(config_.full_observation ? 1 : 0);
  sink.put_f64(vehicle_pos_);
  sink.put_f64(elapsed_);
  sink.put_u8(static_cast<std::uint8_t>(phase_));
  sink.put_u8(static_cast<std::uint8_t>(last_outcome_));
  sink.put_str(rng_.state_string());
  return std::move(sink).take();
}

std::unique_ptr<Environment> UrllcEnv::clone() const { return std::make_unique<UrllcEnv>(*this); }

}  // namespace twinforge::urllc
