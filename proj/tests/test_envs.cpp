#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "twinforge/uav_env.hpp"
#include "twinforge/urllc_env.hpp"

using namespace twinforge;

// ---------------------------------------------------------------------------
// urllc

namespace {

struct UrllcOracle {
  int outcome;  // matches Outcome enum order
  double reward;
};

// Independent re-derivation of the single-decision episode: the vehicle moves
// forward at constant speed, waits to enter coverage, then transmits.
UrllcOracle urllc_expected(const urllc::Config& c, double pos, std::uint32_t action) {
  const urllc::AccessPoint& ap = c.aps[action];
  const double lo = ap.position - ap.radius;
  const double hi = ap.position + ap.radius;
  const double tx = c.task.size_bits / ap.rate;
  if (hi < pos) return {1, 0.0};  // coverage entirely behind
  const double wait = pos < lo ? (lo - pos) / c.vehicle_speed : 0.0;
  const double residence = (hi - (pos + wait * c.vehicle_speed)) / c.vehicle_speed;
  if (tx > residence) {
    return {2, -c.w_latency * (wait + residence) - c.w_cost * ap.cost_per_second * residence};
  }
  if (wait + tx > c.task.deadline_s) {
    return {3, -c.w_latency * (wait + tx) - c.w_cost * ap.cost_per_second * tx};
  }
  return {0, c.w_success - c.w_latency * (wait + tx) - c.w_cost * ap.cost_per_second * tx};
}

}  // namespace

TEST_CASE("urllc rewards match the analytic model for every outcome class") {
  const urllc::Config cfg = urllc::default_config();
  int seen[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (std::uint32_t a = 0; a < 4; ++a) {
      urllc::UrllcEnv env(cfg, seed);
      const StateVec s = env.reset();
      const double pos = s.values[0];
      const UrllcOracle expect = urllc_expected(cfg, pos, a);
      const StepResult r = env.step(ActionId{a});
      REQUIRE(r.info == expect.outcome);
      CHECK(r.reward == doctest::Approx(expect.reward).epsilon(1e-12));
      CHECK(r.terminal);
      ++seen[expect.outcome];
    }
  }
  // all four outcome classes must actually be exercised
  for (int i = 0; i < 4; ++i) CHECK(seen[i] > 0);
}

TEST_CASE("urllc hand-picked outcome values") {
  // AP0 covers [150, 650] at 10 Mb/s; from 100 m: wait 2.5 s, tx 2 s,
  // reward 100 - 5*4.5 - 1*1*2 = 75.5
  const UrllcOracle a = urllc_expected(urllc::default_config(), 100.0, 0);
  CHECK(a.outcome == 0);
  CHECK(a.reward == doctest::Approx(75.5).epsilon(1e-12));
  // AP1 covers [750, 1050]; from 100 m the wait alone blows the 6 s deadline
  const UrllcOracle b = urllc_expected(urllc::default_config(), 100.0, 1);
  CHECK(b.outcome == 3);
  CHECK(b.reward == doctest::Approx(-166.1).epsilon(1e-12));
  // from 700 m AP0's coverage is entirely behind the vehicle
  const UrllcOracle c = urllc_expected(urllc::default_config(), 700.0, 0);
  CHECK(c.outcome == 1);
  CHECK(c.reward == 0.0);
  // from 1045 m only 0.25 s of AP1 coverage remains but tx takes 0.4 s
  const UrllcOracle d = urllc_expected(urllc::default_config(), 1045.0, 1);
  CHECK(d.outcome == 2);
  CHECK(d.reward == doctest::Approx(-2.25).epsilon(1e-12));
}

TEST_CASE("urllc reset draws from the first half of the road") {
  urllc::UrllcEnv env(urllc::default_config(), 3);
  for (int i = 0; i < 200; ++i) {
    const StateVec s = env.reset();
    CHECK(s.values[0] >= 0.0);
    CHECK(s.values[0] < 1000.0);
    REQUIRE(s.discrete_id.has_value());
    CHECK(*s.discrete_id == encode_discrete(s, 100, 0.0, 2000.0));
    CHECK(*s.discrete_id < 50);  // first half of the road -> first half of the bins
  }
}

TEST_CASE("urllc env contract basics") {
  urllc::UrllcEnv env(urllc::default_config(), 1);
  CHECK(env.action_count() == 4);
  CHECK(env.observation_dim() == 1);
  CHECK(env.discrete_state_count() == std::optional<std::uint32_t>{100});
  CHECK(env.type_name() == "urllc");
  CHECK(env.reset().values.size() == 1);
  CHECK_FALSE(env.done());
  CHECK_THROWS_AS(env.step(ActionId{4}), Error);
  (void)env.step(ActionId{0});
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(ActionId{0}), Error);  // single-decision episode
}

TEST_CASE("urllc full observation appends the AP table") {
  urllc::Config cfg = urllc::default_config();
  cfg.full_observation = true;
  urllc::UrllcEnv env(cfg, 1);
  CHECK(env.observation_dim() == 17);
  const StateVec s = env.reset();
  REQUIRE(s.values.size() == 17);
  CHECK(s.values[1] == 400.0);   // ap0 position
  CHECK(s.values[2] == 250.0);   // ap0 radius
  CHECK(s.values[16] == 3.0);    // ap3 cost

  urllc::UrllcEnv masked(urllc::default_config(), 1);
  masked.reset();
  CHECK(masked.observe().values.size() == 1);
  CHECK(masked.observe_full().values.size() == 17);
}

TEST_CASE("urllc snapshot/restore replays the same episode") {
  urllc::UrllcEnv env(urllc::default_config(), 5);
  env.reset();
  const EnvSnapshot snap = env.snapshot();
  const std::vector<std::uint8_t> bytes = env.serialize_state();
  const StepResult first = env.step(ActionId{2});

  env.restore(snap);
  CHECK(env.serialize_state() == bytes);
  const StepResult replay = env.step(ActionId{2});
  CHECK(replay.reward == first.reward);
  CHECK(replay.observation == first.observation);
  CHECK(replay.terminal == first.terminal);

  EnvSnapshot wrong = snap;
  wrong.env_type = "uav";
  CHECK_THROWS_AS(env.restore(wrong), Error);
}

TEST_CASE("urllc clone is independent") {
  urllc::UrllcEnv env(urllc::default_config(), 6);
  env.reset();
  const std::unique_ptr<Environment> copy = env.clone();
  const std::vector<std::uint8_t> before = copy->serialize_state();
  (void)env.step(ActionId{1});
  CHECK(copy->serialize_state() == before);
  CHECK(env.serialize_state() != before);
}

TEST_CASE("urllc config validation") {
  urllc::Config cfg = urllc::default_config();
  cfg.road_length = 0.0;
  CHECK_THROWS_AS(urllc::UrllcEnv(cfg, 1), Error);
  cfg = urllc::default_config();
  cfg.aps.clear();
  CHECK_THROWS_AS(urllc::UrllcEnv(cfg, 1), Error);
  cfg = urllc::default_config();
  cfg.aps[0].rate = -1.0;
  CHECK_THROWS_AS(urllc::UrllcEnv(cfg, 1), Error);
  cfg = urllc::default_config();
  cfg.position_bins = 0;
  CHECK_THROWS_AS(urllc::UrllcEnv(cfg, 1), Error);
}

// ---------------------------------------------------------------------------
// uav

TEST_CASE("friis received power matches the closed form") {
  const uav::LinkBudget lb = uav::default_link_budget();
  // Pt * (lambda / (4 pi d))^2 evaluated independently
  const double lam = 0.125;
  for (double d : {5.0, 17.3, 100.0}) {
    const double expect = 0.1 * std::pow(lam / (4.0 * std::numbers::pi * d), 2.0);
    CHECK(uav::friis_received_power_w(d, lb) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(uav::friis_received_power_w(5.0, lb) ==
        doctest::Approx(3.957858736349173e-7).epsilon(1e-12));
  CHECK_THROWS_AS(uav::friis_received_power_w(0.0, lb), Error);
  CHECK_THROWS_AS(uav::friis_received_power_w(-2.0, lb), Error);
}

TEST_CASE("friis rate at 5 m is about 26.6 Mb/s") {
  const uav::LinkBudget lb = uav::default_link_budget();
  const double rate = uav::friis_rate_bps(5.0, lb);
  CHECK(rate == doctest::Approx(26.6e6).epsilon(0.005));
  // independent recomputation through Shannon capacity
  const double noise_w = lb.noise_psd_w_per_hz * lb.bandwidth_hz;
  const double snr = 3.957858736349173e-7 / noise_w;
  CHECK(rate == doctest::Approx(1e6 * std::log2(1.0 + snr)).epsilon(1e-9));
}

TEST_CASE("noise floor conversion") {
  CHECK(uav::dbm_per_hz_to_w_per_hz(-174.0) == doctest::Approx(3.9810717055e-21).epsilon(1e-9));
  CHECK(uav::dbm_per_hz_to_w_per_hz(0.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(uav::dbm_per_hz_to_w_per_hz(30.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("joint action encoding round-trips all 625 indices") {
  for (std::uint32_t i = 0; i < 625; ++i) {
    const std::vector<uav::Move> moves = uav::decode_joint_action(i, 4);
    REQUIRE(moves.size() == 4);
    CHECK(uav::encode_joint_action(moves) == i);
  }
  CHECK_THROWS_AS(uav::decode_joint_action(625, 4), Error);
  // base-5 digit order: least significant digit steers uav 0
  const std::vector<uav::Move> m = uav::decode_joint_action(7, 4);  // 7 = 2 + 1*5
  CHECK(m[0] == uav::Move::neg_x);
  CHECK(m[1] == uav::Move::pos_x);
  CHECK(m[2] == uav::Move::hover);
}

TEST_CASE("uav steps move and clamp to the arena") {
  uav::Config cfg;
  cfg.num_uavs = 1;
  cfg.num_users = 3;
  cfg.horizon = 5;
  uav::UavEnv env(cfg, 2);
  CHECK(env.action_count() == 5);
  env.reset();
  CHECK(env.uav_positions()[0].x == 0.0);

  // pos_x from the hangar: 8 m/s * 1 s
  StepResult r = env.step(ActionId{static_cast<std::uint32_t>(uav::Move::pos_x)});
  CHECK(env.uav_positions()[0].x == doctest::Approx(8.0));
  CHECK(r.observation.values[0] == doctest::Approx(0.08));  // normalized by arena width

  // neg_y at the lower edge clamps to 0
  (void)env.step(ActionId{static_cast<std::uint32_t>(uav::Move::neg_y)});
  CHECK(env.uav_positions()[0].y == 0.0);
  CHECK(env.step_index() == 2);
}

TEST_CASE("uav reward is the normalized mean best-uav rate") {
  uav::Config cfg;
  cfg.num_uavs = 2;
  cfg.num_users = 4;
  uav::UavEnv env(cfg, 9);
  env.reset();
  const StepResult r = env.step(ActionId{0});  // everyone hovers

  // independent recomputation from the exposed layout
  double sum = 0.0;
  for (const uav::Point& user : env.user_positions()) {
    double best = 0.0;
    for (const uav::Point& up : env.uav_positions()) {
      const double d = std::sqrt((user.x - up.x) * (user.x - up.x) +
                                 (user.y - up.y) * (user.y - up.y) +
                                 cfg.height_m * cfg.height_m);
      best = std::max(best, uav::friis_rate_bps(d, cfg.link));
    }
    sum += best;
  }
  const double expect = sum / 4.0 / env.rate_scale_bps();
  CHECK(r.reward == doctest::Approx(expect).epsilon(1e-12));
  CHECK(env.rate_scale_bps() == doctest::Approx(uav::friis_rate_bps(5.0, cfg.link)).epsilon(1e-12));
}

TEST_CASE("uav episode runs to the horizon") {
  uav::Config cfg;
  cfg.num_uavs = 1;
  cfg.num_users = 2;
  cfg.horizon = 4;
  uav::UavEnv env(cfg, 4);
  CHECK(env.done());  // not in an episode until reset
  env.reset();
  for (int t = 0; t < 4; ++t) {
    CHECK_FALSE(env.done());
    const StepResult r = env.step(ActionId{1});
    CHECK(r.terminal == (t == 3));
  }
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(ActionId{0}), Error);
  CHECK(env.discrete_state_count() == std::nullopt);
}

TEST_CASE("uav user layout is fixed for the env lifetime and seed-determined") {
  uav::Config cfg;
  cfg.num_users = 6;
  const auto user_vec = [](const uav::UavEnv& env) {
    const std::span<const uav::Point> s = env.user_positions();
    return std::vector<uav::Point>(s.begin(), s.end());
  };
  uav::UavEnv a(cfg, 11);
  const std::vector<uav::Point> users = user_vec(a);
  a.reset();
  (void)a.step(ActionId{3});
  a.reset();
  CHECK(user_vec(a) == users);

  uav::UavEnv same(cfg, 11);
  CHECK(user_vec(same) == users);
  uav::UavEnv other(cfg, 12);
  CHECK_FALSE(user_vec(other) == users);
  for (const uav::Point& p : users) {
    CHECK(p.x >= 0.0);
    CHECK(p.x < cfg.arena_w);
    CHECK(p.y >= 0.0);
    CHECK(p.y < cfg.arena_h);
  }
}

TEST_CASE("uav snapshot/restore and clone") {
  uav::Config cfg;
  cfg.num_uavs = 2;
  cfg.horizon = 10;
  uav::UavEnv env(cfg, 13);
  env.reset();
  (void)env.step(ActionId{6});
  const EnvSnapshot snap = env.snapshot();
  const std::vector<std::uint8_t> bytes = env.serialize_state();
  const StepResult next = env.step(ActionId{12});

  env.restore(snap);
  CHECK(env.serialize_state() == bytes);
  const StepResult replay = env.step(ActionId{12});
  CHECK(replay.reward == next.reward);
  CHECK(replay.observation == next.observation);

  const std::unique_ptr<Environment> copy = env.clone();
  CHECK(copy->serialize_state() == env.serialize_state());
  (void)env.step(ActionId{0});
  CHECK_FALSE(copy->serialize_state() == env.serialize_state());
}

TEST_CASE("uav full observation appends user positions") {
  uav::Config cfg;
  cfg.num_uavs = 2;
  cfg.num_users = 3;
  uav::UavEnv masked(cfg, 1);
  CHECK(masked.observation_dim() == 4);
  CHECK(masked.observe_full().values.size() == 10);
  cfg.full_observation = true;
  uav::UavEnv full(cfg, 1);
  CHECK(full.observation_dim() == 10);
  CHECK(full.observe().values.size() == 10);
}

TEST_CASE("uav config validation") {
  uav::Config cfg;
  cfg.num_uavs = 0;
  CHECK_THROWS_AS(uav::UavEnv(cfg, 1), Error);
  cfg = uav::Config{};
  cfg.num_uavs = 9;  // joint action space would overflow the table budget
  CHECK_THROWS_AS(uav::UavEnv(cfg, 1), Error);
  cfg = uav::Config{};
  cfg.hangar = {150.0, 0.0};
  CHECK_THROWS_AS(uav::UavEnv(cfg, 1), Error);
  cfg = uav::Config{};
  cfg.height_m = 0.0;
  CHECK_THROWS_AS(uav::UavEnv(cfg, 1), Error);
  cfg = uav::Config{};
  cfg.link.bandwidth_hz = -1.0;
  CHECK_THROWS_AS(uav::UavEnv(cfg, 1), Error);
}
