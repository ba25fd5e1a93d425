#include "twinforge/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

namespace twinforge {

namespace {

// ---------------------------------------------------------------------------
// Config text parsing

std::string trim(std::string_view s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void type_error(int line, const std::string& key, const char* want,
                             const std::string& got) {
  throw Error(ErrorCode::type_mismatch, "line " + std::to_string(line) + ": key '" + key +
                                            "' expects " + want + ", got '" + got + "'");
}

double real_v(const std::string& v, int line, const std::string& key) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) type_error(line, key, "a real number", v);
  return out;
}

std::uint64_t u64_v(const std::string& v, int line, const std::string& key) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    type_error(line, key, "a nonnegative integer", v);
  }
  return out;
}

std::uint32_t u32_v(const std::string& v, int line, const std::string& key) {
  const std::uint64_t out = u64_v(v, line, key);
  if (out > 0xFFFFFFFFull) type_error(line, key, "a 32-bit integer", v);
  return static_cast<std::uint32_t>(out);
}

bool bool_v(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  type_error(line, key, "true|false", v);
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trim(std::string_view(v).substr(start)));
      break;
    }
    parts.push_back(trim(std::string_view(v).substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

std::vector<std::uint64_t> u64_list(const std::string& v, int line, const std::string& key) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split_commas(v)) out.push_back(u64_v(part, line, key));
  return out;
}

std::vector<std::uint32_t> u32_list(const std::string& v, int line, const std::string& key) {
  std::vector<std::uint32_t> out;
  for (const std::string& part : split_commas(v)) out.push_back(u32_v(part, line, key));
  return out;
}

struct ParseState {
  ExperimentConfig cfg;
  bool saw_env = false;
  bool saw_agent = false;
  bool any_ap = false;
  // ap index -> {position, radius, rate, cost}
  std::map<std::uint32_t, std::array<std::optional<double>, 4>> aps;
};

using Setter = void (*)(ParseState&, const std::string&, int, const std::string&);

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"env",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         if (v != "urllc" && v != "uav") type_error(ln, k, "urllc|uav", v);
         st.cfg.env_kind = v;
         st.saw_env = true;
       }},
      {"agent",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         if (v != "ql" && v != "dqn") type_error(ln, k, "ql|dqn", v);
         st.cfg.agent_kind = v;
         st.saw_agent = true;
       }},
      {"episodes", [](ParseState& st, const std::string& v, int ln,
                      const std::string& k) { st.cfg.episodes = u32_v(v, ln, k); }},
      {"seeds", [](ParseState& st, const std::string& v, int ln,
                   const std::string& k) { st.cfg.seeds = u64_list(v, ln, k); }},
      {"output_dir", [](ParseState& st, const std::string& v, int, const std::string&) {
         st.cfg.output_dir = v;
       }},
      {"window", [](ParseState& st, const std::string& v, int ln,
                    const std::string& k) { st.cfg.window = u32_v(v, ln, k); }},
      {"log_transitions", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.log_transitions = bool_v(v, ln, k); }},

      {"schedule.eps_start", [](ParseState& st, const std::string& v, int ln,
                                const std::string& k) { st.cfg.eps_start = real_v(v, ln, k); }},
      {"schedule.eps_end", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.eps_end = real_v(v, ln, k); }},
      {"schedule.decay_episodes",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.decay_episodes = u32_v(v, ln, k);
       }},

      {"strategy.kind",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         if (v == "physical") st.cfg.strategy.kind = StrategyKind::physical;
         else if (v == "multiaction") st.cfg.strategy.kind = StrategyKind::multiaction;
         else if (v == "prediction") st.cfg.strategy.kind = StrategyKind::prediction;
         else type_error(ln, k, "physical|multiaction|prediction", v);
       }},
      {"strategy.n", [](ParseState& st, const std::string& v, int ln,
                        const std::string& k) { st.cfg.strategy.n = u32_v(v, ln, k); }},
      {"strategy.k", [](ParseState& st, const std::string& v, int ln,
                        const std::string& k) { st.cfg.strategy.k = u32_v(v, ln, k); }},
      {"strategy.trajectories",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.strategy.trajectories = u32_v(v, ln, k);
       }},
      {"strategy.sample_mix",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.strategy.sample_mix = real_v(v, ln, k);
       }},
      {"strategy.dt_warmup_episodes",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.strategy.dt_warmup_episodes = u32_v(v, ln, k);
       }},
      {"strategy.fanout_includes_taken",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.strategy.fanout_includes_taken = bool_v(v, ln, k);
       }},

      {"twin.divergent_domains",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.divergent_domains = u32_v(v, ln, k);
       }},
      {"twin.state_noise_std",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.twin_state_noise_std = real_v(v, ln, k);
       }},
      {"twin.reward_noise_std",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.twin_reward_noise_std = real_v(v, ln, k);
       }},
      {"twin.state_bias",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.twin_state_bias = real_v(v, ln, k);
       }},

      {"agent.ql.alpha", [](ParseState& st, const std::string& v, int ln,
                            const std::string& k) { st.cfg.ql.alpha = real_v(v, ln, k); }},
      {"agent.ql.gamma", [](ParseState& st, const std::string& v, int ln,
                            const std::string& k) { st.cfg.ql.gamma = real_v(v, ln, k); }},
      {"agent.ql.init_q", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.ql.init_q = real_v(v, ln, k); }},

      {"agent.dqn.hidden", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.dqn.hidden = u32_list(v, ln, k); }},
      {"agent.dqn.replay_capacity",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.dqn.replay_capacity = u64_v(v, ln, k);
       }},
      {"agent.dqn.batch_size",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.dqn.batch_size = u32_v(v, ln, k);
       }},
      {"agent.dqn.lr", [](ParseState& st, const std::string& v, int ln,
                          const std::string& k) { st.cfg.dqn.lr = real_v(v, ln, k); }},
      {"agent.dqn.target_sync",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.dqn.target_sync_interval = u32_v(v, ln, k);
       }},
      {"agent.dqn.gamma", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.dqn.gamma = real_v(v, ln, k); }},

      {"env.urllc.road_length",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.road_length = real_v(v, ln, k);
       }},
      {"env.urllc.vehicle_speed",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.vehicle_speed = real_v(v, ln, k);
       }},
      {"env.urllc.task_size_bits",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.task.size_bits = real_v(v, ln, k);
       }},
      {"env.urllc.deadline_s",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.task.deadline_s = real_v(v, ln, k);
       }},
      {"env.urllc.w_success",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.w_success = real_v(v, ln, k);
       }},
      {"env.urllc.w_latency",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.w_latency = real_v(v, ln, k);
       }},
      {"env.urllc.w_cost", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.urllc.w_cost = real_v(v, ln, k); }},
      {"env.urllc.position_bins",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.position_bins = u32_v(v, ln, k);
       }},
      {"env.urllc.full_observation",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.urllc.full_observation = bool_v(v, ln, k);
       }},

      {"env.uav.arena_w", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.uav.arena_w = real_v(v, ln, k); }},
      {"env.uav.arena_h", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.uav.arena_h = real_v(v, ln, k); }},
      {"env.uav.hangar_x", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.uav.hangar.x = real_v(v, ln, k); }},
      {"env.uav.hangar_y", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.uav.hangar.y = real_v(v, ln, k); }},
      {"env.uav.num_uavs", [](ParseState& st, const std::string& v, int ln,
                              const std::string& k) { st.cfg.uav.num_uavs = u32_v(v, ln, k); }},
      {"env.uav.num_users", [](ParseState& st, const std::string& v, int ln,
                               const std::string& k) { st.cfg.uav.num_users = u32_v(v, ln, k); }},
      {"env.uav.horizon", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.uav.horizon = u32_v(v, ln, k); }},
      {"env.uav.speed", [](ParseState& st, const std::string& v, int ln,
                           const std::string& k) { st.cfg.uav.speed_mps = real_v(v, ln, k); }},
      {"env.uav.step_dt", [](ParseState& st, const std::string& v, int ln,
                             const std::string& k) { st.cfg.uav.step_dt_s = real_v(v, ln, k); }},
      {"env.uav.height", [](ParseState& st, const std::string& v, int ln,
                            const std::string& k) { st.cfg.uav.height_m = real_v(v, ln, k); }},
      {"env.uav.tx_power_w",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.link.tx_power_w = real_v(v, ln, k);
       }},
      {"env.uav.noise_psd_w_per_hz",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.link.noise_psd_w_per_hz = real_v(v, ln, k);
       }},
      {"env.uav.noise_dbm_per_hz",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.link.noise_psd_w_per_hz = uav::dbm_per_hz_to_w_per_hz(real_v(v, ln, k));
       }},
      {"env.uav.bandwidth_hz",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.link.bandwidth_hz = real_v(v, ln, k);
       }},
      {"env.uav.wavelength_m",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.link.wavelength_m = real_v(v, ln, k);
       }},
      {"env.uav.rate_scale_bps",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.rate_scale_bps = real_v(v, ln, k);
       }},
      {"env.uav.full_observation",
       [](ParseState& st, const std::string& v, int ln, const std::string& k) {
         st.cfg.uav.full_observation = bool_v(v, ln, k);
       }},
  };
  return table;
}

constexpr std::array<const char*, 4> kApFields = {"position", "radius", "rate", "cost"};

// Keys of the form env.urllc.ap<i>.<field>; returns false when the key does
// not match the pattern at all (generic unknown-key handling then applies).
bool try_ap_key(ParseState& st, const std::string& key, const std::string& value, int line) {
  constexpr std::string_view prefix = "env.urllc.ap";
  if (!key.starts_with(prefix)) return false;
  std::string_view rest = std::string_view(key).substr(prefix.size());
  std::size_t digits = 0;
  while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
  if (digits == 0 || digits >= rest.size() || rest[digits] != '.') return false;
  std::uint32_t index = 0;
  std::from_chars(rest.data(), rest.data() + digits, index);
  const std::string_view field = rest.substr(digits + 1);
  for (std::size_t f = 0; f < kApFields.size(); ++f) {
    if (field == kApFields[f]) {
      st.aps[index][f] = real_v(value, line, key);
      st.any_ap = true;
      return true;
    }
  }
  throw Error(ErrorCode::unknown_key,
              "line " + std::to_string(line) + ": unknown key '" + key + "'");
}

void finalize_aps(ParseState& st) {
  if (!st.any_ap) return;
  std::vector<urllc::AccessPoint> aps;
  const std::uint32_t count = st.aps.rbegin()->first + 1;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto it = st.aps.find(i);
    for (std::size_t f = 0; f < kApFields.size(); ++f) {
      if (it == st.aps.end() || !it->second[f]) {
        throw Error(ErrorCode::missing_required, "missing required key 'env.urllc.ap" +
                                                     std::to_string(i) + "." + kApFields[f] + "'");
      }
    }
    aps.push_back(urllc::AccessPoint{*it->second[0], *it->second[1], *it->second[2],
                                     *it->second[3]});
  }
  st.cfg.urllc.aps = std::move(aps);
}

// Shortest decimal that parses back to the same double; config files must
// round-trip exactly, unlike the 6-digit CSV columns.
std::string fmt_exact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join_list(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

const char* bool_str(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------------------
// CSV plumbing

// The exact double a 6-digit CSV cell parses back to; summary statistics are
// computed over these so recomputation from the files agrees.
double csv_round(double v) {
  const std::string s = format_real(v);
  double out = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

unsigned thread_cap() {
  const char* env = std::getenv("TWINFORGE_THREADS");
  if (!env) return 1;
  unsigned v = 0;
  const std::string s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) return 1;
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const SeedSeries& series) {
  std::ofstream out = open_out(path);
  out << "episode,total_reward,smoothed_reward,epsilon,loss_mean,phys_transitions,"
         "twin_transitions\n";
  for (std::size_t i = 0; i < series.rows.size(); ++i) {
    const EpisodeMetrics& r = series.rows[i];
    out << r.episode << ',' << format_real(r.total_reward) << ','
        << format_real(series.smoothed[i]) << ',' << format_real(r.epsilon) << ','
        << format_real(r.loss_mean) << ',' << r.physical_steps << ','
        << (r.fanout_records + r.rollout_steps) << '\n';
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

void run_one_seed(const ExperimentConfig& config, std::uint64_t seed, SeedSeries& out) {
  out.seed = seed;
  const std::filesystem::path dir(config.output_dir);
  std::unique_ptr<Environment> env = make_environment(config, seed);
  std::unique_ptr<TwinSpace> twins = make_twin_space(config, *env, seed);
  Trainer trainer(*env, make_learner(config, *env, seed), config.schedule(), config.strategy,
                  twins.get(), seed);

  std::ofstream log_stream;
  std::unique_ptr<TransitionLogWriter> log;
  if (config.log_transitions) {
    log_stream = open_out(dir / ("transitions_seed" + std::to_string(seed) + ".csv"));
    log = std::make_unique<TransitionLogWriter>(log_stream, env->observation_dim());
    trainer.set_log(log.get());
    twins->set_log(log.get());
  }

  out.rows.reserve(config.episodes);
  try {
    for (std::uint32_t e = 0; e < config.episodes; ++e) out.rows.push_back(trainer.run_episode());
  } catch (const Error& err) {
    if (err.code() != ErrorCode::numeric_error) throw;
    out.aborted = true;
    out.error = err.what();
  }

  std::vector<double> rewards;
  rewards.reserve(out.rows.size());
  for (const EpisodeMetrics& r : out.rows) rewards.push_back(r.total_reward);
  out.smoothed = moving_average(rewards, config.window);
  for (double& v : out.smoothed) v = csv_round(v);

  write_metrics_csv(dir / ("metrics_seed" + std::to_string(seed) + ".csv"), out);
  if (!out.aborted) {
    save_params(trainer.agent_params(), dir / ("params_seed" + std::to_string(seed) + ".bin"));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

void ExperimentConfig::validate() const {
  if (env_kind != "urllc" && env_kind != "uav") {
    throw Error(ErrorCode::config_error, "env must be urllc or uav");
  }
  if (agent_kind != "ql" && agent_kind != "dqn") {
    throw Error(ErrorCode::config_error, "agent must be ql or dqn");
  }
  if (agent_kind == "ql" && env_kind == "uav") {
    throw Error(ErrorCode::config_error,
                "the tabular agent needs a discrete state encoding; env uav has none");
  }
  if (episodes < 1) throw Error(ErrorCode::config_error, "episodes must be >= 1");
  if (seeds.empty()) throw Error(ErrorCode::config_error, "seeds must be nonempty");
  if (window < 1) throw Error(ErrorCode::config_error, "window must be >= 1");
  strategy.validate();
  if (twin_state_noise_std < 0.0 || twin_reward_noise_std < 0.0) {
    throw Error(ErrorCode::config_error, "noise stds must be >= 0");
  }
  if (!(eps_start >= eps_end) || eps_start > 1.0 || eps_end < 0.0) {
    throw Error(ErrorCode::config_error, "need 1 >= eps_start >= eps_end >= 0");
  }
}

EpsilonSchedule ExperimentConfig::schedule() const {
  std::uint32_t decay = decay_episodes;
  if (decay == 0) {
    decay = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(std::llround(0.6 * static_cast<double>(episodes))));
  }
  return EpsilonSchedule{eps_start, eps_end, decay};
}

std::size_t ExperimentConfig::divergent_count() const {
  if (divergent_domains > 0) return divergent_domains;
  return std::max<std::size_t>({strategy.n, strategy.trajectories, 1});
}

NoiseModel ExperimentConfig::noise() const {
  NoiseModel nm;
  if (twin_state_noise_std != 0.0) nm.state_noise_std = {twin_state_noise_std};
  nm.reward_noise_std = twin_reward_noise_std;
  if (twin_state_bias != 0.0) nm.bias = {twin_state_bias};
  return nm;
}

ExperimentConfig parse_config(const std::string& text) {
  ParseState st;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::type_mismatch,
                  "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::type_mismatch,
                  "line " + std::to_string(line_no) + ": empty key before '='");
    }
    if (try_ap_key(st, key, value, line_no)) continue;
    const auto it = key_table().find(key);
    if (it == key_table().end()) {
      throw Error(ErrorCode::unknown_key,
                  "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(st, value, line_no, key);
  }
  if (!st.saw_env) throw Error(ErrorCode::missing_required, "missing required key 'env'");
  if (!st.saw_agent) throw Error(ErrorCode::missing_required, "missing required key 'agent'");
  finalize_aps(st);
  st.cfg.validate();
  return st.cfg;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&os](std::string_view key, const std::string& value) {
    os << key << '=' << value << '\n';
  };
  kv("env", c.env_kind);
  kv("agent", c.agent_kind);
  kv("episodes", std::to_string(c.episodes));
  kv("seeds", join_list(c.seeds));
  kv("output_dir", c.output_dir);
  kv("window", std::to_string(c.window));
  kv("log_transitions", bool_str(c.log_transitions));

  kv("schedule.eps_start", fmt_exact(c.eps_start));
  kv("schedule.eps_end", fmt_exact(c.eps_end));
  kv("schedule.decay_episodes", std::to_string(c.decay_episodes));

  kv("strategy.kind", strategy_kind_name(c.strategy.kind));
  kv("strategy.n", std::to_string(c.strategy.n));
  kv("strategy.k", std::to_string(c.strategy.k));
  kv("strategy.trajectories", std::to_string(c.strategy.trajectories));
  kv("strategy.sample_mix", fmt_exact(c.strategy.sample_mix));
  kv("strategy.dt_warmup_episodes", std::to_string(c.strategy.dt_warmup_episodes));
  kv("strategy.fanout_includes_taken", bool_str(c.strategy.fanout_includes_taken));

  kv("twin.divergent_domains", std::to_string(c.divergent_domains));
  kv("twin.state_noise_std", fmt_exact(c.twin_state_noise_std));
  kv("twin.reward_noise_std", fmt_exact(c.twin_reward_noise_std));
  kv("twin.state_bias", fmt_exact(c.twin_state_bias));

  kv("agent.ql.alpha", fmt_exact(c.ql.alpha));
  kv("agent.ql.gamma", fmt_exact(c.ql.gamma));
  kv("agent.ql.init_q", fmt_exact(c.ql.init_q));

  kv("agent.dqn.hidden", join_list(c.dqn.hidden));
  kv("agent.dqn.replay_capacity", std::to_string(c.dqn.replay_capacity));
  kv("agent.dqn.batch_size", std::to_string(c.dqn.batch_size));
  kv("agent.dqn.lr", fmt_exact(c.dqn.lr));
  kv("agent.dqn.target_sync", std::to_string(c.dqn.target_sync_interval));
  kv("agent.dqn.gamma", fmt_exact(c.dqn.gamma));

  kv("env.urllc.road_length", fmt_exact(c.urllc.road_length));
  kv("env.urllc.vehicle_speed", fmt_exact(c.urllc.vehicle_speed));
  kv("env.urllc.task_size_bits", fmt_exact(c.urllc.task.size_bits));
  kv("env.urllc.deadline_s", fmt_exact(c.urllc.task.deadline_s));
  kv("env.urllc.w_success", fmt_exact(c.urllc.w_success));
  kv("env.urllc.w_latency", fmt_exact(c.urllc.w_latency));
  kv("env.urllc.w_cost", fmt_exact(c.urllc.w_cost));
  kv("env.urllc.position_bins", std::to_string(c.urllc.position_bins));
  kv("env.urllc.full_observation", bool_str(c.urllc.full_observation));
  for (std::size_t i = 0; i < c.urllc.aps.size(); ++i) {
    const std::string prefix = "env.urllc.ap" + std::to_string(i) + ".";
    kv(prefix + "position", fmt_exact(c.urllc.aps[i].position));
    kv(prefix + "radius", fmt_exact(c.urllc.aps[i].radius));
    kv(prefix + "rate", fmt_exact(c.urllc.aps[i].rate));
    kv(prefix + "cost", fmt_exact(c.urllc.aps[i].cost_per_second));
  }

  kv("env.uav.arena_w", fmt_exact(c.uav.arena_w));
  kv("env.uav.arena_h", fmt_exact(c.uav.arena_h));
  kv("env.uav.hangar_x", fmt_exact(c.uav.hangar.x));
  kv("env.uav.hangar_y", fmt_exact(c.uav.hangar.y));
  kv("env.uav.num_uavs", std::to_string(c.uav.num_uavs));
  kv("env.uav.num_users", std::to_string(c.uav.num_users));
  kv("env.uav.horizon", std::to_string(c.uav.horizon));
  kv("env.uav.speed", fmt_exact(c.uav.speed_mps));
  kv("env.uav.step_dt", fmt_exact(c.uav.step_dt_s));
  kv("env.uav.height", fmt_exact(c.uav.height_m));
  kv("env.uav.tx_power_w", fmt_exact(c.uav.link.tx_power_w));
  kv("env.uav.noise_psd_w_per_hz", fmt_exact(c.uav.link.noise_psd_w_per_hz));
  kv("env.uav.bandwidth_hz", fmt_exact(c.uav.link.bandwidth_hz));
  kv("env.uav.wavelength_m", fmt_exact(c.uav.link.wavelength_m));
  kv("env.uav.rate_scale_bps", fmt_exact(c.uav.rate_scale_bps));
  kv("env.uav.full_observation", bool_str(c.uav.full_observation));
  return os.str();
}

std::string config_key_help() {
  return R"(experiment config keys (key=value per line; # starts a comment)

required:
  env                          urllc | uav
  agent                        ql | dqn (ql needs a discrete-state env: urllc)

run control (defaults in parentheses):
  episodes (1000)              episodes per seed
  seeds (1)                    comma-separated 64-bit seeds
  output_dir (out)             directory for metrics/summary/params files
  window (10)                  moving-average window for the smoothed column
  log_transitions (false)      also write transitions_seed<SEED>.csv

exploration schedule:
  schedule.eps_start (1)       initial exploration probability
  schedule.eps_end (0.05)      final exploration probability
  schedule.decay_episodes (0)  linear-decay length; 0 = 60% of episodes

strategy:
  strategy.kind (physical)     physical | multiaction | prediction
  strategy.n (2)               multiaction: actions tried per state (clamped
                               to the action count; must be >= 2)
  strategy.k (1)               prediction: rollout depth
  strategy.trajectories (4)    prediction: trajectories averaged per target
  strategy.sample_mix (0.5)    twin fraction of each DQN minibatch
  strategy.dt_warmup_episodes (0)  episodes before twin strategies engage
  strategy.fanout_includes_taken (true)  taken action's mirror counts in n

digital space:
  twin.divergent_domains (0)   domain count; 0 = max(strategy.n, trajectories)
  twin.state_noise_std (0)     additive Gaussian std on twin next-states
  twin.reward_noise_std (0)    additive Gaussian std on twin rewards
  twin.state_bias (0)          additive offset on twin next-states

tabular agent:
  agent.ql.alpha (0.1)         learning rate
  agent.ql.gamma (0.95)        discount
  agent.ql.init_q (0)          initial Q value

deep agent:
  agent.dqn.hidden (128,128)   hidden layer widths
  agent.dqn.replay_capacity (50000)
  agent.dqn.batch_size (64)
  agent.dqn.lr (0.001)
  agent.dqn.target_sync (500)  updates between target-network copies
  agent.dqn.gamma (0.95)

urllc environment:
  env.urllc.road_length (2000)     meters
  env.urllc.vehicle_speed (20)     m/s, +x only
  env.urllc.task_size_bits (2e+07)
  env.urllc.deadline_s (6)
  env.urllc.w_success (100)        reward weights
  env.urllc.w_latency (5)
  env.urllc.w_cost (1)
  env.urllc.position_bins (100)    discrete states for the tabular agent
  env.urllc.full_observation (false)  include AP fields in observations
  env.urllc.ap<i>.position / .radius / .rate / .cost
                               defining any AP key replaces the default
                               4-AP set; indices must be 0..K-1, all four
                               fields per AP (defaults: 4 APs at
                               400/900/1300/1800 m)

uav environment:
  env.uav.arena_w (100)        meters
  env.uav.arena_h (100)
  env.uav.hangar_x (0)         shared start position
  env.uav.hangar_y (0)
  env.uav.num_uavs (4)
  env.uav.num_users (10)
  env.uav.horizon (100)        steps per episode
  env.uav.speed (8)            m/s
  env.uav.step_dt (1)          seconds per step
  env.uav.height (5)           flight height, meters
  env.uav.tx_power_w (0.1)
  env.uav.noise_psd_w_per_hz (3.98107e-21)
  env.uav.noise_dbm_per_hz     convenience setter for the same field (-174)
  env.uav.bandwidth_hz (1e+06)
  env.uav.wavelength_m (0.125)
  env.uav.rate_scale_bps (0)   reward normalizer; 0 = rate at flight height
  env.uav.full_observation (false)  include user positions in observations
)";
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<double> moving_average(std::span<const double> series, std::uint32_t window) {
  if (window < 1) throw Error(ErrorCode::config_error, "moving average window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.env_kind == "urllc") return std::make_unique<urllc::UrllcEnv>(config.urllc, seed);
  if (config.env_kind == "uav") return std::make_unique<uav::UavEnv>(config.uav, seed);
  throw Error(ErrorCode::config_error, "unknown environment '" + config.env_kind + "'");
}

Learner make_learner(const ExperimentConfig& config, const Environment& env, std::uint64_t seed) {
  if (config.agent_kind == "ql") return make_ql_learner(env, config.ql);
  if (config.agent_kind == "dqn") return make_dqn_learner(env, config.dqn, seed);
  throw Error(ErrorCode::config_error, "unknown agent '" + config.agent_kind + "'");
}

std::unique_ptr<TwinSpace> make_twin_space(const ExperimentConfig& config, const Environment& env,
                                           std::uint64_t seed) {
  return std::make_unique<TwinSpace>(env, config.divergent_count(), config.noise(), seed);
}

MetricsTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::io_error, "cannot create output directory " + dir.string());
  }

  MetricsTable table;
  const std::size_t count = config.seeds.size();
  table.per_seed.resize(count);
  std::vector<std::exception_ptr> fatal(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        run_one_seed(config, config.seeds[i], table.per_seed[i]);
      } catch (...) {
        fatal[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(thread_cap(), count);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (fatal[i]) std::rethrow_exception(fatal[i]);
  }

  std::vector<const SeedSeries*> completed;
  for (const SeedSeries& s : table.per_seed) {
    if (!s.aborted) completed.push_back(&s);
  }
  table.completed_seeds = completed.size();
  if (!completed.empty()) {
    table.mean_smoothed.resize(config.episodes);
    table.std_smoothed.resize(config.episodes);
    for (std::uint32_t e = 0; e < config.episodes; ++e) {
      double sum = 0.0;
      for (const SeedSeries* s : completed) sum += s->smoothed[e];
      const double mean = sum / static_cast<double>(completed.size());
      double sq = 0.0;
      for (const SeedSeries* s : completed) {
        const double d = s->smoothed[e] - mean;
        sq += d * d;
      }
      table.mean_smoothed[e] = mean;
      table.std_smoothed[e] =
          completed.size() > 1 ? std::sqrt(sq / static_cast<double>(completed.size() - 1)) : 0.0;
    }
  }

  std::ofstream out = open_out(dir / "summary.csv");
  out << "episode,mean_smoothed,std_smoothed,seeds\n";
  for (std::size_t e = 0; e < table.mean_smoothed.size(); ++e) {
    out << e << ',' << format_real(table.mean_smoothed[e]) << ','
        << format_real(table.std_smoothed[e]) << ',' << table.completed_seeds << '\n';
  }
  for (const SeedSeries& s : table.per_seed) {
    if (s.aborted) out << "# aborted seed " << s.seed << ": " << s.error << '\n';
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed for summary.csv");
  return table;
}

// ---------------------------------------------------------------------------
// Curve comparison

double curve_auc(std::span<const double> curve) {
  double sum = 0.0;
  for (double v : curve) sum += v;
  return sum;
}

std::uint32_t episodes_to_fraction(std::span<const double> curve, double fraction) {
  if (curve.empty()) return 0;
  const std::size_t tail = std::min<std::size_t>(100, curve.size());
  double final_mean = 0.0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) final_mean += curve[i];
  final_mean /= static_cast<double>(tail);
  const double target = fraction * final_mean;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] >= target) return static_cast<std::uint32_t>(i);
  }
  return static_cast<std::uint32_t>(curve.size());
}

CompareReport compare_curves(std::span<const NamedCurve> curves, CompareCriterion criterion,
                             double fraction) {
  if (curves.empty()) throw Error(ErrorCode::empty_group, "compare: no curves given");
  const std::size_t len = curves.front().second.size();
  for (const NamedCurve& c : curves) {
    if (c.second.size() != len) {
      throw Error(ErrorCode::config_error, "compare: curve lengths differ ('" + c.first + "' has " +
                                               std::to_string(c.second.size()) + ", expected " +
                                               std::to_string(len) + ")");
    }
  }
  CompareReport report;
  report.criterion = criterion;
  report.fraction = fraction;
  for (const NamedCurve& c : curves) {
    const double value = criterion == CompareCriterion::auc
                             ? curve_auc(c.second)
                             : static_cast<double>(episodes_to_fraction(c.second, fraction));
    report.ranked.push_back(CurveScore{c.first, value});
  }
  const bool higher_better = criterion == CompareCriterion::auc;
  std::stable_sort(report.ranked.begin(), report.ranked.end(),
                   [higher_better](const CurveScore& a, const CurveScore& b) {
                     return higher_better ? a.value > b.value : a.value < b.value;
                   });
  return report;
}

std::string CompareReport::text() const {
  std::ostringstream os;
  if (criterion == CompareCriterion::auc) {
    os << "criterion: auc\n";
  } else {
    os << "criterion: episodes_to_fraction(" << format_real(fraction) << ")\n";
  }
  std::size_t rank = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const bool tie = i > 0 && ranked[i].value == ranked[i - 1].value;
    if (!tie) rank = i + 1;
    os << rank << ". " << ranked[i].label << " = " << format_real(ranked[i].value);
    if (tie) os << " (tie)";
    os << '\n';
  }
  return os.str();
}

NamedCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string line;
  std::string header;
  while (std::getline(in, line)) {
    if (!trim(line).empty() && trim(line)[0] != '#') {
      header = trim(line);
      break;
    }
  }
  const std::vector<std::string> columns = split_commas(header);
  std::size_t col = columns.size();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == "mean_smoothed") {
      col = i;
      break;
    }
  }
  if (col == columns.size()) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == "smoothed_reward") {
        col = i;
        break;
      }
    }
  }
  if (col == columns.size()) {
    throw Error(ErrorCode::config_error,
                path.string() + ": no mean_smoothed or smoothed_reward column");
  }
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty() || row[0] == '#') continue;
    const std::vector<std::string> cells = split_commas(row);
    if (cells.size() != columns.size()) {
      throw Error(ErrorCode::type_mismatch, path.string() + " line " + std::to_string(line_no) +
                                                ": expected " + std::to_string(columns.size()) +
                                                " cells");
    }
    values.push_back(real_v(cells[col], line_no, columns[col]));
  }
  return NamedCurve{path.string(), std::move(values)};
}

}  // namespace twinforge
