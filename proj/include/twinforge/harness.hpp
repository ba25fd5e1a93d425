#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twinforge/trainer.hpp"
#include "twinforge/uav_env.hpp"
#include "twinforge/urllc_env.hpp"

namespace twinforge {

// One experiment: environment, agent, strategy, episode budget, seed grid.
// Parsed from the line-oriented key=value format; every field has a
// documented default (see config_key_help()).
struct ExperimentConfig {
  std::string env_kind = "urllc";  // urllc | uav
  urllc::Config urllc = urllc::default_config();
  uav::Config uav;

  std::string agent_kind = "ql";  // ql | dqn
  QlConfig ql;
  DqnConfig dqn;

  StrategyConfig strategy;

  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint32_t decay_episodes = 0;  // 0 = 60% of the episode budget

  std::uint32_t episodes = 1000;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "out";
  std::uint32_t window = 10;  // moving-average width for the smoothed column

  std::uint32_t divergent_domains = 0;  // 0 = max(strategy.n, strategy.trajectories)
  double twin_state_noise_std = 0.0;
  double twin_reward_noise_std = 0.0;
  double twin_state_bias = 0.0;
  bool log_transitions = false;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
  EpsilonSchedule schedule() const;
  std::size_t divergent_count() const;
  NoiseModel noise() const;
};

// Parses the key=value text. Unknown keys, unparsable values, and absent
// required keys (env, agent) raise UNKNOWN_KEY / TYPE_MISMATCH /
// MISSING_REQUIRED, citing the line.
ExperimentConfig parse_config(const std::string& text);

// Canonical full listing; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// One line per key: name, default, meaning. Embedded in the CLI help.
std::string config_key_help();

// Left-truncated running mean: out[i] = mean(series[max(0,i-window+1) ..= i]).
std::vector<double> moving_average(std::span<const double> series, std::uint32_t window);

struct SeedSeries {
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> rows;
  std::vector<double> smoothed;  // total_reward through the moving average
  bool aborted = false;          // numeric failure; partial rows retained
  std::string error;
};

struct MetricsTable {
  std::vector<SeedSeries> per_seed;
  // Cross-seed statistics of the smoothed reward, over completed seeds only.
  std::vector<double> mean_smoothed;
  std::vector<double> std_smoothed;  // sample std (ddof=1); 0 for a single seed
  std::size_t completed_seeds = 0;
};

// Experiment plumbing, exposed for tests and the acceptance suite.
std::unique_ptr<Environment> make_environment(const ExperimentConfig& config, std::uint64_t seed);
Learner make_learner(const ExperimentConfig& config, const Environment& env, std::uint64_t seed);
std::unique_ptr<TwinSpace> make_twin_space(const ExperimentConfig& config, const Environment& env,
                                           std::uint64_t seed);

// Runs every seed (in parallel up to TWINFORGE_THREADS), writes
// metrics_seed<SEED>.csv, params_seed<SEED>.bin and summary.csv under
// output_dir, and returns the in-memory table. Output bytes are a pure
// function of the config.
MetricsTable run_experiment(const ExperimentConfig& config);

enum class CompareCriterion { auc, episodes_to_fraction };

struct CurveScore {
  std::string label;
  double value = 0.0;
};

struct CompareReport {
  CompareCriterion criterion = CompareCriterion::auc;
  double fraction = 0.95;
  std::vector<CurveScore> ranked;  // best first; ties share a rank
  std::string text() const;
};

double curve_auc(std::span<const double> curve);

// First index whose value reaches fraction * (mean of the final 100 points);
// returns the curve length when the threshold is never met.
std::uint32_t episodes_to_fraction(std::span<const double> curve, double fraction);

using NamedCurve = std::pair<std::string, std::vector<double>>;

CompareReport compare_curves(std::span<const NamedCurve> curves, CompareCriterion criterion,
                             double fraction = 0.95);

// Loads the curve column of a metrics or summary CSV (mean_smoothed when
// present, else smoothed_reward).
NamedCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace twinforge
