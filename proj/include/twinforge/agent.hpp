#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "twinforge/core.hpp"
#include "twinforge/rng.hpp"

namespace twinforge {

// ---------------------------------------------------------------------------
// Tabular Q-learning

struct QTable {
  std::uint32_t state_count = 0;
  std::uint32_t action_count = 0;
  std::vector<double> values;  // state-major, state_count * action_count
  double alpha = 0.1;
  double gamma = 0.95;

  QTable() = default;
  QTable(std::uint32_t states, std::uint32_t actions, double alpha, double gamma,
         double init_q = 0.0);

  double at(std::uint32_t s, std::uint32_t a) const { return values[s * action_count + a]; }
  double& at(std::uint32_t s, std::uint32_t a) { return values[s * action_count + a]; }

  bool operator==(const QTable&) const = default;
};

// Lowest index wins ties.
std::uint32_t argmax_index(std::span<const double> row);

// Epsilon-greedy over one Q row. Consumes one uniform draw always and one
// integer draw on the exploration branch.
ActionId ql_select(const QTable& q, std::uint32_t state, double eps, RngStream& rng);

// One tabular backup. Without an override the target is the standard
// r + gamma * max_a Q(s', a) * (1 - terminal). Returns the pre-update TD
// error target - Q(s, a).
double ql_update(QTable& q, const Transition& t, std::optional<double> target_override);

// ---------------------------------------------------------------------------
// Small fully-connected network (rectifier hidden layers, identity output)

struct MlpParams {
  std::vector<std::uint32_t> layer_sizes;       // [input, h..., output]
  std::vector<std::vector<double>> weights;     // per layer, row-major out x in
  std::vector<std::vector<double>> biases;      // per layer, out

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }

  bool operator==(const MlpParams&) const = default;
};

MlpParams mlp_zero_init(std::span<const std::uint32_t> layer_sizes);
MlpParams mlp_random_init(std::span<const std::uint32_t> layer_sizes, RngStream& rng);

// Reusable per-layer activation storage for forward/backward passes.
struct MlpScratch {
  std::vector<std::vector<double>> activations;  // activations[0] = input copy
  std::vector<std::vector<double>> deltas;
};

void mlp_forward(const MlpParams& p, std::span<const double> input, MlpScratch& scratch);
std::vector<double> mlp_forward(const MlpParams& p, const StateVec& s);

struct MlpGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

// One (state, taken action, target) example of the TD regression batch.
struct MlpBatchEntry {
  const std::vector<double>* state = nullptr;
  std::uint32_t action = 0;
  double target = 0.0;
};

// Mean-squared TD loss over the taken actions only; accumulates dLoss/dparams
// into `grads` (which is resized and zeroed). Returns the loss.
double mlp_loss_and_gradients(const MlpParams& p, std::span<const MlpBatchEntry> batch,
                              MlpGrads& grads, MlpScratch& scratch);

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  std::uint64_t step = 0;
};

// Adam with fixed beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
void adam_apply(MlpParams& p, AdamState& state, const MlpGrads& grads, double lr);

// ---------------------------------------------------------------------------
// Agent parameter bundles

using AgentParams = std::variant<QTable, MlpParams>;

// Deep value copy; mutating the copy never affects the source.
AgentParams copy_params(const AgentParams& src);

// Epsilon-greedy action from a parameter bundle. Tabular parameters require
// the observation to carry a discrete_id.
ActionId params_select(const AgentParams& params, const StateVec& s, double eps, RngStream& rng);
double params_max_q(const AgentParams& params, const StateVec& s);
std::uint32_t params_action_count(const AgentParams& params);

// Parameters the twin domains roll with: the online bundle drives action
// selection; the bootstrap bundle (target network when present) values
// terminal lookahead states.
struct SyncedParams {
  AgentParams online;
  std::optional<AgentParams> bootstrap;

  const AgentParams& bootstrap_or_online() const { return bootstrap ? *bootstrap : online; }
};

// Flat binary checkpoint: magic, kind byte, layer-size header, then
// little-endian 64-bit reals.
void save_params(const AgentParams& params, const std::filesystem::path& path);
AgentParams load_params(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Exploration schedule and replay storage

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint32_t decay_episodes = 1;

  double at(std::uint32_t episode) const;
};

struct StoredRecord {
  Transition transition;
  std::optional<double> target;  // precomputed TD target, kept as stored

  bool operator==(const StoredRecord&) const = default;
};

// Fixed-capacity ring; eviction is oldest-first and iteration preserves the
// insertion order of survivors.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(StoredRecord record);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const StoredRecord& at(std::size_t i) const;  // i = 0 is the oldest survivor
  const StoredRecord& sample(RngStream& rng) const;
  void clear();

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest record
  std::size_t size_ = 0;
  std::vector<StoredRecord> ring_;
};

}  // namespace twinforge
