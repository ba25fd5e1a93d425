#include "twinforge/agent.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace twinforge {

// ---------------------------------------------------------------------------
// Tabular Q-learning

QTable::QTable(std::uint32_t states, std::uint32_t actions, double alpha_, double gamma_,
               double init_q)
    : state_count(states),
      action_count(actions),
      values(static_cast<std::size_t>(states) * actions, init_q),
      alpha(alpha_),
      gamma(gamma_) {
  if (states < 1 || actions < 1) {
    throw Error(ErrorCode::config_error, "qtable: state and action counts must be >= 1");
  }
  if (alpha <= 0.0 || alpha > 1.0 || gamma <= 0.0 || gamma > 1.0) {
    throw Error(ErrorCode::config_error, "qtable: alpha and gamma must be in (0, 1]");
  }
}

std::uint32_t argmax_index(std::span<const double> row) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

ActionId ql_select(const QTable& q, std::uint32_t state, double eps, RngStream& rng) {
  if (state >= q.state_count) {
    throw Error(ErrorCode::invalid_state, "ql_select: state index out of range");
  }
  if (rng.uniform01() < eps) {
    return ActionId{rng.uniform_int(q.action_count)};
  }
  std::span<const double> row(q.values.data() + static_cast<std::size_t>(state) * q.action_count,
                              q.action_count);
  return ActionId{argmax_index(row)};
}

double ql_update(QTable& q, const Transition& t, std::optional<double> target_override) {
  if (!t.state.discrete_id || !t.next_state.discrete_id) {
    throw Error(ErrorCode::invalid_state, "ql_update: transition lacks discrete state ids");
  }
  const std::uint32_t s = *t.state.discrete_id;
  const std::uint32_t s2 = *t.next_state.discrete_id;
  if (s >= q.state_count || s2 >= q.state_count || t.action.index >= q.action_count) {
    throw Error(ErrorCode::invalid_state, "ql_update: index out of range");
  }
  double target;
  if (target_override) {
    target = *target_override;
  } else {
    double max_next = 0.0;
    if (!t.terminal) {
      std::span<const double> row(q.values.data() + static_cast<std::size_t>(s2) * q.action_count,
                                  q.action_count);
      max_next = row[argmax_index(row)];
    }
    target = t.reward + q.gamma * max_next * (t.terminal ? 0.0 : 1.0);
  }
  if (!std::isfinite(target)) {
    throw Error(ErrorCode::numeric_error, "ql_update: non-finite target");
  }
  double& cell = q.at(s, t.action.index);
  const double td_error = target - cell;
  cell += q.alpha * td_error;
  return td_error;
}

// ---------------------------------------------------------------------------
// MLP

namespace {

void check_sizes(std::span<const std::uint32_t> layer_sizes) {
  if (layer_sizes.size() < 2) {
    throw Error(ErrorCode::shape_error, "mlp: need at least input and output layers");
  }
  for (std::uint32_t s : layer_sizes) {
    if (s < 1) throw Error(ErrorCode::shape_error, "mlp: zero-width layer");
  }
}

}  // namespace

MlpParams mlp_zero_init(std::span<const std::uint32_t> layer_sizes) {
  check_sizes(layer_sizes);
  MlpParams p;
  p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    p.weights.emplace_back(static_cast<std::size_t>(p.layer_sizes[l + 1]) * p.layer_sizes[l], 0.0);
    p.biases.emplace_back(p.layer_sizes[l + 1], 0.0);
  }
  return p;
}

MlpParams mlp_random_init(std::span<const std::uint32_t> layer_sizes, RngStream& rng) {
  MlpParams p = mlp_zero_init(layer_sizes);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.layer_sizes[l]));
    for (double& w : p.weights[l]) w = rng.uniform(-limit, limit);
  }
  return p;
}

void mlp_forward(const MlpParams& p, std::span<const double> input, MlpScratch& scratch) {
  if (input.size() != p.input_dim()) {
    throw Error(ErrorCode::shape_error, "mlp_forward: input dimension mismatch");
  }
  scratch.activations.resize(p.layer_count() + 1);
  scratch.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const std::size_t in_n = p.layer_sizes[l];
    const std::size_t out_n = p.layer_sizes[l + 1];
    const std::vector<double>& in = scratch.activations[l];
    std::vector<double>& out = scratch.activations[l + 1];
    out.assign(out_n, 0.0);
    const double* w = p.weights[l].data();
    const bool hidden = l + 1 < p.layer_count();
    for (std::size_t j = 0; j < out_n; ++j) {
      const double* row = w + j * in_n;
      double acc = p.biases[l][j];
      for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * in[i];
      out[j] = hidden && acc < 0.0 ? 0.0 : acc;
    }
  }
}

std::vector<double> mlp_forward(const MlpParams& p, const StateVec& s) {
  MlpScratch scratch;
  mlp_forward(p, s.values, scratch);
  return scratch.activations.back();
}

double mlp_loss_and_gradients(const MlpParams& p, std::span<const MlpBatchEntry> batch,
                              MlpGrads& grads, MlpScratch& scratch) {
  if (batch.empty()) {
    throw Error(ErrorCode::empty_group, "mlp gradients: empty batch");
  }
  grads.weights.resize(p.layer_count());
  grads.biases.resize(p.layer_count());
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    grads.weights[l].assign(p.weights[l].size(), 0.0);
    grads.biases[l].assign(p.biases[l].size(), 0.0);
  }
  scratch.deltas.resize(p.layer_count() + 1);

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const MlpBatchEntry& entry : batch) {
    if (entry.action >= p.output_dim()) {
      throw Error(ErrorCode::shape_error, "mlp gradients: action index out of range");
    }
    mlp_forward(p, *entry.state, scratch);
    const double q = scratch.activations.back()[entry.action];
    const double diff = q - entry.target;
    loss += diff * diff * inv_batch;

    // Output delta: MSE on the taken action only.
    std::vector<double>& out_delta = scratch.deltas[p.layer_count()];
    out_delta.assign(p.output_dim(), 0.0);
    out_delta[entry.action] = 2.0 * diff * inv_batch;

    for (std::size_t l = p.layer_count(); l-- > 0;) {
      const std::size_t in_n = p.layer_sizes[l];
      const std::size_t out_n = p.layer_sizes[l + 1];
      const std::vector<double>& delta = scratch.deltas[l + 1];
      const std::vector<double>& in_act = scratch.activations[l];
      double* gw = grads.weights[l].data();
      double* gb = grads.biases[l].data();
      for (std::size_t j = 0; j < out_n; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        double* grow = gw + j * in_n;
        for (std::size_t i = 0; i < in_n; ++i) grow[i] += dj * in_act[i];
        gb[j] += dj;
      }
      if (l == 0) break;
      std::vector<double>& prev_delta = scratch.deltas[l];
      prev_delta.assign(in_n, 0.0);
      const double* w = p.weights[l].data();
      for (std::size_t j = 0; j < out_n; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        const double* row = w + j * in_n;
        for (std::size_t i = 0; i < in_n; ++i) prev_delta[i] += dj * row[i];
      }
      // Rectifier gate: units that were clamped pass no gradient.
      for (std::size_t i = 0; i < in_n; ++i) {
        if (scratch.activations[l][i] <= 0.0) prev_delta[i] = 0.0;
      }
    }
  }
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::numeric_error, "mlp gradients: non-finite loss");
  }
  return loss;
}

void adam_apply(MlpParams& p, AdamState& state, const MlpGrads& grads, double lr) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (state.m_w.empty()) {
    state.m_w.resize(p.layer_count());
    state.v_w.resize(p.layer_count());
    state.m_b.resize(p.layer_count());
    state.v_b.resize(p.layer_count());
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
      state.m_w[l].assign(p.weights[l].size(), 0.0);
      state.v_w[l].assign(p.weights[l].size(), 0.0);
      state.m_b[l].assign(p.biases[l].size(), 0.0);
      state.v_b[l].assign(p.biases[l].size(), 0.0);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  auto update = [&](std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                    const std::vector<double>& g) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  };
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    update(p.weights[l], state.m_w[l], state.v_w[l], grads.weights[l]);
    update(p.biases[l], state.m_b[l], state.v_b[l], grads.biases[l]);
  }
}

// ---------------------------------------------------------------------------
// AgentParams helpers

AgentParams copy_params(const AgentParams& src) { return src; }

ActionId params_select(const AgentParams& params, const StateVec& s, double eps, RngStream& rng) {
  if (const auto* q = std::get_if<QTable>(&params)) {
    if (!s.discrete_id) {
      throw Error(ErrorCode::invalid_state, "params_select: tabular agent needs a discrete state");
    }
    return ql_select(*q, *s.discrete_id, eps, rng);
  }
  const auto& mlp = std::get<MlpParams>(params);
  if (rng.uniform01() < eps) {
    return ActionId{rng.uniform_int(static_cast<std::uint32_t>(mlp.output_dim()))};
  }
  const std::vector<double> qvals = mlp_forward(mlp, s);
  return ActionId{argmax_index(qvals)};
}

double params_max_q(const AgentParams& params, const StateVec& s) {
  if (const auto* q = std::get_if<QTable>(&params)) {
    if (!s.discrete_id) {
      throw Error(ErrorCode::invalid_state, "params_max_q: tabular agent needs a discrete state");
    }
    std::span<const double> row(
        q->values.data() + static_cast<std::size_t>(*s.discrete_id) * q->action_count,
        q->action_count);
    return row[argmax_index(row)];
  }
  const std::vector<double> qvals = mlp_forward(std::get<MlpParams>(params), s);
  return qvals[argmax_index(qvals)];
}

std::uint32_t params_action_count(const AgentParams& params) {
  if (const auto* q = std::get_if<QTable>(&params)) return q->action_count;
  return static_cast<std::uint32_t>(std::get<MlpParams>(params).output_dim());
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr char kMagic[4] = {'T', 'W', 'F', 'P'};

void put_u32_le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

void put_f64_le(std::ostream& out, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(u >> (8 * i));
  out.write(b, 8);
}

std::uint32_t get_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_params(const AgentParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "save_params: cannot open " + path.string());
  out.write(kMagic, 4);
  if (const auto* q = std::get_if<QTable>(&params)) {
    out.put(0);
    put_u32_le(out, q->state_count);
    put_u32_le(out, q->action_count);
    put_f64_le(out, q->alpha);
    put_f64_le(out, q->gamma);
    for (double v : q->values) put_f64_le(out, v);
  } else {
    const auto& mlp = std::get<MlpParams>(params);
    out.put(1);
    put_u32_le(out, static_cast<std::uint32_t>(mlp.layer_sizes.size()));
    for (std::uint32_t s : mlp.layer_sizes) put_u32_le(out, s);
    for (const auto& w : mlp.weights)
      for (double v : w) put_f64_le(out, v);
    for (const auto& b : mlp.biases)
      for (double v : b) put_f64_le(out, v);
  }
  if (!out) throw Error(ErrorCode::io_error, "save_params: write failed for " + path.string());
}

AgentParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "load_params: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::io_error, "load_params: bad magic in " + path.string());
  }
  const int kind = in.get();
  if (kind == 0) {
    const std::uint32_t states = get_u32_le(in);
    const std::uint32_t actions = get_u32_le(in);
    const double alpha = get_f64_le(in);
    const double gamma = get_f64_le(in);
    QTable q(states, actions, alpha, gamma);
    for (double& v : q.values) v = get_f64_le(in);
    if (!in) throw Error(ErrorCode::io_error, "load_params: truncated file " + path.string());
    return q;
  }
  if (kind == 1) {
    const std::uint32_t n = get_u32_le(in);
    std::vector<std::uint32_t> sizes(n);
    for (auto& s : sizes) s = get_u32_le(in);
    MlpParams mlp = mlp_zero_init(sizes);
    for (auto& w : mlp.weights)
      for (double& v : w) v = get_f64_le(in);
    for (auto& b : mlp.biases)
      for (double& v : b) v = get_f64_le(in);
    if (!in) throw Error(ErrorCode::io_error, "load_params: truncated file " + path.string());
    return mlp;
  }
  throw Error(ErrorCode::io_error, "load_params: unknown kind byte");
}

// ---------------------------------------------------------------------------
// Schedule and replay

double EpsilonSchedule::at(std::uint32_t episode) const {
  if (decay_episodes == 0) return eps_end;
  const double frac = std::min(1.0, static_cast<double>(episode) / decay_episodes);
  return eps_start + (eps_end - eps_start) * frac;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw Error(ErrorCode::config_error, "replay buffer: capacity must be >= 1");
}

void ReplayBuffer::push(StoredRecord record) {
  if (size_ < capacity_) {
    ring_.push_back(std::move(record));
    ++size_;
  } else {
    ring_[head_] = std::move(record);
    head_ = (head_ + 1) % capacity_;
  }
}

const StoredRecord& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error(ErrorCode::invalid_state, "replay buffer: index out of range");
  return ring_[(head_ + i) % capacity_];
}

const StoredRecord& ReplayBuffer::sample(RngStream& rng) const {
  if (size_ == 0) throw Error(ErrorCode::empty_group, "replay buffer: sample from empty buffer");
  return at(rng.uniform_int(static_cast<std::uint32_t>(size_)));
}

void ReplayBuffer::clear() {
  ring_.clear();
  head_ = 0;
  size_ = 0;
}

}  // namespace twinforge
