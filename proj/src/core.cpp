#include "twinforge/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace twinforge {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error: return "CONFIG_ERROR";
    case ErrorCode::invalid_state: return "INVALID_STATE";
    case ErrorCode::invalid_distance: return "INVALID_DISTANCE";
    case ErrorCode::heterogeneous_group: return "HETEROGENEOUS_GROUP";
    case ErrorCode::empty_group: return "EMPTY_GROUP";
    case ErrorCode::episode_over: return "EPISODE_OVER";
    case ErrorCode::mirror_divergence: return "MIRROR_DIVERGENCE";
    case ErrorCode::numeric_error: return "NUMERIC_ERROR";
    case ErrorCode::shape_error: return "SHAPE_ERROR";
    case ErrorCode::unknown_key: return "UNKNOWN_KEY";
    case ErrorCode::type_mismatch: return "TYPE_MISMATCH";
    case ErrorCode::missing_required: return "MISSING_REQUIRED";
    case ErrorCode::io_error: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

const char* transition_kind_name(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::physical: return "PHYSICAL";
    case TransitionKind::twin_fanout: return "TWIN_FANOUT";
    case TransitionKind::twin_rollout: return "TWIN_ROLLOUT";
  }
  return "UNKNOWN";
}

std::uint32_t encode_discrete(const StateVec& state, std::uint32_t bins, double low, double high) {
  if (state.values.empty()) {
    throw Error(ErrorCode::invalid_state, "encode_discrete: empty state vector");
  }
  const double x = state.values[0];
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::invalid_state, "encode_discrete: non-finite value");
  }
  if (bins < 1 || !(low < high)) {
    throw Error(ErrorCode::config_error, "encode_discrete: need bins >= 1 and low < high");
  }
  const double clamped = std::clamp(x, low, high);
  const double scaled = static_cast<double>(bins) * (clamped - low) / (high - low);
  auto bin = static_cast<std::int64_t>(std::floor(scaled));
  bin = std::clamp<std::int64_t>(bin, 0, static_cast<std::int64_t>(bins) - 1);
  return static_cast<std::uint32_t>(bin);
}

namespace {

// Mean with a value-sorted summation order, exactly invariant under any
// permutation of the inputs.
double sorted_mean(std::vector<double>& scratch) {
  std::sort(scratch.begin(), scratch.end());
  double sum = 0.0;
  for (double v : scratch) sum += v;
  return sum / static_cast<double>(scratch.size());
}

}  // namespace

Transition transition_average(std::span<const Transition> group) {
  if (group.empty()) {
    throw Error(ErrorCode::empty_group, "transition_average: empty group");
  }
  const Transition& first = group.front();
  for (const Transition& t : group.subspan(1)) {
    if (t.state != first.state || t.action != first.action) {
      throw Error(ErrorCode::heterogeneous_group,
                  "transition_average: group members differ in (state, action)");
    }
    if (t.kind != first.kind || t.terminal != first.terminal) {
      throw Error(ErrorCode::heterogeneous_group,
                  "transition_average: group members differ in kind or terminal flag");
    }
    if (t.next_state.values.size() != first.next_state.values.size()) {
      throw Error(ErrorCode::heterogeneous_group,
                  "transition_average: next_state dimension mismatch");
    }
  }

  Transition out = first;
  out.domain = kAggregateDomain;

  std::vector<double> scratch(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) scratch[i] = group[i].reward;
  out.reward = sorted_mean(scratch);

  for (std::size_t d = 0; d < first.next_state.values.size(); ++d) {
    for (std::size_t i = 0; i < group.size(); ++i) scratch[i] = group[i].next_state.values[d];
    out.next_state.values[d] = sorted_mean(scratch);
  }
  return out;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 6);
  if (ec != std::errc()) {
    throw Error(ErrorCode::numeric_error, "format_real: conversion failed");
  }
  return std::string(buf, ptr);
}

TransitionLogWriter::TransitionLogWriter(std::ostream& out, std::size_t state_dim)
    : out_(out), state_dim_(state_dim) {
  out_ << "kind,domain";
  for (std::size_t i = 0; i < state_dim_; ++i) out_ << ",s" << i;
  out_ << ",action,reward";
  for (std::size_t i = 0; i < state_dim_; ++i) out_ << ",ns" << i;
  out_ << ",terminal\n";
}

void TransitionLogWriter::write(const Transition& t) {
  if (t.state.values.size() != state_dim_ || t.next_state.values.size() != state_dim_) {
    throw Error(ErrorCode::shape_error, "transition log: state dimension mismatch");
  }
  out_ << transition_kind_name(t.kind) << ',' << t.domain.id;
  for (double v : t.state.values) out_ << ',' << format_real(v);
  out_ << ',' << t.action.index << ',' << format_real(t.reward);
  for (double v : t.next_state.values) out_ << ',' << format_real(v);
  out_ << ',' << (t.terminal ? 1 : 0) << '\n';
}

}  // namespace twinforge
