#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinforge {

enum class ErrorCode {
  config_error,
  invalid_state,
  invalid_distance,
  heterogeneous_group,
  empty_group,
  episode_over,
  mirror_divergence,
  numeric_error,
  shape_error,
  unknown_key,
  type_mismatch,
  missing_required,
  io_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Observation vector. `values` is the feature list an agent consumes;
// `discrete_id` carries the tabular index for environments that define one.
struct StateVec {
  std::vector<double> values;
  std::optional<std::uint32_t> discrete_id;

  bool operator==(const StateVec&) const = default;
};

struct ActionId {
  std::uint32_t index = 0;

  bool operator==(const ActionId&) const = default;
  auto operator<=>(const ActionId&) const = default;
};

enum class DomainRole : std::uint8_t { physical, identical, divergent };

struct DomainId {
  std::uint16_t id = 0;
  DomainRole role = DomainRole::physical;

  bool operator==(const DomainId&) const = default;
};

// Reserved ids. Divergent domains occupy ids 2, 3, ... in creation order.
inline constexpr DomainId kPhysicalDomain{0, DomainRole::physical};
inline constexpr DomainId kIdenticalDomain{1, DomainRole::identical};
inline constexpr DomainId kAggregateDomain{0xFFFF, DomainRole::divergent};

inline DomainId divergent_domain(int ordinal) {
  return DomainId{static_cast<std::uint16_t>(2 + ordinal), DomainRole::divergent};
}

enum class TransitionKind : std::uint8_t { physical, twin_fanout, twin_rollout };

const char* transition_kind_name(TransitionKind kind);

// One agent-environment interaction, the unit of the storage space.
struct Transition {
  StateVec state;
  ActionId action;
  double reward = 0.0;
  StateVec next_state;
  bool terminal = false;
  DomainId domain = kPhysicalDomain;
  TransitionKind kind = TransitionKind::physical;

  bool operator==(const Transition&) const = default;
};

// Bins values.values[0] into [0, bins-1] over [low, high]; out-of-range
// values clamp into the boundary bins.
std::uint32_t encode_discrete(const StateVec& state, std::uint32_t bins, double low, double high);

// Elementwise mean of a group of same-(state, action, kind) transitions.
// The result carries the reserved aggregate domain marker. Sums run in
// sorted value order so the mean is exactly permutation-invariant.
Transition transition_average(std::span<const Transition> group);

// Locale-independent decimal rendering with 6 significant digits.
std::string format_real(double value);

// Comma-separated transition dump: one record per line, header row naming
// every column. State width is fixed at construction.
class TransitionLogWriter {
 public:
  TransitionLogWriter(std::ostream& out, std::size_t state_dim);

  void write(const Transition& t);
  std::size_t state_dim() const { return state_dim_; }

 private:
  std::ostream& out_;
  std::size_t state_dim_;
};

}  // namespace twinforge
