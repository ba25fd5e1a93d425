#pragma once

#include <any>
#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinforge/core.hpp"

namespace twinforge {

// Complete restorable copy of an environment, including its RNG position.
// The payload is the concrete environment's state struct held by value.
struct EnvSnapshot {
  std::string env_type;
  std::any state;
};

struct StepResult {
  StateVec observation;
  double reward = 0.0;
  bool terminal = false;
  int info = 0;  // environment-specific outcome code
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual StateVec reset() = 0;
  virtual StepResult step(ActionId action) = 0;

  // Observation on the active channel (masked or full, per config).
  virtual StateVec observe() const = 0;
  // Global observation channel, independent of the masking toggle.
  virtual StateVec observe_full() const = 0;

  virtual bool done() const = 0;
  virtual std::uint32_t action_count() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::optional<std::uint32_t> discrete_state_count() const = 0;

  virtual EnvSnapshot snapshot() const = 0;
  virtual void restore(const EnvSnapshot& snap) = 0;

  // Replaces the environment's own random stream position; used by divergent
  // domains to sample independent futures from one restored snapshot.
  virtual void reseed(std::uint64_t seed) = 0;

  // Full-state fingerprint (config, dynamics, RNG position) for equality
  // checks in tests and divergence audits.
  virtual std::vector<std::uint8_t> serialize_state() const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string_view type_name() const = 0;
};

// Append-only byte buffer used by serialize_state implementations.
class ByteSink {
 public:
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }

  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

  void put_str(std::string_view s) {
    put_u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

}  // namespace twinforge
