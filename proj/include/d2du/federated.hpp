#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "d2du/price_net.hpp"

namespace d2du {

struct FederatedConfig {
  int period = 100;  // slots between rounds
  double gamma = 1.2;
  double epsilon = 0.4;

  void validate() const;
};

/// Elementwise mean of the flattened parameter vectors. The result does not
/// depend on the order of `all` and equals the common value when every
/// contribution agrees.
MlpParams average_params(std::span<const MlpParams> all);

/// Logistic blend weight from accumulated loss: 0.5 exactly at q_sum == epsilon.
double blend_factor(double q_sum, double gamma, double epsilon);

/// beta * snapshot + (1 - beta) * own, elementwise, kept inside the segment
/// between the two parameter values.
MlpParams apply_blend(const MlpParams& own, const MlpParams& snapshot, double beta);

struct WarmStart {
  MlpParams params;
  bool from_snapshot = false;  // false: random fallback, no round completed yet
};

/// The coordinator role: periodic averaging and the snapshot handed to
/// joining links.
class Coordinator {
 public:
  explicit Coordinator(FederatedConfig config = {});

  const FederatedConfig& config() const { return config_; }

  /// True when a round is due after `clock` completed slots.
  bool due(std::int64_t clock) const { return clock > 0 && clock % config_.period == 0; }

  /// Averages the contributions, stores and returns the new snapshot.
  const MlpParams& run_round(std::span<const MlpParams> contributions);

  bool has_snapshot() const { return snapshot_.has_value(); }
  const std::optional<MlpParams>& snapshot() const { return snapshot_; }
  int rounds_completed() const { return rounds_; }

  /// Copy of the latest snapshot, or a seeded random init before any round.
  WarmStart warm_start(std::uint64_t fallback_seed) const;

 private:
  FederatedConfig config_;
  std::optional<MlpParams> snapshot_;
  int rounds_ = 0;
};

}  // namespace d2du
