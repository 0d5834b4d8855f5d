#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "d2du/federated.hpp"
#include "d2du/link_allocator.hpp"
#include "d2du/price_net.hpp"
#include "d2du/wifi_model.hpp"

namespace d2du {

inline constexpr std::int64_t kNeverLeaves = std::numeric_limits<std::int64_t>::max();

/// From `slot` on, the channel carries `users` saturated WiFi stations.
struct WifiUsersChange {
  std::int64_t slot = 0;
  int users = 0;
};

struct ChannelSpec {
  double bandwidth = 20e6;
  WifiPhyParams phy;
  std::vector<WifiUsersChange> wifi_users{{0, 0}};  // sorted by slot, first at 0

  int users_at(std::int64_t slot) const;
};

struct LinkSpec {
  std::string name;
  double traffic_load = 1e9;  // bits
  std::vector<double> gains;  // linear, one per channel
  std::int64_t join_slot = 0;
  std::int64_t leave_slot = kNeverLeaves;

  bool active_at(std::int64_t slot) const { return join_slot <= slot && slot < leave_slot; }
};

struct LearningConfig {
  double learning_rate = 1e-4;
  double w_cap = 10.0;
  double q_step = 0.01;
  double v1 = 0.03;
  double v2 = -0.03;
  FairnessSign fairness_sign = FairnessSign::kEqualizing;
};

/// What a link adds to its accumulated loss each slot.
enum class LossAccumulation {
  kSquared,         // sum over channels of (q1 + q2)^2
  kAbsoluteOffset,  // sum over channels of |q1 + q2|
};

struct FederatedSettings {
  bool enabled = true;             // periodic averaging rounds
  bool warm_start_joiners = true;  // joiners start from the snapshot
  FederatedConfig coordinator;
  std::int64_t min_trained_slots = 1;  // before a link contributes to a round
  LossAccumulation accumulation = LossAccumulation::kAbsoluteOffset;
};

struct Scenario {
  std::vector<ChannelSpec> channels;
  std::vector<LinkSpec> links;
  LinkConstraints constraints;
  double noise_psd = 1.5811388300841898e-20;  // -95 dBm over 20 MHz
  std::uint64_t seed = 1;
  std::int64_t horizon = 1000;
  int n_limit = 64;
  double collision_tolerance = 0.0;
  double sensing_noise_std = 0.0;  // additive noise on sensed WiFi user counts
  LearningConfig learning;
  FederatedSettings federated;
  std::optional<NormalizationSpec> normalization;  // derived when unset

  std::size_t channel_count() const { return channels.size(); }
  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  NormalizationSpec resolved_normalization() const;
};

/// Reference scales from the scenario: largest link load and the gain range
/// (widened by a decade on each side when all gains coincide).
NormalizationSpec derive_normalization(const Scenario& scenario);

}  // namespace d2du
