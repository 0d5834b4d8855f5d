#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "d2du/federated.hpp"
#include "d2du/link_allocator.hpp"
#include "d2du/price_net.hpp"
#include "d2du/random.hpp"
#include "d2du/scenario.hpp"
#include "d2du/wifi_model.hpp"

namespace d2du {

/// Dense [link][channel] matrix of doubles.
using Matrix = std::vector<std::vector<double>>;

struct CollisionReport {
  std::vector<std::vector<std::uint8_t>> flags;  // [link][channel]
  std::vector<std::uint8_t> conflicted;          // per channel
};

/// A channel is conflicted when the D2D shares placed on it exceed the time
/// left by WiFi by more than `tolerance`. Every link with a positive share on
/// a conflicted channel is flagged.
CollisionReport detect_collisions(const Matrix& theta, std::span<const double> channel_loads,
                                  double tolerance);

struct RealizedOutcome {
  Matrix theta;                        // after conflict scaling
  Matrix eta;
  Matrix channel_rate;                 // bits/s per link and channel
  std::vector<double> link_rate;       // bits/s
  std::vector<double> wifi_fraction;   // time left to WiFi per channel
  std::vector<double> demand;          // sum of requested shares per channel
};

/// What actually happens on air. On a conflicted channel whose requested
/// shares sum above one, every share and time-averaged power is scaled by the
/// same factor so the shares sum to one; the instantaneous power is kept.
RealizedOutcome realized_outcomes(const Matrix& theta, const Matrix& eta, const Matrix& gains,
                                  std::span<const double> bandwidths, double noise_psd,
                                  const CollisionReport& collisions);

/// Expected transmission time l / r in seconds: 0 with nothing to send,
/// +inf with nothing sent.
double compute_ett(double load_bits, double rate);

struct LinkSlot {
  std::size_t link = 0;         // index into Scenario::links
  std::vector<double> prices;   // per channel
  Allocation planned;
  std::vector<double> theta;    // realized
  std::vector<double> eta;
  std::vector<double> channel_rate;  // realized, bits/s
  double rate = 0.0;            // realized, bits/s
  double ett = 0.0;             // seconds
  std::vector<std::uint8_t> collided;
  double q1 = 0.0;
  std::vector<double> q2;
  double loss = 0.0;            // mean over channels of (q1 + q2)^2
  bool train_skipped = false;
};

struct ChannelSlot {
  int wifi_users = 0;
  double load = 0.0;
  bool accessible = true;
  double demand = 0.0;
  double wifi_fraction = 1.0;
  bool conflicted = false;
};

struct SlotRecord {
  std::int64_t slot = 0;
  std::vector<ChannelSlot> channels;
  std::vector<LinkSlot> links;  // active links in scenario order
  bool federated_round = false;
  std::vector<std::size_t> joined;  // links that joined after this slot
  std::vector<std::size_t> left;
};

struct LinkAgent {
  std::size_t spec = 0;
  MlpParams params;
  double q_sum = 0.0;
  std::int64_t trained_slots = 0;
  bool warm_started = false;
};

/// Channel state lookup with the WiFi throughput peak of each channel cached.
class ChannelSensor {
 public:
  explicit ChannelSensor(const Scenario& scenario);
  ChannelState state(std::size_t channel, int wifi_users) const;
  std::size_t channels() const { return peaks_.size(); }

 private:
  std::vector<double> bandwidths_;
  std::vector<WifiPhyParams> phys_;
  std::vector<WifiPeak> peaks_;
};

/// Decentralised price-driven simulation: one pricing network per link,
/// local allocation, collision feedback, online training and federated
/// averaging.
class World {
 public:
  explicit World(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  std::int64_t slot() const { return slot_; }
  const std::vector<LinkAgent>& agents() const { return agents_; }
  const Coordinator& coordinator() const { return coordinator_; }
  const NormalizationSpec& normalization() const { return norms_; }

  /// Runs one slot and returns its record. Joins and departures scheduled for
  /// the next slot are applied before returning.
  SlotRecord step();

  /// Adds link `spec` now. With `warm_start` the coordinator snapshot seeds
  /// its network when one exists. Returns false if it is already active.
  bool join_link(std::size_t spec, bool warm_start);
  /// Removes link `spec`; its parameters are discarded. Returns false if it
  /// was not active.
  bool leave_link(std::size_t spec);

  /// Prices the link would quote now, without training.
  std::vector<double> quote_prices(std::size_t spec, std::span<const double> channel_loads) const;

 private:
  void apply_membership(std::int64_t slot, SlotRecord& record);

  Scenario scenario_;
  NormalizationSpec norms_;
  ChannelSensor sensor_;
  Coordinator coordinator_;
  Rng sensing_rng_;
  std::vector<LinkAgent> agents_;  // ordered by spec index
  std::int64_t slot_ = 0;
};

}  // namespace d2du
