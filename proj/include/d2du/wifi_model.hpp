#pragma once

#include <vector>

namespace d2du {

/// DCF parameters of the WiFi network sharing an unlicensed channel.
/// Times are in seconds, payload in bits, data rate in bits/s.
struct WifiPhyParams {
  int cw_min = 32;            // initial back-off window
  int max_backoff_stage = 3;  // window doubles up to cw_min * 2^m
  double slot_time = 9e-6;
  double sifs = 16e-6;
  double difs = 34e-6;
  double header_time = 52e-6;  // PHY + MAC header airtime
  double ack_time = 44e-6;
  double payload_bits = 12000.0;
  double data_rate = 300e6;
  double propagation_delay = 1e-6;

  /// Throws std::invalid_argument naming the first violated field.
  void validate() const;

  /// Airtime of a successful exchange (basic access, no RTS/CTS).
  double success_time() const;
  /// Airtime wasted by a collision.
  double collision_time() const;
};

struct DcfOperatingPoint {
  double tau = 0.0;        // per-slot transmission probability
  double collision = 0.0;  // conditional collision probability
};

/// Solves the coupled tau/p fixed point for `n` saturated stations by
/// bisection on p. Throws std::runtime_error when the iteration fails.
DcfOperatingPoint solve_dcf_fixed_point(int n, const WifiPhyParams& phy);

/// Aggregate saturation throughput S(n) in bits/s. S(0) == 0.
double bianchi_throughput(int n, const WifiPhyParams& phy);

/// S(1..n_limit), index 0 holds n = 1.
std::vector<double> throughput_curve(const WifiPhyParams& phy, int n_limit);

struct WifiPeak {
  int n_max = 1;
  double r_max_total = 0.0;  // S(n_max)
  double r_hat_max = 0.0;    // per-user share at the peak
};

/// Argmax of S over [1, n_limit]; the first maximiser wins ties.
WifiPeak find_peak(const WifiPhyParams& phy, int n_limit = 64);

struct ChannelLoad {
  double load = 0.0;  // minimum WiFi off-period fraction
  bool accessible = true;
};

/// Traffic load of a channel with `n` active WiFi users.
ChannelLoad channel_traffic_load(int n, const WifiPhyParams& phy, int n_limit = 64);
/// Same, reusing a precomputed peak.
ChannelLoad channel_traffic_load(int n, const WifiPhyParams& phy, const WifiPeak& peak);

struct ChannelState {
  double bandwidth = 20e6;
  int wifi_users = 0;
  double load = 0.0;
  int n_max = 1;
  double r_max_total = 0.0;
  double r_hat_max = 0.0;
  bool accessible = true;
};

ChannelState make_channel_state(double bandwidth, int wifi_users, const WifiPhyParams& phy,
                                 int n_limit = 64);

}  // namespace d2du
