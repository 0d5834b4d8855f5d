#include "d2du/wifi_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace d2du {
namespace {

constexpr double kFixedPointTolerance = 1e-10;
constexpr int kFixedPointIterations = 200;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("WifiPhyParams: ") + what);
}

// Transmission probability for a given conditional collision probability.
// Uses sum_{k<m} (2p)^k in place of (1-(2p)^m)/(1-2p) so p = 1/2 is regular.
double transmission_probability(double p, int w, int m) {
  double series = 0.0;
  double term = 1.0;
  for (int k = 0; k < m; ++k) {
    series += term;
    term *= 2.0 * p;
  }
  return 2.0 / (1.0 + w + p * w * series);
}

}  // namespace

void WifiPhyParams::validate() const {
  require(cw_min >= 2, "cw_min must be >= 2");
  require(max_backoff_stage >= 0, "max_backoff_stage must be >= 0");
  require(max_backoff_stage <= 30, "max_backoff_stage must be <= 30");
  require(slot_time > 0, "slot_time must be > 0");
  require(sifs > 0, "sifs must be > 0");
  require(difs > 0, "difs must be > 0");
  require(header_time > 0, "header_time must be > 0");
  require(ack_time > 0, "ack_time must be > 0");
  require(payload_bits > 0, "payload_bits must be > 0");
  require(data_rate > 0, "data_rate must be > 0");
  require(propagation_delay > 0, "propagation_delay must be > 0");
}

double WifiPhyParams::success_time() const {
  return header_time + payload_bits / data_rate + sifs + propagation_delay + ack_time + difs +
         propagation_delay;
}

double WifiPhyParams::collision_time() const {
  return header_time + payload_bits / data_rate + difs + propagation_delay;
}

DcfOperatingPoint solve_dcf_fixed_point(int n, const WifiPhyParams& phy) {
  if (n < 1) throw std::invalid_argument("solve_dcf_fixed_point: n must be >= 1");
  const int w = phy.cw_min;
  const int m = phy.max_backoff_stage;
  // f(p) = p - (1 - (1 - tau(p))^(n-1)) is increasing in p; f(0) <= 0 < f(1).
  auto residual = [&](double p) {
    const double tau = transmission_probability(p, w, m);
    return p - (1.0 - std::pow(1.0 - tau, n - 1));
  };
  double lo = 0.0;
  double hi = 1.0;
  int it = 0;
  for (; it < kFixedPointIterations && hi - lo > kFixedPointTolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = residual(mid);
    if (!std::isfinite(f)) break;
    (f > 0.0 ? hi : lo) = mid;
  }
  if (hi - lo > kFixedPointTolerance) {
    throw std::runtime_error("DCF fixed point did not converge: invalid PHY parameters");
  }
  const double p = 0.5 * (lo + hi);
  return {transmission_probability(p, w, m), p};
}

double bianchi_throughput(int n, const WifiPhyParams& phy) {
  if (n < 0) throw std::invalid_argument("bianchi_throughput: n must be >= 0");
  if (n == 0) return 0.0;
  const auto op = solve_dcf_fixed_point(n, phy);
  const double idle = std::pow(1.0 - op.tau, n);
  const double p_tr = 1.0 - idle;
  const double p_s = n * op.tau * std::pow(1.0 - op.tau, n - 1) / p_tr;
  const double expected_slot = idle * phy.slot_time + p_tr * p_s * phy.success_time() +
                               p_tr * (1.0 - p_s) * phy.collision_time();
  const double s = p_s * p_tr * phy.payload_bits / expected_slot;
  if (!std::isfinite(s)) throw std::runtime_error("bianchi_throughput: non-finite throughput");
  return s;
}

std::vector<double> throughput_curve(const WifiPhyParams& phy, int n_limit) {
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(std::max(n_limit, 0)));
  for (int n = 1; n <= n_limit; ++n) curve.push_back(bianchi_throughput(n, phy));
  return curve;
}

WifiPeak find_peak(const WifiPhyParams& phy, int n_limit) {
  if (n_limit < 1) throw std::invalid_argument("find_peak: n_limit must be >= 1");
  WifiPeak peak;
  peak.n_max = 1;
  peak.r_max_total = bianchi_throughput(1, phy);
  for (int n = 2; n <= n_limit; ++n) {
    const double s = bianchi_throughput(n, phy);
    if (s > peak.r_max_total) {
      peak.n_max = n;
      peak.r_max_total = s;
    }
  }
  peak.r_hat_max = peak.r_max_total / peak.n_max;
  return peak;
}

ChannelLoad channel_traffic_load(int n, const WifiPhyParams& phy, const WifiPeak& peak) {
  if (n < 0) throw std::invalid_argument("channel_traffic_load: n must be >= 0");
  if (n == 0) return {0.0, true};
  if (n >= peak.n_max) return {1.0, false};
  const double per_user = bianchi_throughput(n, phy) / n;
  return {std::clamp(peak.r_hat_max / per_user, 0.0, 1.0), true};
}

ChannelLoad channel_traffic_load(int n, const WifiPhyParams& phy, int n_limit) {
  return channel_traffic_load(n, phy, find_peak(phy, n_limit));
}

ChannelState make_channel_state(double bandwidth, int wifi_users, const WifiPhyParams& phy,
                                int n_limit) {
  const auto peak = find_peak(phy, n_limit);
  const auto load = channel_traffic_load(wifi_users, phy, peak);
  ChannelState state;
  state.bandwidth = bandwidth;
  state.wifi_users = wifi_users;
  state.load = load.load;
  state.n_max = peak.n_max;
  state.r_max_total = peak.r_max_total;
  state.r_hat_max = peak.r_hat_max;
  state.accessible = load.accessible;
  return state;
}

}  // namespace d2du
