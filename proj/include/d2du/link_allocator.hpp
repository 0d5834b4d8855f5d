#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace d2du {

/// Resource budgets of one D2D link. Powers in watts, money dimensionless.
struct LinkConstraints {
  double total_power = 3.1622776601683795;         // 35 dBm
  double per_channel_power = 0.19952623149688797;  // 23 dBm
  double money = 1.0;

  void validate() const;
};

/// Everything one link needs to decide its time shares and powers.
struct LinkProblem {
  std::vector<double> prices;      // per channel, >= 0
  std::vector<double> loads;       // WiFi traffic load per channel, [0, 1]
  std::vector<double> gains;       // linear channel power gain per channel
  std::vector<double> bandwidths;  // Hz
  double noise_psd = 0.0;          // W/Hz
  LinkConstraints constraints;
  bool enforce_budget = true;  // false drops the money constraint

  std::size_t channels() const { return prices.size(); }
  /// Throws std::invalid_argument on size mismatch or out-of-domain values.
  void validate() const;
};

struct Allocation {
  std::vector<double> theta;  // time share per channel
  std::vector<double> eta;    // time-averaged power theta * p, watts
  double rate = 0.0;          // bits/s
  bool infeasible = false;    // no usable channel or no money

  // Multipliers of the coupling constraints found by the solver.
  double power_multiplier = 0.0;
  double money_multiplier = 0.0;

  /// Instantaneous power p = eta / theta on channel j (0 when idle).
  double power(std::size_t j) const;
  double money_spent(std::span<const double> prices) const;
  double total_eta() const;

  static Allocation zeros(std::size_t m);
};

/// Sum over channels of theta B log2(1 + eta h / (N0 B theta)); idle
/// channels contribute 0. Throws std::domain_error on negative inputs.
double rate(std::span<const double> theta, std::span<const double> eta,
            std::span<const double> gains, std::span<const double> bandwidths,
            double noise_psd);

/// Maximises the link rate under the WiFi-share, power and money limits.
/// Dual bisection on the money multiplier (outer) and the power multiplier
/// (inner); per-channel time shares come from the scalar stationarity
/// equation, solved by bisection.
Allocation solve_allocation(const LinkProblem& problem);

/// Exhaustive search over a uniform grid of feasible (theta, eta). At most
/// three channels; throws std::invalid_argument otherwise.
Allocation brute_force_allocation(const LinkProblem& problem, int grid_resolution);

struct KktReport {
  // Recovered multipliers, all >= 0.
  std::vector<double> mu_share;  // theta_j <= 1 - l_j
  double mu_power = 0.0;         // sum eta <= p_c
  std::vector<double> mu_cap;    // eta_j <= p_u
  double mu_money = 0.0;         // sum theta c <= C

  // Relative stationarity residuals per channel (0 on idle channels).
  std::vector<double> stationarity_theta;
  std::vector<double> stationarity_eta;
  // Relative gains available from switching on an idle channel (>= 0).
  std::vector<double> idle_channel_gain;

  // Normalised complementary-slackness products.
  std::vector<double> slack_share;
  double slack_power = 0.0;
  std::vector<double> slack_cap;
  double slack_money = 0.0;

  double max_stationarity() const;
  double max_slackness() const;
  double max_residual() const;
};

/// Recovers multipliers for a feasible allocation and measures how far it is
/// from satisfying the KKT system.
KktReport kkt_residuals(const Allocation& allocation, const LinkProblem& problem);

}  // namespace d2du
