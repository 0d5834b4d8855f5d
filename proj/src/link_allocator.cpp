#include "d2du/link_allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace d2du {
namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxIterations = 200;
// Relative widths at which the bisections stop. The absolute targets
// (1e-10 on roots, 1e-8 on multipliers) are met with margin at these.
constexpr double kRootRelTol = 1e-13;
constexpr double kMultiplierRelTol = 1e-13;
constexpr double kBindingTol = 1e-9;

// Marginal rate per unit time share (divided by B) at SNR s:
// log2(1+s) - s / ((1+s) ln 2). Increasing, 0 at 0, unbounded.
double marginal_share_value(double s) {
  if (std::isinf(s)) return kInf;
  if (s < 1e-4) {
    return s * s * (0.5 - s * (2.0 / 3.0 - 0.75 * s)) / kLn2;
  }
  return (std::log1p(s) - s / (1.0 + s)) / kLn2;
}

// Smallest s with marginal_share_value(s) >= target, searched above s_floor.
double invert_marginal_share(double target, double s_floor) {
  double lo = s_floor;
  double hi = std::max(1.0, 2.0 * s_floor);
  int guard = 0;
  while (marginal_share_value(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 2000 || std::isinf(hi)) return kInf;
  }
  for (int it = 0; it < kMaxIterations && hi - lo > kRootRelTol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (marginal_share_value(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct ChannelTerms {
  bool usable = false;
  double share_cap = 0.0;   // 1 - l
  double eta_cap = 0.0;     // min(p_u, p_c)
  double snr_per_watt = 0.0;  // h / (N0 B)
  double bandwidth = 0.0;
  double price = 0.0;
};

std::vector<ChannelTerms> channel_terms(const LinkProblem& pr) {
  const auto& k = pr.constraints;
  std::vector<ChannelTerms> out(pr.channels());
  for (std::size_t j = 0; j < out.size(); ++j) {
    auto& t = out[j];
    t.share_cap = 1.0 - pr.loads[j];
    t.eta_cap = std::min(k.per_channel_power, k.total_power);
    t.bandwidth = pr.bandwidths[j];
    t.price = pr.prices[j];
    t.snr_per_watt = pr.gains[j] / (pr.noise_psd * pr.bandwidths[j]);
    t.usable = t.share_cap > 0.0 && pr.gains[j] > 0.0 && t.eta_cap > 0.0 &&
               std::isfinite(t.snr_per_watt) && std::isfinite(t.price);
  }
  return out;
}

struct Point {
  double theta = 0.0;
  double eta = 0.0;
};

// Maximiser of theta B log2(1 + eta g / theta) - mu_p eta - mu_m c theta over
// the channel box. Along rays eta = s theta / g the value is linear in theta,
// so the optimum either follows the water-filling SNR up to the box or slides
// along the eta cap where the share solves the stationarity equation.
Point channel_response(const ChannelTerms& t, double mu_power, double mu_money,
                       bool use_budget) {
  if (!t.usable) return {};
  const double money_term = use_budget ? mu_money * t.price : 0.0;
  const double s_water = mu_power > 0.0 ? t.bandwidth * t.snr_per_watt / (mu_power * kLn2) - 1.0
                                        : kInf;
  if (s_water <= 0.0) return {};
  const double ray_value = t.bandwidth * marginal_share_value(s_water) - money_term;
  if (ray_value <= 0.0) return {};
  const double theta_at_cap = std::isinf(s_water) ? 0.0 : t.eta_cap * t.snr_per_watt / s_water;
  if (t.share_cap <= theta_at_cap) {
    return {t.share_cap, t.share_cap * s_water / t.snr_per_watt};
  }
  if (money_term <= 0.0) return {t.share_cap, t.eta_cap};
  const double s_floor = t.eta_cap * t.snr_per_watt / t.share_cap;
  if (marginal_share_value(s_floor) >= money_term / t.bandwidth) {
    return {t.share_cap, t.eta_cap};
  }
  const double s = invert_marginal_share(money_term / t.bandwidth, s_floor);
  const double theta = std::clamp(t.eta_cap * t.snr_per_watt / s, theta_at_cap, t.share_cap);
  return {theta, t.eta_cap};
}

struct Candidate {
  std::vector<Point> points;
  double eta_sum = 0.0;
  double money = 0.0;
  double mu_power = 0.0;
};

Candidate respond(const std::vector<ChannelTerms>& terms, double mu_power, double mu_money,
                  bool use_budget) {
  Candidate c;
  c.mu_power = mu_power;
  c.points.reserve(terms.size());
  for (const auto& t : terms) {
    const auto p = channel_response(t, mu_power, mu_money, use_budget);
    c.eta_sum += p.eta;
    c.money += p.theta * t.price;
    c.points.push_back(p);
  }
  return c;
}

Candidate blend(const Candidate& a, const Candidate& b, double lambda,
                const std::vector<ChannelTerms>& terms) {
  Candidate c;
  c.mu_power = b.mu_power;
  c.points.resize(a.points.size());
  for (std::size_t j = 0; j < a.points.size(); ++j) {
    c.points[j].theta = lambda * a.points[j].theta + (1.0 - lambda) * b.points[j].theta;
    c.points[j].eta = lambda * a.points[j].eta + (1.0 - lambda) * b.points[j].eta;
    c.eta_sum += c.points[j].eta;
    c.money += c.points[j].theta * terms[j].price;
  }
  return c;
}

// Inner problem: fixed money multiplier, power multiplier by bisection.
Candidate solve_power(const std::vector<ChannelTerms>& terms, double total_power,
                      double mu_money, bool use_budget) {
  auto free = respond(terms, 0.0, mu_money, use_budget);
  if (free.eta_sum <= total_power) return free;
  double hi = 0.0;
  for (const auto& t : terms) {
    if (t.usable) hi = std::max(hi, t.bandwidth * t.snr_per_watt / kLn2);
  }
  double lo = 0.0;
  Candidate lo_c = std::move(free);
  Candidate hi_c = respond(terms, hi, mu_money, use_budget);
  for (int it = 0; it < kMaxIterations && hi - lo > kMultiplierRelTol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto c = respond(terms, mid, mu_money, use_budget);
    if (c.eta_sum > total_power) {
      lo = mid;
      lo_c = std::move(c);
    } else {
      hi = mid;
      hi_c = std::move(c);
    }
  }
  // Usage can jump where a channel is indifferent; mixing the two sides
  // restores an exactly binding power budget.
  const double gap = lo_c.eta_sum - hi_c.eta_sum;
  const double lambda = gap > 0.0 ? (total_power - hi_c.eta_sum) / gap : 0.0;
  return blend(lo_c, hi_c, std::clamp(lambda, 0.0, 1.0), terms);
}

void check_span_sizes(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  if (a != b || a != c || a != d) {
    throw std::invalid_argument("per-channel vectors must have the same length");
  }
}

double spent(std::span<const double> theta, std::span<const double> prices) {
  double total = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) total += theta[j] * prices[j];
  return total;
}

}  // namespace

void LinkConstraints::validate() const {
  if (!(total_power > 0.0)) throw std::invalid_argument("total_power must be > 0");
  if (!(per_channel_power > 0.0)) throw std::invalid_argument("per_channel_power must be > 0");
  if (!(money > 0.0)) throw std::invalid_argument("money must be > 0");
}

void LinkProblem::validate() const {
  check_span_sizes(prices.size(), loads.size(), gains.size(), bandwidths.size());
  if (prices.empty()) throw std::invalid_argument("LinkProblem: no channels");
  if (!(noise_psd > 0.0)) throw std::invalid_argument("LinkProblem: noise_psd must be > 0");
  if (!(constraints.total_power > 0.0) || !(constraints.per_channel_power > 0.0)) {
    throw std::invalid_argument("LinkProblem: power budgets must be > 0");
  }
  if (!(constraints.money >= 0.0)) throw std::invalid_argument("LinkProblem: money must be >= 0");
  for (std::size_t j = 0; j < prices.size(); ++j) {
    const std::string at = " on channel " + std::to_string(j);
    if (!(prices[j] >= 0.0)) throw std::invalid_argument("negative or NaN price" + at);
    if (!(loads[j] >= 0.0 && loads[j] <= 1.0)) throw std::invalid_argument("load outside [0,1]" + at);
    if (!(gains[j] >= 0.0) || std::isinf(gains[j])) throw std::invalid_argument("invalid gain" + at);
    if (!(bandwidths[j] > 0.0) || std::isinf(bandwidths[j])) {
      throw std::invalid_argument("invalid bandwidth" + at);
    }
  }
}

double Allocation::power(std::size_t j) const {
  return theta[j] > 0.0 ? eta[j] / theta[j] : 0.0;
}

double Allocation::money_spent(std::span<const double> prices) const {
  return spent(theta, prices);
}

double Allocation::total_eta() const { return std::accumulate(eta.begin(), eta.end(), 0.0); }

Allocation Allocation::zeros(std::size_t m) {
  Allocation a;
  a.theta.assign(m, 0.0);
  a.eta.assign(m, 0.0);
  return a;
}

double rate(std::span<const double> theta, std::span<const double> eta,
            std::span<const double> gains, std::span<const double> bandwidths,
            double noise_psd) {
  check_span_sizes(theta.size(), eta.size(), gains.size(), bandwidths.size());
  if (noise_psd < 0.0) throw std::domain_error("rate: negative noise_psd");
  double total = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (theta[j] < 0.0 || eta[j] < 0.0 || gains[j] < 0.0 || bandwidths[j] < 0.0) {
      throw std::domain_error("rate: negative input on channel " + std::to_string(j));
    }
    if (theta[j] == 0.0) continue;
    const double snr = eta[j] * gains[j] / (noise_psd * bandwidths[j] * theta[j]);
    total += theta[j] * bandwidths[j] * std::log2(1.0 + snr);
  }
  return total;
}

Allocation solve_allocation(const LinkProblem& problem) {
  problem.validate();
  const std::size_t m = problem.channels();
  const auto terms = channel_terms(problem);
  const bool any_usable = std::any_of(terms.begin(), terms.end(), [](const auto& t) { return t.usable; });
  const bool use_budget = problem.enforce_budget;
  if (!any_usable || (use_budget && problem.constraints.money <= 0.0)) {
    auto a = Allocation::zeros(m);
    a.infeasible = true;
    return a;
  }
  const double total_power = problem.constraints.total_power;
  const double money = problem.constraints.money;

  Candidate best = solve_power(terms, total_power, 0.0, use_budget);
  double mu_money = 0.0;
  if (use_budget && best.money > money) {
    double lo = 0.0;
    double hi = 1.0;
    Candidate lo_c = std::move(best);
    Candidate hi_c = solve_power(terms, total_power, hi, use_budget);
    int guard = 0;
    while (hi_c.money > money) {
      lo = hi;
      lo_c = std::move(hi_c);
      hi *= 2.0;
      hi_c = solve_power(terms, total_power, hi, use_budget);
      if (++guard > 1100) throw std::runtime_error("solve_allocation: money multiplier diverged");
    }
    for (int it = 0; it < kMaxIterations && hi - lo > kMultiplierRelTol * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto c = solve_power(terms, total_power, mid, use_budget);
      if (c.money > money) {
        lo = mid;
        lo_c = std::move(c);
      } else {
        hi = mid;
        hi_c = std::move(c);
      }
    }
    const double gap = lo_c.money - hi_c.money;
    const double lambda = gap > 0.0 ? (money - hi_c.money) / gap : 0.0;
    best = blend(lo_c, hi_c, std::clamp(lambda, 0.0, 1.0), terms);
    mu_money = hi;
  }

  Allocation a = Allocation::zeros(m);
  for (std::size_t j = 0; j < m; ++j) {
    // Clamp away rounding from the mixing step so the hard limits hold exactly.
    a.theta[j] = std::clamp(best.points[j].theta, 0.0, std::max(terms[j].share_cap, 0.0));
    a.eta[j] = a.theta[j] > 0.0 ? std::clamp(best.points[j].eta, 0.0, terms[j].eta_cap) : 0.0;
  }
  a.power_multiplier = best.mu_power;
  a.money_multiplier = mu_money;
  a.rate = rate(a.theta, a.eta, problem.gains, problem.bandwidths, problem.noise_psd);
  return a;
}

Allocation brute_force_allocation(const LinkProblem& problem, int grid_resolution) {
  problem.validate();
  const std::size_t m = problem.channels();
  if (m > 3) throw std::invalid_argument("brute_force_allocation: at most 3 channels");
  if (grid_resolution < 2) throw std::invalid_argument("brute_force_allocation: resolution < 2");
  const auto& k = problem.constraints;
  const bool use_budget = problem.enforce_budget;
  const auto g = static_cast<std::size_t>(grid_resolution);

  // Grid axes and the value table of every channel.
  std::vector<std::vector<double>> theta_axis(m), eta_axis(m);
  std::vector<std::vector<double>> value(m);  // [theta_idx * g + eta_idx]
  for (std::size_t j = 0; j < m; ++j) {
    double theta_max = std::max(0.0, 1.0 - problem.loads[j]);
    if (use_budget && problem.prices[j] > 0.0) {
      theta_max = std::min(theta_max, k.money / problem.prices[j]);
    }
    if (problem.gains[j] <= 0.0) theta_max = 0.0;
    const double eta_max = std::min(k.per_channel_power, k.total_power);
    theta_axis[j].resize(g);
    eta_axis[j].resize(g);
    for (std::size_t i = 0; i < g; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(g - 1);
      theta_axis[j][i] = theta_max * f;
      eta_axis[j][i] = eta_max * f;
    }
    value[j].assign(g * g, 0.0);
    const double snr_per_watt = problem.gains[j] / (problem.noise_psd * problem.bandwidths[j]);
    for (std::size_t a = 1; a < g; ++a) {
      const double th = theta_axis[j][a];
      if (th <= 0.0) continue;
      for (std::size_t b = 0; b < g; ++b) {
        value[j][a * g + b] =
            th * problem.bandwidths[j] * std::log2(1.0 + eta_axis[j][b] * snr_per_watt / th);
      }
    }
  }

  double best_value = -1.0;
  std::vector<std::size_t> best_theta(m, 0), best_eta(m, 0);
  std::vector<std::size_t> ti(m, 0), ei(m, 0);

  // Best eta indices for fixed theta indices. The objective is non-decreasing
  // in every eta, so the last channel takes the largest feasible grid value.
  auto best_eta_for = [&](double& out_value, std::vector<std::size_t>& out_eta) {
    out_value = -1.0;
    auto recurse = [&](auto&& self, std::size_t j, double eta_used, double acc) -> void {
      const auto& axis = eta_axis[j];
      const double* row = &value[j][ti[j] * g];
      if (j + 1 == m) {
        std::size_t b = g;
        while (b > 0 && eta_used + axis[b - 1] > k.total_power * (1.0 + 1e-12)) --b;
        if (b == 0) return;
        ei[j] = b - 1;
        const double v = acc + row[b - 1];
        if (v > out_value) {
          out_value = v;
          out_eta = ei;
        }
        return;
      }
      for (std::size_t b = 0; b < g; ++b) {
        if (eta_used + axis[b] > k.total_power * (1.0 + 1e-12)) break;
        ei[j] = b;
        self(self, j + 1, eta_used + axis[b], acc + row[b]);
      }
    };
    recurse(recurse, 0, 0.0, 0.0);
  };

  auto recurse_theta = [&](auto&& self, std::size_t j, double money_used) -> void {
    if (j == m) {
      double v = 0.0;
      std::vector<std::size_t> eta_choice(m, 0);
      best_eta_for(v, eta_choice);
      if (v > best_value) {
        best_value = v;
        best_theta = ti;
        best_eta = eta_choice;
      }
      return;
    }
    for (std::size_t a = 0; a < g; ++a) {
      const double cost = use_budget ? theta_axis[j][a] * problem.prices[j] : 0.0;
      if (use_budget && money_used + cost > k.money * (1.0 + 1e-12)) break;
      ti[j] = a;
      self(self, j + 1, money_used + cost);
    }
  };
  recurse_theta(recurse_theta, 0, 0.0);

  Allocation out = Allocation::zeros(m);
  for (std::size_t j = 0; j < m; ++j) {
    out.theta[j] = theta_axis[j][best_theta[j]];
    out.eta[j] = out.theta[j] > 0.0 ? eta_axis[j][best_eta[j]] : 0.0;
  }
  out.rate = rate(out.theta, out.eta, problem.gains, problem.bandwidths, problem.noise_psd);
  return out;
}

double KktReport::max_stationarity() const {
  double r = 0.0;
  for (double v : stationarity_theta) r = std::max(r, std::abs(v));
  for (double v : stationarity_eta) r = std::max(r, std::abs(v));
  for (double v : idle_channel_gain) r = std::max(r, v);
  return r;
}

double KktReport::max_slackness() const {
  double r = std::max(std::abs(slack_power), std::abs(slack_money));
  for (double v : slack_share) r = std::max(r, std::abs(v));
  for (double v : slack_cap) r = std::max(r, std::abs(v));
  return r;
}

double KktReport::max_residual() const { return std::max(max_stationarity(), max_slackness()); }

KktReport kkt_residuals(const Allocation& allocation, const LinkProblem& problem) {
  problem.validate();
  const std::size_t m = problem.channels();
  if (allocation.theta.size() != m || allocation.eta.size() != m) {
    throw std::invalid_argument("kkt_residuals: allocation size mismatch");
  }
  const auto terms = channel_terms(problem);
  const auto& k = problem.constraints;
  const bool use_budget = problem.enforce_budget;

  KktReport r;
  r.mu_share.assign(m, 0.0);
  r.mu_cap.assign(m, 0.0);
  r.stationarity_theta.assign(m, 0.0);
  r.stationarity_eta.assign(m, 0.0);
  r.idle_channel_gain.assign(m, 0.0);
  r.slack_share.assign(m, 0.0);
  r.slack_cap.assign(m, 0.0);

  // Partial derivatives of the rate at the allocation.
  std::vector<double> d_theta(m, 0.0), d_eta(m, 0.0);
  std::vector<bool> active(m, false), at_share_cap(m, false), at_eta_cap(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& t = terms[j];
    const double th = allocation.theta[j];
    if (!t.usable || th <= 0.0) continue;
    active[j] = true;
    const double s = allocation.eta[j] * t.snr_per_watt / th;
    d_theta[j] = t.bandwidth * marginal_share_value(s);
    d_eta[j] = t.bandwidth * t.snr_per_watt / ((1.0 + s) * kLn2);
    at_share_cap[j] = th >= t.share_cap * (1.0 - kBindingTol);
    at_eta_cap[j] = allocation.eta[j] >= t.eta_cap * (1.0 - kBindingTol);
  }

  // Power multiplier.
  const double eta_sum = allocation.total_eta();
  if (eta_sum >= k.total_power * (1.0 - kBindingTol)) {
    double acc = 0.0;
    int count = 0;
    double min_capped = kInf;
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j]) continue;
      if (!at_eta_cap[j]) {
        acc += d_eta[j];
        ++count;
      } else {
        min_capped = std::min(min_capped, d_eta[j]);
      }
    }
    r.mu_power = count > 0 ? acc / count : (std::isfinite(min_capped) ? min_capped : 0.0);
  }
  // Money multiplier.
  const double money = spent(allocation.theta, problem.prices);
  if (use_budget && money >= k.money * (1.0 - kBindingTol)) {
    double acc = 0.0;
    int count = 0;
    double min_bound = kInf;
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j] || !(problem.prices[j] > 0.0)) continue;
      const double ratio = d_theta[j] / problem.prices[j];
      if (!at_share_cap[j]) {
        acc += ratio;
        ++count;
      } else {
        min_bound = std::min(min_bound, ratio);
      }
    }
    r.mu_money = count > 0 ? acc / count : (std::isfinite(min_bound) ? min_bound : 0.0);
  }

  double max_ratio = 0.0;  // scale for the money multiplier
  double max_d_eta = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (!active[j]) continue;
    max_d_eta = std::max(max_d_eta, d_eta[j]);
    if (problem.prices[j] > 0.0) max_ratio = std::max(max_ratio, d_theta[j] / problem.prices[j]);
  }

  for (std::size_t j = 0; j < m; ++j) {
    const auto& t = terms[j];
    if (!t.usable) continue;
    const double price_term = use_budget ? r.mu_money * problem.prices[j] : 0.0;
    if (!active[j]) {
      // Value of opening the channel along the best ray.
      const double s_water = r.mu_power > 0.0
                                 ? t.bandwidth * t.snr_per_watt / (r.mu_power * kLn2) - 1.0
                                 : kInf;
      if (s_water > 0.0) {
        const double gain = t.bandwidth * marginal_share_value(s_water) - price_term;
        r.idle_channel_gain[j] = std::max(0.0, gain / t.bandwidth);
      }
      continue;
    }
    if (at_share_cap[j]) r.mu_share[j] = std::max(0.0, d_theta[j] - price_term);
    if (at_eta_cap[j]) r.mu_cap[j] = std::max(0.0, d_eta[j] - r.mu_power);
    const double scale_theta = std::max(d_theta[j], std::numeric_limits<double>::min());
    const double scale_eta = std::max(d_eta[j], std::numeric_limits<double>::min());
    r.stationarity_theta[j] = (d_theta[j] - r.mu_share[j] - price_term) / scale_theta;
    r.stationarity_eta[j] = (d_eta[j] - r.mu_power - r.mu_cap[j]) / scale_eta;
    r.slack_share[j] =
        (r.mu_share[j] / scale_theta) * std::abs(allocation.theta[j] - t.share_cap);
    r.slack_cap[j] = (r.mu_cap[j] / scale_eta) * std::abs(allocation.eta[j] - t.eta_cap) / t.eta_cap;
  }
  if (max_d_eta > 0.0) {
    r.slack_power = (r.mu_power / max_d_eta) * std::abs(eta_sum - k.total_power) / k.total_power;
  }
  if (max_ratio > 0.0 && k.money > 0.0) {
    r.slack_money = (r.mu_money / max_ratio) * std::abs(money - k.money) / k.money;
  }
  return r;
}

}  // namespace d2du
