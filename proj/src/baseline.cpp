#include "d2du/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace d2du {
namespace {

using Grid = std::vector<std::vector<double>>;

struct Scaled {
  Grid x;  // theta / available time
  Grid y;  // eta / per-channel cap
};

double objective(const CentralizedProblem& p, const Scaled& s, const std::vector<double>& avail,
                 double cap) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.links(); ++i) {
    for (std::size_t j = 0; j < p.channels(); ++j) {
      const double theta = s.x[i][j] * avail[j];
      if (!(theta > 0.0)) continue;
      const double g = p.gains[i][j] / (p.noise_psd * p.bandwidths[j]);
      total += theta * p.bandwidths[j] * std::log2(1.0 + s.y[i][j] * cap * g / theta);
    }
  }
  return total;
}

}  // namespace

void CentralizedProblem::validate() const {
  if (loads.empty() || bandwidths.size() != loads.size()) {
    throw std::invalid_argument("centralized problem: loads/bandwidths mismatch");
  }
  if (!(noise_psd > 0.0)) throw std::invalid_argument("centralized problem: noise_psd <= 0");
  for (double l : loads) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("centralized problem: load outside [0,1]");
  }
  for (double b : bandwidths) {
    if (!(b > 0.0)) throw std::invalid_argument("centralized problem: bandwidth <= 0");
  }
  for (const auto& row : gains) {
    if (row.size() != loads.size()) throw std::invalid_argument("centralized problem: gain row size");
    for (double g : row) {
      if (!(g >= 0.0)) throw std::invalid_argument("centralized problem: negative gain");
    }
  }
  constraints.validate();
}

void project_capped_simplex(std::vector<double>& v, double cap) {
  double sum = 0.0;
  for (double& x : v) {
    x = std::max(0.0, x);
    sum += x;
  }
  if (sum <= cap) return;
  // Project onto the simplex {x >= 0, sum x == cap} by the sort-based rule.
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double running = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    running += u[k];
    const double t = (running - cap) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) shift = t;
  }
  for (double& x : v) x = std::max(0.0, x - shift);
}

void project_box_budget(std::vector<double>& v, double cap) {
  double sum = 0.0;
  for (double x : v) sum += std::clamp(x, 0.0, 1.0);
  if (sum <= cap) {
    for (double& x : v) x = std::clamp(x, 0.0, 1.0);
    return;
  }
  // The shift applies to the raw values; clamping first would bias entries above 1.
  double lo = 0.0;
  double hi = *std::max_element(v.begin(), v.end());
  auto mass = [&](double t) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - t, 0.0, 1.0);
    return s;
  };
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > cap ? lo : hi) = mid;
  }
  for (double& x : v) x = std::clamp(x - hi, 0.0, 1.0);
}

CentralizedResult centralized_max_throughput(const CentralizedProblem& problem,
                                             const CentralizedOptions& options) {
  problem.validate();
  const std::size_t n = problem.links();
  const std::size_t m = problem.channels();
  const double cap = std::min(problem.constraints.per_channel_power, problem.constraints.total_power);
  const double power_budget = problem.constraints.total_power / cap;  // in scaled units

  std::vector<double> avail(m);
  for (std::size_t j = 0; j < m; ++j) avail[j] = std::max(0.0, 1.0 - problem.loads[j]);
  auto usable = [&](std::size_t i, std::size_t j) {
    return avail[j] > 0.0 && problem.gains[i][j] > 0.0;
  };

  Scaled s{Grid(n, std::vector<double>(m, 0.0)), Grid(n, std::vector<double>(m, 0.0))};
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t users = 0;
    for (std::size_t i = 0; i < n; ++i) users += usable(i, j);
    for (std::size_t i = 0; i < n; ++i) {
      if (usable(i, j)) s.x[i][j] = 1.0 / static_cast<double>(users);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t used = 0;
    for (std::size_t j = 0; j < m; ++j) used += usable(i, j);
    for (std::size_t j = 0; j < m; ++j) {
      if (usable(i, j)) s.y[i][j] = std::min(1.0, power_budget / static_cast<double>(used));
    }
  }

  CentralizedResult result;
  Scaled best = s;
  double best_value = objective(problem, s, avail, cap);
  std::vector<double> history{best_value};
  Grid gx(n, std::vector<double>(m)), gy(n, std::vector<double>(m));
  std::vector<double> column(n);

  int it = 1;
  for (; it <= options.max_iterations; ++it) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        gx[i][j] = gy[i][j] = 0.0;
        if (!usable(i, j)) continue;
        const double b = problem.bandwidths[j];
        const double g = problem.gains[i][j] / (problem.noise_psd * b);
        const double theta = s.x[i][j] * avail[j];
        const double eta = s.y[i][j] * cap;
        if (theta > 0.0) {
          const double snr = eta * g / theta;
          gx[i][j] = avail[j] * b *
                     (std::log2(1.0 + snr) - snr / ((1.0 + snr) * std::numbers::ln2));
          gy[i][j] = cap * b * g / ((1.0 + snr) * std::numbers::ln2);
        } else {
          // Opening a fresh share: the marginal rate grows without bound in
          // theta, so push it open with the largest available signal.
          gx[i][j] = avail[j] * b * std::log2(1.0 + eta * g / 1e-12);
        }
        scale = std::max({scale, std::abs(gx[i][j]), std::abs(gy[i][j])});
      }
    }
    if (!(scale > 0.0)) break;
    const double step = options.initial_step / std::sqrt(static_cast<double>(it));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        s.x[i][j] += step * gx[i][j] / scale;
        s.y[i][j] += step * gy[i][j] / scale;
        if (!usable(i, j)) s.x[i][j] = s.y[i][j] = 0.0;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = s.x[i][j];
      project_capped_simplex(column, 1.0);
      for (std::size_t i = 0; i < n; ++i) s.x[i][j] = column[i];
    }
    for (std::size_t i = 0; i < n; ++i) project_box_budget(s.y[i], power_budget);

    const double value = objective(problem, s, avail, cap);
    if (value > best_value) {
      best_value = value;
      best = s;
    }
    history.push_back(best_value);
    const auto w = static_cast<std::size_t>(options.window);
    if (history.size() > w) {
      const double before = history[history.size() - 1 - w];
      if (best_value - before <= options.tolerance * std::abs(best_value)) {
        result.converged = true;
        break;
      }
    }
  }

  result.iterations = std::min(it, options.max_iterations);
  result.allocations.assign(n, Allocation::zeros(m));
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = result.allocations[i];
    for (std::size_t j = 0; j < m; ++j) {
      const double theta = best.x[i][j] * avail[j];
      if (!(theta > 0.0)) continue;
      a.theta[j] = theta;
      a.eta[j] = best.y[i][j] * cap;
    }
    a.rate = rate(a.theta, a.eta, problem.gains[i], problem.bandwidths, problem.noise_psd);
    result.total_rate += a.rate;
  }
  return result;
}

}  // namespace d2du
