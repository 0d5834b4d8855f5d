#pragma once

#include <vector>

#include "d2du/link_allocator.hpp"

namespace d2du {

/// Joint throughput maximisation over all links with full information.
/// Money budgets do not apply.
struct CentralizedProblem {
  std::vector<double> loads;         // WiFi load per channel (1 when inaccessible)
  std::vector<double> bandwidths;    // Hz
  std::vector<std::vector<double>> gains;  // [link][channel]
  double noise_psd = 0.0;
  LinkConstraints constraints;

  std::size_t links() const { return gains.size(); }
  std::size_t channels() const { return loads.size(); }
  void validate() const;
};

struct CentralizedOptions {
  double initial_step = 0.1;  // step t is initial_step / sqrt(t)
  int window = 50;            // iterations compared by the stopping rule
  double tolerance = 1e-8;    // relative gain of the best objective over a window
  int max_iterations = 20000;
};

struct CentralizedResult {
  std::vector<Allocation> allocations;  // one per link
  double total_rate = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient ascent on the sum of link rates. Variables are scaled to
/// [0, 1] (share over available time, power over the per-channel cap) and the
/// step is the gradient divided by its largest entry. Identical links start
/// and stay identical.
CentralizedResult centralized_max_throughput(const CentralizedProblem& problem,
                                             const CentralizedOptions& options = {});

/// Euclidean projection of `v` onto {x : x >= 0, sum x <= cap}.
void project_capped_simplex(std::vector<double>& v, double cap);

/// Euclidean projection of `v` onto {x : 0 <= x <= 1, sum x <= cap}.
void project_box_budget(std::vector<double>& v, double cap);

}  // namespace d2du
