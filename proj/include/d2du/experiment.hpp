#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d2du/baseline.hpp"
#include "d2du/scenario.hpp"
#include "d2du/sim_core.hpp"

namespace d2du {

enum class Scheme { kPrice, kCentralized };

std::string_view scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

/// Per-slot full-information allocation of the active links. Prices are NaN
/// and nothing is learned. Allocations are cached per (active set, WiFi users).
class CentralizedRunner {
 public:
  explicit CentralizedRunner(Scenario scenario, CentralizedOptions options = {});

  std::int64_t slot() const { return slot_; }
  SlotRecord step();

 private:
  Scenario scenario_;
  CentralizedOptions options_;
  ChannelSensor sensor_;
  std::int64_t slot_ = 0;
  std::map<std::pair<std::vector<int>, std::vector<std::size_t>>, std::vector<Allocation>> cache_;
};

using SlotSink = std::function<void(const SlotRecord&)>;

struct RunResult {
  std::int64_t slots = 0;
  std::optional<MlpParams> snapshot;  // final coordinator snapshot (price scheme)
  int federated_rounds = 0;
};

/// Runs `scenario.horizon` slots of `scheme`, handing every record to `sink`.
RunResult run_scheme(const Scenario& scenario, Scheme scheme, const SlotSink& sink);

struct LinkSummary {
  std::size_t link = 0;
  std::string name;
  double rate = 0.0;            // mean over the final window, bits/s
  double ett = 0.0;             // mean over the final window, seconds
  std::vector<double> prices;   // mean over the final window (NaN without prices)
  std::vector<double> theta;
  std::int64_t collision_slots = 0;  // whole run
};

struct ChannelSummary {
  double load = 0.0;            // WiFi load at the last slot
  double wifi_fraction = 0.0;   // mean over the final window
  double mean_load = 0.0;       // mean guarantee over the final window
  std::int64_t conflicted_slots = 0;
  std::int64_t guarantee_violations = 0;  // unflagged slots with fraction below load
};

struct RunSummary {
  std::string scheme;
  std::int64_t slots = 0;
  std::int64_t window = 0;  // slots averaged for the final figures
  double total_throughput = 0.0;
  double ett_cv = 0.0;      // coefficient of variation of final ETTs
  std::int64_t convergence_slot = -1;  // -1 when prices never settle
  int federated_rounds = 0;
  std::vector<LinkSummary> links;  // links active at the last slot
  std::vector<ChannelSummary> channels;
};

/// Price convergence rule: the first slot t0 from which every tracked price
/// p satisfies |p(t + lag) - p(t)| <= rel * |p(t)| for all t >= t0 with
/// t + lag inside the run. Returns -1 if no such slot exists.
std::int64_t convergence_slot(const std::vector<std::vector<double>>& price_series,
                              std::int64_t first_slot, std::int64_t lag, double rel);

/// Folds a record stream into the figures written to summary.csv.
class SummaryBuilder {
 public:
  SummaryBuilder(const Scenario& scenario, Scheme scheme, std::int64_t window = 100,
                 std::int64_t convergence_lag = 50, double convergence_rel = 0.01);

  void add(const SlotRecord& record);
  RunSummary finish(int federated_rounds) const;

 private:
  struct Track {
    std::int64_t first_slot = 0;
    std::vector<std::vector<double>> prices;  // [slot - first_slot][channel]
  };

  const Scenario* scenario_;
  Scheme scheme_;
  std::int64_t window_;
  std::int64_t lag_;
  double rel_;
  std::vector<SlotRecord> recent_;  // ring of the last `window_` records
  std::size_t recent_next_ = 0;
  std::int64_t slots_ = 0;
  std::map<std::size_t, Track> tracks_;
  std::map<std::size_t, std::int64_t> collision_slots_;
  std::vector<std::int64_t> conflicted_slots_;
  std::vector<std::int64_t> violations_;
};

/// Coefficient of variation (population standard deviation over mean).
double coefficient_of_variation(const std::vector<double>& values);

}  // namespace d2du
