#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "d2du/config.hpp"
#include "d2du/experiment.hpp"
#include "d2du/scenario.hpp"
#include "d2du/sim_core.hpp"

namespace d2du {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kSlotsHeader =
    "slot,link,channel,price,theta,eta,channel_rate,link_rate,ett,collided,q1,q2";
inline constexpr const char* kChannelsHeader =
    "slot,channel,wifi_users,load,accessible,demand,wifi_fraction,conflicted,guarantee_met";
inline constexpr const char* kPricesHeader = "slot,link,channel,price";
inline constexpr const char* kSummaryHeader = "scheme,metric,link,channel,value";

/// Shortest text that parses back to the same double; empty for NaN.
std::string format_value(double v);

/// Streams slot records into slots.csv, channels.csv and prices.csv.
class CsvRecorder {
 public:
  CsvRecorder(const std::filesystem::path& dir, const Scenario& scenario);
  void write(const SlotRecord& record);
  void close();

 private:
  const Scenario* scenario_;
  std::ofstream slots_;
  std::ofstream channels_;
  std::ofstream prices_;
};

/// summary.csv: one metric per row.
void write_summary(const std::filesystem::path& file, const RunSummary& summary);

struct RecordedRun {
  RunResult result;
  RunSummary summary;
};

/// Runs `config` and writes manifest.yaml, slots.csv, channels.csv,
/// prices.csv, summary.csv and (price scheme) federated.ckpt into `dir`,
/// which must exist. Every record is also handed to `observer` if set.
RecordedRun record_run(const RunConfig& config, const std::filesystem::path& dir,
                       const SlotSink& observer = {});

}  // namespace d2du
