#include "d2du/outputs.hpp"

#include "d2du/price_net.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace d2du {
namespace {

constexpr double kGuaranteeSlack = 1e-12;

std::ofstream open_csv(const std::filesystem::path& file, const char* header) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << header << '\n';
  return out;
}

}  // namespace

std::string format_value(double v) {
  if (std::isnan(v)) return {};
  return fmt::format("{}", v);
}

CsvRecorder::CsvRecorder(const std::filesystem::path& dir, const Scenario& scenario)
    : scenario_(&scenario),
      slots_(open_csv(dir / "slots.csv", kSlotsHeader)),
      channels_(open_csv(dir / "channels.csv", kChannelsHeader)),
      prices_(open_csv(dir / "prices.csv", kPricesHeader)) {}

void CsvRecorder::write(const SlotRecord& r) {
  for (std::size_t j = 0; j < r.channels.size(); ++j) {
    const auto& c = r.channels[j];
    const bool met = c.wifi_fraction >= c.load - kGuaranteeSlack;
    channels_ << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.slot, j, c.wifi_users,
                             format_value(c.load), c.accessible ? 1 : 0, format_value(c.demand),
                             format_value(c.wifi_fraction), c.conflicted ? 1 : 0, met ? 1 : 0);
  }
  for (const auto& l : r.links) {
    const auto& name = scenario_->links[l.link].name;
    for (std::size_t j = 0; j < l.theta.size(); ++j) {
      slots_ << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.slot, name, j,
                            format_value(l.prices[j]), format_value(l.theta[j]),
                            format_value(l.eta[j]), format_value(l.channel_rate[j]),
                            format_value(l.rate), format_value(l.ett), l.collided[j] ? 1 : 0,
                            format_value(l.q1), format_value(l.q2[j]));
      if (!std::isnan(l.prices[j])) {
        prices_ << fmt::format("{},{},{},{}\n", r.slot, name, j, format_value(l.prices[j]));
      }
    }
  }
}

void CsvRecorder::close() {
  for (auto* f : {&slots_, &channels_, &prices_}) {
    f->flush();
    if (!*f) throw std::runtime_error("failed writing CSV output");
    f->close();
  }
}

void write_summary(const std::filesystem::path& file, const RunSummary& s) {
  auto out = open_csv(file, kSummaryHeader);
  auto row = [&](std::string_view metric, std::string_view link, std::string_view channel,
                 double value) {
    out << fmt::format("{},{},{},{},{}\n", s.scheme, metric, link, channel, format_value(value));
  };
  row("schema_version", "", "", kCsvSchemaVersion);
  row("slots", "", "", static_cast<double>(s.slots));
  row("window", "", "", static_cast<double>(s.window));
  row("total_throughput", "", "", s.total_throughput);
  row("ett_cv", "", "", s.ett_cv);
  row("convergence_slot", "", "", static_cast<double>(s.convergence_slot));
  row("federated_rounds", "", "", s.federated_rounds);
  for (const auto& l : s.links) {
    row("rate", l.name, "", l.rate);
    row("ett", l.name, "", l.ett);
    row("collision_slots", l.name, "", static_cast<double>(l.collision_slots));
    for (std::size_t j = 0; j < l.prices.size(); ++j) {
      const auto ch = std::to_string(j);
      row("price", l.name, ch, l.prices[j]);
      row("theta", l.name, ch, l.theta[j]);
    }
  }
  for (std::size_t j = 0; j < s.channels.size(); ++j) {
    const auto ch = std::to_string(j);
    const auto& c = s.channels[j];
    row("wifi_load", "", ch, c.load);
    row("wifi_fraction", "", ch, c.wifi_fraction);
    row("wifi_load_mean", "", ch, c.mean_load);
    row("conflicted_slots", "", ch, static_cast<double>(c.conflicted_slots));
    row("guarantee_violations", "", ch, static_cast<double>(c.guarantee_violations));
  }
  out.flush();
  if (!out) throw std::runtime_error("failed writing summary.csv");
}

RecordedRun record_run(const RunConfig& config, const std::filesystem::path& dir,
                       const SlotSink& observer) {
  {
    std::ofstream manifest(dir / "manifest.yaml", std::ios::binary | std::ios::trunc);
    manifest << emit_manifest(config);
    if (!manifest) throw std::runtime_error("failed writing manifest.yaml");
  }
  CsvRecorder recorder(dir, config.scenario);
  SummaryBuilder builder(config.scenario, config.scheme, config.summary_window);
  RecordedRun run;
  run.result = run_scheme(config.scenario, config.scheme, [&](const SlotRecord& record) {
    recorder.write(record);
    builder.add(record);
    if (observer) observer(record);
  });
  recorder.close();
  run.summary = builder.finish(run.result.federated_rounds);
  write_summary(dir / "summary.csv", run.summary);
  if (run.result.snapshot) {
    std::ofstream ckpt(dir / "federated.ckpt", std::ios::binary | std::ios::trunc);
    save_params(ckpt, *run.result.snapshot);
    if (!ckpt) throw std::runtime_error("failed writing federated.ckpt");
  }
  return run;
}

}  // namespace d2du
