// d2du command line: run scenarios, validate configs, print WiFi curves.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "d2du/config.hpp"
#include "d2du/experiment.hpp"
#include "d2du/outputs.hpp"
#include "d2du/wifi_model.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunArgs {
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::optional<std::string> scheme;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
  std::optional<std::string> fairness_sign;
  bool no_federated = false;
};

std::vector<d2du::Override> collect_overrides(const RunArgs& a) {
  std::vector<d2du::Override> out;
  for (const auto& o : a.overrides) out.push_back(d2du::parse_override(o));
  if (a.scheme) out.push_back({"scheme", *a.scheme});
  if (a.seed) out.push_back({"seed", std::to_string(*a.seed)});
  if (a.horizon) out.push_back({"horizon", std::to_string(*a.horizon)});
  if (a.fairness_sign) out.push_back({"learning.fairness_sign", *a.fairness_sign});
  if (a.no_federated) {
    out.push_back({"federated.enabled", "false"});
    out.push_back({"federated.warm_start_joiners", "false"});
  }
  return out;
}

int report_config_error(const d2du::ConfigError& e, const std::string& source) {
  std::cerr << d2du::format_issues(e.issues(), source);
  return kExitConfig;
}

int cmd_run(const RunArgs& args) {
  d2du::RunConfig cfg;
  try {
    cfg = d2du::load_config_file(args.config, collect_overrides(args));
  } catch (const d2du::ConfigError& e) {
    return report_config_error(e, args.config);
  }

  const fs::path dir(args.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << fmt::format("cannot create output directory '{}': {}\n", dir.string(),
                             ec.message());
    return kExitRuntime;
  }
  fs::remove(dir / "FAILED", ec);
  try {
    const auto run = d2du::record_run(cfg, dir);
    const auto& s = run.summary;
    std::cout << fmt::format("{} slots, scheme {}, total throughput {:.6g} bit/s, ETT cv {:.4g}, "
                             "convergence slot {}\n",
                             s.slots, s.scheme, s.total_throughput, s.ett_cv, s.convergence_slot);
    for (const auto& l : s.links) {
      std::cout << fmt::format("  {}: rate {:.6g} bit/s, ETT {:.6g} s\n", l.name, l.rate, l.ett);
    }
  } catch (const std::exception& e) {
    std::ofstream(dir / "FAILED") << e.what() << '\n';
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_validate(const std::string& path, const std::vector<std::string>& raw_overrides) {
  d2du::RunConfig cfg;
  try {
    std::vector<d2du::Override> overrides;
    for (const auto& o : raw_overrides) overrides.push_back(d2du::parse_override(o));
    cfg = d2du::load_config_file(path, overrides);
  } catch (const d2du::ConfigError& e) {
    return report_config_error(e, path);
  }
  const auto& sc = cfg.scenario;
  auto dbm = [](double w) { return 10.0 * std::log10(w * 1000.0); };
  std::cout << fmt::format("config ok: {} channels, {} links, horizon {}, seed {}, scheme {}\n",
                           sc.channels.size(), sc.links.size(), sc.horizon, sc.seed,
                           d2du::scheme_name(cfg.scheme));
  std::cout << fmt::format("p_c = {:.4g} dBm -> {:.5g} W\n", dbm(sc.constraints.total_power),
                           sc.constraints.total_power);
  std::cout << fmt::format("p_u = {:.4g} dBm -> {:.5g} W\n",
                           dbm(sc.constraints.per_channel_power),
                           sc.constraints.per_channel_power);
  std::cout << fmt::format("money budget C = {}\n", sc.constraints.money);
  std::cout << fmt::format("noise PSD = {:.6g} W/Hz\n", sc.noise_psd);
  for (std::size_t j = 0; j < sc.channels.size(); ++j) {
    const auto& ch = sc.channels[j];
    const int users = ch.users_at(0);
    const auto state = d2du::make_channel_state(ch.bandwidth, users, ch.phy, sc.n_limit);
    std::cout << fmt::format(
        "channel {}: B = {:.4g} Hz, wifi users {}, n_max {}, load {:.6g}{}\n", j, ch.bandwidth,
        users, state.n_max, state.load, state.accessible ? "" : " (inaccessible)");
  }
  for (const auto& l : sc.links) {
    std::string gains;
    for (double g : l.gains) gains += fmt::format(" {:.4g}", g);
    std::cout << fmt::format("link {}: load {:.6g} bits, gains{}, active [{}, {})\n", l.name,
                             l.traffic_load, gains, l.join_slot,
                             l.leave_slot == d2du::kNeverLeaves ? std::string("end")
                                                                : std::to_string(l.leave_slot));
  }
  return kExitOk;
}

int cmd_bianchi(int cw_min, int stage, int n_limit) {
  d2du::WifiPhyParams phy;
  phy.cw_min = cw_min;
  phy.max_backoff_stage = stage;
  try {
    phy.validate();
    const auto curve = d2du::throughput_curve(phy, n_limit);
    const auto peak = d2du::find_peak(phy, n_limit);
    std::cout << "n,throughput_bps,load\n";
    for (int n = 1; n <= n_limit; ++n) {
      const auto load = d2du::channel_traffic_load(n, phy, peak);
      std::cout << fmt::format("{},{},{}\n", n, curve[n - 1], load.load);
    }
    std::cerr << fmt::format("peak at n = {}: {:.6g} bit/s\n", peak.n_max, peak.r_max_total);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Price-based D2D spectrum sharing on unlicensed bands"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write CSV outputs");
  run_cmd->add_option("config", run.config, "Scenario YAML file")->required();
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--override", run.overrides, "Dotted key=value override")->take_all();
  run_cmd->add_option("--scheme", run.scheme, "price or centralized")
      ->check(CLI::IsMember({"price", "centralized"}));
  run_cmd->add_option("--seed", run.seed, "Random seed");
  run_cmd->add_option("--horizon", run.horizon, "Number of slots")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--fairness-sign", run.fairness_sign, "penalize_slow or equalizing")
      ->check(CLI::IsMember({"penalize_slow", "equalizing"}));
  run_cmd->add_flag("--no-federated", run.no_federated,
                    "Disable averaging rounds and warm starts");

  std::string validate_path;
  std::vector<std::string> validate_overrides;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and print derived values");
  validate_cmd->add_option("config", validate_path, "Scenario YAML file")->required();
  validate_cmd->add_option("--override", validate_overrides, "Dotted key=value override")
      ->take_all();

  int cw_min = 32, stage = 3, n_limit = 64;
  auto* bianchi_cmd = app.add_subcommand("bianchi", "Print the WiFi saturation throughput curve");
  bianchi_cmd->add_option("--cw-min", cw_min, "Initial contention window");
  bianchi_cmd->add_option("--stages", stage, "Maximum back-off stage");
  bianchi_cmd->add_option("--n-limit", n_limit, "Largest user count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(validate_path, validate_overrides);
    if (*bianchi_cmd) return cmd_bianchi(cw_min, stage, n_limit);
  } catch (const d2du::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
