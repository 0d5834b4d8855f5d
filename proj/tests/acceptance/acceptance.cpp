// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "d2du/baseline.hpp"
#include "d2du/config.hpp"
#include "d2du/experiment.hpp"
#include "d2du/federated.hpp"
#include "d2du/link_allocator.hpp"
#include "d2du/outputs.hpp"
#include "d2du/price_net.hpp"
#include "d2du/random.hpp"
#include "d2du/wifi_model.hpp"
#include "gradcheck.hpp"

namespace fs = std::filesystem;
using namespace d2du;

namespace {

// Criterion 1
constexpr int kBianchiUsers = 64;
constexpr double kBianchiSeconds = 1.0;
// Criterion 2
constexpr int kSolverInstances = 100;
constexpr double kSolverLoadMax = 0.8;
constexpr double kGainLogMin = -11.0;  // log-uniform over three decades
constexpr double kGainLogMax = -8.0;
constexpr double kOracleShortfall = 0.005;
constexpr double kKktTolerance = 1e-6;
constexpr int kOracleGrid = 101;
constexpr double kSolverSeconds = 30.0;
// Criterion 3
constexpr int kGradientNets = 50;
constexpr double kGradientRelError = 1e-5;
constexpr double kGradientSeconds = 10.0;
// Criterion 4
constexpr std::int64_t kConvergenceLag = 50;
constexpr double kConvergenceRel = 0.01;
constexpr std::int64_t kConvergenceSlots = 1000;
// Criterion 5
constexpr double kEttCvMax = 0.05;
constexpr double kProportionalTolerance = 0.05;
// Criterion 6
constexpr double kWifiMeanFactor = 0.95;
constexpr double kGuaranteeSlack = 1e-12;
// Criterion 7
constexpr double kThroughputFraction = 0.85;
constexpr double kDominanceSlack = 0.005;  // accuracy of the centralized solver
// Criterion 8
constexpr int kJoinSeeds = 10;
constexpr std::int64_t kJoinHorizon = 5000;
constexpr std::int64_t kJoinSlot = 2000;
constexpr std::int64_t kFinalWindow = 500;
constexpr double kJoinBand = 0.10;
constexpr std::int64_t kTransientSlots = 1000;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << fmt::format("{} {:>2} {}: {}", ok ? "PASS" : "FAIL", id, name, detail)
            << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path work_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "d2du_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig load(const std::string& name, const std::vector<Override>& overrides = {}) {
  return load_config_file(std::string(D2DU_CONFIG_DIR) + "/" + name, overrides);
}

// Runs from the emitted manifest, so a second run from the same manifest
// must reproduce the files byte for byte.
RecordedRun run_from_manifest(const RunConfig& cfg, const fs::path& dir,
                              const SlotSink& observer = {}) {
  const auto manifest = parse_config(emit_manifest(cfg));
  return record_run(manifest, dir, observer);
}

// Per-link ETT series indexed by slot, +inf where the link was absent.
struct EttSeries {
  std::map<std::size_t, std::vector<double>> by_link;
  void add(const SlotRecord& r, std::int64_t horizon) {
    for (const auto& l : r.links) {
      auto& v = by_link[l.link];
      if (v.empty()) v.assign(static_cast<std::size_t>(horizon), std::nan(""));
      v[static_cast<std::size_t>(r.slot)] = l.ett;
    }
  }
  double tail_mean(std::size_t link, std::int64_t window) const {
    const auto& v = by_link.at(link);
    double s = 0.0;
    for (auto t = v.size() - static_cast<std::size_t>(window); t < v.size(); ++t) s += v[t];
    return s / static_cast<double>(window);
  }
};

// 1. Unimodal saturation throughput for both back-off depths.
void bianchi_unimodality() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (int m : {3, 5}) {
    WifiPhyParams phy;
    phy.cw_min = 32;
    phy.max_backoff_stage = m;
    const auto s = throughput_curve(phy, kBianchiUsers);
    int maxima = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool left = i == 0 || s[i] > s[i - 1];
      const bool right = i + 1 == s.size() || s[i] > s[i + 1];
      maxima += left && right;
    }
    ok = ok && maxima == 1;
    detail += fmt::format("m={} local maxima {} (peak n={}); ", m, maxima, find_peak(phy).n_max);
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kBianchiSeconds;
  report(1, "bianchi-unimodality", ok, detail + fmt::format("{:.3f} s", secs));
}

// 2. Dual-bisection solver against the grid oracle with KKT residuals.
void solver_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(mix_seed(2024, 2));
  double worst_gap = -1.0;  // (oracle - solver) / oracle
  double worst_kkt = 0.0;
  int bad = 0;
  for (int i = 0; i < kSolverInstances; ++i) {
    const std::size_t m = 1 + static_cast<std::size_t>(i % 2);
    LinkProblem p;
    for (std::size_t j = 0; j < m; ++j) {
      p.prices.push_back(rng.uniform(0.05, 10.0));
      p.loads.push_back(rng.uniform(0.0, kSolverLoadMax));
      p.gains.push_back(std::pow(10.0, rng.uniform(kGainLogMin, kGainLogMax)));
      p.bandwidths.push_back(20e6);
    }
    p.noise_psd = Scenario{}.noise_psd;
    const auto a = solve_allocation(p);
    const auto g = brute_force_allocation(p, kOracleGrid);
    const double gap = g.rate > 0.0 ? (g.rate - a.rate) / g.rate : 0.0;
    const double kkt = kkt_residuals(a, p).max_residual();
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, kkt);
    if (gap > kOracleShortfall || !(kkt <= kKktTolerance)) ++bad;
  }
  const double secs = seconds_since(t0);
  report(2, "solver-oracle", bad == 0 && secs < kSolverSeconds,
         fmt::format("{} instances, {} outside tolerance, worst shortfall {:.3e} (limit {}), "
                     "worst KKT {:.3e} (limit {}), {:.2f} s",
                     kSolverInstances, bad, worst_gap, kOracleShortfall, worst_kkt, kKktTolerance,
                     secs));
}

// 3. Backpropagation against central differences.
void gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(mix_seed(2024, 3));
  double worst = 0.0;
  for (int i = 0; i < kGradientNets; ++i) {
    const auto p = init_params(mix_seed(2024, 300 + static_cast<std::uint64_t>(i)));
    const auto batch = testing::random_batch(rng, p, 1 + static_cast<std::size_t>(i % 4), 10.0);
    worst = std::max(worst, testing::check_gradient(p, batch, 10.0, 1e-6).max_relative_error);
  }
  const double secs = seconds_since(t0);
  report(3, "gradient-check", worst <= kGradientRelError && secs < kGradientSeconds,
         fmt::format("{} nets, max relative error {:.3e} (limit {}), {:.2f} s", kGradientNets,
                     worst, kGradientRelError, secs));
}

// 4. Two links, two channels, default learning constants.
void two_link_convergence(std::vector<std::pair<RunConfig, fs::path>>& reruns) {
  auto cfg = load("two_links.yaml");
  cfg.scenario.horizon = kConvergenceSlots;
  const auto dir = work_dir("two_links");
  std::map<std::size_t, std::vector<std::vector<double>>> prices;
  run_from_manifest(cfg, dir, [&](const SlotRecord& r) {
    for (const auto& l : r.links) prices[l.link].push_back(l.prices);
  });
  reruns.emplace_back(cfg, dir);
  std::int64_t slot = 0;
  for (const auto& [link, series] : prices) {
    const auto c = convergence_slot(series, 0, kConvergenceLag, kConvergenceRel);
    slot = c < 0 ? -1 : (slot < 0 ? -1 : std::max(slot, c));
  }
  const auto& c1 = prices.at(0).back();
  const auto& c2 = prices.at(1).back();
  const bool ordered = c1[0] < c1[1] && c2[0] > c2[1];
  report(4, "two-link-convergence", slot >= 0 && ordered,
         fmt::format("prices settled (<{}% per {} slots) from slot {} of {}; "
                     "c11={:.4f} c12={:.4f} c21={:.4f} c22={:.4f}",
                     kConvergenceRel * 100, kConvergenceLag, slot, kConvergenceSlots, c1[0], c1[1],
                     c2[0], c2[1]));
}

// 5-7. Four-link scenario under both schemes.
void four_link(std::vector<std::pair<RunConfig, fs::path>>& reruns) {
  const auto price_cfg = load("four_links.yaml");
  auto central_cfg = price_cfg;
  central_cfg.scheme = Scheme::kCentralized;

  const auto price_dir = work_dir("four_links_price");
  std::vector<double> price_totals;
  std::vector<std::uint8_t> conflict_free;
  std::int64_t unflagged = 0, unflagged_violations = 0;
  const auto price = run_from_manifest(price_cfg, price_dir, [&](const SlotRecord& r) {
    double total = 0.0;
    bool flagged = false;
    for (const auto& l : r.links) {
      total += l.rate;
      flagged = flagged || std::any_of(l.collided.begin(), l.collided.end(),
                                       [](std::uint8_t f) { return f != 0; });
    }
    price_totals.push_back(total);
    conflict_free.push_back(flagged ? 0 : 1);
    if (!flagged) {
      ++unflagged;
      for (const auto& c : r.channels) {
        if (c.wifi_fraction < c.load - kGuaranteeSlack) ++unflagged_violations;
      }
    }
  });
  reruns.emplace_back(price_cfg, price_dir);

  const auto central_dir = work_dir("four_links_centralized");
  std::vector<double> central_totals;
  const auto central = run_from_manifest(central_cfg, central_dir, [&](const SlotRecord& r) {
    double total = 0.0;
    for (const auto& l : r.links) total += l.rate;
    central_totals.push_back(total);
  });
  reruns.emplace_back(central_cfg, central_dir);

  // 5. Fairness under prices, load-proportional ETTs when maximising throughput.
  const auto& links = central.summary.links;
  bool strictly_ordered = true;
  std::vector<double> ratio;
  std::string ett_text;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double load = price_cfg.scenario.links[links[i].link].traffic_load;
    ratio.push_back(links[i].ett / load);
    ett_text += fmt::format("{}{:.4g}", i ? ":" : "", links[i].ett);
    if (i > 0) {
      const double prev_load = price_cfg.scenario.links[links[i - 1].link].traffic_load;
      const bool heavier_first = prev_load > load;
      strictly_ordered = strictly_ordered &&
                         (heavier_first ? links[i - 1].ett > links[i].ett
                                        : links[i - 1].ett < links[i].ett);
    }
  }
  const double mean_ratio = std::accumulate(ratio.begin(), ratio.end(), 0.0) / ratio.size();
  double worst_prop = 0.0;
  for (double r : ratio) worst_prop = std::max(worst_prop, std::abs(r / mean_ratio - 1.0));
  std::string price_etts;
  for (std::size_t i = 0; i < price.summary.links.size(); ++i) {
    price_etts += fmt::format("{}{:.4g}", i ? ":" : "", price.summary.links[i].ett);
  }
  report(5, "ett-fairness",
         price.summary.ett_cv <= kEttCvMax && strictly_ordered &&
             worst_prop <= kProportionalTolerance,
         fmt::format("price ETT {} s, CV {:.4f} (limit {}); centralized ETT {} s, ordered {}, "
                     "max deviation from load-proportional {:.4f} (limit {})",
                     price_etts, price.summary.ett_cv, kEttCvMax, ett_text,
                     strictly_ordered ? "yes" : "no", worst_prop, kProportionalTolerance));

  // 6. WiFi keeps its share.
  bool mean_ok = true;
  std::string per_channel;
  for (std::size_t j = 0; j < price.summary.channels.size(); ++j) {
    const auto& c = price.summary.channels[j];
    const bool ok = c.wifi_fraction >= kWifiMeanFactor * c.mean_load;
    mean_ok = mean_ok && ok;
    per_channel += fmt::format("{}u{} {:.4f}/{:.4f}", j ? ", " : "", j + 1, c.wifi_fraction,
                               c.mean_load);
  }
  report(6, "wifi-coexistence", mean_ok && unflagged_violations == 0,
         fmt::format("final-window WiFi fraction/load: {} (need >= {}x); {} unflagged slots, "
                     "{} below the guarantee",
                     per_channel, kWifiMeanFactor, unflagged, unflagged_violations));

  // 7. Throughput gap, plus dominance of the centralized optimum on slots
  // without collisions.
  const double ratio7 = price.summary.total_throughput / central.summary.total_throughput;
  std::int64_t dominated = 0, checked = 0;
  double worst_excess = 0.0;
  for (std::size_t t = 0; t < price_totals.size(); ++t) {
    if (!conflict_free[t]) continue;
    ++checked;
    const double excess = price_totals[t] / central_totals[t] - 1.0;
    worst_excess = std::max(worst_excess, excess);
    if (excess > kDominanceSlack) ++dominated;
  }
  report(7, "throughput-gap", ratio7 >= kThroughputFraction && dominated == 0,
         fmt::format("price {:.6g} bit/s vs centralized {:.6g} bit/s = {:.4f} (need >= {}); "
                     "price above centralized by more than {} on {} of {} conflict-free slots "
                     "(largest excess {:.2e})",
                     price.summary.total_throughput, central.summary.total_throughput, ratio7,
                     kThroughputFraction, kDominanceSlack, dominated, checked, worst_excess));
}

// 8. Joining link with the federated snapshot versus a random start.
void federated_join(std::vector<std::pair<RunConfig, fs::path>>& reruns) {
  struct Outcome {
    double slots_to_band = 0.0;
    double incumbent_deviation = 0.0;
  };
  auto run = [&](int seed, bool warm) {
    auto cfg = load("federated_join.yaml");
    cfg.scenario.seed = static_cast<std::uint64_t>(seed);
    cfg.scenario.horizon = kJoinHorizon;
    cfg.scenario.federated.warm_start_joiners = warm;
    cfg.scenario.links[2].join_slot = kJoinSlot;
    const auto dir = work_dir(fmt::format("join_{}_{}", seed, warm ? "fed" : "rand"));
    EttSeries ett;
    run_from_manifest(cfg, dir, [&](const SlotRecord& r) { ett.add(r, kJoinHorizon); });
    if (seed == 1 && warm) reruns.emplace_back(cfg, dir);
    Outcome o;
    const double final_joiner = ett.tail_mean(2, kFinalWindow);
    const auto& joiner = ett.by_link.at(2);
    o.slots_to_band = std::numeric_limits<double>::infinity();
    for (auto t = kJoinSlot; t < kJoinHorizon; ++t) {
      if (std::abs(joiner[t] - final_joiner) <= kJoinBand * final_joiner) {
        o.slots_to_band = static_cast<double>(t - kJoinSlot);
        break;
      }
    }
    for (std::size_t k : {std::size_t{0}, std::size_t{1}}) {
      const double fin = ett.tail_mean(k, kFinalWindow);
      const auto& v = ett.by_link.at(k);
      for (auto t = kJoinSlot; t <= kJoinSlot + kTransientSlots; ++t) {
        o.incumbent_deviation = std::max(o.incumbent_deviation, std::abs(v[t] - fin) / fin);
      }
    }
    return o;
  };
  std::vector<double> fed_slots, rand_slots, fed_dev, rand_dev;
  for (int seed = 1; seed <= kJoinSeeds; ++seed) {
    const auto f = run(seed, true);
    const auto r = run(seed, false);
    fed_slots.push_back(f.slots_to_band);
    rand_slots.push_back(r.slots_to_band);
    fed_dev.push_back(f.incumbent_deviation);
    rand_dev.push_back(r.incumbent_deviation);
  }
  const double fs_med = median(fed_slots), rs_med = median(rand_slots);
  const double fd_med = median(fed_dev), rd_med = median(rand_dev);
  report(8, "federated-warm-start", fs_med < rs_med && fd_med < rd_med,
         fmt::format("median slots to within {}% of final ETT: federated {} vs random {}; "
                     "median incumbent max deviation: federated {:.4f} vs random {:.4f} "
                     "({} seeds)",
                     kJoinBand * 100, fs_med, rs_med, fd_med, rd_med, kJoinSeeds));
}

// 9. Exact identities of averaging and blending.
void federated_algebra() {
  const auto a = init_params(mix_seed(9, 1));
  const auto b = init_params(mix_seed(9, 2));
  const auto c = init_params(mix_seed(9, 3));
  std::vector<std::string> broken;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) broken.emplace_back(what);
  };
  const std::vector<MlpParams> same(4, a);
  expect(average_params(same) == a, "mean of identical");
  const std::vector<MlpParams> pair{a, b};
  const auto mid = average_params(pair);
  bool midpoint = true;
  for (std::size_t i = 0; i < MlpParams::kCount; ++i) {
    midpoint = midpoint && mid.flatten()[i] == (a.flatten()[i] + b.flatten()[i]) / 2.0;
  }
  expect(midpoint, "midpoint");
  const std::vector<MlpParams> abc{a, b, c}, cab{c, a, b}, bca{b, c, a};
  expect(average_params(abc) == average_params(cab) && average_params(abc) == average_params(bca),
         "permutation");
  expect(apply_blend(a, b, 0.0) == a, "beta=0");
  expect(apply_blend(a, b, 1.0) == b, "beta=1");
  bool fixed = true;
  for (double beta : {0.1, 0.2315, 0.5, 0.9}) fixed = fixed && apply_blend(a, a, beta) == a;
  expect(fixed, "own=snapshot");
  const FederatedConfig fc;
  expect(blend_factor(fc.epsilon, fc.gamma, fc.epsilon) == 0.5, "beta(epsilon)=0.5");
  Coordinator coord(fc);
  const auto& snap = coord.run_round(abc);
  auto ws = coord.warm_start(1);
  expect(ws.from_snapshot && ws.params == snap, "warm start copies snapshot");
  ws.params.values()[0] += 1.0;
  expect(*coord.snapshot() == average_params(abc), "snapshot immutable");
  expect(!Coordinator(fc).warm_start(1).from_snapshot, "fallback flagged");
  report(9, "federated-algebra", broken.empty(),
         broken.empty() ? std::string("all identities hold exactly, beta(epsilon) = 0.5")
                        : fmt::format("broken: {}", fmt::join(broken, ", ")));
}

// 10. Re-running each recorded scenario from its manifest.
void determinism(const std::vector<std::pair<RunConfig, fs::path>>& reruns) {
  int mismatches = 0;
  std::string names;
  for (const auto& [cfg, dir] : reruns) {
    const auto again = work_dir(dir.filename().string() + "_rerun");
    const auto manifest = load_config_file((dir / "manifest.yaml").string());
    record_run(manifest, again);
    for (const char* f : {"manifest.yaml", "slots.csv", "channels.csv", "prices.csv",
                          "summary.csv"}) {
      if (read_file(dir / f) != read_file(again / f)) {
        ++mismatches;
        names += fmt::format(" {}/{}", dir.filename().string(), f);
      }
    }
  }
  report(10, "determinism", mismatches == 0,
         fmt::format("{} runs repeated from their manifests, {} differing files{}", reruns.size(),
                     mismatches, names));
}

}  // namespace

int main() {
  std::vector<std::pair<RunConfig, fs::path>> reruns;
  const std::vector<std::function<void()>> checks{
      bianchi_unimodality,
      solver_oracle,
      gradient_check,
      [&] { two_link_convergence(reruns); },
      [&] { four_link(reruns); },
      [&] { federated_join(reruns); },
      federated_algebra,
      [&] { determinism(reruns); },
  };
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      std::cout << "FAIL    error: " << e.what() << std::endl;
      ++failures;
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
