#include "d2du/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace d2du {
namespace {

constexpr double kGuaranteeSlack = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string_view scheme_name(Scheme scheme) {
  return scheme == Scheme::kPrice ? "price" : "centralized";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  if (name == "price") return Scheme::kPrice;
  if (name == "centralized") return Scheme::kCentralized;
  return std::nullopt;
}

CentralizedRunner::CentralizedRunner(Scenario scenario, CentralizedOptions options)
    : scenario_(std::move(scenario)),
      options_(options),
      sensor_((scenario_.validate(), scenario_)) {}

SlotRecord CentralizedRunner::step() {
  const std::size_t m = scenario_.channels.size();
  SlotRecord rec;
  rec.slot = slot_;
  rec.channels.resize(m);
  std::vector<int> users(m);
  std::vector<double> loads(m), bandwidths(m);
  for (std::size_t j = 0; j < m; ++j) {
    users[j] = scenario_.channels[j].users_at(slot_);
    const auto s = sensor_.state(j, users[j]);
    loads[j] = s.accessible ? s.load : 1.0;
    bandwidths[j] = s.bandwidth;
    rec.channels[j].wifi_users = users[j];
    rec.channels[j].load = s.load;
    rec.channels[j].accessible = s.accessible;
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < scenario_.links.size(); ++i) {
    if (scenario_.links[i].active_at(slot_)) active.push_back(i);
  }

  Matrix gains;
  for (std::size_t i : active) gains.push_back(scenario_.links[i].gains);
  auto key = std::make_pair(users, active);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    std::vector<Allocation> allocs;
    if (!active.empty()) {
      CentralizedProblem p;
      p.loads = loads;
      p.bandwidths = bandwidths;
      p.gains = gains;
      p.noise_psd = scenario_.noise_psd;
      p.constraints = scenario_.constraints;
      allocs = centralized_max_throughput(p, options_).allocations;
    }
    it = cache_.emplace(std::move(key), std::move(allocs)).first;
  }
  const auto& allocs = it->second;

  Matrix theta, eta;
  for (const auto& a : allocs) {
    theta.push_back(a.theta);
    eta.push_back(a.eta);
  }
  const auto collisions = detect_collisions(theta, loads, scenario_.collision_tolerance);
  const auto outcome =
      realized_outcomes(theta, eta, gains, bandwidths, scenario_.noise_psd, collisions);
  for (std::size_t j = 0; j < m; ++j) {
    rec.channels[j].demand = outcome.demand[j];
    rec.channels[j].wifi_fraction = outcome.wifi_fraction[j];
    rec.channels[j].conflicted = collisions.conflicted[j] != 0;
  }
  for (std::size_t k = 0; k < active.size(); ++k) {
    LinkSlot ls;
    ls.link = active[k];
    ls.prices.assign(m, kNaN);
    ls.planned = allocs[k];
    ls.theta = outcome.theta[k];
    ls.eta = outcome.eta[k];
    ls.channel_rate = outcome.channel_rate[k];
    ls.rate = outcome.link_rate[k];
    ls.ett = compute_ett(scenario_.links[active[k]].traffic_load, ls.rate);
    ls.collided = collisions.flags[k];
    ls.q2.assign(m, 0.0);
    rec.links.push_back(std::move(ls));
  }
  ++slot_;
  for (std::size_t i = 0; i < scenario_.links.size(); ++i) {
    if (scenario_.links[i].leave_slot == slot_) rec.left.push_back(i);
    if (scenario_.links[i].join_slot == slot_) rec.joined.push_back(i);
  }
  return rec;
}

RunResult run_scheme(const Scenario& scenario, Scheme scheme, const SlotSink& sink) {
  RunResult result;
  if (scheme == Scheme::kPrice) {
    World world(scenario);
    for (std::int64_t t = 0; t < scenario.horizon; ++t) sink(world.step());
    result.snapshot = world.coordinator().snapshot();
    result.federated_rounds = world.coordinator().rounds_completed();
  } else {
    CentralizedRunner runner(scenario);
    for (std::int64_t t = 0; t < scenario.horizon; ++t) sink(runner.step());
  }
  result.slots = scenario.horizon;
  return result;
}

std::int64_t convergence_slot(const std::vector<std::vector<double>>& price_series,
                              std::int64_t first_slot, std::int64_t lag, double rel) {
  if (lag < 1) throw std::invalid_argument("convergence_slot: lag must be >= 1");
  const auto n = static_cast<std::int64_t>(price_series.size());
  if (n <= lag) return -1;
  auto settled = [&](std::int64_t t) {
    const auto& a = price_series[t];
    const auto& b = price_series[t + lag];
    for (std::size_t c = 0; c < a.size(); ++c) {
      if (!(std::abs(b[c] - a[c]) <= rel * std::abs(a[c]))) return false;
    }
    return true;
  };
  std::int64_t t = n - lag - 1;
  if (!settled(t)) return -1;
  while (t > 0 && settled(t - 1)) --t;
  return first_slot + t;
}

double coefficient_of_variation(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  if (mean == 0.0) return var == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(var) / std::abs(mean);
}

SummaryBuilder::SummaryBuilder(const Scenario& scenario, Scheme scheme, std::int64_t window,
                               std::int64_t convergence_lag, double convergence_rel)
    : scenario_(&scenario),
      scheme_(scheme),
      window_(std::max<std::int64_t>(1, window)),
      lag_(convergence_lag),
      rel_(convergence_rel),
      conflicted_slots_(scenario.channels.size(), 0),
      violations_(scenario.channels.size(), 0) {}

void SummaryBuilder::add(const SlotRecord& record) {
  ++slots_;
  for (std::size_t j = 0; j < record.channels.size(); ++j) {
    const auto& ch = record.channels[j];
    if (ch.conflicted) {
      ++conflicted_slots_[j];
    } else if (ch.wifi_fraction < ch.load - kGuaranteeSlack) {
      ++violations_[j];
    }
  }
  for (const auto& ls : record.links) {
    if (std::any_of(ls.collided.begin(), ls.collided.end(), [](auto f) { return f != 0; })) {
      ++collision_slots_[ls.link];
    }
    auto& track = tracks_[ls.link];
    if (track.prices.empty() ||
        track.first_slot + static_cast<std::int64_t>(track.prices.size()) != record.slot) {
      track.first_slot = record.slot;
      track.prices.clear();
    }
    track.prices.push_back(ls.prices);
  }
  if (static_cast<std::int64_t>(recent_.size()) < window_) {
    recent_.push_back(record);
  } else {
    recent_[recent_next_] = record;
    recent_next_ = (recent_next_ + 1) % recent_.size();
  }
}

RunSummary SummaryBuilder::finish(int federated_rounds) const {
  RunSummary s;
  s.scheme = std::string(scheme_name(scheme_));
  s.slots = slots_;
  s.window = static_cast<std::int64_t>(recent_.size());
  s.federated_rounds = federated_rounds;
  const std::size_t m = scenario_->channels.size();
  s.channels.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    s.channels[j].conflicted_slots = conflicted_slots_[j];
    s.channels[j].guarantee_violations = violations_[j];
  }
  if (recent_.empty()) return s;

  const SlotRecord& last = recent_[(recent_next_ + recent_.size() - 1) % recent_.size()];
  const double w = static_cast<double>(recent_.size());
  for (std::size_t j = 0; j < m; ++j) {
    s.channels[j].load = last.channels[j].load;
    for (const auto& r : recent_) {
      s.channels[j].wifi_fraction += r.channels[j].wifi_fraction / w;
      s.channels[j].mean_load += r.channels[j].load / w;
    }
  }

  std::vector<double> etts;
  for (const auto& final_link : last.links) {
    LinkSummary ls;
    ls.link = final_link.link;
    ls.name = scenario_->links[ls.link].name;
    ls.prices.assign(m, 0.0);
    ls.theta.assign(m, 0.0);
    // Averages over the part of the window in which the link was active.
    double count = 0.0;
    for (const auto& r : recent_) {
      for (const auto& l : r.links) {
        if (l.link != ls.link) continue;
        count += 1.0;
        ls.rate += l.rate;
        ls.ett += l.ett;
        for (std::size_t j = 0; j < m; ++j) {
          ls.prices[j] += l.prices[j];
          ls.theta[j] += l.theta[j];
        }
      }
    }
    ls.rate /= count;
    ls.ett /= count;
    for (std::size_t j = 0; j < m; ++j) {
      ls.prices[j] /= count;
      ls.theta[j] /= count;
    }
    auto it = collision_slots_.find(ls.link);
    ls.collision_slots = it == collision_slots_.end() ? 0 : it->second;
    s.total_throughput += ls.rate;
    etts.push_back(ls.ett);
    s.links.push_back(std::move(ls));
  }
  s.ett_cv = coefficient_of_variation(etts);

  if (scheme_ == Scheme::kPrice && !last.links.empty()) {
    std::int64_t conv = 0;
    for (const auto& l : last.links) {
      const auto& track = tracks_.at(l.link);
      const auto c = convergence_slot(track.prices, track.first_slot, lag_, rel_);
      if (c < 0) {
        conv = -1;
        break;
      }
      conv = std::max(conv, c);
    }
    s.convergence_slot = conv;
  }
  return s;
}

}  // namespace d2du
