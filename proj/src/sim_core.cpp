#include "d2du/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace d2du {
namespace {

constexpr std::uint64_t kSensingSalt = 0xC0FFEE;

}  // namespace

CollisionReport detect_collisions(const Matrix& theta, std::span<const double> channel_loads,
                                  double tolerance) {
  const std::size_t m = channel_loads.size();
  CollisionReport r;
  r.conflicted.assign(m, 0);
  r.flags.assign(theta.size(), std::vector<std::uint8_t>(m, 0));
  for (std::size_t j = 0; j < m; ++j) {
    double demand = 0.0;
    for (const auto& row : theta) demand += row.at(j);
    const double available = std::max(0.0, 1.0 - channel_loads[j]);
    if (demand <= available + tolerance) continue;
    r.conflicted[j] = 1;
    for (std::size_t i = 0; i < theta.size(); ++i) r.flags[i][j] = theta[i][j] > 0.0 ? 1 : 0;
  }
  return r;
}

RealizedOutcome realized_outcomes(const Matrix& theta, const Matrix& eta, const Matrix& gains,
                                  std::span<const double> bandwidths, double noise_psd,
                                  const CollisionReport& collisions) {
  const std::size_t n = theta.size();
  const std::size_t m = bandwidths.size();
  if (eta.size() != n || gains.size() != n || collisions.conflicted.size() != m) {
    throw std::invalid_argument("realized_outcomes: inconsistent dimensions");
  }
  RealizedOutcome out;
  out.theta = theta;
  out.eta = eta;
  out.channel_rate.assign(n, std::vector<double>(m, 0.0));
  out.link_rate.assign(n, 0.0);
  out.wifi_fraction.assign(m, 1.0);
  out.demand.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double demand = 0.0;
    for (std::size_t i = 0; i < n; ++i) demand += theta[i][j];
    out.demand[j] = demand;
    double used = demand;
    if (collisions.conflicted[j] && demand > 1.0) {
      const double factor = 1.0 / demand;
      for (std::size_t i = 0; i < n; ++i) {
        out.theta[i][j] = theta[i][j] * factor;
        out.eta[i][j] = eta[i][j] * factor;
      }
      used = 1.0;
    }
    out.wifi_fraction[j] = std::max(0.0, 1.0 - used);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double th = out.theta[i][j];
      if (!(th > 0.0)) continue;
      const double snr = out.eta[i][j] * gains[i][j] / (noise_psd * bandwidths[j] * th);
      out.channel_rate[i][j] = th * bandwidths[j] * std::log2(1.0 + snr);
      out.link_rate[i] += out.channel_rate[i][j];
    }
  }
  return out;
}

double compute_ett(double load_bits, double rate) {
  if (load_bits < 0.0 || rate < 0.0) throw std::domain_error("compute_ett: negative input");
  if (load_bits == 0.0) return 0.0;
  if (rate == 0.0) return std::numeric_limits<double>::infinity();
  return load_bits / rate;
}

ChannelSensor::ChannelSensor(const Scenario& scenario) {
  for (const auto& ch : scenario.channels) {
    bandwidths_.push_back(ch.bandwidth);
    phys_.push_back(ch.phy);
    peaks_.push_back(find_peak(ch.phy, scenario.n_limit));
  }
}

ChannelState ChannelSensor::state(std::size_t channel, int wifi_users) const {
  const auto& peak = peaks_.at(channel);
  const auto load = channel_traffic_load(wifi_users, phys_[channel], peak);
  ChannelState s;
  s.bandwidth = bandwidths_[channel];
  s.wifi_users = wifi_users;
  s.load = load.load;
  s.accessible = load.accessible;
  s.n_max = peak.n_max;
  s.r_max_total = peak.r_max_total;
  s.r_hat_max = peak.r_hat_max;
  return s;
}

World::World(Scenario scenario)
    : scenario_(std::move(scenario)),
      norms_(),
      sensor_((scenario_.validate(), scenario_)),
      coordinator_(scenario_.federated.coordinator),
      sensing_rng_(mix_seed(scenario_.seed, kSensingSalt)) {
  norms_ = scenario_.resolved_normalization();
  SlotRecord unused;
  apply_membership(0, unused);
}

bool World::join_link(std::size_t spec, bool warm_start) {
  if (spec >= scenario_.links.size()) throw std::out_of_range("join_link: unknown link");
  auto pos = std::lower_bound(agents_.begin(), agents_.end(), spec,
                              [](const LinkAgent& a, std::size_t s) { return a.spec < s; });
  if (pos != agents_.end() && pos->spec == spec) return false;
  LinkAgent agent;
  agent.spec = spec;
  const std::uint64_t seed = mix_seed(scenario_.seed, spec);
  if (warm_start) {
    auto ws = coordinator_.warm_start(seed);
    agent.params = std::move(ws.params);
    agent.warm_started = ws.from_snapshot;
  } else {
    agent.params = init_params(seed);
  }
  agents_.insert(pos, std::move(agent));
  return true;
}

bool World::leave_link(std::size_t spec) {
  auto it = std::find_if(agents_.begin(), agents_.end(),
                         [spec](const LinkAgent& a) { return a.spec == spec; });
  if (it == agents_.end()) return false;
  agents_.erase(it);
  return true;
}

void World::apply_membership(std::int64_t slot, SlotRecord& record) {
  for (std::size_t i = 0; i < scenario_.links.size(); ++i) {
    if (scenario_.links[i].leave_slot == slot && leave_link(i)) record.left.push_back(i);
  }
  for (std::size_t i = 0; i < scenario_.links.size(); ++i) {
    if (scenario_.links[i].join_slot == slot &&
        join_link(i, scenario_.federated.warm_start_joiners)) {
      record.joined.push_back(i);
    }
  }
}

std::vector<double> World::quote_prices(std::size_t spec,
                                        std::span<const double> channel_loads) const {
  auto it = std::find_if(agents_.begin(), agents_.end(),
                         [spec](const LinkAgent& a) { return a.spec == spec; });
  if (it == agents_.end()) throw std::out_of_range("quote_prices: link not active");
  const auto& link = scenario_.links[spec];
  std::vector<double> prices(channel_loads.size());
  for (std::size_t j = 0; j < prices.size(); ++j) {
    const auto x = normalize_input(link.traffic_load, channel_loads[j], link.gains[j], norms_);
    prices[j] = forward(it->params, x, scenario_.learning.w_cap);
  }
  return prices;
}

SlotRecord World::step() {
  const std::size_t m = scenario_.channels.size();
  const std::size_t n = agents_.size();
  const auto& learn = scenario_.learning;

  SlotRecord rec;
  rec.slot = slot_;
  rec.channels.resize(m);
  std::vector<double> true_loads(m), sensed_loads(m), bandwidths(m);
  for (std::size_t j = 0; j < m; ++j) {
    const int users = scenario_.channels[j].users_at(slot_);
    const auto truth = sensor_.state(j, users);
    int sensed_users = users;
    if (scenario_.sensing_noise_std > 0.0) {
      const double noisy = users + scenario_.sensing_noise_std * sensing_rng_.normal();
      sensed_users = static_cast<int>(std::max(0.0, std::round(noisy)));
    }
    const auto sensed = sensed_users == users ? truth : sensor_.state(j, sensed_users);
    // Inaccessible channels offer no time to D2D.
    true_loads[j] = truth.accessible ? truth.load : 1.0;
    sensed_loads[j] = sensed.accessible ? sensed.load : 1.0;
    bandwidths[j] = truth.bandwidth;
    rec.channels[j].wifi_users = users;
    rec.channels[j].load = truth.load;
    rec.channels[j].accessible = truth.accessible;
  }

  Matrix theta(n), eta(n), gains(n);
  std::vector<std::vector<NetInput>> inputs(n);
  rec.links.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& agent = agents_[k];
    const auto& link = scenario_.links[agent.spec];
    auto& ls = rec.links[k];
    ls.link = agent.spec;
    ls.prices.resize(m);
    inputs[k].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      inputs[k][j] = normalize_input(link.traffic_load, sensed_loads[j], link.gains[j], norms_);
      ls.prices[j] = forward(agent.params, inputs[k][j], learn.w_cap);
    }
    LinkProblem problem;
    problem.prices = ls.prices;
    problem.loads = sensed_loads;
    problem.gains = link.gains;
    problem.bandwidths = bandwidths;
    problem.noise_psd = scenario_.noise_psd;
    problem.constraints = scenario_.constraints;
    ls.planned = solve_allocation(problem);
    theta[k] = ls.planned.theta;
    eta[k] = ls.planned.eta;
    gains[k] = link.gains;
  }

  const auto collisions = detect_collisions(theta, true_loads, scenario_.collision_tolerance);
  const auto outcome = realized_outcomes(theta, eta, gains, bandwidths, scenario_.noise_psd,
                                         collisions);
  for (std::size_t j = 0; j < m; ++j) {
    rec.channels[j].demand = outcome.demand[j];
    rec.channels[j].wifi_fraction = outcome.wifi_fraction[j];
    rec.channels[j].conflicted = collisions.conflicted[j] != 0;
  }

  std::vector<double> etts(n);
  for (std::size_t k = 0; k < n; ++k) {
    etts[k] = compute_ett(scenario_.links[agents_[k].spec].traffic_load, outcome.link_rate[k]);
  }

  std::vector<TrainSample> batch(m);
  for (std::size_t k = 0; k < n; ++k) {
    auto& agent = agents_[k];
    auto& ls = rec.links[k];
    ls.theta = outcome.theta[k];
    ls.eta = outcome.eta[k];
    ls.channel_rate = outcome.channel_rate[k];
    ls.rate = outcome.link_rate[k];
    ls.ett = etts[k];
    ls.collided = collisions.flags[k];
    ls.q1 = fairness_term(etts[k], etts, learn.q_step, learn.fairness_sign);
    ls.q2.resize(m);
    double loss_sum = 0.0;
    double accumulated = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      ls.q2[j] = collision_term(ls.collided[j] != 0, learn.v1, learn.v2);
      const LossSignal signal{ls.q1, ls.q2[j]};
      batch[j] = {inputs[k][j], ls.prices[j], signal.target_offset()};
      loss_sum += signal.loss();
      accumulated += scenario_.federated.accumulation == LossAccumulation::kSquared
                         ? signal.loss()
                         : std::abs(signal.target_offset());
    }
    ls.loss = loss_sum / static_cast<double>(m);
    auto trained = train_step(agent.params, batch, learn.learning_rate, learn.w_cap);
    agent.params = std::move(trained.params);
    ls.train_skipped = trained.skipped;
    agent.q_sum += accumulated;
    ++agent.trained_slots;
  }

  ++slot_;
  if (scenario_.federated.enabled && coordinator_.due(slot_)) {
    std::vector<MlpParams> contributions;
    std::vector<std::size_t> contributors;
    for (std::size_t k = 0; k < agents_.size(); ++k) {
      if (agents_[k].trained_slots >= scenario_.federated.min_trained_slots) {
        contributions.push_back(agents_[k].params);
        contributors.push_back(k);
      }
    }
    if (!contributions.empty()) {
      const auto& snapshot = coordinator_.run_round(contributions);
      const auto& cfg = coordinator_.config();
      for (std::size_t k : contributors) {
        const double beta = blend_factor(agents_[k].q_sum, cfg.gamma, cfg.epsilon);
        agents_[k].params = apply_blend(agents_[k].params, snapshot, beta);
      }
      rec.federated_round = true;
    }
    for (auto& a : agents_) a.q_sum = 0.0;
  }
  apply_membership(slot_, rec);
  return rec;
}

}  // namespace d2du
