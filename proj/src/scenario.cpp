#include "d2du/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace d2du {

int ChannelSpec::users_at(std::int64_t slot) const {
  int users = 0;
  for (const auto& change : wifi_users) {
    if (change.slot > slot) break;
    users = change.users;
  }
  return users;
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (channels.empty()) fail("scenario needs at least one channel");
  if (horizon < 0) fail("horizon must be >= 0");
  if (n_limit < 1) fail("n_limit must be >= 1");
  if (!(noise_psd > 0.0) || !std::isfinite(noise_psd)) fail("noise_psd must be > 0");
  if (!(collision_tolerance >= 0.0)) fail("collision_tolerance must be >= 0");
  if (!(sensing_noise_std >= 0.0)) fail("sensing_noise_std must be >= 0");
  constraints.validate();
  federated.coordinator.validate();
  if (federated.min_trained_slots < 0) fail("federated.min_trained_slots must be >= 0");
  if (!(learning.learning_rate >= 0.0)) fail("learning.learning_rate must be >= 0");
  if (!(learning.w_cap > 0.0)) fail("learning.w_cap must be > 0");
  if (!(learning.q_step >= 0.0)) fail("learning.q_step must be >= 0");

  for (std::size_t j = 0; j < channels.size(); ++j) {
    const auto& ch = channels[j];
    if (!(ch.bandwidth > 0.0)) fail(fmt::format("channels[{}].bandwidth must be > 0", j));
    try {
      ch.phy.validate();
    } catch (const std::invalid_argument& e) {
      fail(fmt::format("channels[{}].phy: {}", j, e.what()));
    }
    if (ch.wifi_users.empty() || ch.wifi_users.front().slot != 0) {
      fail(fmt::format("channels[{}].wifi_users must start at slot 0", j));
    }
    for (std::size_t k = 0; k < ch.wifi_users.size(); ++k) {
      if (ch.wifi_users[k].users < 0) {
        fail(fmt::format("channels[{}].wifi_users[{}].users must be >= 0", j, k));
      }
      if (k > 0 && ch.wifi_users[k].slot <= ch.wifi_users[k - 1].slot) {
        fail(fmt::format("channels[{}].wifi_users slots must be increasing", j));
      }
    }
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& l = links[i];
    if (l.name.empty()) fail(fmt::format("links[{}].name must not be empty", i));
    for (std::size_t k = 0; k < i; ++k) {
      if (links[k].name == l.name) fail(fmt::format("duplicate link name '{}'", l.name));
    }
    if (!(l.traffic_load >= 0.0) || !std::isfinite(l.traffic_load)) {
      fail(fmt::format("links[{}].traffic_load must be >= 0", i));
    }
    if (l.gains.size() != channels.size()) {
      fail(fmt::format("links[{}].gains has {} entries, expected {}", i, l.gains.size(),
                       channels.size()));
    }
    for (double g : l.gains) {
      if (!(g > 0.0) || !std::isfinite(g)) fail(fmt::format("links[{}].gains must be > 0", i));
    }
    if (l.join_slot < 0) fail(fmt::format("links[{}].join_slot must be >= 0", i));
    if (l.leave_slot <= l.join_slot) {
      fail(fmt::format("links[{}].leave_slot must be after join_slot", i));
    }
  }
}

NormalizationSpec Scenario::resolved_normalization() const {
  return normalization ? *normalization : derive_normalization(*this);
}

NormalizationSpec derive_normalization(const Scenario& scenario) {
  NormalizationSpec n;
  double max_load = 0.0;
  double g_min = INFINITY;
  double g_max = 0.0;
  for (const auto& l : scenario.links) {
    max_load = std::max(max_load, l.traffic_load);
    for (double g : l.gains) {
      g_min = std::min(g_min, g);
      g_max = std::max(g_max, g);
    }
  }
  n.max_link_load = max_load > 0.0 ? max_load : 1.0;
  if (g_max > 0.0 && g_min < g_max) {
    n.gain_min = g_min;
    n.gain_max = g_max;
  } else if (g_max > 0.0) {
    n.gain_min = g_min / 10.0;
    n.gain_max = g_max * 10.0;
  }
  return n;
}

}  // namespace d2du
