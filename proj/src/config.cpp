#include "d2du/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "d2du/random.hpp"

namespace d2du {
namespace {

constexpr std::uint64_t kGainSalt = 0x6A1A;

std::string fmt_double(double v) { return fmt::format("{}", v); }

// Reads typed values out of a YAML tree, collecting problems instead of
// stopping at the first one.
class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const YAML::Node& node, const std::string& path, const std::string& message) {
    const int line = node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
    issues.push_back({path, line, message});
  }

  // Reports keys of `map` that are not in `known`.
  void check_keys(const YAML::Node& map, const std::string& path,
                  std::initializer_list<std::string_view> known) {
    if (!map.IsDefined() || map.IsNull()) return;
    if (!map.IsMap()) {
      fail(map, path, "expected a mapping");
      return;
    }
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        fail(kv.first, join(path, key), "unknown key");
      }
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

  template <typename T>
  void read(const YAML::Node& map, const std::string& path, std::string_view key, T& out) {
    if (!map.IsDefined() || !map.IsMap()) return;
    const YAML::Node node = map[std::string(key)];
    if (!node.IsDefined() || node.IsNull()) return;
    const auto full = join(path, key);
    if (!node.IsScalar()) {
      fail(node, full, "expected a scalar");
      return;
    }
    try {
      if constexpr (std::is_same_v<T, double>) {
        out = parse_double(node.Scalar());
      } else {
        out = node.as<T>();
      }
    } catch (const std::exception&) {
      fail(node, full, fmt::format("cannot parse '{}'", node.Scalar()));
    }
  }

  static double parse_double(const std::string& s) {
    if (s == ".inf" || s == "inf") return INFINITY;
    if (s == "-.inf" || s == "-inf") return -INFINITY;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  }
};

void apply_override(YAML::Node root, const Override& o) {
  std::vector<std::string> parts;
  std::stringstream ss(o.key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) throw ConfigError({{o.key, 0, "empty override key"}});
  YAML::Node node = root;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& part = parts[k];
    const bool last = k + 1 == parts.size();
    const YAML::Node value = last ? YAML::Load(o.value) : YAML::Node();
    if (node.IsSequence()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw ConfigError({{o.key, 0, fmt::format("'{}' is not a sequence index", part)}});
      }
      if (idx >= node.size()) {
        throw ConfigError({{o.key, 0, fmt::format("index {} out of range", idx)}});
      }
      if (last) {
        node[idx] = value;
      } else {
        node.reset(node[idx]);
      }
    } else {
      if (last) {
        node[part] = value;
      } else {
        if (!node[part].IsDefined() || node[part].IsNull()) node[part] = YAML::Node(YAML::NodeType::Map);
        node.reset(node[part]);
      }
    }
  }
}

WifiPhyParams read_phy(Reader& r, const YAML::Node& node, const std::string& path,
                       WifiPhyParams phy) {
  r.check_keys(node, path,
               {"cw_min", "max_backoff_stage", "slot_time_s", "sifs_s", "difs_s",
                "header_time_s", "ack_time_s", "payload_bits", "data_rate_bps",
                "propagation_delay_s"});
  r.read(node, path, "cw_min", phy.cw_min);
  r.read(node, path, "max_backoff_stage", phy.max_backoff_stage);
  r.read(node, path, "slot_time_s", phy.slot_time);
  r.read(node, path, "sifs_s", phy.sifs);
  r.read(node, path, "difs_s", phy.difs);
  r.read(node, path, "header_time_s", phy.header_time);
  r.read(node, path, "ack_time_s", phy.ack_time);
  r.read(node, path, "payload_bits", phy.payload_bits);
  r.read(node, path, "data_rate_bps", phy.data_rate);
  r.read(node, path, "propagation_delay_s", phy.propagation_delay);
  return phy;
}

struct GainModel {
  bool present = false;
  double reference_loss_db = 40.0;  // at 1 m
  double exponent = 3.0;
  bool rayleigh = false;
};

RunConfig parse_root(const YAML::Node& root) {
  Reader r;
  RunConfig cfg;
  Scenario& sc = cfg.scenario;
  if (!root.IsMap()) {
    r.fail(root, "", "document must be a mapping");
    throw ConfigError(r.issues);
  }
  r.check_keys(root, "",
               {"seed", "horizon", "scheme", "n_limit", "summary_window", "noise",
                "collision_tolerance", "sensing_noise_std", "constraints", "learning",
                "federated", "phy", "load_unit_bits", "channels", "gain_model", "links",
                "normalization"});

  r.read(root, "", "seed", sc.seed);
  r.read(root, "", "horizon", sc.horizon);
  r.read(root, "", "n_limit", sc.n_limit);
  r.read(root, "", "summary_window", cfg.summary_window);
  r.read(root, "", "collision_tolerance", sc.collision_tolerance);
  r.read(root, "", "sensing_noise_std", sc.sensing_noise_std);
  std::string scheme = std::string(scheme_name(cfg.scheme));
  r.read(root, "", "scheme", scheme);
  if (auto s = parse_scheme(scheme)) {
    cfg.scheme = *s;
  } else {
    r.fail(root["scheme"], "scheme", "expected 'price' or 'centralized'");
  }

  const auto noise = root["noise"];
  r.check_keys(noise, "noise", {"psd_w_per_hz", "dbm", "reference_bandwidth_hz"});
  if (noise.IsDefined() && noise.IsMap()) {
    if (noise["psd_w_per_hz"]) {
      r.read(noise, "noise", "psd_w_per_hz", sc.noise_psd);
    } else if (noise["dbm"]) {
      double dbm = -95.0;
      double ref = 20e6;
      r.read(noise, "noise", "dbm", dbm);
      r.read(noise, "noise", "reference_bandwidth_hz", ref);
      sc.noise_psd = dbm_to_watts(dbm) / ref;
    }
  }

  const auto cons = root["constraints"];
  r.check_keys(cons, "constraints",
               {"total_power_dbm", "per_channel_power_dbm", "total_power_w",
                "per_channel_power_w", "money"});
  if (cons.IsDefined() && cons.IsMap()) {
    double dbm = 0.0;
    if (cons["total_power_dbm"]) {
      r.read(cons, "constraints", "total_power_dbm", dbm);
      sc.constraints.total_power = dbm_to_watts(dbm);
    }
    if (cons["per_channel_power_dbm"]) {
      r.read(cons, "constraints", "per_channel_power_dbm", dbm);
      sc.constraints.per_channel_power = dbm_to_watts(dbm);
    }
    r.read(cons, "constraints", "total_power_w", sc.constraints.total_power);
    r.read(cons, "constraints", "per_channel_power_w", sc.constraints.per_channel_power);
    r.read(cons, "constraints", "money", sc.constraints.money);
  }

  const auto learn = root["learning"];
  r.check_keys(learn, "learning",
               {"learning_rate", "w_cap", "q_step", "v1", "v2", "fairness_sign"});
  r.read(learn, "learning", "learning_rate", sc.learning.learning_rate);
  r.read(learn, "learning", "w_cap", sc.learning.w_cap);
  r.read(learn, "learning", "q_step", sc.learning.q_step);
  r.read(learn, "learning", "v1", sc.learning.v1);
  r.read(learn, "learning", "v2", sc.learning.v2);
  std::string sign = "equalizing";
  r.read(learn, "learning", "fairness_sign", sign);
  if (sign == "equalizing") {
    sc.learning.fairness_sign = FairnessSign::kEqualizing;
  } else if (sign == "penalize_slow") {
    sc.learning.fairness_sign = FairnessSign::kPenalizeSlow;
  } else {
    r.fail(learn["fairness_sign"], "learning.fairness_sign", "expected 'penalize_slow' or 'equalizing'");
  }

  const auto fed = root["federated"];
  r.check_keys(fed, "federated",
               {"enabled", "warm_start_joiners", "period", "gamma", "epsilon",
                "min_trained_slots", "accumulation"});
  r.read(fed, "federated", "enabled", sc.federated.enabled);
  r.read(fed, "federated", "warm_start_joiners", sc.federated.warm_start_joiners);
  r.read(fed, "federated", "period", sc.federated.coordinator.period);
  r.read(fed, "federated", "gamma", sc.federated.coordinator.gamma);
  r.read(fed, "federated", "epsilon", sc.federated.coordinator.epsilon);
  r.read(fed, "federated", "min_trained_slots", sc.federated.min_trained_slots);
  std::string acc =
      sc.federated.accumulation == LossAccumulation::kSquared ? "squared" : "absolute";
  r.read(fed, "federated", "accumulation", acc);
  if (acc == "squared") {
    sc.federated.accumulation = LossAccumulation::kSquared;
  } else if (acc == "absolute") {
    sc.federated.accumulation = LossAccumulation::kAbsoluteOffset;
  } else {
    r.fail(fed["accumulation"], "federated.accumulation", "expected 'absolute' or 'squared'");
  }

  const WifiPhyParams default_phy = read_phy(r, root["phy"], "phy", WifiPhyParams{});

  double load_unit = 1e9;
  r.read(root, "", "load_unit_bits", load_unit);

  const auto channels = root["channels"];
  if (!channels.IsDefined() || !channels.IsSequence()) {
    r.fail(channels, "channels", "expected a list of channels");
  } else {
    for (std::size_t j = 0; j < channels.size(); ++j) {
      const auto node = channels[j];
      const std::string path = fmt::format("channels.{}", j);
      r.check_keys(node, path, {"bandwidth_hz", "wifi_users", "phy"});
      ChannelSpec ch;
      r.read(node, path, "bandwidth_hz", ch.bandwidth);
      ch.phy = read_phy(r, node.IsMap() ? node["phy"] : YAML::Node(), path + ".phy", default_phy);
      const auto users = node.IsMap() ? node["wifi_users"] : YAML::Node();
      if (!users.IsDefined()) {
      } else if (users.IsScalar()) {
        int n = 0;
        r.read(node, path, "wifi_users", n);
        ch.wifi_users = {{0, n}};
      } else if (users.IsSequence()) {
        ch.wifi_users.clear();
        for (std::size_t k = 0; k < users.size(); ++k) {
          const std::string upath = fmt::format("{}.wifi_users.{}", path, k);
          r.check_keys(users[k], upath, {"slot", "users"});
          WifiUsersChange c;
          r.read(users[k], upath, "slot", c.slot);
          r.read(users[k], upath, "users", c.users);
          ch.wifi_users.push_back(c);
        }
      }
      sc.channels.push_back(std::move(ch));
    }
  }

  GainModel gm;
  const auto gnode = root["gain_model"];
  r.check_keys(gnode, "gain_model", {"reference_loss_db", "exponent", "rayleigh"});
  if (gnode.IsDefined() && gnode.IsMap()) {
    gm.present = true;
    r.read(gnode, "gain_model", "reference_loss_db", gm.reference_loss_db);
    r.read(gnode, "gain_model", "exponent", gm.exponent);
    r.read(gnode, "gain_model", "rayleigh", gm.rayleigh);
  }

  const auto links = root["links"];
  if (!links.IsDefined() || !links.IsSequence()) {
    r.fail(links, "links", "expected a list of links");
  } else {
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto node = links[i];
      const std::string path = fmt::format("links.{}", i);
      r.check_keys(node, path,
                   {"name", "load", "load_bits", "gains", "gains_db", "distance_m",
                    "join_slot", "leave_slot"});
      LinkSpec l;
      l.name = fmt::format("d{}", i + 1);
      r.read(node, path, "name", l.name);
      if (node.IsMap() && node["load_bits"] && node["load"]) {
        r.fail(node["load"], path + ".load", "give either load or load_bits, not both");
      } else if (node.IsMap() && node["load_bits"]) {
        r.read(node, path, "load_bits", l.traffic_load);
      } else if (node.IsMap() && node["load"]) {
        double load = 0.0;
        r.read(node, path, "load", load);
        l.traffic_load = load * load_unit;
      }
      r.read(node, path, "join_slot", l.join_slot);
      r.read(node, path, "leave_slot", l.leave_slot);
      const std::size_t m = sc.channels.size();
      auto read_list = [&](std::string_view key, auto convert) {
        const auto list = node[std::string(key)];
        if (!list.IsDefined() || !list.IsSequence()) {
          r.fail(list, Reader::join(path, key), "expected a list");
          return;
        }
        for (std::size_t j = 0; j < list.size(); ++j) {
          try {
            l.gains.push_back(convert(Reader::parse_double(list[j].Scalar())));
          } catch (const std::exception&) {
            r.fail(list[j], fmt::format("{}.{}.{}", path, key, j), "not a number");
          }
        }
      };
      if (!node.IsMap()) {
        // reported by check_keys
      } else if (node["gains"]) {
        read_list("gains", [](double g) { return g; });
      } else if (node["gains_db"]) {
        read_list("gains_db", [](double db) { return std::pow(10.0, db / 10.0); });
      } else if (node["distance_m"]) {
        double d = 0.0;
        r.read(node, path, "distance_m", d);
        if (!gm.present) {
          r.fail(node["distance_m"], path + ".distance_m", "needs a gain_model section");
        } else if (!(d > 0.0)) {
          r.fail(node["distance_m"], path + ".distance_m", "must be > 0");
        } else {
          Rng rng(mix_seed(sc.seed, kGainSalt + i));
          const double mean_db = -gm.reference_loss_db - 10.0 * gm.exponent * std::log10(d);
          for (std::size_t j = 0; j < m; ++j) {
            double g = std::pow(10.0, mean_db / 10.0);
            if (gm.rayleigh) g *= rng.exponential();
            l.gains.push_back(g);
          }
        }
      } else {
        r.fail(node, path, "needs one of gains, gains_db or distance_m");
      }
      sc.links.push_back(std::move(l));
    }
  }

  const auto norm = root["normalization"];
  r.check_keys(norm, "normalization", {"max_link_load_bits", "gain_min", "gain_max"});
  if (norm.IsDefined() && norm.IsMap()) {
    NormalizationSpec ns = derive_normalization(sc);
    r.read(norm, "normalization", "max_link_load_bits", ns.max_link_load);
    r.read(norm, "normalization", "gain_min", ns.gain_min);
    r.read(norm, "normalization", "gain_max", ns.gain_max);
    sc.normalization = ns;
  }

  if (cfg.summary_window < 1) r.fail(root["summary_window"], "summary_window", "must be >= 1");
  if (r.issues.empty()) {
    try {
      sc.validate();
    } catch (const std::invalid_argument& e) {
      r.issues.push_back({"", 0, e.what()});
    }
  }
  if (!r.issues.empty()) throw ConfigError(r.issues);
  return cfg;
}

std::string join_messages(const std::vector<ConfigIssue>& issues) {
  std::string out = "invalid configuration";
  for (const auto& i : issues) {
    out += fmt::format("\n  line {}: {}: {}", i.line, i.path.empty() ? "<root>" : i.path,
                       i.message);
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_messages(issues)), issues_(std::move(issues)) {}

std::string format_issues(const std::vector<ConfigIssue>& issues, std::string_view source) {
  std::string out;
  for (const auto& i : issues) {
    out += fmt::format("{}:{}: {}{}{}\n", source, i.line, i.path, i.path.empty() ? "" : ": ",
                       i.message);
  }
  return out;
}

Override parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError({{std::string(text), 0, "override must look like key=value"}});
  }
  return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

RunConfig parse_config(std::string_view yaml_text, const std::vector<Override>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError({{"", e.mark.line + 1, e.msg}});
  }
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) {
    try {
      apply_override(root, o);
    } catch (const YAML::Exception& e) {
      throw ConfigError({{o.key, 0, fmt::format("bad override value: {}", e.msg)}});
    }
  }
  return parse_root(root);
}

RunConfig load_config_file(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"", 0, fmt::format("cannot open '{}'", path)}});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string emit_manifest(const RunConfig& config) {
  const Scenario& sc = config.scenario;
  YAML::Emitter e;
  auto num = [&](double v) { e << fmt_double(v); };
  auto phy_map = [&](const WifiPhyParams& p) {
    e << YAML::BeginMap;
    e << YAML::Key << "cw_min" << YAML::Value << p.cw_min;
    e << YAML::Key << "max_backoff_stage" << YAML::Value << p.max_backoff_stage;
    e << YAML::Key << "slot_time_s" << YAML::Value; num(p.slot_time);
    e << YAML::Key << "sifs_s" << YAML::Value; num(p.sifs);
    e << YAML::Key << "difs_s" << YAML::Value; num(p.difs);
    e << YAML::Key << "header_time_s" << YAML::Value; num(p.header_time);
    e << YAML::Key << "ack_time_s" << YAML::Value; num(p.ack_time);
    e << YAML::Key << "payload_bits" << YAML::Value; num(p.payload_bits);
    e << YAML::Key << "data_rate_bps" << YAML::Value; num(p.data_rate);
    e << YAML::Key << "propagation_delay_s" << YAML::Value; num(p.propagation_delay);
    e << YAML::EndMap;
  };

  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << sc.seed;
  e << YAML::Key << "horizon" << YAML::Value << sc.horizon;
  e << YAML::Key << "scheme" << YAML::Value << std::string(scheme_name(config.scheme));
  e << YAML::Key << "n_limit" << YAML::Value << sc.n_limit;
  e << YAML::Key << "summary_window" << YAML::Value << config.summary_window;
  e << YAML::Key << "collision_tolerance" << YAML::Value; num(sc.collision_tolerance);
  e << YAML::Key << "sensing_noise_std" << YAML::Value; num(sc.sensing_noise_std);
  e << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "psd_w_per_hz" << YAML::Value; num(sc.noise_psd);
  e << YAML::EndMap;
  e << YAML::Key << "constraints" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "total_power_w" << YAML::Value; num(sc.constraints.total_power);
  e << YAML::Key << "per_channel_power_w" << YAML::Value; num(sc.constraints.per_channel_power);
  e << YAML::Key << "money" << YAML::Value; num(sc.constraints.money);
  e << YAML::EndMap;
  const auto& l = sc.learning;
  e << YAML::Key << "learning" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "learning_rate" << YAML::Value; num(l.learning_rate);
  e << YAML::Key << "w_cap" << YAML::Value; num(l.w_cap);
  e << YAML::Key << "q_step" << YAML::Value; num(l.q_step);
  e << YAML::Key << "v1" << YAML::Value; num(l.v1);
  e << YAML::Key << "v2" << YAML::Value; num(l.v2);
  e << YAML::Key << "fairness_sign" << YAML::Value
    << (l.fairness_sign == FairnessSign::kPenalizeSlow ? "penalize_slow" : "equalizing");
  e << YAML::EndMap;
  const auto& f = sc.federated;
  e << YAML::Key << "federated" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << f.enabled;
  e << YAML::Key << "warm_start_joiners" << YAML::Value << f.warm_start_joiners;
  e << YAML::Key << "period" << YAML::Value << f.coordinator.period;
  e << YAML::Key << "gamma" << YAML::Value; num(f.coordinator.gamma);
  e << YAML::Key << "epsilon" << YAML::Value; num(f.coordinator.epsilon);
  e << YAML::Key << "min_trained_slots" << YAML::Value << f.min_trained_slots;
  e << YAML::Key << "accumulation" << YAML::Value
    << (f.accumulation == LossAccumulation::kSquared ? "squared" : "absolute");
  e << YAML::EndMap;
  e << YAML::Key << "channels" << YAML::Value << YAML::BeginSeq;
  for (const auto& ch : sc.channels) {
    e << YAML::BeginMap;
    e << YAML::Key << "bandwidth_hz" << YAML::Value; num(ch.bandwidth);
    e << YAML::Key << "wifi_users" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : ch.wifi_users) {
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "slot" << YAML::Value << c.slot
        << YAML::Key << "users" << YAML::Value << c.users << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "phy" << YAML::Value;
    phy_map(ch.phy);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::Key << "links" << YAML::Value << YAML::BeginSeq;
  for (const auto& link : sc.links) {
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << link.name;
    e << YAML::Key << "load_bits" << YAML::Value; num(link.traffic_load);
    e << YAML::Key << "gains" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double g : link.gains) num(g);
    e << YAML::EndSeq;
    e << YAML::Key << "join_slot" << YAML::Value << link.join_slot;
    if (link.leave_slot != kNeverLeaves) {
      e << YAML::Key << "leave_slot" << YAML::Value << link.leave_slot;
    }
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
  const auto ns = sc.resolved_normalization();
  e << YAML::Key << "normalization" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "max_link_load_bits" << YAML::Value; num(ns.max_link_load);
  e << YAML::Key << "gain_min" << YAML::Value; num(ns.gain_min);
  e << YAML::Key << "gain_max" << YAML::Value; num(ns.gain_max);
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace d2du
