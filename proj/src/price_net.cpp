#include "d2du/price_net.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "d2du/random.hpp"

namespace d2du {
namespace {

using Hidden1 = std::array<double, MlpParams::kHidden1>;
using Hidden2 = std::array<double, MlpParams::kHidden2>;

constexpr double kTieTolerance = 1e-9;
constexpr const char* kCheckpointTag = "d2du-mlp";

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Trace {
  std::array<double, MlpParams::kInputs> x{};
  Hidden1 a1{};
  Hidden2 a2{};
  double sig = 0.0;
  double out = 0.0;
};

Trace run_forward(const MlpParams& p, const NetInput& in, double w_cap) {
  Trace t;
  t.x = {in.link_load, in.channel_load, in.gain};
  for (std::size_t i = 0; i < MlpParams::kHidden1; ++i) {
    double z = p.b1(i);
    for (std::size_t k = 0; k < MlpParams::kInputs; ++k) z += p.w1(i, k) * t.x[k];
    t.a1[i] = std::tanh(z);
  }
  for (std::size_t i = 0; i < MlpParams::kHidden2; ++i) {
    double z = p.b2(i);
    for (std::size_t k = 0; k < MlpParams::kHidden1; ++k) z += p.w2(i, k) * t.a1[k];
    t.a2[i] = std::tanh(z);
  }
  double z3 = p.b3();
  for (std::size_t k = 0; k < MlpParams::kHidden2; ++k) z3 += p.w3(k) * t.a2[k];
  t.sig = sigmoid(z3);
  t.out = w_cap * t.sig;
  return t;
}

void check_input(const NetInput& in) {
  if (!std::isfinite(in.link_load) || !std::isfinite(in.channel_load) || !std::isfinite(in.gain)) {
    throw std::domain_error("price network input is not finite");
  }
}

// Adds d(out)/d(params) * scale into grad.
void accumulate_output_gradient(const MlpParams& p, const Trace& t, double w_cap, double scale,
                                std::span<double> grad) {
  const double dz3 = scale * w_cap * t.sig * (1.0 - t.sig);
  Hidden2 dz2{};
  for (std::size_t k = 0; k < MlpParams::kHidden2; ++k) {
    grad[MlpParams::kW3 + k] += dz3 * t.a2[k];
    dz2[k] = dz3 * p.w3(k) * (1.0 - t.a2[k] * t.a2[k]);
  }
  grad[MlpParams::kB3] += dz3;
  Hidden1 da1{};
  for (std::size_t i = 0; i < MlpParams::kHidden2; ++i) {
    const double d = dz2[i];
    grad[MlpParams::kB2 + i] += d;
    const std::size_t row = MlpParams::kW2 + i * MlpParams::kHidden1;
    for (std::size_t k = 0; k < MlpParams::kHidden1; ++k) {
      grad[row + k] += d * t.a1[k];
      da1[k] += d * p.w2(i, k);
    }
  }
  for (std::size_t i = 0; i < MlpParams::kHidden1; ++i) {
    const double dz1 = da1[i] * (1.0 - t.a1[i] * t.a1[i]);
    grad[MlpParams::kB1 + i] += dz1;
    const std::size_t row = MlpParams::kW1 + i * MlpParams::kInputs;
    for (std::size_t k = 0; k < MlpParams::kInputs; ++k) grad[row + k] += dz1 * t.x[k];
  }
}

}  // namespace

MlpParams MlpParams::unflatten(std::span<const double> flat) {
  if (flat.size() != kCount) {
    throw std::invalid_argument(fmt::format("MlpParams: expected {} values, got {}", kCount,
                                            flat.size()));
  }
  MlpParams p;
  std::copy(flat.begin(), flat.end(), p.values_.begin());
  return p;
}

NetInput normalize_input(double link_load_bits, double channel_load, double gain,
                         const NormalizationSpec& norms) {
  if (!(norms.max_link_load > 0.0)) {
    throw std::invalid_argument("normalize_input: max_link_load reference must be > 0");
  }
  if (!(norms.gain_min > 0.0) || !(norms.gain_max > norms.gain_min)) {
    throw std::invalid_argument("normalize_input: gain range must satisfy 0 < min < max");
  }
  if (!(gain > 0.0)) throw std::invalid_argument("normalize_input: gain must be > 0");
  const double log_min = std::log(norms.gain_min);
  const double log_span = std::log(norms.gain_max) - log_min;
  return {link_load_bits / norms.max_link_load, channel_load,
          (std::log(gain) - log_min) / log_span};
}

double forward(const MlpParams& params, const NetInput& input, double w_cap) {
  check_input(input);
  return run_forward(params, input, w_cap).out;
}

double batch_loss(const MlpParams& params, std::span<const TrainSample> batch, double w_cap) {
  if (batch.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : batch) {
    check_input(s.input);
    const double diff = s.target() - run_forward(params, s.input, w_cap).out;
    acc += diff * diff;
  }
  return acc / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const MlpParams& params, std::span<const TrainSample> batch,
                                  double w_cap) {
  std::vector<double> grad(MlpParams::kCount, 0.0);
  if (batch.empty()) return grad;
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    check_input(s.input);
    const auto t = run_forward(params, s.input, w_cap);
    // d/dF of (T - F)^2 with T held fixed.
    const double dloss = -2.0 * (s.target() - t.out) * inv_m;
    accumulate_output_gradient(params, t, w_cap, dloss, grad);
  }
  return grad;
}

TrainResult train_step(const MlpParams& params, std::span<const TrainSample> batch,
                       double learning_rate, double w_cap) {
  TrainResult r{params, false, batch_loss(params, batch, w_cap)};
  const auto grad = loss_gradient(params, batch, w_cap);
  if (!std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); })) {
    r.skipped = true;
    return r;
  }
  auto v = r.params.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * grad[i];
  return r;
}

double fairness_term(double own_ett, std::span<const double> all_etts, double q_step,
                     FairnessSign sign) {
  if (all_etts.empty()) throw std::invalid_argument("fairness_term: no ETT values");
  std::vector<double> sorted(all_etts.begin(), all_etts.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  int side = 0;  // +1 above the median, -1 below
  if (std::isinf(own_ett)) {
    side = std::isinf(sorted.front()) ? 0 : 1;
  } else if (std::isinf(median)) {
    side = -1;
  } else if (std::abs(own_ett - median) > kTieTolerance * std::abs(median)) {
    side = own_ett > median ? 1 : -1;
  }
  const double magnitude = side * q_step;
  return sign == FairnessSign::kPenalizeSlow ? magnitude : -magnitude;
}

double collision_term(bool collided, double v1, double v2) { return collided ? v1 : v2; }

MlpParams init_params(std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  auto v = p.values();
  auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = begin; i < end; ++i) v[i] = rng.uniform(-r, r);
  };
  fill(MlpParams::kW1, MlpParams::kW2, MlpParams::kInputs);   // W1, b1
  fill(MlpParams::kW2, MlpParams::kW3, MlpParams::kHidden1);  // W2, b2
  fill(MlpParams::kW3, MlpParams::kCount, MlpParams::kHidden2);  // W3, b3
  return p;
}

MlpParams init_params(const MlpParams& snapshot) { return snapshot; }

void save_params(std::ostream& out, const MlpParams& params) {
  out << kCheckpointTag << ' ' << 1 << ' ' << MlpParams::kInputs << ' ' << MlpParams::kHidden1
      << ' ' << MlpParams::kHidden2 << ' ' << MlpParams::kOutputs << ' ' << MlpParams::kCount
      << '\n';
  for (double v : params.flatten()) out << fmt::format("{}\n", v);
}

MlpParams load_params(std::istream& in) {
  std::string tag;
  int version = 0;
  std::size_t inputs = 0, h1 = 0, h2 = 0, outputs = 0, count = 0;
  if (!(in >> tag >> version >> inputs >> h1 >> h2 >> outputs >> count) || tag != kCheckpointTag) {
    throw std::runtime_error("checkpoint: missing or malformed header");
  }
  if (version != 1 || inputs != MlpParams::kInputs || h1 != MlpParams::kHidden1 ||
      h2 != MlpParams::kHidden2 || outputs != MlpParams::kOutputs || count != MlpParams::kCount) {
    throw std::runtime_error("checkpoint: topology does not match 3-32-32-1");
  }
  std::vector<double> flat;
  flat.reserve(count);
  std::string token;
  while (flat.size() < count && in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      throw std::runtime_error("checkpoint: bad value '" + token + "'");
    }
    flat.push_back(v);
  }
  if (flat.size() != count) throw std::runtime_error("checkpoint: truncated parameter list");
  return MlpParams::unflatten(flat);
}

}  // namespace d2du
