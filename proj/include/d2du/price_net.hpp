#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace d2du {

/// Weights and biases of the 3 -> 32 -> 32 -> 1 pricing network, stored as
/// one flat vector in layer-major order (W1, b1, W2, b2, W3, b3). Weight
/// matrices are row-major with one row per output unit.
class MlpParams {
 public:
  static constexpr std::size_t kInputs = 3;
  static constexpr std::size_t kHidden1 = 32;
  static constexpr std::size_t kHidden2 = 32;
  static constexpr std::size_t kOutputs = 1;

  static constexpr std::size_t kW1 = 0;
  static constexpr std::size_t kB1 = kW1 + kHidden1 * kInputs;
  static constexpr std::size_t kW2 = kB1 + kHidden1;
  static constexpr std::size_t kB2 = kW2 + kHidden2 * kHidden1;
  static constexpr std::size_t kW3 = kB2 + kHidden2;
  static constexpr std::size_t kB3 = kW3 + kOutputs * kHidden2;
  static constexpr std::size_t kCount = kB3 + kOutputs;

  /// All-zero parameters.
  MlpParams() : values_(kCount, 0.0) {}

  static constexpr std::size_t parameter_count() { return kCount; }

  std::span<const double> flatten() const { return values_; }
  std::span<double> values() { return values_; }
  /// Throws std::invalid_argument unless `flat` has parameter_count() entries.
  static MlpParams unflatten(std::span<const double> flat);

  double w1(std::size_t out, std::size_t in) const { return values_[kW1 + out * kInputs + in]; }
  double b1(std::size_t out) const { return values_[kB1 + out]; }
  double w2(std::size_t out, std::size_t in) const { return values_[kW2 + out * kHidden1 + in]; }
  double b2(std::size_t out) const { return values_[kB2 + out]; }
  double w3(std::size_t in) const { return values_[kW3 + in]; }
  double b3() const { return values_[kB3]; }

  bool operator==(const MlpParams&) const = default;

 private:
  std::vector<double> values_;
};

/// Network input after scaling to roughly [0, 1].
struct NetInput {
  double link_load = 0.0;
  double channel_load = 0.0;
  double gain = 0.0;
};

/// Per-feature reference scales taken from a scenario.
struct NormalizationSpec {
  double max_link_load = 1.0;  // bits
  double gain_min = 1e-12;     // linear
  double gain_max = 1e-6;
};

/// Link load over the scenario maximum, channel load as is, gain by log-scale
/// min-max. Throws std::invalid_argument on a zero reference scale.
NetInput normalize_input(double link_load_bits, double channel_load, double gain,
                         const NormalizationSpec& norms);

/// Price in (0, w_cap): tanh hidden layers, w_cap * sigmoid output.
/// Throws std::domain_error on non-finite input.
double forward(const MlpParams& params, const NetInput& input, double w_cap);

struct TrainSample {
  NetInput input;
  double predicted_price = 0.0;
  double target_offset = 0.0;  // Q1 + Q2

  double target() const { return predicted_price + target_offset; }
};

/// Mean over the batch of (T - F(x))^2 with each target held fixed.
double batch_loss(const MlpParams& params, std::span<const TrainSample> batch, double w_cap);

/// Gradient of batch_loss with respect to the flat parameter vector.
std::vector<double> loss_gradient(const MlpParams& params, std::span<const TrainSample> batch,
                                  double w_cap);

struct TrainResult {
  MlpParams params;
  bool skipped = false;  // non-finite gradient, params returned unchanged
  double loss = 0.0;     // loss before the step
};

/// One plain gradient-descent step on batch_loss.
TrainResult train_step(const MlpParams& params, std::span<const TrainSample> batch,
                       double learning_rate, double w_cap);

enum class FairnessSign {
  kPenalizeSlow,  // +q when the link's ETT is above the median
  kEqualizing,    // -q when above, so disadvantaged links get cheaper prices
};

/// Q1: compares a link's ETT with the median over all links. ETTs within a
/// relative 1e-9 of the median count as ties and give 0. An infinite own
/// ETT is above the median unless every ETT is infinite.
double fairness_term(double own_ett, std::span<const double> all_etts, double q_step,
                     FairnessSign sign);

/// Q2: v1 after a collision, v2 otherwise.
double collision_term(bool collided, double v1, double v2);

struct LossSignal {
  double q1 = 0.0;
  double q2 = 0.0;

  double target_offset() const { return q1 + q2; }
  /// Per-sample loss (T - c)^2 = (q1 + q2)^2.
  double loss() const { return target_offset() * target_offset(); }
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded generator.
MlpParams init_params(std::uint64_t seed);
/// Copy of a coordinator snapshot.
MlpParams init_params(const MlpParams& snapshot);

/// Text checkpoint: a header line, then one value per line in flat order.
/// Values round-trip exactly.
void save_params(std::ostream& out, const MlpParams& params);
/// Throws std::runtime_error on malformed input.
MlpParams load_params(std::istream& in);

}  // namespace d2du
