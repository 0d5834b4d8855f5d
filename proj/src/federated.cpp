#include "d2du/federated.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace d2du {

void FederatedConfig::validate() const {
  if (period < 1) throw std::invalid_argument("federated period must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("federated epsilon must be > 0");
  if (!std::isfinite(gamma)) throw std::invalid_argument("federated gamma must be finite");
}

MlpParams average_params(std::span<const MlpParams> all) {
  if (all.empty()) throw std::invalid_argument("average_params: no contributions");
  MlpParams out;
  auto dst = out.values();
  std::vector<double> column(all.size());
  for (std::size_t i = 0; i < MlpParams::kCount; ++i) {
    for (std::size_t k = 0; k < all.size(); ++k) column[k] = all[k].flatten()[i];
    // Sorting fixes the summation order, making the mean permutation invariant.
    std::sort(column.begin(), column.end());
    if (column.front() == column.back()) {
      dst[i] = column.front();
      continue;
    }
    double sum = 0.0;
    for (double v : column) sum += v;
    dst[i] = sum / static_cast<double>(column.size());
  }
  return out;
}

double blend_factor(double q_sum, double gamma, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("blend_factor: epsilon must be > 0");
  // gamma/epsilon * q - gamma written so that q == epsilon gives exactly 0.
  const double exponent = gamma * (q_sum - epsilon) / epsilon;
  return 1.0 / (1.0 + std::exp(-exponent));
}

MlpParams apply_blend(const MlpParams& own, const MlpParams& snapshot, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("apply_blend: beta outside [0,1]");
  if (beta == 0.0) return own;
  if (beta == 1.0) return snapshot;
  MlpParams out;
  auto dst = out.values();
  const auto a = own.flatten();
  const auto b = snapshot.flatten();
  for (std::size_t i = 0; i < MlpParams::kCount; ++i) {
    const double v = a[i] + beta * (b[i] - a[i]);
    dst[i] = std::clamp(v, std::min(a[i], b[i]), std::max(a[i], b[i]));
  }
  return out;
}

Coordinator::Coordinator(FederatedConfig config) : config_(config) { config_.validate(); }

const MlpParams& Coordinator::run_round(std::span<const MlpParams> contributions) {
  snapshot_ = average_params(contributions);
  ++rounds_;
  return *snapshot_;
}

WarmStart Coordinator::warm_start(std::uint64_t fallback_seed) const {
  if (snapshot_) return {*snapshot_, true};
  return {init_params(fallback_seed), false};
}

}  // namespace d2du
