#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "d2du/link_allocator.hpp"
#include "d2du/random.hpp"

namespace d2du {
namespace {

constexpr double kNoisePsd = 1.5811388300841898e-20;

LinkProblem make_problem(std::vector<double> prices, std::vector<double> loads,
                         std::vector<double> gains) {
  LinkProblem p;
  p.bandwidths.assign(prices.size(), 20e6);
  p.prices = std::move(prices);
  p.loads = std::move(loads);
  p.gains = std::move(gains);
  p.noise_psd = kNoisePsd;
  return p;
}

LinkProblem random_problem(Rng& rng, std::size_t m) {
  std::vector<double> prices(m), loads(m), gains(m);
  for (std::size_t j = 0; j < m; ++j) {
    prices[j] = rng.uniform(0.1, 5.0);
    loads[j] = rng.uniform(0.0, 0.8);
    gains[j] = std::pow(10.0, rng.uniform(-11.0, -8.0));
  }
  return make_problem(prices, loads, gains);
}

void expect_feasible(const Allocation& a, const LinkProblem& p) {
  const auto& k = p.constraints;
  double eta_sum = 0.0;
  double money = 0.0;
  for (std::size_t j = 0; j < p.channels(); ++j) {
    EXPECT_GE(a.theta[j], 0.0);
    EXPECT_LE(a.theta[j], 1.0 - p.loads[j] + 1e-12);
    EXPECT_GE(a.eta[j], 0.0);
    EXPECT_LE(a.eta[j], k.per_channel_power * (1.0 + 1e-12));
    eta_sum += a.eta[j];
    money += a.theta[j] * p.prices[j];
  }
  EXPECT_LE(eta_sum, k.total_power * (1.0 + 1e-9));
  if (p.enforce_budget) EXPECT_LE(money, k.money * (1.0 + 1e-9));
}

TEST(Rate, SingleChannelClosedForm) {
  const std::vector<double> theta{0.5}, eta{0.1}, gains{1e-9}, bw{20e6};
  const double snr = 0.1 * 1e-9 / (kNoisePsd * 20e6 * 0.5);
  EXPECT_NEAR(rate(theta, eta, gains, bw, kNoisePsd), 0.5 * 20e6 * std::log2(1.0 + snr), 1e-6);
}

TEST(Rate, IdleChannelContributesNothing) {
  const std::vector<double> theta{0.0, 0.2}, eta{0.0, 0.1}, gains{1e-9, 1e-9}, bw{20e6, 20e6};
  const std::vector<double> only{0.2}, only_eta{0.1}, g1{1e-9}, b1{20e6};
  EXPECT_DOUBLE_EQ(rate(theta, eta, gains, bw, kNoisePsd), rate(only, only_eta, g1, b1, kNoisePsd));
}

TEST(Rate, RejectsNegativeInputs) {
  const std::vector<double> ok{0.1}, neg{-0.1}, g{1e-9}, bw{20e6};
  EXPECT_THROW(rate(neg, ok, g, bw, kNoisePsd), std::domain_error);
  EXPECT_THROW(rate(ok, neg, g, bw, kNoisePsd), std::domain_error);
}

TEST(SolveAllocation, RejectsMalformedProblem) {
  auto p = make_problem({1.0, 1.0}, {0.2}, {1e-9, 1e-9});
  EXPECT_THROW(solve_allocation(p), std::invalid_argument);
  p = make_problem({-1.0}, {0.2}, {1e-9});
  EXPECT_THROW(solve_allocation(p), std::invalid_argument);
  p = make_problem({1.0}, {1.2}, {1e-9});
  EXPECT_THROW(solve_allocation(p), std::invalid_argument);
}

TEST(SolveAllocation, FullyLoadedChannelsAreInfeasible) {
  const auto a = solve_allocation(make_problem({1.0, 1.0}, {1.0, 1.0}, {1e-9, 1e-9}));
  EXPECT_TRUE(a.infeasible);
  EXPECT_EQ(a.rate, 0.0);
}

TEST(SolveAllocation, ZeroMoneyIsInfeasible) {
  auto p = make_problem({1.0}, {0.2}, {1e-9});
  p.constraints.money = 0.0;
  const auto a = solve_allocation(p);
  EXPECT_TRUE(a.infeasible);
  EXPECT_EQ(a.theta[0], 0.0);
}

TEST(SolveAllocation, CheapChannelTakesAllFreeTimeAtCapPower) {
  // Price low enough that the money budget never binds.
  const auto p = make_problem({0.01}, {0.3}, {1e-9});
  const auto a = solve_allocation(p);
  EXPECT_NEAR(a.theta[0], 0.7, 1e-12);
  EXPECT_NEAR(a.eta[0], p.constraints.per_channel_power, 1e-12);
  EXPECT_EQ(a.money_multiplier, 0.0);
}

TEST(SolveAllocation, ExpensiveChannelSpendsExactBudget) {
  const auto p = make_problem({4.0}, {0.3}, {1e-9});
  const auto a = solve_allocation(p);
  EXPECT_NEAR(a.theta[0] * 4.0, 1.0, 1e-9);
  EXPECT_GT(a.money_multiplier, 0.0);
}

TEST(SolveAllocation, WithoutBudgetPricesAreIgnored) {
  auto cheap = make_problem({0.0, 0.0}, {0.3, 0.5}, {1e-9, 3e-10});
  auto dear = make_problem({9.0, 7.0}, {0.3, 0.5}, {1e-9, 3e-10});
  cheap.enforce_budget = dear.enforce_budget = false;
  const auto a = solve_allocation(cheap);
  const auto b = solve_allocation(dear);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.eta, b.eta);
}

TEST(SolveAllocation, MatchesGridSearchOnRandomInstances) {
  Rng rng(20240601);
  for (int i = 0; i < 40; ++i) {
    const std::size_t m = 1 + static_cast<std::size_t>(i % 2);
    const auto p = random_problem(rng, m);
    const auto a = solve_allocation(p);
    const auto g = brute_force_allocation(p, 81);
    expect_feasible(a, p);
    EXPECT_GE(a.rate, g.rate * (1.0 - 1e-9)) << "instance " << i;
  }
}

TEST(SolveAllocation, KktResidualsAreSmall) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_problem(rng, 1 + static_cast<std::size_t>(i % 4));
    const auto a = solve_allocation(p);
    const auto r = kkt_residuals(a, p);
    EXPECT_LE(r.max_residual(), 1e-6) << "instance " << i;
    EXPECT_GE(r.mu_power, 0.0);
    EXPECT_GE(r.mu_money, 0.0);
  }
}

TEST(SolveAllocation, StaysFeasibleOnTightPower) {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    auto p = random_problem(rng, 4);
    p.constraints.total_power = 0.3;
    expect_feasible(solve_allocation(p), p);
  }
}

TEST(SolveAllocation, RateGrowsWithMoney) {
  auto p = make_problem({2.0, 3.0}, {0.2, 0.4}, {1e-9, 2e-9});
  double prev = 0.0;
  for (double money : {0.1, 0.3, 0.6, 1.0, 2.0}) {
    p.constraints.money = money;
    const double r = solve_allocation(p).rate;
    EXPECT_GE(r, prev * (1.0 - 1e-12));
    prev = r;
  }
}

TEST(BruteForce, RejectsLargeOrCoarseProblems) {
  const auto four = make_problem({1, 1, 1, 1}, {0, 0, 0, 0}, {1e-9, 1e-9, 1e-9, 1e-9});
  EXPECT_THROW(brute_force_allocation(four, 10), std::invalid_argument);
  const auto one = make_problem({1}, {0}, {1e-9});
  EXPECT_THROW(brute_force_allocation(one, 1), std::invalid_argument);
}

TEST(Kkt, FlagsSuboptimalAllocation) {
  const auto p = make_problem({0.01, 0.01}, {0.2, 0.2}, {1e-9, 1e-9});
  auto a = Allocation::zeros(2);
  a.theta = {0.1, 0.1};
  a.eta = {0.01, 0.01};
  EXPECT_GT(kkt_residuals(a, p).max_residual(), 1e-3);
}

TEST(Kkt, RejectsSizeMismatch) {
  const auto p = make_problem({1.0, 1.0}, {0.2, 0.2}, {1e-9, 1e-9});
  EXPECT_THROW(kkt_residuals(Allocation::zeros(1), p), std::invalid_argument);
}

TEST(Allocation, DerivedQuantities) {
  auto a = Allocation::zeros(2);
  a.theta = {0.5, 0.0};
  a.eta = {0.1, 0.0};
  EXPECT_DOUBLE_EQ(a.power(0), 0.2);
  EXPECT_EQ(a.power(1), 0.0);
  const std::vector<double> prices{2.0, 3.0};
  EXPECT_DOUBLE_EQ(a.money_spent(prices), 1.0);
  EXPECT_DOUBLE_EQ(a.total_eta(), 0.1);
}

}  // namespace
}  // namespace d2du
