#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "d2du/wifi_model.hpp"

namespace d2du {
namespace {

// Reference values from an independent 40-digit evaluation of the original
// closed form tau(p) = 2(1-2p) / ((1-2p)(W+1) + pW(1-(2p)^m)).
constexpr double kS1 = 36641221.374045802;
constexpr double kS2m3 = 45075259.009477681;
constexpr double kS3m3 = 48358290.236576311;
constexpr double kS10m3 = 50844548.212126001;
constexpr double kSmaxM3 = 51079108.840352494;
constexpr double kSmaxM5 = 51054644.902173533;
constexpr double kS2m5 = 45074235.488285274;

WifiPhyParams phy_with_stages(int m) {
  WifiPhyParams phy;
  phy.max_backoff_stage = m;
  return phy;
}

TEST(WifiPhy, DefaultsValidate) { EXPECT_NO_THROW(WifiPhyParams{}.validate()); }

TEST(WifiPhy, RejectsBadFields) {
  WifiPhyParams p;
  p.cw_min = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.max_backoff_stage = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.data_rate = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.slot_time = -1e-6;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Bianchi, ZeroUsersGiveZero) { EXPECT_EQ(bianchi_throughput(0, WifiPhyParams{}), 0.0); }

TEST(Bianchi, SingleUserClosedForm) {
  const WifiPhyParams phy;
  const double expected =
      phy.payload_bits / (phy.success_time() + phy.slot_time * (phy.cw_min - 1) / 2.0);
  EXPECT_NEAR(bianchi_throughput(1, phy), expected, 1e-9 * expected);
  EXPECT_NEAR(bianchi_throughput(1, phy), kS1, 1e-9 * kS1);
}

TEST(Bianchi, MatchesReferenceValues) {
  EXPECT_NEAR(bianchi_throughput(2, phy_with_stages(3)), kS2m3, 1e-9 * kS2m3);
  EXPECT_NEAR(bianchi_throughput(3, phy_with_stages(3)), kS3m3, 1e-9 * kS3m3);
  EXPECT_NEAR(bianchi_throughput(10, phy_with_stages(3)), kS10m3, 1e-9 * kS10m3);
  EXPECT_NEAR(bianchi_throughput(2, phy_with_stages(5)), kS2m5, 1e-9 * kS2m5);
}

TEST(Bianchi, FixedPointIsConsistent) {
  const WifiPhyParams phy;
  for (int n : {2, 5, 17, 64}) {
    const auto op = solve_dcf_fixed_point(n, phy);
    EXPECT_GT(op.tau, 0.0);
    EXPECT_LT(op.tau, 1.0);
    EXPECT_NEAR(op.collision, 1.0 - std::pow(1.0 - op.tau, n - 1), 1e-9);
  }
}

TEST(Bianchi, HalfCollisionProbabilityIsRegular) {
  // Windows where p crosses 0.5 must not blow up the closed form.
  WifiPhyParams phy;
  phy.cw_min = 4;
  for (int n = 2; n <= 40; ++n) EXPECT_TRUE(std::isfinite(bianchi_throughput(n, phy))) << n;
}

TEST(Bianchi, PeakLocation) {
  const auto p3 = find_peak(phy_with_stages(3));
  EXPECT_EQ(p3.n_max, 7);
  EXPECT_NEAR(p3.r_max_total, kSmaxM3, 1e-9 * kSmaxM3);
  EXPECT_DOUBLE_EQ(p3.r_hat_max, p3.r_max_total / 7.0);
  const auto p5 = find_peak(phy_with_stages(5));
  EXPECT_EQ(p5.n_max, 8);
  EXPECT_NEAR(p5.r_max_total, kSmaxM5, 1e-9 * kSmaxM5);
}

TEST(Bianchi, CurveIsUnimodal) {
  for (int m : {3, 5}) {
    const auto curve = throughput_curve(phy_with_stages(m), 64);
    ASSERT_EQ(curve.size(), 64u);
    int maxima = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const bool left = i == 0 || curve[i] > curve[i - 1];
      const bool right = i + 1 == curve.size() || curve[i] > curve[i + 1];
      maxima += left && right;
    }
    EXPECT_EQ(maxima, 1) << "m=" << m;
  }
}

TEST(ChannelLoad, ReferenceLoads) {
  const auto phy = phy_with_stages(3);
  EXPECT_NEAR(channel_traffic_load(1, phy).load, 0.19914771601446954, 1e-9);
  EXPECT_NEAR(channel_traffic_load(2, phy).load, 0.32377032141235123, 1e-9);
  EXPECT_NEAR(channel_traffic_load(3, phy).load, 0.4526844629694502, 1e-9);
  EXPECT_NEAR(channel_traffic_load(5, phy).load, 0.72085994650579527, 1e-9);
  EXPECT_NEAR(channel_traffic_load(3, phy_with_stages(5)).load, 0.39597611129808992, 1e-9);
}

TEST(ChannelLoad, EmptyChannelIsFree) {
  const auto l = channel_traffic_load(0, WifiPhyParams{});
  EXPECT_EQ(l.load, 0.0);
  EXPECT_TRUE(l.accessible);
}

TEST(ChannelLoad, CrowdedChannelIsInaccessible) {
  const auto phy = phy_with_stages(3);
  for (int n : {7, 8, 30, 64, 200}) {
    const auto l = channel_traffic_load(n, phy);
    EXPECT_FALSE(l.accessible) << n;
    EXPECT_EQ(l.load, 1.0) << n;
  }
}

TEST(ChannelLoad, MonotoneBelowPeak) {
  const auto phy = phy_with_stages(5);
  double prev = 0.0;
  for (int n = 1; n < 8; ++n) {
    const auto l = channel_traffic_load(n, phy);
    EXPECT_TRUE(l.accessible);
    EXPECT_GT(l.load, prev);
    EXPECT_LT(l.load, 1.0);
    prev = l.load;
  }
}

TEST(ChannelLoad, RejectsNegativeUsers) {
  EXPECT_THROW(channel_traffic_load(-1, WifiPhyParams{}), std::invalid_argument);
}

TEST(ChannelState, CarriesPeakAndLoad) {
  const auto s = make_channel_state(40e6, 2, WifiPhyParams{});
  EXPECT_EQ(s.bandwidth, 40e6);
  EXPECT_EQ(s.wifi_users, 2);
  EXPECT_EQ(s.n_max, 7);
  EXPECT_NEAR(s.load, 0.32377032141235123, 1e-9);
  EXPECT_TRUE(s.accessible);
}

}  // namespace
}  // namespace d2du
