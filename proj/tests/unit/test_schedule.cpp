#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>

#include "lwm/schedule.hpp"

using namespace lwm;

TEST(Schedule, ConstantTwoStep) {
  const auto s = linear_schedule(2, 0.1, 0.1);
  ASSERT_EQ(s.alpha_bars.size(), 2u);
  EXPECT_DOUBLE_EQ(s.alpha_bars[0], 0.9);
  EXPECT_DOUBLE_EQ(s.alpha_bars[1], 0.81);
}

TEST(Schedule, ProductMatchesHighPrecision) {
  using big = boost::multiprecision::cpp_dec_float_50;
  const auto s = linear_schedule(1000, 0.00085, 0.012);
  big prod = 1;
  for (int i = 0; i < 1000; ++i) {
    // betas rebuilt from the endpoints, not read back from the schedule
    const big beta = big("0.00085") + (big("0.012") - big("0.00085")) * i / 999;
    prod *= 1 - beta;
  }
  const double oracle = prod.convert_to<double>();
  EXPECT_NEAR(s.alpha_bars[999] / oracle, 1.0, 1e-12);
}

TEST(Schedule, RunningProductWithinUlps) {
  const auto s = linear_schedule(1000, 0.00085, 0.012);
  for (std::size_t t = 0; t + 1 < s.alpha_bars.size(); ++t) {
    const double next = s.alpha_bars[t] * (1.0 - s.betas[t + 1]);
    const double ulp = std::nextafter(next, 2.0) - next;
    EXPECT_LE(std::abs(s.alpha_bars[t + 1] - next), 4 * ulp);
    EXPECT_LT(s.alpha_bars[t + 1], s.alpha_bars[t]);
  }
}

TEST(Schedule, RejectsBadBounds) {
  EXPECT_THROW(linear_schedule(1, 0.1, 0.1), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 0.2, 0.1), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(schedule_from_betas({0.1, 1.0, 0.2}), std::invalid_argument);
  EXPECT_THROW(schedule_from_betas({0.1, 0.0}), std::invalid_argument);
}

TEST(Subsample, FullGridIsIdentity) {
  const auto s = linear_schedule(40, 0.001, 0.02);
  const auto t = subsample(s, 40);
  ASSERT_EQ(t.T(), 40u);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(t.inference_timesteps[i], i);
}

TEST(Subsample, Stride20) {
  const auto t = subsample(linear_schedule(1000, 0.00085, 0.012), 50);
  ASSERT_EQ(t.T(), 50u);
  EXPECT_EQ(t.inference_timesteps.front(), 19u);
  EXPECT_EQ(t.inference_timesteps.back(), 999u);
  for (std::size_t i = 1; i < 50; ++i) EXPECT_EQ(t.inference_timesteps[i] - t.inference_timesteps[i - 1], 20u);
}

TEST(Subsample, SingleStepAndErrors) {
  const auto s = linear_schedule(1000, 0.00085, 0.012);
  const auto t = subsample(s, 1);
  ASSERT_EQ(t.T(), 1u);
  EXPECT_EQ(t.inference_timesteps[0], 999u);
  EXPECT_THROW(subsample(s, 0), std::invalid_argument);
  EXPECT_THROW(subsample(s, 1001), std::invalid_argument);
}

TEST(Subsample, Idempotent) {
  const auto once = subsample(linear_schedule(1000, 0.00085, 0.012), 50);
  const auto twice = subsample(once, 50);
  EXPECT_EQ(once.inference_timesteps, twice.inference_timesteps);
}

TEST(Schedule, LevelAlphaBars) {
  const auto s = default_schedule(50);
  EXPECT_DOUBLE_EQ(s.abar(0), s.alpha_bars[0]);
  EXPECT_DOUBLE_EQ(s.abar(1), s.alpha_bars[19]);
  EXPECT_DOUBLE_EQ(s.abar(50), s.alpha_bars[999]);
  EXPECT_THROW(s.abar(51), std::out_of_range);
  const auto one = subsample(linear_schedule(1000, 0.00085, 0.012, CleanEndpoint::One), 50);
  EXPECT_EQ(one.abar(0), 1.0);
}
