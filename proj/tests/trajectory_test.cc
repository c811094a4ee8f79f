#include "wavebench/trajectory.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "support/generators.hpp"

namespace wavebench {
namespace {

SpeedField ConstantField(double speed, double duration = 120.0, double length = 3000.0) {
  WaveScenario s;
  s.base_speed = speed;
  return SynthesizeField(s, duration, length);
}

// v(x) = a + b x on every time row.
SpeedField LinearInSpaceField(double a, double b, double duration, double length) {
  const double dt = 4.0, dx = kDefaultGridDx;
  const auto n_t = static_cast<std::size_t>(std::ceil(duration / dt)) + 3;
  const auto n_x = static_cast<std::size_t>(std::ceil(length / dx)) + 3;
  std::vector<double> v(n_t * n_x);
  for (std::size_t i = 0; i < n_t; ++i) {
    for (std::size_t j = 0; j < n_x; ++j) v[i * n_x + j] = a + b * (static_cast<double>(j) - 1.0) * dx;
  }
  return SpeedField(-dt, dt, -dx, dx, n_t, n_x, std::move(v));
}

TEST(IntegrateTest, ConstantFieldIsExact) {
  const SpeedField f = ConstantField(30.0);
  const Trajectory t = IntegrateTrajectory(f, 0.0, 0.0);
  ASSERT_GE(t.positions.size(), 101u);
  EXPECT_NEAR(t.positions[100], 300.0, 1e-10);
  for (std::size_t k = 0; k < t.positions.size(); ++k) {
    EXPECT_NEAR(t.positions[k], 30.0 * 0.1 * static_cast<double>(k), 1e-9);
  }
}

TEST(IntegrateTest, LinearSpeedProfileMatchesClosedForm) {
  const double a = 5.0, b = 0.002;
  const SpeedField f = LinearInSpaceField(a, b, 300.0, 4000.0);
  const Trajectory t = IntegrateTrajectory(f, 0.0, 0.0);
  ASSERT_GE(t.positions.size(), 2001u);
  for (std::size_t k = 0; k <= 2000; k += 50) {
    const double time = 0.1 * static_cast<double>(k);
    const double exact = (a / b) * (std::exp(b * time) - 1.0);
    if (exact == 0.0) continue;
    EXPECT_LT(std::abs(t.positions[k] - exact) / exact, 1e-6) << "t=" << time;
  }
}

TEST(IntegrateTest, ZeroFieldStaysPut) {
  const SpeedField f = ConstantField(0.0, 60.0, 500.0);
  const Trajectory t = IntegrateTrajectory(f, 0.0, 100.0);
  EXPECT_EQ(t.duration(), 60.0);
  for (double x : t.positions) EXPECT_EQ(x, 100.0);
}

TEST(IntegrateTest, StopsAtDownstreamEdge) {
  const SpeedField f = ConstantField(30.0, 600.0, 1000.0);
  const Trajectory t = IntegrateTrajectory(f, 0.0, 0.0);
  EXPECT_LE(t.positions.back(), f.InsetSpace().hi);
  EXPECT_GT(t.positions.back() + 3.0, f.InsetSpace().hi);
  EXPECT_NEAR(t.duration(), f.InsetSpace().hi / 30.0, 0.11);
}

TEST(IntegrateTest, Errors) {
  const SpeedField f = ConstantField(30.0, 60.0, 1000.0);
  EXPECT_THROW(IntegrateTrajectory(f, -1.0, 0.0), DomainError);
  EXPECT_THROW(IntegrateTrajectory(f, 0.0, 0.0, 0.0), RejectedInput);
  EXPECT_THROW(IntegrateTrajectory(f, 59.8, 0.0), DegenerateTrajectory);
  EXPECT_THROW(IntegrateTrajectory(f, 0.0, f.InsetSpace().hi - 5.0), DegenerateTrajectory);
}

TEST(SeedScheduleTest, FourHourDayYields3600Seeds) {
  const SpeedField f = ConstantField(25.0, 4.0 * 3600.0, 200.0);
  const auto seeds = SeedSchedule(f, 4.0);
  ASSERT_EQ(seeds.size(), 3600u);
  EXPECT_EQ(seeds.front().t, 0.0);
  EXPECT_EQ(seeds.back().t, 14396.0);
  for (const Seed& s : seeds) EXPECT_EQ(s.x, 0.0);
}

TEST(SeedScheduleTest, IntervalLongerThanWindowYieldsOneSeed) {
  const SpeedField f = ConstantField(25.0, 100.0, 200.0);
  EXPECT_EQ(SeedSchedule(f, 500.0).size(), 1u);
}

TEST(SeedScheduleTest, TooShortWindowYieldsNone) {
  const SpeedField f(0.0, 1.0, 0.0, 10.0, 4, 4, std::vector<double>(16, 5.0));
  EXPECT_TRUE(SeedSchedule(f, 4.0).empty());
}

TEST(ResampleTest, PicksEveryTenthFineSample) {
  Trajectory t;
  t.dt = 0.1;
  t.t_start = 12.0;
  for (int k = 0; k <= 57; ++k) t.positions.push_back(0.1 * k * k);
  const Trajectory r = Resample1Hz(t);
  EXPECT_EQ(r.dt, 1.0);
  EXPECT_EQ(r.t_start, 12.0);
  ASSERT_EQ(r.positions.size(), 6u);  // 5.7 s truncates to 5 s
  for (std::size_t k = 0; k < r.positions.size(); ++k) EXPECT_EQ(r.positions[k], t.positions[10 * k]);
}

TEST(ResampleTest, WholeSecondDurationPreservesEndpoints) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    Trajectory t = testing::RandomStopAndGo(rng, 10 * (3 + rep), 0.1);
    const Trajectory r = Resample1Hz(t);
    EXPECT_EQ(r.positions.front(), t.positions.front());
    EXPECT_EQ(r.positions.back(), t.positions.back());
  }
}

TEST(ResampleTest, InterpolatesLinearlyBetweenSamples) {
  Trajectory t;
  t.dt = 0.4;
  t.positions = {0, 4, 8, 12, 16, 20, 24, 28, 32, 36, 40};  // 4 s
  const Trajectory r = Resample1Hz(t);
  ASSERT_EQ(r.positions.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(r.positions[k], 10.0 * k, 1e-12);
}

TEST(ResampleTest, Errors) {
  Trajectory t;
  t.dt = 0.1;
  t.positions.assign(20, 0.0);  // 1.9 s
  EXPECT_THROW(Resample1Hz(t), DegenerateTrajectory);
  t.dt = 2.0;
  EXPECT_THROW(Resample1Hz(t), RejectedInput);
}

TEST(KinematicsTest, HandExample) {
  Trajectory t;
  t.positions = {0, 10, 15, 15};
  const Kinematics k = ComputeKinematics(t);
  EXPECT_EQ(k.velocities, (std::vector<double>{10, 5, 0}));
  EXPECT_EQ(k.accelerations, (std::vector<double>{-5, -5}));
  EXPECT_EQ(k.mean_speed, 5.0);
  EXPECT_NEAR(k.speed_std, std::sqrt(50.0 / 3.0), 1e-12);
}

TEST(KinematicsTest, TelescopingIdentity) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const Trajectory t = testing::RandomStopAndGo(rng, 3 + rep);
    const Kinematics k = ComputeKinematics(t);
    double travelled = 0.0;
    for (double v : k.velocities) travelled += v * t.dt;
    const double span = t.positions.back() - t.positions.front();
    EXPECT_NEAR(travelled, span, 1e-9 * std::max(1.0, span));
    EXPECT_NEAR(k.mean_speed, span / t.duration(), 1e-12 * std::max(1.0, span));
  }
}

TEST(KinematicsTest, RejectsShortInput) {
  Trajectory t;
  t.positions = {0, 1, 2};
  EXPECT_THROW(ComputeKinematics(t), DegenerateTrajectory);
}

TEST(PreprocessTest, Examples) {
  Trajectory t;
  t.positions = {0, 5, 4, 8};
  const Trajectory p = PreprocessReference(t);
  EXPECT_EQ(p.positions, (std::vector<double>{0, 5, 5, 8}));
  EXPECT_EQ(p.max_correction, 1.0);
  EXPECT_TRUE(p.corrected());

  t.positions = {0, 1, 1, 3};
  const Trajectory q = PreprocessReference(t);
  EXPECT_EQ(q.positions, t.positions);
  EXPECT_FALSE(q.corrected());
}

TEST(PreprocessTest, RandomSequencesBecomeNonReversing) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 1000; ++rep) {
    Trajectory t;
    t.positions = testing::RandomNoisy(rng, 4 + rep % 60);
    const Trajectory p = PreprocessReference(t);
    const Kinematics k = ComputeKinematics(p);
    for (double v : k.velocities) ASSERT_GE(v, 0.0);
    for (std::size_t i = 0; i < t.positions.size(); ++i) ASSERT_GE(p.positions[i], t.positions[i]);
    EXPECT_EQ(PreprocessReference(p).positions, p.positions);
  }
}

TEST(TrajectoryFileTest, RoundTrip) {
  std::mt19937_64 rng(7);
  Trajectory t = testing::RandomStopAndGo(rng, 40);
  t.t_start = 1234.5;
  t.lane = 3;
  t.source = TrajectorySource::kBenchmark;
  t.gap_budget = 80.4672;
  const Trajectory back = ParseTrajectory(FormatTrajectory(t));
  EXPECT_EQ(back.positions, t.positions);
  EXPECT_EQ(back.t_start, t.t_start);
  EXPECT_EQ(back.lane, 3);
  EXPECT_EQ(back.source, TrajectorySource::kBenchmark);
  EXPECT_EQ(back.gap_budget, t.gap_budget);
}

TEST(TrajectoryFileTest, SingleLineHeader) {
  const Trajectory t = ParseTrajectory("#dt=1,#t_start=40,#lane=2,#source=empirical\n0\n3.5\n7\n");
  EXPECT_EQ(t.t_start, 40.0);
  EXPECT_EQ(t.lane, 2);
  EXPECT_EQ(t.positions, (std::vector<double>{0, 3.5, 7}));
  EXPECT_THROW(ParseTrajectory("#dt=1\n0\nabc\n"), FormatError);
  EXPECT_THROW(ParseTrajectory("#source=other\n0\n"), FormatError);
}

}  // namespace
}  // namespace wavebench
