#include "wavebench/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "support/generators.hpp"
#include "support/kkt_oracle.hpp"

namespace wavebench {
namespace {

Trajectory FromPositions(std::vector<double> x, double dt = 1.0) {
  Trajectory t;
  t.dt = dt;
  t.positions = std::move(x);
  return t;
}

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

TEST(BuildProblemTest, RowCountsForTenIntervals) {
  std::vector<double> x(11);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 12.0 * i + (i % 3);
  const SmoothingProblem p = BuildProblem(FromPositions(x), 10.0, 30.0);
  const auto rows = p.Constraints();
  auto count = [&](ConstraintKind k) { return std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.kind == k; }); };
  EXPECT_EQ(count(ConstraintKind::kBoundary), 6);
  EXPECT_EQ(count(ConstraintKind::kNoOverpass), 11);
  EXPECT_EQ(count(ConstraintKind::kMaxGap), 11);
  EXPECT_EQ(count(ConstraintKind::kNoReversing), 10);
}

TEST(BuildProblemTest, ReferenceIsFeasible) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const Trajectory ref = testing::RandomStopAndGo(rng, 3 + rep);
    const SmoothingProblem p = BuildProblem(ref, 10.0, 40.0);
    EXPECT_LE(MaxConstraintViolation(p, p.x_ref), 1e-9);
  }
}

TEST(BuildProblemTest, Rejections) {
  EXPECT_THROW(BuildProblem(FromPositions({0, 1, 2}), 10.0, 5.0), DegenerateTrajectory);
  EXPECT_THROW(BuildProblem(FromPositions({0, 2, 1, 3}), 10.0, 5.0), RejectedInput);
  EXPECT_THROW(BuildProblem(FromPositions({0, 1, 2, 3}), -1.0, 5.0), RejectedInput);
  EXPECT_THROW(BuildProblem(FromPositions({0, 1, 2, 3}), 10.0, -5.0), RejectedInput);
}

TEST(ObjectiveTest, HandEvaluation) {
  SmoothingProblem p = BuildProblem(FromPositions({0, 10, 15, 15, 25}), 0.0, 10.0);
  // vbar = 25 / 4; deviations 3.75, -1.25, -6.25, 3.75.
  EXPECT_EQ(p.v_bar, 6.25);
  EXPECT_DOUBLE_EQ(ObjectiveValue(p, p.x_ref), 68.75);
  p.v_bar = 12.5;
  EXPECT_DOUBLE_EQ(ObjectiveValue(p, p.x_ref), 225.0);
  const std::vector<double> line = {0, 6.25, 12.5, 18.75, 25};
  p.v_bar = 6.25;
  p.lambda = 10.0;
  EXPECT_EQ(ObjectiveValue(p, line), 0.0);
  EXPECT_THROW(ObjectiveValue(p, std::vector<double>{0, 1}), RejectedInput);
}

TEST(SolveTest, ZeroGapReturnsReference) {
  const SmoothingProblem p = BuildProblem(FromPositions({0, 20, 38, 40, 41, 60, 85}), 10.0, 0.0);
  const QpSolution s = Solve(p);
  EXPECT_EQ(s.status, SolveStatus::kOptimal);
  EXPECT_EQ(s.x, p.x_ref);
  EXPECT_EQ(s.objective, ObjectiveValue(p, p.x_ref));
}

TEST(SolveTest, ConstantSpeedReferenceIsOptimal) {
  std::vector<double> x(30);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 100.0 + 17.5 * i;
  const SmoothingProblem p = BuildProblem(FromPositions(x), 10.0, 50.0);
  const QpSolution s = Solve(p);
  ASSERT_EQ(s.status, SolveStatus::kOptimal);
  EXPECT_LE(MaxAbsDiff(s.x, x), 1e-6);
  EXPECT_NEAR(s.objective, 0.0, 1e-9);
}

// Values frozen from the enumeration oracle in tests/support.
TEST(SolveTest, SixIntervalStopAndGo) {
  const SmoothingProblem p = BuildProblem(FromPositions({0, 20, 38, 40, 41, 60, 85}), 10.0, 50.0);
  const QpSolution s = Solve(p);
  ASSERT_EQ(s.status, SolveStatus::kOptimal);
  const std::vector<double> expected = {0, 20, 38, 2439.0 / 62.0, 41, 60, 85};
  EXPECT_LE(MaxAbsDiff(s.x, expected), 1e-6);
  EXPECT_NEAR(s.objective, 6693.7204301075071, 1e-6);
}

TEST(SolveTest, EightIntervalPlateau) {
  const SmoothingProblem p = BuildProblem(FromPositions({0, 20, 38, 40, 41, 42, 43, 60, 85}), 10.0, 50.0);
  const QpSolution s = Solve(p);
  ASSERT_EQ(s.status, SolveStatus::kOptimal);
  const std::vector<double> expected = {0, 20, 38, 40, 40, 40, 43, 60, 85};
  EXPECT_LE(MaxAbsDiff(s.x, expected), 1e-6);
  EXPECT_NEAR(s.objective, 6077.875, 1e-6);
}

TEST(SolveTest, AgreesWithEnumerationOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> gap(0.5, 60.0);
  std::uniform_real_distribution<double> lambda(0.0, 30.0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 3 + rep % 6;  // N in [3, 8]
    const Trajectory ref = testing::RandomStopAndGo(rng, n);
    const double g = gap(rng), l = lambda(rng);
    const SmoothingProblem p = BuildProblem(ref, l, g);
    const QpSolution s = Solve(p);
    ASSERT_EQ(s.status, SolveStatus::kOptimal) << "rep " << rep;
    const auto oracle = testing::SolveByEnumeration(ref.positions, ref.dt, l, g);
    ASSERT_TRUE(std::isfinite(oracle.objective));
    const std::vector<double> ox(oracle.x.data(), oracle.x.data() + oracle.x.size());
    worst = std::max(worst, MaxAbsDiff(s.x, ox));
    EXPECT_LE(MaxAbsDiff(s.x, ox), 1e-6) << "rep " << rep << " N=" << n;
  }
  RecordProperty("worst_coordinate_error", std::to_string(worst));
}

TEST(SolveTest, NeverWorseThanReference) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> gap(1.0, 300.0);
  for (int rep = 0; rep < 200; ++rep) {
    const Trajectory ref = testing::RandomStopAndGo(rng, 10 + rep % 190);
    const SmoothingProblem p = BuildProblem(ref, 10.0, gap(rng));
    const QpSolution s = Solve(p);
    ASSERT_EQ(s.status, SolveStatus::kOptimal) << "rep " << rep;
    EXPECT_LE(s.objective, ObjectiveValue(p, p.x_ref) + 1e-9);
    EXPECT_LE(MaxConstraintViolation(p, s.x), 1e-6);
  }
}

TEST(SolveTest, ObjectiveNonIncreasingInGap) {
  std::mt19937_64 rng(51);
  for (int rep = 0; rep < 20; ++rep) {
    const Trajectory ref = testing::RandomStopAndGo(rng, 120);
    double previous = INFINITY;
    for (double g : {0.0, 16.09, 32.19, 80.47, 160.9, 321.9, 804.7}) {
      const QpSolution s = Solve(BuildProblem(ref, 10.0, g));
      ASSERT_EQ(s.status, SolveStatus::kOptimal);
      EXPECT_LE(s.objective, previous * (1.0 + 1e-9) + 1e-9) << "gap " << g;
      previous = s.objective;
    }
  }
}

TEST(SolveTest, AccelerationEnergyNonIncreasingInLambda) {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 20; ++rep) {
    const Trajectory ref = testing::RandomStopAndGo(rng, 80);
    double previous = INFINITY;
    for (double l : {0.0, 0.5, 2.0, 10.0, 50.0, 200.0}) {
      const QpSolution s = Solve(BuildProblem(ref, l, 60.0));
      ASSERT_EQ(s.status, SolveStatus::kOptimal);
      const double energy = AccelerationEnergy(s.x, ref.dt);
      EXPECT_LE(energy, previous * (1.0 + 1e-6) + 1e-9) << "lambda " << l;
      previous = energy;
    }
  }
}

TEST(SolveTest, WarmStartMatchesColdStart) {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 10; ++rep) {
    const Trajectory ref = testing::RandomStopAndGo(rng, 200);
    const QpSolution narrow = Solve(BuildProblem(ref, 10.0, 40.0));
    const SmoothingProblem wide = BuildProblem(ref, 10.0, 160.9);
    const QpSolution cold = Solve(wide);
    const QpSolution warm = Solve(wide, {}, std::span<const double>(narrow.x));
    ASSERT_EQ(warm.status, SolveStatus::kOptimal);
    EXPECT_LE(MaxAbsDiff(cold.x, warm.x), 1e-6);
  }
}

TEST(SolveTest, Deterministic) {
  std::mt19937_64 rng(81);
  const Trajectory ref = testing::RandomStopAndGo(rng, 300);
  const SmoothingProblem p = BuildProblem(ref, 10.0, 80.0);
  const QpSolution a = Solve(p);
  const QpSolution b = Solve(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(SmoothTest, SingleWaveConstraintAudit) {
  WaveScenario s;
  s.base_speed = 27.0;
  s.wave_count = 1;
  s.wave_amplitude = 24.0;
  s.wave_width_t = 900.0;
  s.wave_width_x = 250.0;
  s.seed = 3;
  const SpeedField f = SynthesizeField(s, 1800.0, 6000.0);
  const auto seeds = SeedSchedule(f, 60.0);
  int checked = 0;
  for (const Seed& seed : seeds) {
    Trajectory ref;
    try {
      ref = Resample1Hz(IntegrateTrajectory(f, seed.t, seed.x));
    } catch (const DegenerateTrajectory&) {
      continue;
    }
    const Trajectory clean = PreprocessReference(ref);
    const double gap = 160.9;
    const Trajectory bench = Smooth(ref, 10.0, gap);
    ASSERT_EQ(bench.positions.size(), clean.positions.size());
    double max_gap = 0.0, min_v = INFINITY;
    for (std::size_t k = 0; k < bench.positions.size(); ++k) {
      max_gap = std::max(max_gap, clean.positions[k] - bench.positions[k]);
      EXPECT_LE(bench.positions[k], clean.positions[k] + 1e-6);
    }
    for (double v : ComputeKinematics(bench).velocities) min_v = std::min(min_v, v);
    EXPECT_LE(max_gap, gap + 1e-6);
    EXPECT_GE(min_v, -1e-6);
    EXPECT_NEAR(bench.positions.front(), clean.positions.front(), 1e-6);
    EXPECT_NEAR(bench.positions.back(), clean.positions.back(), 1e-6);
    EXPECT_EQ(bench.source, TrajectorySource::kBenchmark);
    EXPECT_EQ(bench.gap_budget, gap);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(SmoothTest, ZeroIterationBudgetIsReported) {
  SolverSettings settings;
  settings.max_iterations = 1;
  settings.polish = false;
  const Trajectory ref = FromPositions({0, 20, 38, 40, 41, 42, 43, 60, 85});
  const SmoothResult r = SmoothDetailed(ref, 10.0, 50.0, settings);
  EXPECT_EQ(r.solution.status, SolveStatus::kMaxIterations);
  EXPECT_THROW(Smooth(ref, 10.0, 50.0, settings), SolverError);
}

}  // namespace
}  // namespace wavebench
