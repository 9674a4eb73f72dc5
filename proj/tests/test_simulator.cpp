#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "vrrw/errors.hpp"
#include "vrrw/simulator.hpp"

using namespace vrrw;

namespace {

double eq6_residual(const WeightModel& m, const Walk& w, std::int64_t x) {
  const auto W = [&](std::uint64_t k) { return m.W(static_cast<double>(k)); };
  return std::abs(w.Y_plus(x - 1) + w.Y_minus(x + 1) - (W(w.Z(x)) - W(w.config().at(x))));
}

TrackerOptions all_sites() { return {true}; }

}  // namespace

TEST(Walk, C0Start) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 7);
  EXPECT_EQ(w.position(), 0);
  EXPECT_EQ(w.n(), 0u);
  EXPECT_EQ(w.Z(0), 1u);
  EXPECT_EQ(w.Z(1), 0u);
}

TEST(Walk, NegativeInitialLocalTimeRejected) {
  EXPECT_THROW(InitialConfig::custom({{5, -1}}), ConfigError);
}

TEST(Walk, StartOutsideBoundsRejected) {
  WeightModel m(WeightSpec::constant(1));
  EXPECT_THROW(new_walk(m, InitialConfig::c0(), Bounds{1, 4}, 1), ConfigError);
}

TEST(Walk, TransitionProbability) {
  WeightModel m(WeightSpec::linear_shift());
  const auto cfg = InitialConfig::custom({{-1, 1}, {0, 1}, {1, 3}});
  EXPECT_NEAR(new_walk(m, cfg, std::nullopt, 1).p_left(), 1.0 / 3, 1e-15);

  auto cache = std::make_shared<const WeightCache>(m, 64);
  int right = 0;
  const int trials = 60000;
  for (int s = 0; s < trials; ++s) {
    Walk w(cache, cfg, {}, SplitStream::split(17, static_cast<std::uint64_t>(s)));
    w.step();
    right += w.position() == 1;
  }
  const double se = std::sqrt(2.0 / 9 / trials);
  EXPECT_NEAR(right / double(trials), 2.0 / 3, 5 * se);
}

TEST(Walk, SymmetricNeighbours) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::custom({{-1, 4}, {1, 4}}), std::nullopt, 3);
  EXPECT_DOUBLE_EQ(w.p_left(), 0.5);
}

TEST(Walk, ReflectionAtBound) {
  WeightModel m(WeightSpec::linear_shift());
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto w = new_walk(m, InitialConfig::c0(), Bounds{-3, 0}, s);
    EXPECT_DOUBLE_EQ(w.p_left(), 1.0);
    w.step();
    EXPECT_EQ(w.position(), -1);
  }
  auto w = new_walk(m, InitialConfig::c0(), Bounds{-3, 0}, 11);
  for (int i = 0; i < 100000; ++i) {
    w.step();
    ASSERT_TRUE(w.bounds()->contains(w.position()));
  }
  EXPECT_EQ(w.Z(1), 0u);
  EXPECT_EQ(w.Z(-4), 0u);
}

TEST(Walk, CorrectorSingleVisit) {
  WeightModel m(WeightSpec::linear_shift());
  // Forced move 1 -> 0; on arrival Z(0) = 1, w = 2, p_left = w(3)/(w(3)+w(1)) = 2/3.
  auto w = new_walk(m, InitialConfig::custom({{-1, 3}, {1, 1}}, 1), Bounds{-5, 1}, 0, {true, 0, 0});
  w.step();
  ASSERT_EQ(w.position(), 0);
  EXPECT_NEAR(w.h(0), 1.0 / 6, 1e-15);
}

TEST(Walk, CorrectorSymmetricStaysZero) {
  WeightModel m(WeightSpec::constant(1));
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 5, all_sites());
  w.advance(10000);
  for (std::int64_t x = -20; x <= 20; ++x) EXPECT_EQ(w.h(x), 0.0);
}

TEST(Walk, LocalTimeIdentityAndCounting) {
  for (auto spec : {WeightSpec::linear_shift(), WeightSpec::power(2), WeightSpec::sub_log_corrected(0.3)}) {
    WeightModel m(spec);
    auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 42, all_sites());
    for (int c = 0; c < 10; ++c) {
      w.advance(100000);
      const auto s = w.snapshot();
      std::uint64_t total = 0;
      for (auto z : s.Z) total += z;
      EXPECT_EQ(total - 1, w.n());
      for (std::int64_t x = s.lo + 1; x < s.lo + static_cast<std::int64_t>(s.Z.size()) - 1; ++x) {
        ASSERT_LE(eq6_residual(m, w, x), 1e-8) << spec.id() << " x=" << x;
      }
      EXPECT_LE(w.max_crossing_imbalance(), 1u);
    }
  }
}

TEST(Walk, DeterministicRecords) {
  WeightModel m(WeightSpec::linear_shift());
  auto cache = std::make_shared<const WeightCache>(m, 1 << 16);
  auto once = [&] {
    Walk w(cache, InitialConfig::c0(), {std::nullopt, all_sites()}, SplitStream::split(9, 3));
    auto r = run(w, {100000, {0, 1000, 10000}});
    return r.to_jsonl();
  };
  EXPECT_EQ(once(), once());
}

TEST(Run, FirstCheckpointAtZeroIsInitialConfig) {
  WeightModel m(WeightSpec::linear_shift());
  const auto cfg = InitialConfig::custom({{-1, 2}, {0, 5}, {2, 1}});
  auto w = new_walk(m, cfg, std::nullopt, 1);
  auto r = run(w, {1000, {0}});
  const auto* s0 = r.at(0);
  ASSERT_NE(s0, nullptr);
  for (std::int64_t x = -3; x <= 3; ++x) EXPECT_EQ(s0->Z_at(x), cfg.at(x));
}

TEST(Run, CountingIdentityAndWindows) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 2);
  auto r = run(w, {1000000, {100000}});
  const auto& last = r.snapshots.back();
  EXPECT_EQ(last.n, 1000000u);
  std::uint64_t total = 0;
  for (auto z : last.Z) total += z;
  EXPECT_EQ(total - 1, 1000000u);
  ASSERT_NE(r.at(900000), nullptr);
  EXPECT_TRUE(r.at(900000)->window);
  ASSERT_NE(r.at(90000), nullptr);
  EXPECT_FALSE(r.at(100000)->window);
}

TEST(Run, JsonlRoundTrip) {
  WeightModel m(WeightSpec::power(2));
  auto w = new_walk(m, InitialConfig::c0(), Bounds{-3, 0}, 4, all_sites());
  auto r = run(w, {5000, {100, 1000}});
  r.fingerprint = "abc";
  r.replica = 2;
  r.tail_support[0.1] = {-2, -1};
  const auto lines = r.to_jsonl();
  const auto back = RunRecord::from_jsonl(lines);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].to_jsonl(), lines);
  ASSERT_TRUE(back[0].snapshots.back().U.has_value());
}

TEST(Run, RejectsBadSchedule) {
  WeightModel m(WeightSpec::constant(1));
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 1);
  EXPECT_THROW(run(w, {0, {}}), ConfigError);
  EXPECT_THROW(run(w, {10, {5, 3}}), ConfigError);
}

TEST(Run, TruncatesOnRangeCap) {
  WeightModel m(WeightSpec::constant(1));
  auto cache = std::make_shared<const WeightCache>(m, 1 << 10);
  WalkOptions opts;
  opts.max_range = 64;
  Walk w(cache, InitialConfig::c0(), opts, SplitStream(1));
  auto r = run(w, {1000000, {}});
  EXPECT_TRUE(r.truncated);
}

TEST(CNEtaBeta, ConstantWeightExample) {
  WeightModel m(WeightSpec::constant(1));
  const auto c = build_CNEtaBeta(m, 10, 0.5, 1);
  EXPECT_EQ(c.at(0), 10u);
  EXPECT_EQ(c.at(-1), 10u);
  EXPECT_EQ(c.at(-2), 9u);
  EXPECT_EQ(c.at(-3), 4u);
  EXPECT_EQ(violated_CNEtaBeta(m, c, 10, 0.5, 1), "");
  auto w = new_walk(m, c, Bounds{-3, 0}, 1);
  EXPECT_DOUBLE_EQ(*w.snapshot().U, -1.0);
}

TEST(CNEtaBeta, ValidatorRejects) {
  WeightModel m(WeightSpec::constant(1));
  const auto c = InitialConfig::custom({{-1, 25}, {-2, 5}, {0, 10}});
  EXPECT_EQ(violated_CNEtaBeta(m, c, 1, 0.5, 0), "z0(-1) <= z0(-2) + z0(0)");
}

TEST(CNEtaBeta, Preconditions) {
  WeightModel m(WeightSpec::constant(1));
  EXPECT_THROW(build_CNEtaBeta(m, 10, 1.5, 0), DomainError);
  EXPECT_THROW(build_CNEtaBeta(m, 10, 0.5, 100), InfeasibleError);
}

TEST(Walk, Throughput) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 1);
  const std::uint64_t steps = 20000000;
  const auto t0 = std::chrono::steady_clock::now();
  w.advance(steps);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RecordProperty("steps_per_second", std::to_string(steps / secs));
  EXPECT_GE(steps / secs, 1e7);
}
