#include <gtest/gtest.h>

#include <algorithm>

#include "vrrw/diagnostics.hpp"
#include "vrrw/errors.hpp"

using namespace vrrw;

namespace {

Snapshot snap(std::uint64_t n, std::int64_t lo, std::vector<std::uint64_t> Z) {
  Snapshot s;
  s.n = n;
  s.lo = lo;
  s.Z = std::move(Z);
  return s;
}

RunRecord tracked_run(const WeightSpec& spec, std::uint64_t seed, std::uint64_t horizon) {
  WeightModel m(spec);
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, seed, {true});
  return run(w, {horizon, {horizon / 10, horizon / 2}});
}

}  // namespace

TEST(TailSupport, AlternatingPair) {
  RunRecord r;
  r.snapshots = {snap(0, 0, {1}), snap(90, -2, {3, 10, 40, 38}), snap(100, -2, {3, 10, 45, 43})};
  const auto ts = tail_support(r, 0.1);
  EXPECT_EQ(ts.sites, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(ts.cardinality(), 2u);
}

TEST(TailSupport, WideWindowIsVisitedSet) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 3);
  auto r = run(w, {200, {}, {0.999}});
  const auto ts = tail_support(r, 0.999);
  const auto& last = r.snapshots.back();
  std::vector<std::int64_t> visited;
  for (std::size_t i = 0; i < last.Z.size(); ++i) {
    const std::int64_t x = last.lo + static_cast<std::int64_t>(i);
    if (last.Z[i] > r.config.at(x)) visited.push_back(x);
  }
  EXPECT_EQ(ts.sites, visited);
}

TEST(TailSupport, MonotoneInPhi) {
  WeightModel m(WeightSpec::power(0.4));
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 8);
  auto r = run(w, {100000, {}, {0.05, 0.1, 0.5}});
  const auto a = tail_support(r, 0.05).sites, b = tail_support(r, 0.1).sites, c = tail_support(r, 0.5).sites;
  EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  EXPECT_TRUE(std::includes(c.begin(), c.end(), b.begin(), b.end()));
}

TEST(TailSupport, MissingWindowIsInsufficient) {
  RunRecord r;
  r.snapshots = {snap(100, 0, {5})};
  EXPECT_THROW(tail_support(r, 0.1), InsufficientDataError);
  EXPECT_THROW(tail_support(r, 1.5), DomainError);
}

TEST(EqW, ResidualSmallAndSensitive) {
  WeightModel m(WeightSpec::linear_shift());
  auto r = tracked_run(WeightSpec::linear_shift(), 5, 1000000);
  const auto& last = r.snapshots.back();
  for (std::int64_t x = last.lo + 1; x < last.lo + static_cast<std::int64_t>(last.Z.size()) - 1; ++x) {
    EXPECT_LE(eqW_residual(r, m, x).summary["max"].get<double>(), 1e-8);
  }

  auto bad = r;
  auto& s = bad.snapshots.back();
  s.Y_plus[static_cast<std::size_t>(-1 - s.t_lo)] += 1e-3;
  EXPECT_GT(eqW_residual(bad, m, 0).summary["max"].get<double>(), 5e-4);
}

TEST(EqW, ZeroAtStart) {
  WeightModel m(WeightSpec::power(2));
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 1, {true});
  auto r = run(w, {10, {0}});
  EXPECT_EQ(eqW_residual(r, m, 0).points.front(), (std::pair<std::uint64_t, double>{0, 0.0}));
}

TEST(EqW, UnregisteredTrackerRejected) {
  WeightModel m(WeightSpec::linear_shift());
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 1, {true, 0, 5});
  auto r = run(w, {1000, {}});
  EXPECT_THROW(eqW_residual(r, m, 0), ConfigError);
  auto plain = new_walk(m, InitialConfig::c0(), std::nullopt, 1);
  auto r2 = run(plain, {1000, {}});
  EXPECT_THROW(eqW_residual(r2, m, 0), ConfigError);
}

TEST(CenterDominance, SymmetricFixtureConstant) {
  RunRecord r;
  for (std::uint64_t n = 1; n <= 8; ++n) r.snapshots.push_back(snap(n, 0, {5, 5, 5}));
  const auto s = center_dominance(r, 1);
  for (const auto& [n, v] : s.points) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.summary["drift"].get<double>(), 0.0);
}

TEST(CenterDominance, ShortRecordUndefined) {
  RunRecord r;
  r.snapshots = {snap(5, 0, {1, 3, 1})};
  EXPECT_FALSE(center_dominance(r, 1).summary["defined"].get<bool>());
}

TEST(CenterDominance, LinearShiftDrifts) {
  int positive = 0;
  const int reps = 12;
  for (int i = 0; i < reps; ++i) {
    WeightModel m(WeightSpec::linear_shift());
    auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 100 + i);
    RunOptions o{2000000, {}};
    for (std::uint64_t c = 100000; c < 2000000; c += 100000) o.checkpoints.push_back(c);
    auto r = run(w, o);
    positive += center_dominance(r, localization_center(r)).summary["drift"].get<double>() > 0;
  }
  EXPECT_GT(positive, reps / 2);
}

TEST(Asymmetry, SymmetricFixtureZero) {
  WeightModel m(WeightSpec::linear_shift());
  RunRecord r;
  for (std::uint64_t n = 1; n <= 4; ++n) r.snapshots.push_back(snap(n, 0, {n, 2 * n, n}));
  const auto s = asymmetry_monitor(r, m, 1);
  for (const auto& [n, v] : s.points) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.summary["oscillation"].get<double>(), 0.0);
}

TEST(Asymmetry, TotalOnNonLocalizedRuns) {
  WeightModel m(WeightSpec::power(0.4));
  auto w = new_walk(m, InitialConfig::c0(), std::nullopt, 4);
  auto r = run(w, {100000, {1000, 10000}});
  const auto s = asymmetry_monitor(r, m, 0);
  EXPECT_TRUE(s.summary.contains("last"));
  EXPECT_TRUE(s.summary.contains("oscillation"));
}

TEST(BetaEnvelope, InitialArithmetic) {
  WeightModel m(WeightSpec::constant(1));
  RunRecord r;
  r.snapshots = {snap(0, 0, {3, 0, 7})};
  EXPECT_DOUBLE_EQ(beta_envelope(r, m, 2), 7 - 2 * 3);
}

TEST(BetaEnvelope, CoupledFixtureAndMonotone) {
  WeightModel m(WeightSpec::constant(1));
  RunRecord r;
  double prev = -1e300;
  for (std::uint64_t k = 1; k <= 6; ++k) {
    r.snapshots.push_back(snap(k, 0, {k, 0, k}));
    const double e = beta_envelope(r, m, 2);
    EXPECT_GE(e, prev);
    prev = e;
  }
  // W = id and Z(2) = Z(0): W(Z(2)) - 2W(Z(0)) = -Z(0), largest at the start.
  EXPECT_DOUBLE_EQ(prev, -1.0);
}

TEST(UMonitor, CNEtaBetaStart) {
  WeightModel m(WeightSpec::constant(1));
  for (std::uint64_t N : {10u, 40u}) {
    for (double beta : {0.0, 1.0, 2.5}) {
      const auto cfg = build_CNEtaBeta(m, N, 0.5, beta);
      auto w = new_walk(m, cfg, Bounds{-3, 0}, 2);
      auto r = run(w, {1000, {0}});
      const auto s = u_monitor(r);
      EXPECT_LE(s.points.front().second, -beta);
      if (N == 10 && beta == 1.0) EXPECT_DOUBLE_EQ(s.points.front().second, -1.0);
      EXPECT_GE(s.summary["sup"].get<double>(), s.points.front().second);
    }
  }
}

TEST(UMonitor, RequiresU) {
  RunRecord r;
  r.snapshots = {snap(0, 0, {1})};
  EXPECT_THROW(u_monitor(r), ConfigError);
}

TEST(Localization, DegenerateHistogram) {
  RunRecord r;
  r.snapshots = {snap(90, 0, {5, 5}), snap(100, 0, {8, 7})};
  const auto rep = localization_report({r, r, r});
  ASSERT_EQ(rep.histogram.size(), 1u);
  EXPECT_EQ(rep.histogram.at(100).at(2), 3u);
  EXPECT_DOUBLE_EQ(rep.fraction(100, 2), 1.0);
}

TEST(Localization, Power2ConcentratesOnTwo) {
  std::vector<RunRecord> rs;
  for (std::uint64_t i = 0; i < 16; ++i) {
    WeightModel m(WeightSpec::power(2));
    auto w = new_walk(m, InitialConfig::c0(), std::nullopt, i);
    rs.push_back(run(w, {100000, {}}));
  }
  const auto rep = localization_report(rs);
  EXPECT_EQ(rep.modal_cardinality(100000), 2u);
}

TEST(Diagnostics, PureFunctions) {
  WeightModel m(WeightSpec::linear_shift());
  auto r = tracked_run(WeightSpec::linear_shift(), 9, 100000);
  EXPECT_EQ(eqW_residual(r, m, 0).to_json(), eqW_residual(r, m, 0).to_json());
  EXPECT_EQ(localization_report({r}).to_csv(), localization_report({r}).to_csv());
}
