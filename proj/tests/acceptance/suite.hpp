#pragma once

// Acceptance criteria 1-9. Each check returns a pass/fail verdict, a one-line
// detail and a JSON evidence blob; tolerances are pinned here.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracle/oracle.hpp"
#include "vrrw/harness.hpp"

namespace vrrw::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  nlohmann::json evidence = nlohmann::json::object();
};

struct SuiteOptions {
  unsigned workers = 1;
  std::uint64_t seed = 20261019;
  // Evidence JSON per criterion is written here when non-empty.
  std::filesystem::path evidence_dir;
  // Criteria to run; empty means all.
  std::set<int> only;
};

inline constexpr double kIdentityTol = 1e-8;
inline constexpr double kScalingTol = 1e-9;
inline constexpr double kDominationTol = 1e-12;
inline constexpr double kOracleRelTol = 1e-7;
inline constexpr double kOracleStep = 1e-4;
inline constexpr double kRoundTripTol = 1e-12;
inline constexpr double kPinnedRelTol = 1e-12;
inline constexpr int kPower2MinReplicas = 80;
inline constexpr int kPower04MinReplicas = 80;

CriterionResult local_time_identity(unsigned workers, std::uint64_t seed);
/// lambda_skew multiplies the scale applied to the weight only, so a value
/// other than 1 must make the check fail.
CriterionResult scaling_identity(double lambda_skew = 1.0);
CriterionResult domination();
CriterionResult oracle_equivalence();
/// Criteria 5 and 6 share the classifier runs.
std::pair<CriterionResult, CriterionResult> classifier_regimes(unsigned workers);
struct SimulationRuns {
  ExperimentResult result;
  ExperimentPlan plan;
};
SimulationRuns simulation_runs(unsigned workers, std::uint64_t seed);
CriterionResult simulation_regimes(const SimulationRuns& runs);
CriterionResult martingale_checks(unsigned workers, std::uint64_t seed);
/// Structural checks against the brute-force reference; `runs` supplies the
/// crossing-imbalance maxima.
CriterionResult structural_checks(const SimulationRuns& runs);
/// W, W^{-1}, H, H^{-1} consistency of one model against its reference on
/// n random points. Empty string when consistent, else the first failure.
std::string structural_failure(const WeightModel& m, const oracle::BruteWeight& ref, int n, std::uint64_t seed);

std::vector<CriterionResult> verify_suite(const SuiteOptions& opts);
std::string format_line(const CriterionResult& r);
nlohmann::json to_json(const std::vector<CriterionResult>& results);

}  // namespace vrrw::acceptance
