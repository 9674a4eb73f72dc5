#pragma once

// Experiment plans, replica orchestration and persisted outputs.
//
// Plan file (JSON):
//   {
//     "name": "demo",
//     "seed": 1,
//     "classifier": {"enabled": true, "criticals": ["beta_c"], "margin": 0.15, ...},
//     "specs": [
//       {"weight": "power:2", "horizon": 1000000, "replicas": 10,
//        "checkpoints": [1000, 100000], "phis": [0.1],
//        "config": "C0" | {"z0": [[x, z], ...], "start": 0}
//                  | {"cnetabeta": {"N": 10, "eta": 0.5, "beta": 1}},
//        "bounds": [-3, 0] | null,
//        "trackers": false | true | [lo, hi]}
//     ]
//   }
// "workers" and "output_dir" may also appear; they do not enter the
// fingerprint.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrrw/criticals.hpp"
#include "vrrw/diagnostics.hpp"
#include "vrrw/simulator.hpp"
#include "vrrw/detail/parallel_for.hpp"
#include "vrrw/weights.hpp"

namespace vrrw {

struct ConfigChoice {
  enum class Kind { kC0, kCustom, kCNEtaBeta };
  Kind kind = Kind::kC0;
  InitialConfig custom = InitialConfig::c0();
  std::uint64_t N = 1;
  double eta = 0.5;
  double beta = 0.0;

  InitialConfig build(const WeightModel& m) const;
  nlohmann::json to_json() const;
  static ConfigChoice from_json(const nlohmann::json& j);
};

struct SpecPlan {
  WeightSpec weight = WeightSpec::constant(1);
  std::uint64_t horizon = 1000;
  std::uint64_t replicas = 1;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> phis{0.1};
  ConfigChoice config;
  std::optional<Bounds> bounds;
  TrackerOptions trackers;
};

struct ClassifierPlan {
  bool enabled = true;
  ClassifierOptions options;
  std::vector<CriticalParameter> criticals{CriticalParameter::kBetaC};
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::vector<SpecPlan> specs;
  ClassifierPlan classifier;
  std::filesystem::path output_dir = "out";
  unsigned workers = 1;

  /// ConfigError naming the first invalid field.
  void validate() const;
  /// Canonical form: keys sorted, defaults filled, no workers/output_dir.
  nlohmann::json canonical() const;
  /// SHA-256 of canonical().dump(), hex.
  std::string fingerprint() const;

  static ExperimentPlan from_json(const nlohmann::json& j);
  static ExperimentPlan load(const std::filesystem::path& path);
};

/// Seed of replica i: the first output of split(master, i). Shared across
/// specs, so families are compared on common random streams.
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica);

/// Filesystem-safe form of a spec id.
std::string spec_slug(const WeightSpec& spec);

struct ReplicaOutcome {
  std::size_t spec_index = 0;
  std::string spec_id;
  std::uint64_t replica = 0;
  std::uint64_t seed = 0;
  std::optional<RunRecord> record;
  std::string error;  // set when the replica failed
};

struct SpecClassification {
  std::string spec_id;
  SeriesTests series;
  std::vector<CriticalEstimate> criticals;
  std::string error;
  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::string fingerprint;
  std::vector<ReplicaOutcome> replicas;  // ordered by (spec, replica)
  std::vector<SpecClassification> classifications;
  std::vector<LocalizationReport> localization;  // one per spec

  std::size_t failures() const;
  /// Per-replica rows: spec, replica, seed, horizon, truncated, error,
  /// final position, crossing imbalance, tail-support size per phi.
  std::string summary_csv() const;
  /// Classifier verdicts and localization statistics side by side, one row
  /// per spec.
  std::string comparison_csv() const;
};

/// Runs every replica of every spec on a pool of plan.workers threads and
/// merges by (spec, replica). Writes nothing.
ExperimentResult run_experiment(const ExperimentPlan& plan);

/// Writes plan.json, records/<spec>.jsonl, classifier/<spec>.json,
/// summary.csv, localization.csv and comparison.csv under dir.
void write_outputs(const ExperimentPlan& plan, const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace vrrw
