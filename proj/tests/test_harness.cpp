#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vrrw/errors.hpp"
#include "vrrw/harness.hpp"

using namespace vrrw;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentPlan small_plan() {
  return ExperimentPlan::from_json(json::parse(R"({
    "name": "small", "seed": 11,
    "classifier": {"enabled": false},
    "specs": [{"weight": "power:2", "horizon": 1000, "replicas": 1}]
  })"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Plan, SingleReplicaGivesOneRecord) {
  const auto res = run_experiment(small_plan());
  ASSERT_EQ(res.replicas.size(), 1u);
  ASSERT_TRUE(res.replicas[0].record);
  EXPECT_EQ(count_lines(res.summary_csv()), 2u);
  EXPECT_EQ(res.failures(), 0u);
}

TEST(Plan, RerunIsByteIdentical) {
  const auto dir = fs::temp_directory_path() / "vrrw_harness_rerun";
  fs::remove_all(dir);
  auto plan = small_plan();
  plan.specs[0].replicas = 4;
  plan.specs[0].trackers.enabled = true;
  write_outputs(plan, run_experiment(plan), dir / "a");
  plan.workers = 3;
  write_outputs(plan, run_experiment(plan), dir / "b");
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
  }
  fs::remove_all(dir);
}

TEST(Plan, MixedFamiliesGiveTwoSections) {
  auto plan = ExperimentPlan::from_json(json::parse(R"({
    "seed": 3, "classifier": {"enabled": false},
    "specs": [{"weight": "power:2", "horizon": 2000, "replicas": 2},
              {"weight": "linear", "horizon": 2000, "replicas": 2}]
  })"));
  const auto res = run_experiment(plan);
  EXPECT_EQ(count_lines(res.comparison_csv()), 3u);
  EXPECT_EQ(res.localization.size(), 2u);
  const auto dir = fs::temp_directory_path() / "vrrw_harness_mixed";
  fs::remove_all(dir);
  write_outputs(plan, res, dir);
  EXPECT_TRUE(fs::exists(dir / "records" / "power_2_.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "records" / "linear_shift.jsonl"));
  EXPECT_EQ(count_lines(slurp(dir / "records" / "power_2_.jsonl")), 2 * res.replicas[0].record->snapshots.size());
  fs::remove_all(dir);
}

TEST(Plan, FingerprintStableUnderReordering) {
  const auto a = ExperimentPlan::from_json(json::parse(R"({
    "seed": 5, "name": "x",
    "specs": [{"weight": "power:2", "replicas": 3, "horizon": 100}]})"));
  const auto b = ExperimentPlan::from_json(json::parse(R"({
    "name": "x", "workers": 4, "output_dir": "elsewhere",
    "specs": [{"horizon": 100, "weight": {"param": 2, "family": "power"}, "replicas": 3}], "seed": 5})"));
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  auto c = a;
  c.seed = 6;
  EXPECT_NE(a.fingerprint(), c.fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 64u);
}

TEST(Plan, RecordsCarryProvenance) {
  auto plan = small_plan();
  const auto res = run_experiment(plan);
  const auto& rec = *res.replicas[0].record;
  EXPECT_EQ(rec.fingerprint, plan.fingerprint());
  EXPECT_EQ(rec.seed, replica_seed(11, 0));
  EXPECT_EQ(rec.schema_version, kRecordSchemaVersion);
  EXPECT_EQ(rec.tail_support.count(0.1), 1u);
  // A replica is reproducible from its record alone.
  WeightModel m(WeightSpec::power(2));
  auto w = new_walk(m, rec.config, rec.bounds, rec.seed);
  w.advance(rec.horizon);
  EXPECT_EQ(w.position(), rec.snapshots.back().position);
}

TEST(Plan, FailingSpecIsIsolated) {
  auto plan = ExperimentPlan::from_json(json::parse(R"({
    "classifier": {"enabled": false},
    "specs": [{"weight": "constant:1", "horizon": 100, "replicas": 2,
               "config": {"cnetabeta": {"N": 3, "eta": 0.5, "beta": 50}}, "bounds": [-3, 0]},
              {"weight": "constant:1", "horizon": 100, "replicas": 2}]})"));
  const auto res = run_experiment(plan);
  EXPECT_EQ(res.failures(), 2u);
  EXPECT_FALSE(res.replicas[0].record);
  EXPECT_NE(res.replicas[0].error.find("beta"), std::string::npos);
  EXPECT_TRUE(res.replicas[2].record);
  EXPECT_NE(res.summary_csv().find("constant(1)"), std::string::npos);
}

TEST(Plan, ValidationErrors) {
  EXPECT_THROW(ExperimentPlan::from_json(json::parse(R"({"specs": []})")), ConfigError);
  EXPECT_THROW(ExperimentPlan::from_json(json::parse(R"({"specs": [{"weight": "linear", "replicas": 0}]})")),
               ConfigError);
  EXPECT_THROW(ExperimentPlan::from_json(json::parse(R"({"specs": [{"weight": "linear", "horizon": 0}]})")),
               ConfigError);
  EXPECT_THROW(ExperimentPlan::from_json(json::parse(R"({"specs": [{"weight": "linear", "colour": 1}]})")),
               ConfigError);
  EXPECT_THROW(ExperimentPlan::from_json(
                   json::parse(R"({"specs": [{"weight": "linear", "horizon": 10, "checkpoints": [5, 2]}]})")),
               ConfigError);
}

TEST(Plan, ClassifierRowsAlongsideLocalization) {
  auto plan = ExperimentPlan::from_json(json::parse(R"({
    "seed": 1, "classifier": {"criticals": ["beta_c"]},
    "specs": [{"weight": "constant:1", "horizon": 1000, "replicas": 2}]})"));
  const auto res = run_experiment(plan);
  const auto csv = res.comparison_csv();
  EXPECT_NE(csv.find("Divergent"), std::string::npos);
  EXPECT_NE(csv.find("PlusInfinity"), std::string::npos);
}

TEST(Parallel, DeterministicOrderAndErrors) {
  std::vector<int> out(50);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw ConfigError("x"); }), ConfigError);
}
