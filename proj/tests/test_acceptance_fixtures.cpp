#include <gtest/gtest.h>

#include "acceptance/suite.hpp"

using namespace vrrw;

TEST(AcceptanceFixtures, WrongScaleFailsScalingCriterion) {
  EXPECT_TRUE(acceptance::scaling_identity().pass);
  const auto skewed = acceptance::scaling_identity(1.0 + 1e-6);
  EXPECT_FALSE(skewed.pass);
  EXPECT_NE(skewed.detail.find("residual"), std::string::npos);
}

TEST(AcceptanceFixtures, CorruptedPrefixTableFailsLoudly) {
  const auto spec = WeightSpec::linear_shift();
  const oracle::BruteWeight ref(spec, std::uint64_t{1} << 21);
  WeightModel good(spec);
  EXPECT_EQ(acceptance::structural_failure(good, ref, 200, 1), "");
  // A table built from slightly different weights stands in for corruption.
  WeightModel corrupted(spec.scaled(1.0 + 1e-9));
  const auto msg = acceptance::structural_failure(corrupted, ref, 200, 1);
  EXPECT_NE(msg.find("reference prefix sum"), std::string::npos) << msg;
}

TEST(AcceptanceFixtures, LineFormat) {
  acceptance::CriterionResult r{3, "title", true, "detail", 1.25};
  EXPECT_EQ(acceptance::format_line(r), "criterion 3 PASS  title: detail [1.2 s]");
}
