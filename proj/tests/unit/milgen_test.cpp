#include "milcheck/milgen.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "milcheck/concept_oracle.hpp"
#include "milcheck/errors.hpp"
#include "milcheck/metrics.hpp"

namespace milcheck {
namespace {

const InstanceRole kBg = InstanceRole::background();
const InstanceRole kPoison = InstanceRole::poison();
const InstanceRole kC1 = InstanceRole::concept_of(1);
const InstanceRole kC2 = InstanceRole::concept_of(2);

bool within(std::size_t v, int lo, int hi) {
  return static_cast<int>(v) >= lo && static_cast<int>(v) <= hi;
}

// Role bookkeeping per generator branch. Returns an empty string on success.
std::string check_roles(const Bag& bag, TestId test) {
  const bool train = bag.split() == Split::Train;
  const auto bg = bag.count_role(kBg);
  const auto poison = bag.count_role(kPoison);
  const auto c1 = bag.count_role(kC1);
  const auto c2 = bag.count_role(kC2);
  if (bg + poison + c1 + c2 != static_cast<std::size_t>(bag.size())) return "unknown role";
  if (!within(bg, 1, 10)) return "background count out of range";

  switch (test) {
    case TestId::Standard:
      if (c2 != 0) return "concept 2 in standard";
      if (bag.positive()) {
        if (!within(c1, 1, 4)) return "positive concept count";
        if (poison != (train ? 0u : 1u)) return "positive poison count";
      } else {
        if (c1 != 0) return "negative carries concept";
        if (poison != (train ? 1u : 0u)) return "negative poison count";
        if (train && !within(static_cast<std::size_t>(bag.size()), 2, 11)) return "negative size";
      }
      break;
    case TestId::ThresholdPoison:
      if (bag.positive()) {
        if (c1 != c2 || !within(c1, 1, 4)) return "positive concept pairs";
        if (poison != (train ? 0u : 1u)) return "positive poison count";
        if (train && !within(static_cast<std::size_t>(bag.size()), 3, 18)) return "positive size";
      } else {
        if (c1 + c2 != 1) return "negative must hold exactly one concept instance";
        if (poison != (train ? 1u : 0u)) return "negative poison count";
      }
      break;
    case TestId::FalseFrequency:
      if (poison != 0) return "poison in false-frequency";
      if (bag.positive()) {
        if (!within(c1, 1, 2) || !within(c2, 1, 2)) return "positive concept counts";
      } else {
        if (c1 != 0 && c2 != 0) return "negative mixes concepts";
        const auto t = c1 + c2;
        if (train ? !within(t, 1, 2) : !within(t, 35, 40)) return "negative concept count";
        if (!train && !within(static_cast<std::size_t>(bag.size()), 36, 50)) return "negative size";
      }
      break;
  }
  return {};
}

class RoleStructure : public ::testing::TestWithParam<TestId> {};

TEST_P(RoleStructure, HoldsOverTenThousandBags) {
  const auto cfg = GeneratorConfig::for_test(GetParam(), 5000, 5000, 1234);
  const auto ds = generate_dataset(cfg);
  ASSERT_EQ(ds.train.size() + ds.test.size(), 10000u);

  const auto rule = ConceptRule::for_config(cfg);
  int branches[2][2] = {};
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& bag : *split) {
      ASSERT_TRUE(bag.has_roles());
      const auto err = check_roles(bag, GetParam());
      ASSERT_TRUE(err.empty()) << err << " in bag " << bag.bag_id();
      ++branches[bag.split() == Split::Train][bag.positive()];

      // Role counts decide the label under the generating rule.
      std::vector<int> counts(static_cast<std::size_t>(rule.concept_count()), 0);
      for (const auto& r : bag.roles()) {
        if (r.kind == InstanceRole::Kind::Concept) ++counts[static_cast<std::size_t>(r.concept_id - 1)];
      }
      ASSERT_EQ(decide(rule, counts), bag.label()) << "bag " << bag.bag_id();
    }
  }
  for (auto& split : branches) {
    for (int n : split) EXPECT_GT(n, 2000);
  }
}

INSTANTIATE_TEST_SUITE_P(AllTests, RoleStructure, ::testing::ValuesIn(all_tests()),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           std::erase(s, '-');
                           return s;
                         });

// With variance 0.1 a coordinate leaves [-11, -9] with probability 0.001565,
// so (1 - 0.001565)^16 = 0.97525 of poison instances lie inside on every axis.
// Six standard deviations bound every coordinate.
TEST(StandardBag, NegativeTrainPoisonIsTight) {
  const auto cfg = GeneratorConfig::for_test(TestId::Standard, 10, 10, 1);
  const double six_sigma = 6.0 * std::sqrt(0.1);
  int inside = 0;
  const int n = 4000;
  for (std::uint64_t i = 0; i < n; ++i) {
    SeedStream s(77, i);
    const auto bag = generate_standard_bag(cfg, true, false, s, i);
    ASSERT_EQ(bag.count_role(kPoison), 1u);
    for (Eigen::Index r = 0; r < bag.size(); ++r) {
      if (bag.roles()[static_cast<std::size_t>(r)] != kPoison) continue;
      const auto x = bag.instance(r);
      ASSERT_GE(x.minCoeff(), -10.0 - six_sigma);
      ASSERT_LE(x.maxCoeff(), -10.0 + six_sigma);
      inside += x.minCoeff() >= -11.0 && x.maxCoeff() <= -9.0;
    }
  }
  EXPECT_NEAR(static_cast<double>(inside) / n, 0.97525, 0.015);
}

TEST(Generators, RejectMismatchedTest) {
  SeedStream s(0, 0);
  const auto std_cfg = GeneratorConfig::for_test(TestId::Standard, 10, 10, 0);
  const auto tp_cfg = GeneratorConfig::for_test(TestId::ThresholdPoison, 10, 10, 0);
  EXPECT_THROW(generate_threshold_poison_bag(std_cfg, true, true, s), UsageError);
  EXPECT_THROW(generate_false_frequency_bag(std_cfg, true, true, s), UsageError);
  EXPECT_THROW(generate_standard_bag(tp_cfg, true, true, s), UsageError);
}

TEST(TestIdNames, RoundTripAndUsageError) {
  for (auto t : all_tests()) EXPECT_EQ(parse_test_id(to_string(t)), t);
  try {
    parse_test_id("hopfield");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("threshold-poison"), std::string::npos);
  }
}

TEST(Roles, StringRoundTrip) {
  for (const auto& r : {kBg, kPoison, kC1, kC2, InstanceRole::concept_of(17)}) {
    EXPECT_EQ(parse_role(to_string(r)), r);
  }
  EXPECT_EQ(to_string(kC2), "concept:2");
}

TEST(Dataset, DeterministicAndWorkerInvariant) {
  for (auto t : all_tests()) {
    const auto cfg = GeneratorConfig::for_test(t, 100, 50, 42);
    const auto a = generate_dataset(cfg, 1);
    const auto b = generate_dataset(cfg, 1);
    const auto c = generate_dataset(cfg, 4);
    ASSERT_EQ(a.train, b.train);
    ASSERT_EQ(a.test, b.test);
    ASSERT_EQ(a.train, c.train);
    ASSERT_EQ(a.test, c.test);
    EXPECT_EQ(a.train.size(), 100u);
    EXPECT_EQ(a.test.size(), 50u);
    for (std::size_t i = 0; i < a.test.size(); ++i) {
      EXPECT_EQ(a.test[i].bag_id(), 100 + i);
      EXPECT_EQ(generate_indexed_bag(cfg, 100 + i), a.test[i]);
    }
    for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].bag_id(), i);
  }
}

TEST(Dataset, SeedChangesContent) {
  const auto a = generate_dataset(GeneratorConfig::for_test(TestId::Standard, 50, 50, 1));
  const auto b = generate_dataset(GeneratorConfig::for_test(TestId::Standard, 50, 50, 2));
  EXPECT_NE(a.train, b.train);
}

TEST(Dataset, PositiveFractionWithinFiveSigma) {
  const auto ds = generate_dataset(GeneratorConfig::for_test(TestId::Standard, 10000, 50, 42));
  const auto pos = std::count_if(ds.train.begin(), ds.train.end(),
                                 [](const Bag& b) { return b.positive(); });
  EXPECT_GE(pos, 4700);
  EXPECT_LE(pos, 5300);
}

TEST(Dataset, ValidationNamesField) {
  auto cfg = GeneratorConfig::for_test(TestId::Standard, 100, 50, 0);
  cfg.k_range = {3, 2};
  try {
    generate_dataset(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("k_range"), std::string::npos);
  }
  cfg = GeneratorConfig::for_test(TestId::Standard, 1, 50, 0);
  EXPECT_THROW(generate_dataset(cfg), ValidationError);
  cfg = GeneratorConfig::for_test(TestId::Standard, 100, 50, 0);
  cfg.positive_fraction = 1.0;
  EXPECT_THROW(generate_dataset(cfg), ValidationError);
}

TEST(BagType, InvariantsEnforced) {
  InstanceMatrix x(2, 3);
  x.setZero();
  EXPECT_THROW(Bag(0, 0, Split::Train, x), ValidationError);
  EXPECT_THROW(Bag(0, 1, Split::Train, InstanceMatrix(0, 3)), ValidationError);
  EXPECT_THROW(Bag(0, 1, Split::Train, x, {kBg}), ValidationError);
  x(1, 2) = std::nan("");
  EXPECT_THROW(Bag(0, 1, Split::Train, x), ValidationError);
}

}  // namespace
}  // namespace milcheck
