#include "milcheck/concept_oracle.hpp"

#include <gtest/gtest.h>

#include "milcheck/errors.hpp"
#include "milcheck/metrics.hpp"

namespace milcheck {
namespace {

constexpr int kDim = 16;

GeneratorConfig cfg_for(TestId t) { return GeneratorConfig::for_test(t, 100, 100, 0); }

Eigen::RowVectorXd constant(double v) { return Eigen::RowVectorXd::Constant(kDim, v); }

Bag bag_of(const std::vector<Eigen::RowVectorXd>& rows, int label = 1) {
  InstanceMatrix m(static_cast<Eigen::Index>(rows.size()), kDim);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
  return Bag(0, label, Split::Train, m);
}

// Fraction of N(mean, var I) draws that h assigns to concept 1.
double concept_rate(const ConceptRule& rule, double mean, double var, int n) {
  SeedStream s(2024, static_cast<std::uint64_t>(mean * 100 + var));
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVectorXd x = s.next_gaussian_vector(mean, var, kDim).transpose();
    hits += assign_concept(rule, x) == 1 ? 1 : 0;
  }
  return hits / static_cast<double>(n);
}

TEST(AssignConcept, RegionMeans) {
  const auto tp = ConceptRule::threshold_poison(cfg_for(TestId::ThresholdPoison));
  EXPECT_EQ(assign_concept(tp, constant(3.0)), 2);
  EXPECT_EQ(assign_concept(tp, constant(2.0)), 1);
  EXPECT_EQ(assign_concept(tp, constant(0.0)), std::nullopt);
  const auto st = ConceptRule::standard(cfg_for(TestId::Standard));
  EXPECT_EQ(assign_concept(st, constant(-10.0)), std::nullopt);
  EXPECT_EQ(assign_concept(st, constant(1.0)), 1);
  const auto ff = ConceptRule::false_frequency(cfg_for(TestId::FalseFrequency));
  EXPECT_EQ(assign_concept(ff, constant(-2.0)), 1);
  EXPECT_EQ(assign_concept(ff, constant(2.0)), 2);
}

TEST(AssignConcept, DimensionMismatchIsArgumentError) {
  const auto st = ConceptRule::standard(cfg_for(TestId::Standard));
  EXPECT_THROW(assign_concept(st, Eigen::RowVectorXd::Zero(3)), ArgumentError);
}

TEST(AssignConcept, TiesGoToNullThenLowestConcept) {
  ConceptRule rule;
  rule.dim = 1;
  rule.regions = {{0.0, 1.0, 2}, {0.0, 1.0, 1}};
  rule.thresholds = {1, 1};
  rule.background = {};
  EXPECT_EQ(assign_concept(rule, Eigen::RowVectorXd::Constant(1, 0.5)), 1);
  rule.background = {{0.0, 1.0, false}};
  EXPECT_EQ(assign_concept(rule, Eigen::RowVectorXd::Constant(1, 0.5)), std::nullopt);
}

// Monte-Carlo rates of h under the Standard rule, frozen from an independent
// numpy simulation with 4e5 draws each (standard errors <= 4.2e-4). In 16
// dimensions the N(0,I), N(0,3I) and N(1,I) regions overlap, so the rates are
// well below the near-certain assignment of separated regions.
TEST(AssignConcept, StandardRuleMonteCarloRates) {
  const auto st = ConceptRule::standard(cfg_for(TestId::Standard));
  constexpr int n = 100000;
  EXPECT_NEAR(concept_rate(st, 1.0, 1.0, n), 0.979085, 0.005);
  EXPECT_NEAR(concept_rate(st, 0.0, 3.0, n), 0.9250775, 0.005);
  EXPECT_NEAR(concept_rate(st, 0.0, 1.0, n), 0.067875, 0.005);
}

TEST(AssignConcept, SeparatedRegionsAreExactInPractice) {
  const auto tp = ConceptRule::threshold_poison(cfg_for(TestId::ThresholdPoison));
  EXPECT_EQ(concept_rate(tp, 2.0, 0.1, 20000), 1.0);
  EXPECT_EQ(concept_rate(tp, 3.0, 0.1, 20000), 0.0);
  EXPECT_EQ(concept_rate(tp, -10.0, 0.1, 20000), 0.0);
}

TEST(Decide, ConjunctionExamples) {
  ConceptRule one;
  one.regions = {{1.0, 1.0, 1}};
  one.thresholds = {1};
  EXPECT_EQ(decide(one, std::vector<int>{0}), -1);
  EXPECT_EQ(decide(one, std::vector<int>{1}), 1);

  ConceptRule two;
  two.regions = {{1.0, 1.0, 1}, {2.0, 1.0, 2}};
  two.thresholds = {1, 1};
  EXPECT_EQ(decide(two, std::vector<int>{3, 0}), -1);
  EXPECT_EQ(decide(two, std::vector<int>{1, 1}), 1);
  EXPECT_THROW(decide(two, std::vector<int>{1}), ArgumentError);

  ConceptRule none;
  EXPECT_TRUE(count_concepts(none, bag_of({constant(0.0)})).empty());
  EXPECT_EQ(decide(none, std::vector<int>{}), 1);
}

TEST(Decide, MonotoneInCounts) {
  ConceptRule rule;
  rule.regions = {{0, 1, 1}, {1, 1, 2}, {2, 1, 3}};
  rule.thresholds = {2, 0, 1};
  SeedStream s(1, 1);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<int> c(3);
    for (auto& v : c) v = static_cast<int>(s.next_uniform_int(0, 4));
    const int before = decide(rule, c);
    c[static_cast<std::size_t>(s.next_uniform_int(0, 2))] += 1;
    if (before == 1) ASSERT_EQ(decide(rule, c), 1);
  }
}

TEST(Rule, ValidateRejectsBadRules) {
  ConceptRule r;
  r.regions = {{0.0, 0.0, 1}};
  r.thresholds = {1};
  EXPECT_THROW(r.validate(), ArgumentError);
  r.regions = {{0.0, 1.0, 3}};
  EXPECT_THROW(r.validate(), ArgumentError);
  r.regions = {{0.0, 1.0, 1}};
  r.thresholds = {-1};
  EXPECT_THROW(r.validate(), ArgumentError);
}

TEST(Scores, HandBuiltBags) {
  const auto st = ConceptRule::standard(cfg_for(TestId::Standard));
  const auto poisoned = bag_of({constant(-10.0), constant(0.1)});
  const auto clean = bag_of({constant(0.1)});
  EXPECT_EQ(oracle_poison_cheat_score(st, poisoned), 0.0);
  EXPECT_EQ(oracle_poison_cheat_score(st, clean), 1.0);

  const auto ff = ConceptRule::false_frequency(cfg_for(TestId::FalseFrequency));
  EXPECT_EQ(oracle_frequency_cheat_score(ff, clean), 0.0);
  EXPECT_EQ(oracle_frequency_cheat_score(ff, bag_of({constant(-2.0), constant(2.0), constant(2.0)})),
            3.0);
  EXPECT_EQ(oracle_mil_score(ff, bag_of({constant(2.0), constant(2.0)})), 0.0);
  EXPECT_EQ(oracle_mil_score(ff, bag_of({constant(-2.0), constant(2.0)})), 1.0);
  EXPECT_EQ(oracle_mil_soft_score(ff, bag_of({constant(-2.0), constant(2.0)})), 1.0);
  EXPECT_GT(oracle_mil_margin_score(ff, bag_of({constant(-2.0), constant(2.0)})), 0.0);
  EXPECT_LT(oracle_mil_margin_score(ff, bag_of({constant(2.0), constant(2.0)})), 0.0);
}

class OracleOverBags : public ::testing::TestWithParam<TestId> {};

// The sign of the graded score reproduces the hard rule, adding an instance
// never lowers it, and roles are never consulted.
TEST_P(OracleOverBags, MarginAgreesWithHardRuleAndIsMonotone) {
  const auto cfg = GeneratorConfig::for_test(GetParam(), 1500, 1500, 5);
  const auto ds = generate_dataset(cfg);
  const auto rule = ConceptRule::for_config(cfg);
  for (std::size_t i = 0; i + 1 < ds.train.size(); i += 3) {
    const auto& bag = ds.train[i];
    const double margin = oracle_mil_margin_score(rule, bag);
    ASSERT_EQ(margin > 0.0, oracle_mil_score(rule, bag) == 1.0) << "bag " << i;
    ASSERT_EQ(oracle_mil_score(rule, bag), oracle_mil_soft_score(rule, bag));
    ASSERT_EQ(oracle_mil_score(rule, bag), oracle_mil_score(rule, bag.without_roles()));

    const auto& donor = ds.train[i + 1];
    InstanceMatrix grown(bag.size() + 1, bag.dim());
    grown.topRows(bag.size()) = bag.instances();
    grown.row(bag.size()) = donor.instance(0);
    ASSERT_GE(oracle_mil_margin_score(rule, bag.with_instances(grown)), margin);
  }
}

INSTANTIATE_TEST_SUITE_P(AllTests, OracleOverBags, ::testing::ValuesIn(all_tests()),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           std::erase(s, '-');
                           return s;
                         });

// Bag-level rates under the Standard rule. The frozen values follow from the
// per-instance rates above: a negative test bag holds b ~ U(1,10) background
// draws, each misread as concept 1 with probability 0.067875, so it scores 0
// with probability mean_b (1 - 0.067875)^b = 0.6933; a positive training bag
// is detected with probability 0.9913.
TEST(StandardOracle, BagLevelRates) {
  const auto cfg = GeneratorConfig::for_test(TestId::Standard, 10000, 10000, 42);
  const auto ds = generate_dataset(cfg);
  const auto rule = ConceptRule::for_config(cfg);
  int pos_train = 0, pos_hit = 0, neg_test = 0, neg_zero = 0;
  for (const auto& b : ds.train) {
    if (!b.positive()) continue;
    ++pos_train;
    pos_hit += oracle_mil_score(rule, b) == 1.0;
  }
  for (const auto& b : ds.test) {
    if (b.positive()) continue;
    ++neg_test;
    neg_zero += oracle_mil_score(rule, b) == 0.0;
  }
  EXPECT_NEAR(pos_hit / double(pos_train), 0.9913, 0.006);
  EXPECT_NEAR(neg_zero / double(neg_test), 0.6933, 0.03);
}

TEST(ThresholdOracle, BagLevelCounts) {
  const auto cfg = GeneratorConfig::for_test(TestId::ThresholdPoison, 10000, 50, 42);
  const auto ds = generate_dataset(cfg);
  const auto rule = ConceptRule::for_config(cfg);
  for (const auto& b : ds.train) {
    const auto counts = count_concepts(rule, b);
    ASSERT_EQ(counts[0], static_cast<int>(b.count_role(InstanceRole::concept_of(1))));
    ASSERT_EQ(counts[1], static_cast<int>(b.count_role(InstanceRole::concept_of(2))));
  }
}

TEST(FrequencyOracle, ScoreRanges) {
  const auto cfg = GeneratorConfig::for_test(TestId::FalseFrequency, 5000, 5000, 42);
  const auto ds = generate_dataset(cfg);
  const auto rule = ConceptRule::for_config(cfg);
  for (const auto& b : ds.train) {
    const double s = oracle_frequency_cheat_score(rule, b);
    if (b.positive()) {
      ASSERT_GE(s, 2.0);
      ASSERT_LE(s, 4.0);
    }
  }
  for (const auto& b : ds.test) {
    if (b.positive()) continue;
    const double s = oracle_frequency_cheat_score(rule, b);
    ASSERT_GE(s, 35.0);
    ASSERT_LE(s, 40.0);
  }
}

TEST(Certificates, CheatInversionAndSeparatedTestsAtTenThousandBags) {
  for (auto t : all_tests()) {
    const auto cfg = GeneratorConfig::for_test(t, 10000, 10000, 7);
    const auto ds = generate_dataset(cfg);
    const auto rule = ConceptRule::for_config(cfg);
    const auto tr = labels_of(ds.train);
    const auto te = labels_of(ds.test);
    const auto score = [&](auto fn, const std::vector<Bag>& bags) {
      ScoreTable s;
      for (const auto& b : bags) s.insert(b.bag_id(), fn(rule, b));
      return s;
    };
    if (t != TestId::Standard) {
      EXPECT_EQ(auc(score(oracle_mil_score, ds.train), tr), 1.0) << to_string(t);
      EXPECT_EQ(auc(score(oracle_mil_score, ds.test), te), 1.0) << to_string(t);
    }
    if (t == TestId::FalseFrequency) {
      EXPECT_GE(auc(score(oracle_frequency_cheat_score, ds.train), tr), 0.7);
      EXPECT_LE(auc(score(oracle_frequency_cheat_score, ds.test), te), 0.01);
    } else {
      EXPECT_GE(auc(score(oracle_poison_cheat_score, ds.train), tr), 0.99);
      EXPECT_LE(auc(score(oracle_poison_cheat_score, ds.test), te), 0.01);
    }
  }
}

}  // namespace
}  // namespace milcheck
