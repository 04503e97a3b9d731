#include "milcheck/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "milcheck/errors.hpp"

namespace milcheck {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("milcheck_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_csv(const fs::path& p, const std::vector<std::pair<std::uint64_t, double>>& rows) {
  std::ofstream out(p);
  out << "bag_id,score\n";
  for (const auto& [id, s] : rows) out << id << ',' << s << '\n';
}

RunOptions oracle_options(OracleKind kind, TestId test, int n = 600) {
  RunOptions o;
  o.test = test;
  o.model = ModelSpec{kind};
  o.scale = {n, n};
  o.seed = 42;
  return o;
}

TEST(ModelSpec, ParsesModelsAndOracles) {
  EXPECT_EQ(parse_model_spec("witness").name(), "witness");
  EXPECT_TRUE(parse_model_spec("attention-pool").trainable());
  EXPECT_FALSE(parse_model_spec("oracle-mil").trainable());
  for (const auto& n : model_names()) EXPECT_EQ(parse_model_spec(n).name(), n);
  try {
    parse_model_spec("mi-net");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("oracle-poison-cheat"), std::string::npos);
  }
}

TEST(Options, ScalesAndSeeds) {
  EXPECT_EQ(kFullScale.n_train, 100000);
  EXPECT_EQ(kFullScale.n_test, 10000);
  RunOptions o;
  EXPECT_EQ(o.scale.n_train, 20000);
  EXPECT_EQ(o.scale.n_test, 4000);
  EXPECT_EQ(o.train_config().seed, default_train_seed(42));
  EXPECT_NE(default_train_seed(42), 42u);
  o.train_seed = 7;
  EXPECT_EQ(o.train_config().seed, 7u);
}

TEST(Suite, OracleMilPassesAllThree) {
  RunOptions o = oracle_options(OracleKind::Mil, TestId::Standard, 2000);
  const auto s = run_suite(o);
  ASSERT_EQ(s.rows.size(), 3u);
  for (const auto& row : s.rows) {
    EXPECT_EQ(row.result.verdict.status, VerdictStatus::Pass) << to_string(row.test);
  }
  EXPECT_EQ(exit_code(s), 0);
  const auto text = render_suite(s);
  EXPECT_NE(text.find("Standard Test"), std::string::npos);
  EXPECT_NE(text.find("Threshold Tests"), std::string::npos);
  EXPECT_NE(text.find("✓"), std::string::npos);
}

TEST(Suite, PoisonCheatFailsBothPoisonedTests) {
  const auto s = run_suite(oracle_options(OracleKind::PoisonCheat, TestId::Standard));
  EXPECT_EQ(s.rows[0].result.verdict.status, VerdictStatus::Fail);
  EXPECT_EQ(s.rows[1].result.verdict.status, VerdictStatus::Fail);
  EXPECT_TRUE(s.any_fail());
  EXPECT_EQ(exit_code(s), 1);
  EXPECT_NE(render_suite(s).find("✗"), std::string::npos);
}

TEST(Run, FrequencyCheatInvertsOnFalseFrequency) {
  const auto r = run_test(oracle_options(OracleKind::FrequencyCheat, TestId::FalseFrequency));
  EXPECT_GE(r.report.train_auc, 0.7);
  EXPECT_LE(r.report.test_auc, 0.01);
  EXPECT_EQ(r.verdict.status, VerdictStatus::Fail);
}

TEST(Run, ReferenceModelIsBitIdenticalAcrossRunsAndWorkers) {
  RunOptions o;
  o.test = TestId::Standard;
  o.model = ModelSpec{ModelKind::AttentionPool};
  o.scale = {300, 100};
  o.train.epochs = 2;
  o.train.shape.hidden = 8;
  o.train.shape.attention = 4;
  const auto a = run_test(o);
  const auto b = run_test(o);
  o.workers = 3;
  const auto c = run_test(o);
  EXPECT_EQ(a.train_scores.entries(), b.train_scores.entries());
  EXPECT_EQ(a.test_scores.entries(), c.test_scores.entries());
  EXPECT_EQ(a.digest, c.digest);
  EXPECT_EQ(report_json(a), report_json(c));
}

class VerdictFromFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    cfg_ = GeneratorConfig::for_test(TestId::Standard, 300, 200, 5);
    ds_ = generate_dataset(cfg_);
    write_dataset(dir_ / "data", ds_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::pair<std::uint64_t, double>> rows(OracleKind kind, const std::vector<Bag>& bags) {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& [id, s] : oracle_scores(kind, ConceptRule::for_config(cfg_), bags)) {
      out.emplace_back(id, s);
    }
    return out;
  }

  fs::path dir_;
  GeneratorConfig cfg_;
  Dataset ds_;
};

TEST_F(VerdictFromFiles, PoisonCheatScoresFail) {
  write_csv(dir_ / "tr.csv", rows(OracleKind::PoisonCheat, ds_.train));
  write_csv(dir_ / "te.csv", rows(OracleKind::PoisonCheat, ds_.test));
  const auto r = cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv");
  EXPECT_EQ(r.verdict.status, VerdictStatus::Fail);
  EXPECT_EQ(r.test, TestId::Standard);
  EXPECT_EQ(r.digest, dataset_digest(ds_.train, ds_.test));

  const auto j = nlohmann::json::parse(report_json(r));
  for (const char* key : {"test_id", "model", "train_acc", "train_auc", "test_acc", "test_auc",
                          "verdict", "margin"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["verdict"], "Fail");
  EXPECT_EQ(j["test_id"], "standard");
  EXPECT_EQ(j["margin"], 0.1);
}

TEST_F(VerdictFromFiles, ConstantScoresAreDegenerate) {
  std::vector<std::pair<std::uint64_t, double>> tr, te;
  for (const auto& b : ds_.train) tr.emplace_back(b.bag_id(), 0.5);
  for (const auto& b : ds_.test) te.emplace_back(b.bag_id(), 0.5);
  write_csv(dir_ / "tr.csv", tr);
  write_csv(dir_ / "te.csv", te);
  const auto r = cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv");
  EXPECT_EQ(r.verdict.status, VerdictStatus::Degenerate);
  EXPECT_EQ(r.report.train_auc, 0.5);
}

TEST_F(VerdictFromFiles, RowOrderDoesNotMatter) {
  auto tr = rows(OracleKind::Mil, ds_.train);
  auto te = rows(OracleKind::Mil, ds_.test);
  write_csv(dir_ / "tr.csv", tr);
  write_csv(dir_ / "te.csv", te);
  const auto a = cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv");
  std::reverse(tr.begin(), tr.end());
  std::rotate(te.begin(), te.begin() + 17, te.end());
  write_csv(dir_ / "tr.csv", tr);
  write_csv(dir_ / "te.csv", te);
  const auto b = cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv");
  EXPECT_EQ(a.report.train_auc, b.report.train_auc);
  EXPECT_EQ(a.report.test_auc, b.report.test_auc);
  EXPECT_EQ(a.verdict.status, b.verdict.status);
}

TEST_F(VerdictFromFiles, MissingAndForeignIdsAreIntegrityErrors) {
  auto tr = rows(OracleKind::Mil, ds_.train);
  const auto te = rows(OracleKind::Mil, ds_.test);
  write_csv(dir_ / "te.csv", te);

  auto missing = tr;
  missing.erase(missing.begin() + 4);
  write_csv(dir_ / "tr.csv", missing);
  try {
    cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv");
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("bag_id 4"), std::string::npos);
  }

  auto foreign = tr;
  foreign.emplace_back(ds_.test.front().bag_id(), 0.3);
  write_csv(dir_ / "tr.csv", foreign);
  EXPECT_THROW(cmd_verdict(dir_ / "data", dir_ / "tr.csv", dir_ / "te.csv"), IntegrityError);
}

TEST_F(VerdictFromFiles, WriteRunProducesReportsAndManifest) {
  RunOptions o = oracle_options(OracleKind::Mil, TestId::Standard, 200);
  const auto r = run_test(o);
  write_run(dir_ / "run", r);
  for (const char* f : {"report.json", "report.txt", "manifest.json", "scores_train.csv",
                        "scores_test.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  std::ifstream in(dir_ / "run" / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m["digest"]["value"], r.digest);
  EXPECT_EQ(m["generator"]["n_train"], 200);
  EXPECT_TRUE(m.contains("started"));
  EXPECT_TRUE(m["train"].is_null());
  write_dataset(dir_ / "run_data", generate_dataset(o.generator_config()));
  const auto again = cmd_verdict(dir_ / "run_data", dir_ / "run" / "scores_train.csv",
                                 dir_ / "run" / "scores_test.csv");
  EXPECT_EQ(again.report.train_auc, r.report.train_auc);
  EXPECT_EQ(again.report.test_auc, r.report.test_auc);
  EXPECT_EQ(again.digest, r.digest);
}

TEST(Bundle, SuiteFromScoreFiles) {
  const auto dir = fresh_dir("bundle");
  for (auto t : {TestId::Standard, TestId::ThresholdPoison}) {
    const auto cfg = GeneratorConfig::for_test(t, 300, 300, 8);
    const auto ds = generate_dataset(cfg);
    const auto sub = dir / std::string(to_string(t));
    write_dataset(sub, ds);
    const auto rule = ConceptRule::for_config(cfg);
    write_scores_csv(sub / "scores_train.csv", oracle_scores(OracleKind::PoisonCheat, rule, ds.train));
    write_scores_csv(sub / "scores_test.csv", oracle_scores(OracleKind::PoisonCheat, rule, ds.test));
  }
  const auto s = run_suite_bundle(dir, kDefaultMargin, "cheat");
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_EQ(s.rows[1].test, TestId::ThresholdPoison);
  EXPECT_EQ(exit_code(s), 1);
  EXPECT_NE(render_suite(s).find("cheat"), std::string::npos);
  fs::remove_all(dir);
  EXPECT_THROW(run_suite_bundle(fresh_dir("empty_bundle")), ValidationError);
}

TEST(Render, ResultsTableHasAccAndAucColumns) {
  const auto r = run_test(oracle_options(OracleKind::Mil, TestId::ThresholdPoison, 200));
  const auto text = render_results_table(std::span(&r, 1));
  for (const char* s : {"Training", "Testing", "Acc.", "AUC", "oracle-mil", "1.000", "Pass"}) {
    EXPECT_NE(text.find(s), std::string::npos) << s;
  }
}

TEST(ExitCode, FailOnlyTriggersNonZero) {
  std::vector<Verdict> v(2);
  v[0].status = VerdictStatus::Pass;
  v[1].status = VerdictStatus::Degenerate;
  EXPECT_EQ(exit_code(v), 0);
  v[1].status = VerdictStatus::Fail;
  EXPECT_EQ(exit_code(v), 1);
}

}  // namespace
}  // namespace milcheck
