#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "milcheck/concept_oracle.hpp"
#include "milcheck/dataset_io.hpp"
#include "milcheck/metrics.hpp"
#include "milcheck/milgen.hpp"
#include "milcheck/refmodels.hpp"

namespace milcheck {

/// Closed-form scorers built from the generating concept rule.
///  - Mil: graded margin of the threshold rule (see oracle_mil_margin_score).
///  - MilHard: the 0/1 rule itself.
///  - PoisonCheat: 1 when no instance falls in the poison region.
///  - FrequencyCheat: total concept count, ignoring thresholds.
enum class OracleKind { Mil, MilHard, PoisonCheat, FrequencyCheat };

std::string_view to_string(OracleKind kind) noexcept;

/// A trainable reference model or an oracle.
struct ModelSpec {
  std::variant<ModelKind, OracleKind> kind = ModelKind::Witness;

  bool trainable() const noexcept { return std::holds_alternative<ModelKind>(kind); }
  std::string name() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Accepts every reference model name plus "oracle-mil", "oracle-mil-hard",
/// "oracle-poison-cheat" and "oracle-frequency-cheat". Throws UsageError
/// listing the valid names otherwise.
ModelSpec parse_model_spec(std::string_view text);
std::vector<std::string> model_names();

ScoreTable oracle_scores(OracleKind kind, const ConceptRule& rule, std::span<const Bag> bags);

struct Scale {
  int n_train = 20000;
  int n_test = 4000;
};

inline constexpr Scale kDeskScale{20000, 4000};
inline constexpr Scale kFullScale{100000, 10000};

/// Training seed used when none is given: independent of the data streams
/// keyed by the same root seed.
std::uint64_t default_train_seed(std::uint64_t data_seed) noexcept;

struct RunOptions {
  TestId test = TestId::Standard;
  ModelSpec model{};
  Scale scale = kDeskScale;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> train_seed;  // default_train_seed(seed) when unset
  double margin = kDefaultMargin;
  TrainConfig train{};  // seed field is overwritten
  unsigned workers = 1;

  GeneratorConfig generator_config() const;
  TrainConfig train_config() const;
};

struct RunResult {
  TestId test = TestId::Standard;
  std::string model;  // model name or external tag
  GeneratorConfig config{};
  std::string digest;
  std::optional<TrainConfig> train;
  std::optional<TrainResult> trained;
  ScoreTable train_scores;
  ScoreTable test_scores;
  EvalReport report;
  Verdict verdict;
  double seconds = 0.0;
  std::chrono::system_clock::time_point started{};
  std::chrono::system_clock::time_point finished{};
};

/// Scores both splits of `dataset` and computes metrics and verdict.
RunResult evaluate_dataset(const Dataset& dataset, const ModelSpec& model,
                           const RunOptions& options);

/// generate -> train (or build the oracle) -> score -> metrics -> verdict.
RunResult run_test(const RunOptions& options);

/// External-model entry point: joins two score CSVs to the labels of a
/// dataset directory. Scores for ids absent from the dataset raise
/// IntegrityError, as do dataset bags without a score.
RunResult cmd_verdict(const std::filesystem::path& dataset_dir,
                      const std::filesystem::path& train_scores,
                      const std::filesystem::path& test_scores,
                      double margin = kDefaultMargin, std::string tag = "external");

/// report.json: {test_id, model, train_acc, train_auc, test_acc, test_auc,
/// verdict, margin}.
std::string report_json(const RunResult& result);

/// Run manifest: tool version, generator config, digest, model, training
/// config and timestamps.
std::string run_manifest_json(const RunResult& result);

/// Writes report.json, report.txt, manifest.json and the two score CSVs.
void write_run(const std::filesystem::path& dir, const RunResult& result);

/// Plain-text table with columns Model, Training Acc., Training AUC,
/// Testing Acc., Testing AUC and Verdict.
std::string render_results_table(std::span<const RunResult> results);

struct SuiteRow {
  TestId test = TestId::Standard;
  RunResult result;
};

struct SuiteResult {
  std::string model;
  std::vector<SuiteRow> rows;

  bool any_fail() const noexcept;
};

/// All three tests with one model; options.test is ignored.
SuiteResult run_suite(const RunOptions& options);

/// A bundle directory holds one sub-directory per test id, each a dataset
/// directory with scores_train.csv and scores_test.csv beside it. Tests
/// without a sub-directory are skipped.
SuiteResult run_suite_bundle(const std::filesystem::path& bundle, double margin = kDefaultMargin,
                             std::string tag = "external");

/// Summary with Standard Test and Threshold Tests column groups and
/// check/cross marks, followed by the per-test metrics.
std::string render_suite(const SuiteResult& suite);

/// 0 when no verdict is Fail, 1 otherwise.
int exit_code(std::span<const Verdict> verdicts) noexcept;
int exit_code(const SuiteResult& suite) noexcept;

}  // namespace milcheck
