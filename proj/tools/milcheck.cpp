// milcheck: generate MIL conformance datasets, run reference models and
// oracles, and score external models from CSV files.
//
// Exit status: 0 when no verdict is Fail, 1 when any verdict is Fail,
// 2 on usage or runtime errors.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "milcheck/dataset_io.hpp"
#include "milcheck/errors.hpp"
#include "milcheck/harness.hpp"

namespace fs = std::filesystem;
using namespace milcheck;

namespace {

constexpr int kErrorExit = 2;

struct ScaleFlags {
  int train_bags = kDeskScale.n_train;
  int test_bags = kDeskScale.n_test;
  bool full_scale = false;
  CLI::Option* train_opt = nullptr;
  CLI::Option* test_opt = nullptr;

  void attach(CLI::App* app) {
    train_opt = app->add_option("--train-bags", train_bags, "Training bags")->check(CLI::PositiveNumber);
    test_opt = app->add_option("--test-bags", test_bags, "Test bags")->check(CLI::PositiveNumber);
    app->add_flag("--full-scale,--paper-scale", full_scale, "Use 100000 training and 10000 test bags");
  }

  // Explicit bag counts win over --full-scale.
  Scale resolve() const {
    Scale s{train_bags, test_bags};
    if (full_scale) {
      if (train_opt->count() == 0) s.n_train = kFullScale.n_train;
      if (test_opt->count() == 0) s.n_test = kFullScale.n_test;
    }
    return s;
  }
};

struct TrainFlags {
  int epochs = 20;
  int batch = 32;
  double lr = 1e-3;
  int hidden = 64;
  int attention = 32;
  std::string activation = "tanh";
  std::optional<std::uint64_t> train_seed;

  void attach(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "Bags per mini-batch")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    app->add_option("--hidden", hidden, "Hidden width")->check(CLI::PositiveNumber);
    app->add_option("--attention", attention, "Attention width")->check(CLI::PositiveNumber);
    app->add_option("--activation", activation, "Hidden activation")
        ->check(CLI::IsMember({"tanh", "relu"}));
    app->add_option("--train-seed", train_seed,
                    "Training seed (default: derived from --seed)");
  }

  TrainConfig config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_bags = batch;
    t.learning_rate = lr;
    t.shape.hidden = hidden;
    t.shape.attention = attention;
    t.shape.activation = nn::parse_activation(activation);
    return t;
  }
};

int print_verdict(const RunResult& r, const std::optional<fs::path>& out) {
  std::cout << "test: " << to_string(r.test) << "\n\n" << render_results_table(std::span(&r, 1));
  std::cout << "\nverdict: " << to_string(r.verdict.status) << " (margin " << r.verdict.margin
            << ", " << r.seconds << " s)\n";
  if (out) {
    write_run(*out, r);
    std::cout << "wrote " << out->string() << "\n";
  }
  return exit_code(std::span(&r.verdict, 1));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIL algorithmic unit tests: datasets, reference models and verdicts"};
  app.set_version_flag("--version", std::string(MILCHECK_VERSION));
  app.require_subcommand(1);

  std::string test_name = "standard";
  std::string model_name = "witness";
  std::uint64_t seed = 42;
  double margin = kDefaultMargin;
  unsigned workers = 1;
  std::string out;

  // generate
  auto* gen = app.add_subcommand("generate", "Write train.jsonl, test.jsonl and manifest.json");
  ScaleFlags gen_scale;
  bool emit_roles = false;
  bool blind = false;
  gen->add_option("--test", test_name, "standard | threshold-poison | false-frequency");
  gen_scale.attach(gen);
  gen->add_option("--seed", seed, "Root seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_flag("--emit-roles", emit_roles, "Add per-instance generation roles");
  gen->add_flag("--blind", blind, "Strip test labels into test_labels.csv");
  gen->add_option("--workers", workers, "Generator threads")->check(CLI::PositiveNumber);

  // run
  auto* run = app.add_subcommand("run", "Generate, train or build an oracle, score and judge");
  ScaleFlags run_scale;
  TrainFlags run_train;
  run->add_option("--test", test_name, "standard | threshold-poison | false-frequency");
  run->add_option("--model", model_name, "Reference model or oracle name");
  run_scale.attach(run);
  run->add_option("--seed", seed, "Root seed");
  run->add_option("--margin", margin, "Verdict margin around AUC 0.5")->check(CLI::Range(0.0, 0.5));
  run->add_option("--out", out, "Directory for report.json, report.txt and scores");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run_train.attach(run);

  // verdict
  auto* ver = app.add_subcommand("verdict", "Judge external score files against a dataset");
  std::string data_dir, train_scores, test_scores, tag = "external";
  ver->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ver->add_option("--train-scores", train_scores, "CSV with header bag_id,score")
      ->required()
      ->check(CLI::ExistingFile);
  ver->add_option("--test-scores", test_scores, "CSV with header bag_id,score")
      ->required()
      ->check(CLI::ExistingFile);
  ver->add_option("--margin", margin, "Verdict margin around AUC 0.5")->check(CLI::Range(0.0, 0.5));
  ver->add_option("--model", tag, "Name recorded in the report");
  ver->add_option("--out", out, "Directory for report.json and report.txt");

  // suite
  auto* suite = app.add_subcommand("suite", "All three tests for one model or a scores bundle");
  ScaleFlags suite_scale;
  TrainFlags suite_train;
  std::string bundle;
  auto* suite_model =
      suite->add_option("--model", model_name, "Reference model or oracle name");
  suite->add_option("--bundle", bundle,
                    "Directory with one dataset-plus-scores sub-directory per test")
      ->excludes(suite_model)
      ->check(CLI::ExistingDirectory);
  suite_scale.attach(suite);
  suite->add_option("--seed", seed, "Root seed");
  suite->add_option("--margin", margin, "Verdict margin around AUC 0.5")->check(CLI::Range(0.0, 0.5));
  suite->add_option("--out", out, "Directory for per-test reports");
  suite->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  suite_train.attach(suite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kErrorExit;
  }

  const std::optional<fs::path> out_dir = out.empty() ? std::nullopt : std::optional<fs::path>(out);
  try {
    if (gen->parsed()) {
      const auto scale = gen_scale.resolve();
      const auto cfg =
          GeneratorConfig::for_test(parse_test_id(test_name), scale.n_train, scale.n_test, seed);
      const auto ds = generate_dataset(cfg, workers);
      const auto files = write_dataset(*out_dir, ds, {emit_roles, blind});
      std::cout << "wrote " << files.train.string() << " (" << ds.train.size() << " bags)\n"
                << "wrote " << files.test.string() << " (" << ds.test.size() << " bags)\n"
                << "digest " << dataset_digest(ds.train, ds.test) << "\n";
      return 0;
    }
    if (run->parsed()) {
      RunOptions o;
      o.test = parse_test_id(test_name);
      o.model = parse_model_spec(model_name);
      o.scale = run_scale.resolve();
      o.seed = seed;
      o.train_seed = run_train.train_seed;
      o.margin = margin;
      o.train = run_train.config();
      o.workers = workers;
      return print_verdict(run_test(o), out_dir);
    }
    if (ver->parsed()) {
      return print_verdict(cmd_verdict(data_dir, train_scores, test_scores, margin, tag), out_dir);
    }
    if (suite->parsed()) {
      SuiteResult s;
      if (!bundle.empty()) {
        s = run_suite_bundle(bundle, margin);
      } else {
        RunOptions o;
        o.model = parse_model_spec(model_name);
        o.scale = suite_scale.resolve();
        o.seed = seed;
        o.train_seed = suite_train.train_seed;
        o.margin = margin;
        o.train = suite_train.config();
        o.workers = workers;
        s = run_suite(o);
      }
      std::cout << render_suite(s);
      if (out_dir) {
        for (const auto& row : s.rows) write_run(*out_dir / std::string(to_string(row.test)), row.result);
        std::cout << "wrote " << out_dir->string() << "\n";
      }
      return exit_code(s);
    }
  } catch (const std::exception& e) {
    std::cerr << "milcheck: " << e.what() << "\n";
    return kErrorExit;
  }
  return kErrorExit;
}
