#include "milcheck/harness.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "milcheck/errors.hpp"

#ifndef MILCHECK_VERSION
#define MILCHECK_VERSION "dev"
#endif

namespace milcheck {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr OracleKind kOracles[] = {OracleKind::Mil, OracleKind::MilHard,
                                   OracleKind::PoisonCheat, OracleKind::FrequencyCheat};

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

// Decision boundary used for the accuracy columns.
double accuracy_threshold(const ModelSpec& model, const ConceptRule& rule) {
  if (model.trainable()) return 0.5;
  switch (std::get<OracleKind>(model.kind)) {
    case OracleKind::Mil:
      return std::nextafter(0.0, 1.0);
    case OracleKind::FrequencyCheat:
      return std::accumulate(rule.thresholds.begin(), rule.thresholds.end(), 0.0);
    default:
      return 0.5;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

ordered_json train_config_json(const TrainConfig& t) {
  ordered_json j;
  j["epochs"] = t.epochs;
  j["batch_bags"] = t.batch_bags;
  j["learning_rate"] = t.learning_rate;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["epsilon"] = t.epsilon;
  j["seed"] = t.seed;
  j["shape"] = {{"input_dim", t.shape.input_dim},
                {"hidden", t.shape.hidden},
                {"attention", t.shape.attention},
                {"activation", std::string(nn::to_string(t.shape.activation))}};
  return j;
}

void check_known_ids(const ScoreTable& scores, const LabelMap& labels, const fs::path& file) {
  for (const auto& [id, s] : scores) {
    if (!labels.contains(id)) {
      throw IntegrityError("bag_id " + std::to_string(id) + " in '" + file.string() +
                           "' is not part of this split");
    }
  }
}

std::string_view mark(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Pass:
      return "✓";
    case VerdictStatus::Fail:
      return "✗";
    case VerdictStatus::Degenerate:
      return "-";
  }
  return "?";
}

}  // namespace

std::string_view to_string(OracleKind kind) noexcept {
  switch (kind) {
    case OracleKind::Mil:
      return "oracle-mil";
    case OracleKind::MilHard:
      return "oracle-mil-hard";
    case OracleKind::PoisonCheat:
      return "oracle-poison-cheat";
    case OracleKind::FrequencyCheat:
      return "oracle-frequency-cheat";
  }
  return "unknown";
}

std::string ModelSpec::name() const {
  return std::visit([](auto k) { return std::string(to_string(k)); }, kind);
}

std::vector<std::string> model_names() {
  std::vector<std::string> names;
  for (auto k : all_model_kinds()) names.emplace_back(to_string(k));
  for (auto k : kOracles) names.emplace_back(to_string(k));
  return names;
}

ModelSpec parse_model_spec(std::string_view text) {
  for (auto k : all_model_kinds()) {
    if (to_string(k) == text) return ModelSpec{k};
  }
  for (auto k : kOracles) {
    if (to_string(k) == text) return ModelSpec{k};
  }
  std::string valid;
  for (const auto& n : model_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UsageError("unknown model '" + std::string(text) + "'; valid models: " + valid);
}

ScoreTable oracle_scores(OracleKind kind, const ConceptRule& rule, std::span<const Bag> bags) {
  ScoreTable t;
  for (const auto& b : bags) {
    double s = 0.0;
    switch (kind) {
      case OracleKind::Mil:
        s = oracle_mil_margin_score(rule, b);
        break;
      case OracleKind::MilHard:
        s = oracle_mil_score(rule, b);
        break;
      case OracleKind::PoisonCheat:
        s = oracle_poison_cheat_score(rule, b);
        break;
      case OracleKind::FrequencyCheat:
        s = oracle_frequency_cheat_score(rule, b);
        break;
    }
    t.insert(b.bag_id(), s);
  }
  return t;
}

std::uint64_t default_train_seed(std::uint64_t data_seed) noexcept {
  return mix64(data_seed ^ 0x7472'6169'6e00'0000ULL);
}

GeneratorConfig RunOptions::generator_config() const {
  return GeneratorConfig::for_test(test, scale.n_train, scale.n_test, seed);
}

TrainConfig RunOptions::train_config() const {
  TrainConfig t = train;
  t.seed = train_seed.value_or(default_train_seed(seed));
  t.workers = workers;
  return t;
}

RunResult evaluate_dataset(const Dataset& dataset, const ModelSpec& model,
                           const RunOptions& options) {
  RunResult r;
  r.started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  r.test = dataset.config.test_id;
  r.model = model.name();
  r.config = dataset.config;
  r.digest = dataset_digest(dataset.train, dataset.test);

  const auto rule = ConceptRule::for_config(dataset.config);
  if (model.trainable()) {
    auto tc = options.train_config();
    tc.shape.input_dim = dataset.config.dim;
    r.trained = train(std::get<ModelKind>(model.kind), tc, dataset.train);
    r.train = tc;
    r.train_scores = score_bags(r.trained->params, dataset.train, options.workers);
    r.test_scores = score_bags(r.trained->params, dataset.test, options.workers);
  } else {
    const auto kind = std::get<OracleKind>(model.kind);
    r.train_scores = oracle_scores(kind, rule, dataset.train);
    r.test_scores = oracle_scores(kind, rule, dataset.test);
  }
  r.report = evaluate(r.train_scores, labels_of(dataset.train), r.test_scores,
                      labels_of(dataset.test), accuracy_threshold(model, rule));
  r.verdict = verdict(r.report, options.margin);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.finished = std::chrono::system_clock::now();
  return r;
}

RunResult run_test(const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = std::chrono::system_clock::now();
  const auto dataset = generate_dataset(options.generator_config(), options.workers);
  auto r = evaluate_dataset(dataset, options.model, options);
  r.started = started;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

RunResult cmd_verdict(const fs::path& dataset_dir, const fs::path& train_scores,
                      const fs::path& test_scores, double margin, std::string tag) {
  RunResult r;
  r.started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = load_dataset(dataset_dir);
  r.model = std::move(tag);
  r.digest = ds.digest;
  if (ds.config) {
    r.config = *ds.config;
    r.test = ds.config->test_id;
  }
  const auto train_labels = labels_of(ds.train);
  const auto test_labels = labels_of(ds.test);
  r.train_scores = read_scores_csv(train_scores);
  r.test_scores = read_scores_csv(test_scores);
  check_known_ids(r.train_scores, train_labels, train_scores);
  check_known_ids(r.test_scores, test_labels, test_scores);
  r.report = evaluate(r.train_scores, train_labels, r.test_scores, test_labels);
  r.verdict = verdict(r.report, margin);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.finished = std::chrono::system_clock::now();
  return r;
}

std::string report_json(const RunResult& r) {
  ordered_json j;
  j["test_id"] = to_string(r.test);
  j["model"] = r.model;
  j["train_acc"] = r.report.train_accuracy;
  j["train_auc"] = r.report.train_auc;
  j["test_acc"] = r.report.test_accuracy;
  j["test_auc"] = r.report.test_auc;
  j["verdict"] = to_string(r.verdict.status);
  j["margin"] = r.verdict.margin;
  return j.dump(2) + "\n";
}

std::string run_manifest_json(const RunResult& r) {
  ordered_json j;
  j["tool"] = "milcheck";
  j["tool_version"] = MILCHECK_VERSION;
  j["kind"] = "run";
  j["generator"] = nlohmann::ordered_json::parse(config_to_json(r.config));
  j["digest"] = {{"algorithm", "sha256"}, {"value", r.digest}};
  j["model"] = r.model;
  j["train"] = r.train ? train_config_json(*r.train) : ordered_json(nullptr);
  j["margin"] = r.verdict.margin;
  j["started"] = iso_utc(r.started);
  j["finished"] = iso_utc(r.finished);
  j["seconds"] = r.seconds;
  return j.dump(2) + "\n";
}

void write_run(const fs::path& dir, const RunResult& r) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  write_text(dir / "report.json", report_json(r));
  write_text(dir / "report.txt", render_results_table(std::span(&r, 1)));
  write_text(dir / "manifest.json", run_manifest_json(r));
  write_scores_csv(dir / "scores_train.csv", r.train_scores);
  write_scores_csv(dir / "scores_test.csv", r.test_scores);
  if (r.trained) {
    std::ofstream out(dir / "model.ckpt", std::ios::binary | std::ios::trunc);
    save_checkpoint(out, r.trained->params);
  }
}

std::string render_results_table(std::span<const RunResult> results) {
  std::size_t w = 9;
  for (const auto& r : results) w = std::max(w, r.model.size());
  std::ostringstream os;
  const auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(n, s.size()), ' ');
    return s;
  };
  os << pad("", w) << "  " << pad("Training", 15) << "  " << pad("Testing", 15) << "\n";
  os << pad("Algorithm", w) << "  Acc.    AUC      Acc.    AUC      Verdict\n";
  os << std::string(w + 51, '-') << "\n";
  for (const auto& r : results) {
    os << pad(r.model, w) << "  " << fixed3(r.report.train_accuracy) << "   "
       << fixed3(r.report.train_auc) << "    " << fixed3(r.report.test_accuracy) << "   "
       << fixed3(r.report.test_auc) << "    " << to_string(r.verdict.status) << "\n";
  }
  return os.str();
}

bool SuiteResult::any_fail() const noexcept {
  for (const auto& row : rows) {
    if (row.result.verdict.status == VerdictStatus::Fail) return true;
  }
  return false;
}

SuiteResult run_suite(const RunOptions& options) {
  SuiteResult s;
  s.model = options.model.name();
  for (auto t : all_tests()) {
    RunOptions o = options;
    o.test = t;
    s.rows.push_back({t, run_test(o)});
  }
  return s;
}

SuiteResult run_suite_bundle(const fs::path& bundle, double margin, std::string tag) {
  if (!fs::is_directory(bundle)) {
    throw std::runtime_error("'" + bundle.string() + "' is not a directory");
  }
  SuiteResult s;
  s.model = tag;
  for (auto t : all_tests()) {
    const auto dir = bundle / std::string(to_string(t));
    if (!fs::is_directory(dir)) continue;
    auto r = cmd_verdict(dir, dir / "scores_train.csv", dir / "scores_test.csv", margin, tag);
    r.test = t;
    s.rows.push_back({t, std::move(r)});
  }
  if (s.rows.empty()) {
    throw ValidationError("bundle '" + bundle.string() + "' holds no test directories");
  }
  return s;
}

std::string render_suite(const SuiteResult& suite) {
  std::ostringstream os;
  os << "Model: " << suite.model << "\n\n";
  os << "                 Test               Train AUC  Test AUC  Verdict     \n";
  os << std::string(70, '-') << "\n";
  for (const auto& row : suite.rows) {
    const bool standard = row.test == TestId::Standard;
    std::string group = standard ? "Standard Test" : "Threshold Tests";
    std::string test(to_string(row.test));
    std::string v(to_string(row.result.verdict.status));
    group.resize(17, ' ');
    test.resize(19, ' ');
    v.resize(12, ' ');
    os << group << test << fixed3(row.result.report.train_auc) << "      "
       << fixed3(row.result.report.test_auc) << "     " << v << mark(row.result.verdict.status)
       << "\n";
  }
  std::vector<RunResult> results;
  for (const auto& row : suite.rows) {
    results.push_back(row.result);
    results.back().model = std::string(to_string(row.test));
  }
  os << "\n" << render_results_table(results);
  return os.str();
}

int exit_code(std::span<const Verdict> verdicts) noexcept {
  for (const auto& v : verdicts) {
    if (v.status == VerdictStatus::Fail) return 1;
  }
  return 0;
}

int exit_code(const SuiteResult& suite) noexcept { return suite.any_fail() ? 1 : 0; }

}  // namespace milcheck
