#include "milcheck/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "milcheck/errors.hpp"

#ifndef MILCHECK_VERSION
#define MILCHECK_VERSION "dev"
#endif

namespace milcheck {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read '" + path.string() + "'");
  }
  return in;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }

  void update(std::string_view bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
  }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 0xF]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }

IntRange range_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json gaussian_json(const GaussianParams& g) {
  return json{{"mean", g.mean}, {"variance", g.variance}};
}

GaussianParams gaussian_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("variance").get<double>()};
}

ordered_json config_json(const GeneratorConfig& cfg) {
  const auto& d = cfg.distributions;
  ordered_json j;
  j["test_id"] = to_string(cfg.test_id);
  j["dim"] = cfg.dim;
  j["n_train"] = cfg.n_train;
  j["n_test"] = cfg.n_test;
  j["positive_fraction"] = cfg.positive_fraction;
  j["root_seed"] = cfg.root_seed;
  j["k_range"] = range_json(cfg.k_range);
  j["b_range"] = range_json(cfg.b_range);
  j["neg_test_t_range"] = range_json(cfg.neg_test_t_range);
  j["small_t_range"] = range_json(cfg.small_t_range);
  j["distributions"] = ordered_json{
      {"background", gaussian_json(d.background)},
      {"poison", gaussian_json(d.poison)},
      {"standard_wide", gaussian_json(d.standard_wide)},
      {"standard_shifted", gaussian_json(d.standard_shifted)},
      {"threshold_first", gaussian_json(d.threshold_first)},
      {"threshold_second", gaussian_json(d.threshold_second)},
      {"frequency_first", gaussian_json(d.frequency_first)},
      {"frequency_second", gaussian_json(d.frequency_second)},
  };
  return j;
}

GeneratorConfig config_from(const json& j) {
  GeneratorConfig cfg;
  cfg.test_id = parse_test_id(j.at("test_id").get<std::string>());
  cfg.dim = j.at("dim").get<int>();
  cfg.n_train = j.at("n_train").get<int>();
  cfg.n_test = j.at("n_test").get<int>();
  cfg.positive_fraction = j.at("positive_fraction").get<double>();
  cfg.root_seed = j.at("root_seed").get<std::uint64_t>();
  cfg.k_range = range_from(j.at("k_range"));
  cfg.b_range = range_from(j.at("b_range"));
  cfg.neg_test_t_range = range_from(j.at("neg_test_t_range"));
  cfg.small_t_range = range_from(j.at("small_t_range"));
  const auto& d = j.at("distributions");
  auto& t = cfg.distributions;
  t.background = gaussian_from(d.at("background"));
  t.poison = gaussian_from(d.at("poison"));
  t.standard_wide = gaussian_from(d.at("standard_wide"));
  t.standard_shifted = gaussian_from(d.at("standard_shifted"));
  t.threshold_first = gaussian_from(d.at("threshold_first"));
  t.threshold_second = gaussian_from(d.at("threshold_second"));
  t.frequency_first = gaussian_from(d.at("frequency_first"));
  t.frequency_second = gaussian_from(d.at("frequency_second"));
  return cfg;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& token, const std::string& what, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("invalid " + what + " '" + token + "'", line_no);
  }
  return v;
}

double parse_score(const std::string& token, std::size_t line_no) {
  const std::string lowered = [&] {
    std::string s = token;
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }();
  // from_chars rejects these spellings, but they name non-finite values.
  for (const char* nf : {"nan", "-nan", "+nan", "inf", "-inf", "+inf", "infinity", "-infinity"}) {
    if (lowered == nf) {
      throw ValidationError("non-finite score '" + token + "' (line " +
                            std::to_string(line_no) + ")");
    }
  }
  return parse_number<double>(token, "score", line_no);
}

}  // namespace

Bag BagRecord::to_bag() const {
  if (!label) {
    throw ValidationError("bag " + std::to_string(bag_id) + " has no label");
  }
  return to_bag(*label);
}

Bag BagRecord::to_bag(int label_override) const {
  return Bag(bag_id, label_override, split, instances, roles);
}

std::string serialize_bag(const Bag& bag, const WriteOptions& opts) {
  ordered_json j;
  j["bag_id"] = bag.bag_id();
  j["split"] = to_string(bag.split());
  if (opts.include_label) j["label"] = bag.label();
  auto rows = json::array();
  for (Eigen::Index i = 0; i < bag.size(); ++i) {
    auto row = json::array();
    for (Eigen::Index k = 0; k < bag.dim(); ++k) row.push_back(bag.instances()(i, k));
    rows.push_back(std::move(row));
  }
  j["instances"] = std::move(rows);
  if (opts.emit_roles && bag.has_roles()) {
    auto roles = json::array();
    for (const auto& r : bag.roles()) roles.push_back(to_string(r));
    j["roles"] = std::move(roles);
  }
  return j.dump();
}

BagRecord parse_bag_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  BagRecord rec;
  try {
    rec.bag_id = j.at("bag_id").get<std::uint64_t>();
    const auto split = j.at("split").get<std::string>();
    if (split == "train") {
      rec.split = Split::Train;
    } else if (split == "test") {
      rec.split = Split::Test;
    } else {
      throw ParseError("unknown split '" + split + "'", line_no);
    }
    if (j.contains("label")) {
      const int label = j.at("label").get<int>();
      if (label != 1 && label != -1) throw ParseError("label must be -1 or 1", line_no);
      rec.label = label;
    }
    const auto& rows = j.at("instances");
    if (!rows.is_array() || rows.empty()) throw ParseError("instances must be a non-empty array", line_no);
    const auto dim = rows.at(0).size();
    if (dim == 0) throw ParseError("instance vectors must be non-empty", line_no);
    rec.instances.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (!row.is_array() || row.size() != dim) {
        throw ValidationError("ragged instance dimensions in bag " + std::to_string(rec.bag_id) +
                              " (line " + std::to_string(line_no) + ")");
      }
      for (std::size_t k = 0; k < dim; ++k) {
        rec.instances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            row[k].get<double>();
      }
    }
    if (j.contains("roles")) {
      for (const auto& r : j.at("roles")) rec.roles.push_back(parse_role(r.get<std::string>()));
      if (rec.roles.size() != rows.size()) throw ParseError("roles length differs from instances", line_no);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad bag record: ") + e.what(), line_no);
  }
  return rec;
}

void write_jsonl(const fs::path& path, std::span<const Bag> bags, const WriteOptions& opts) {
  auto out = open_out(path);
  for (const auto& b : bags) {
    out << serialize_bag(b, opts) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<BagRecord> read_jsonl(const fs::path& path) {
  auto in = open_in(path);
  std::vector<BagRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    records.push_back(parse_bag_line(line, line_no));
    if (records.back().instances.cols() != records.front().instances.cols()) {
      throw ValidationError("instance dimension changes at line " + std::to_string(line_no));
    }
  }
  if (records.empty()) {
    throw ValidationError("'" + path.string() + "' contains no bags");
  }
  return records;
}

std::string dataset_digest(std::span<const Bag> train, std::span<const Bag> test) {
  Sha256 sha;
  const WriteOptions canonical{false, true};
  for (auto split : {train, test}) {
    for (const auto& b : split) {
      sha.update(serialize_bag(b, canonical));
      sha.update("\n");
    }
  }
  return sha.hex();
}

DatasetFiles write_dataset(const fs::path& dir, const Dataset& dataset,
                           const GenerateOptions& opts) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  }
  DatasetFiles files{dir / "train.jsonl", dir / "test.jsonl", dir / "manifest.json", {}};
  write_jsonl(files.train, dataset.train, {opts.emit_roles, true});
  write_jsonl(files.test, dataset.test, {opts.emit_roles, !opts.blind});
  if (opts.blind) {
    files.test_labels = dir / "test_labels.csv";
    auto out = open_out(*files.test_labels);
    out << "bag_id,label\n";
    for (const auto& b : dataset.test) out << b.bag_id() << ',' << b.label() << '\n';
  }

  ordered_json m;
  m["tool"] = "milcheck";
  m["tool_version"] = MILCHECK_VERSION;
  m["kind"] = "dataset";
  m["generator"] = config_json(dataset.config);
  m["digest"] = {{"algorithm", "sha256"}, {"value", dataset_digest(dataset.train, dataset.test)}};
  m["emit_roles"] = opts.emit_roles;
  m["blind"] = opts.blind;
  auto out = open_out(files.manifest);
  out << m.dump(2) << '\n';
  return files;
}

LoadedDataset load_dataset(const fs::path& dir) {
  LoadedDataset ds;
  std::optional<LabelMap> blind_labels;
  if (fs::exists(dir / "test_labels.csv")) {
    auto in = open_in(dir / "test_labels.csv");
    LabelMap labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto row = trim(line);
      if (row.empty() || line_no == 1) continue;
      const auto comma = row.find(',');
      if (comma == std::string::npos) throw ParseError("expected bag_id,label", line_no);
      labels[parse_number<std::uint64_t>(row.substr(0, comma), "bag_id", line_no)] =
          parse_number<int>(trim(row.substr(comma + 1)), "label", line_no);
    }
    blind_labels = std::move(labels);
  }

  for (const auto& rec : read_jsonl(dir / "train.jsonl")) ds.train.push_back(rec.to_bag());
  for (const auto& rec : read_jsonl(dir / "test.jsonl")) {
    if (rec.label) {
      ds.test.push_back(rec.to_bag());
    } else if (blind_labels && blind_labels->contains(rec.bag_id)) {
      ds.test.push_back(rec.to_bag(blind_labels->at(rec.bag_id)));
    } else {
      throw ValidationError("test bag " + std::to_string(rec.bag_id) +
                            " has no label and no test_labels.csv entry");
    }
  }
  if (fs::exists(dir / "manifest.json")) {
    auto in = open_in(dir / "manifest.json");
    try {
      const auto m = json::parse(in);
      if (m.contains("generator")) ds.config = config_from(m.at("generator"));
    } catch (const json::exception& e) {
      throw ParseError(std::string("manifest.json: ") + e.what());
    }
  }
  ds.digest = dataset_digest(ds.train, ds.test);
  return ds;
}

void write_scores_csv(const fs::path& path, const ScoreTable& scores) {
  auto out = open_out(path);
  out << "bag_id,score\n";
  char buf[32];
  for (const auto& [id, s] : scores) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, s);
    out << id << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  }
}

ScoreTable read_scores_csv(const fs::path& path) {
  auto in = open_in(path);
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = trim(line);
    if (row.empty()) continue;
    if (!header) {
      if (row != "bag_id,score") {
        throw ParseError("expected header 'bag_id,score' in '" + path.string() + "'", line_no);
      }
      header = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string::npos) throw ParseError("expected bag_id,score", line_no);
    const auto id = parse_number<std::uint64_t>(trim(row.substr(0, comma)), "bag_id", line_no);
    const double score = parse_score(trim(row.substr(comma + 1)), line_no);
    try {
      table.insert(id, score);
    } catch (const IntegrityError&) {
      throw IntegrityError("duplicate bag_id " + std::to_string(id) + " in '" + path.string() +
                           "' (line " + std::to_string(line_no) + ")");
    }
  }
  if (!header) throw ParseError("missing header in '" + path.string() + "'");
  return table;
}

std::string config_to_json(const GeneratorConfig& cfg) { return config_json(cfg).dump(); }

GeneratorConfig config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
}

}  // namespace milcheck
