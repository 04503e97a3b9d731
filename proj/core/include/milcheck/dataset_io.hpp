#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "milcheck/metrics.hpp"
#include "milcheck/milgen.hpp"

// Wire formats shared with external models.
//
// train.jsonl / test.jsonl: one bag per line,
//   {"bag_id": 3, "split": "train", "label": -1, "instances": [[...16 reals], ...]}
// with "roles" appended only when requested and "label" omitted for blind
// test files. Reals use the shortest decimal that round-trips.
//
// scores CSV: header "bag_id,score", one row per bag.

namespace milcheck {

struct WriteOptions {
  bool emit_roles = false;
  bool include_label = true;
};

/// One parsed line; label is absent in blind files.
struct BagRecord {
  std::uint64_t bag_id = 0;
  Split split = Split::Train;
  std::optional<int> label;
  InstanceMatrix instances;
  std::vector<InstanceRole> roles;

  /// Throws ValidationError when the record has no label.
  Bag to_bag() const;
  Bag to_bag(int label_override) const;
};

std::string serialize_bag(const Bag& bag, const WriteOptions& opts = {});

/// Throws ParseError (with `line_no`) on malformed JSON or missing fields
/// and ValidationError on ragged instance rows.
BagRecord parse_bag_line(std::string_view line, std::size_t line_no = 0);

void write_jsonl(const std::filesystem::path& path, std::span<const Bag> bags,
                 const WriteOptions& opts = {});
/// All records of a file; every instance must share one dimension.
std::vector<BagRecord> read_jsonl(const std::filesystem::path& path);

/// Hex SHA-256 of the canonical serialization: every bag of train then test,
/// labels included, roles excluded, one line each.
std::string dataset_digest(std::span<const Bag> train, std::span<const Bag> test);

struct DatasetFiles {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> test_labels;  // blind mode only
};

struct GenerateOptions {
  bool emit_roles = false;
  bool blind = false;
};

/// Writes train.jsonl, test.jsonl and manifest.json (plus test_labels.csv in
/// blind mode) into `dir`, creating it if needed. Output depends only on the
/// dataset and options.
DatasetFiles write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                           const GenerateOptions& opts = {});

struct LoadedDataset {
  std::vector<Bag> train;
  std::vector<Bag> test;
  std::optional<GeneratorConfig> config;  // from manifest.json when present
  std::string digest;
};

/// Reads a directory written by write_dataset. Blind test files take their
/// labels from test_labels.csv.
LoadedDataset load_dataset(const std::filesystem::path& dir);

void write_scores_csv(const std::filesystem::path& path, const ScoreTable& scores);
/// Throws IntegrityError on a duplicate bag_id, ValidationError on a
/// non-finite score and ParseError on malformed rows.
ScoreTable read_scores_csv(const std::filesystem::path& path);

/// Generator config as JSON text, and back.
std::string config_to_json(const GeneratorConfig& cfg);
GeneratorConfig config_from_json(std::string_view text);

}  // namespace milcheck
