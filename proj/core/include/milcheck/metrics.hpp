#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "milcheck/milgen.hpp"

namespace milcheck {

/// bag_id -> finite score; higher means "more positive".
class ScoreTable {
 public:
  using Map = std::map<std::uint64_t, double>;

  ScoreTable() = default;

  /// Throws IntegrityError on a duplicate id, ValidationError on a
  /// non-finite score.
  void insert(std::uint64_t bag_id, double score);

  bool contains(std::uint64_t bag_id) const { return entries_.contains(bag_id); }
  double at(std::uint64_t bag_id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Map& entries() const noexcept { return entries_; }

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

 private:
  Map entries_;
};

using LabelMap = std::map<std::uint64_t, int>;

LabelMap labels_of(std::span<const Bag> bags);

/**
 * Mann-Whitney AUC: P(s+ > s-) + P(s+ == s-) / 2, from midranks of the
 * pooled scores. O(n log n).
 *
 * Throws IntegrityError naming the first labelled bag without a score and
 * UndefinedMetricError when only one class is present. Scores for unlabelled
 * bags are ignored.
 */
double auc(const ScoreTable& scores, const LabelMap& labels);

/// Fraction of labelled bags with (score >= threshold) == (label == +1).
double accuracy(const ScoreTable& scores, const LabelMap& labels, double threshold = 0.5);

struct SplitCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct EvalReport {
  double train_accuracy = 0.0;
  double train_auc = 0.5;
  double test_accuracy = 0.0;
  double test_auc = 0.5;
  SplitCounts train_counts;
  SplitCounts test_counts;
};

/// Accuracy uses `threshold` as the decision boundary on both splits.
EvalReport evaluate(const ScoreTable& train_scores, const LabelMap& train_labels,
                    const ScoreTable& test_scores, const LabelMap& test_labels,
                    double threshold = 0.5);

enum class VerdictStatus { Pass, Fail, Degenerate };

std::string_view to_string(VerdictStatus status) noexcept;

struct Verdict {
  VerdictStatus status = VerdictStatus::Degenerate;
  double margin = 0.1;
  double train_auc = 0.5;
  double test_auc = 0.5;
};

inline constexpr double kDefaultMargin = 0.1;

/// Fail: train >= 0.5+m and test <= 0.5-m. Pass: both >= 0.5+m.
/// Anything else is Degenerate.
Verdict verdict(const EvalReport& report, double margin = kDefaultMargin);

}  // namespace milcheck
