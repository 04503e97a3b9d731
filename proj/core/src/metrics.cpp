#include "milcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "milcheck/errors.hpp"

namespace milcheck {

namespace {

struct Labelled {
  double score;
  bool positive;
};

std::vector<Labelled> join(const ScoreTable& scores, const LabelMap& labels) {
  std::vector<Labelled> rows;
  rows.reserve(labels.size());
  for (const auto& [id, label] : labels) {
    const auto it = scores.entries().find(id);
    if (it == scores.entries().end()) {
      throw IntegrityError("no score for labelled bag_id " + std::to_string(id));
    }
    rows.push_back({it->second, label > 0});
  }
  return rows;
}

SplitCounts count_labels(const LabelMap& labels) {
  SplitCounts c;
  for (const auto& [id, label] : labels) {
    (label > 0 ? c.positive : c.negative) += 1;
  }
  return c;
}

}  // namespace

void ScoreTable::insert(std::uint64_t bag_id, double score) {
  if (!std::isfinite(score)) {
    throw ValidationError("non-finite score for bag_id " + std::to_string(bag_id));
  }
  if (!entries_.emplace(bag_id, score).second) {
    throw IntegrityError("duplicate bag_id " + std::to_string(bag_id));
  }
}

double ScoreTable::at(std::uint64_t bag_id) const {
  const auto it = entries_.find(bag_id);
  if (it == entries_.end()) {
    throw IntegrityError("no score for bag_id " + std::to_string(bag_id));
  }
  return it->second;
}

LabelMap labels_of(std::span<const Bag> bags) {
  LabelMap labels;
  for (const auto& b : bags) {
    if (!labels.emplace(b.bag_id(), b.label()).second) {
      throw IntegrityError("duplicate bag_id " + std::to_string(b.bag_id()));
    }
  }
  return labels;
}

double auc(const ScoreTable& scores, const LabelMap& labels) {
  auto rows = join(scores, labels);
  const auto n_pos = static_cast<double>(
      std::count_if(rows.begin(), rows.end(), [](const Labelled& r) { return r.positive; }));
  const double n_neg = static_cast<double>(rows.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw UndefinedMetricError("AUC undefined: labels contain a single class");
  }
  std::sort(rows.begin(), rows.end(),
            [](const Labelled& a, const Labelled& b) { return a.score < b.score; });

  // Sum of 1-based midranks over the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i + 1;
    while (j < rows.size() && rows[j].score == rows[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (rows[k].positive) rank_sum += midrank;
    }
    i = j;
  }
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double accuracy(const ScoreTable& scores, const LabelMap& labels, double threshold) {
  const auto rows = join(scores, labels);
  if (rows.empty()) {
    throw UndefinedMetricError("accuracy undefined: no labelled bags");
  }
  const auto correct = std::count_if(rows.begin(), rows.end(), [&](const Labelled& r) {
    return (r.score >= threshold) == r.positive;
  });
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

EvalReport evaluate(const ScoreTable& train_scores, const LabelMap& train_labels,
                    const ScoreTable& test_scores, const LabelMap& test_labels,
                    double threshold) {
  EvalReport r;
  r.train_auc = auc(train_scores, train_labels);
  r.train_accuracy = accuracy(train_scores, train_labels, threshold);
  r.test_auc = auc(test_scores, test_labels);
  r.test_accuracy = accuracy(test_scores, test_labels, threshold);
  r.train_counts = count_labels(train_labels);
  r.test_counts = count_labels(test_labels);
  return r;
}

std::string_view to_string(VerdictStatus status) noexcept {
  switch (status) {
    case VerdictStatus::Pass:
      return "Pass";
    case VerdictStatus::Fail:
      return "Fail";
    case VerdictStatus::Degenerate:
      return "Degenerate";
  }
  return "unknown";
}

Verdict verdict(const EvalReport& report, double margin) {
  Verdict v;
  v.margin = margin;
  v.train_auc = report.train_auc;
  v.test_auc = report.test_auc;
  const bool learned = report.train_auc >= 0.5 + margin;
  if (learned && report.test_auc <= 0.5 - margin) {
    v.status = VerdictStatus::Fail;
  } else if (learned && report.test_auc >= 0.5 + margin) {
    v.status = VerdictStatus::Pass;
  } else {
    v.status = VerdictStatus::Degenerate;
  }
  return v;
}

}  // namespace milcheck
