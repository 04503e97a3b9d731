#include "milcheck/concept_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "milcheck/errors.hpp"

namespace milcheck {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dim(const ConceptRule& rule, Eigen::Index dim) {
  if (dim != rule.dim) {
    throw ArgumentError("instance dimension " + std::to_string(dim) +
                        " does not match rule dimension " + std::to_string(rule.dim));
  }
}

// Best log-density of concept k and best log-density of anything else.
struct ConceptEvidence {
  double own = kNegInf;
  double other = kNegInf;
};

ConceptEvidence evidence_for(const ConceptRule& rule,
                             const Eigen::Ref<const Eigen::RowVectorXd>& x, int k) {
  ConceptEvidence e;
  for (const auto& r : rule.background) {
    e.other = std::max(e.other, isotropic_log_density(x, r.mean, r.variance));
  }
  for (const auto& r : rule.regions) {
    const double ld = isotropic_log_density(x, r.mean, r.variance);
    if (r.concept_id == k) {
      e.own = std::max(e.own, ld);
    } else {
      e.other = std::max(e.other, ld);
    }
  }
  return e;
}

}  // namespace

void ConceptRule::validate() const {
  if (dim < 1) throw ArgumentError("ConceptRule: dim must be >= 1");
  const int k_total = concept_count();
  std::vector<bool> seen(static_cast<std::size_t>(k_total), false);
  for (const auto& r : regions) {
    if (!(r.variance > 0.0)) throw ArgumentError("ConceptRule: region variance must be positive");
    if (r.concept_id < 1 || r.concept_id > k_total) {
      throw ArgumentError("ConceptRule: concept id " + std::to_string(r.concept_id) +
                          " outside 1.." + std::to_string(k_total));
    }
    seen[static_cast<std::size_t>(r.concept_id - 1)] = true;
  }
  for (const auto& r : background) {
    if (!(r.variance > 0.0)) throw ArgumentError("ConceptRule: null region variance must be positive");
  }
  for (int t : thresholds) {
    if (t < 0) throw ArgumentError("ConceptRule: thresholds must be non-negative");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ArgumentError("ConceptRule: every concept needs at least one region");
  }
}

ConceptRule ConceptRule::standard(const GeneratorConfig& cfg) {
  const auto& d = cfg.distributions;
  // Both sources form the single concept c1 = c1' v c1''.
  return ConceptRule{
      cfg.dim,
      {{d.standard_wide.mean, d.standard_wide.variance, 1},
       {d.standard_shifted.mean, d.standard_shifted.variance, 1}},
      {{d.background.mean, d.background.variance, false},
       {d.poison.mean, d.poison.variance, true}},
      {1}};
}

ConceptRule ConceptRule::threshold_poison(const GeneratorConfig& cfg) {
  const auto& d = cfg.distributions;
  return ConceptRule{
      cfg.dim,
      {{d.threshold_first.mean, d.threshold_first.variance, 1},
       {d.threshold_second.mean, d.threshold_second.variance, 2}},
      {{d.background.mean, d.background.variance, false},
       {d.poison.mean, d.poison.variance, true}},
      {1, 1}};
}

ConceptRule ConceptRule::false_frequency(const GeneratorConfig& cfg) {
  const auto& d = cfg.distributions;
  return ConceptRule{
      cfg.dim,
      {{d.frequency_first.mean, d.frequency_first.variance, 1},
       {d.frequency_second.mean, d.frequency_second.variance, 2}},
      {{d.background.mean, d.background.variance, false}},
      {1, 1}};
}

ConceptRule ConceptRule::for_config(const GeneratorConfig& cfg) {
  switch (cfg.test_id) {
    case TestId::Standard:
      return standard(cfg);
    case TestId::ThresholdPoison:
      return threshold_poison(cfg);
    case TestId::FalseFrequency:
      return false_frequency(cfg);
  }
  throw UsageError("unknown test id");
}

double isotropic_log_density(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                             double mean, double variance) {
  const double d = static_cast<double>(x.size());
  const double sq = (x.array() - mean).square().sum();
  return -0.5 * d * std::log(2.0 * std::numbers::pi * variance) - sq / (2.0 * variance);
}

std::optional<int> assign_concept(const ConceptRule& rule,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  check_dim(rule, x.size());
  double best = kNegInf;
  std::optional<int> winner;
  bool null_wins = false;
  for (const auto& r : rule.background) {
    const double ld = isotropic_log_density(x, r.mean, r.variance);
    if (ld > best) {
      best = ld;
      null_wins = true;
    }
  }
  for (const auto& r : rule.regions) {
    const double ld = isotropic_log_density(x, r.mean, r.variance);
    // Strict improvement keeps ties with the null class; equal concepts keep
    // the lowest id.
    if (ld > best || (ld == best && !null_wins && winner && r.concept_id < *winner)) {
      best = ld;
      winner = r.concept_id;
      null_wins = false;
    }
  }
  if (null_wins) return std::nullopt;
  return winner;
}

std::vector<int> count_concepts(const ConceptRule& rule, const Bag& bag) {
  std::vector<int> counts(static_cast<std::size_t>(rule.concept_count()), 0);
  if (counts.empty()) return counts;
  check_dim(rule, bag.dim());
  for (Eigen::Index i = 0; i < bag.size(); ++i) {
    if (auto k = assign_concept(rule, bag.instance(i))) {
      ++counts[static_cast<std::size_t>(*k - 1)];
    }
  }
  return counts;
}

int decide(const ConceptRule& rule, std::span<const int> counts) {
  if (counts.size() != rule.thresholds.size()) {
    throw ArgumentError("decide: expected " + std::to_string(rule.thresholds.size()) +
                        " counts, got " + std::to_string(counts.size()));
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < rule.thresholds[k]) return -1;
  }
  return 1;
}

double oracle_mil_score(const ConceptRule& rule, const Bag& bag) {
  return decide(rule, count_concepts(rule, bag)) == 1 ? 1.0 : 0.0;
}

double oracle_mil_soft_score(const ConceptRule& rule, const Bag& bag) {
  const auto counts = count_concepts(rule, bag);
  double score = 1.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double margin = static_cast<double>(counts[k] - rule.thresholds[k] + 1);
    score = std::min(score, std::clamp(margin, 0.0, 1.0));
  }
  return score;
}

double oracle_mil_margin_score(const ConceptRule& rule, const Bag& bag) {
  check_dim(rule, bag.dim());
  double score = std::numeric_limits<double>::max();
  std::vector<double> margins(static_cast<std::size_t>(bag.size()));
  for (int k = 1; k <= rule.concept_count(); ++k) {
    const int t = rule.thresholds[static_cast<std::size_t>(k - 1)];
    if (t == 0) continue;
    if (t > bag.size()) {
      return std::numeric_limits<double>::lowest();
    }
    for (Eigen::Index i = 0; i < bag.size(); ++i) {
      const auto e = evidence_for(rule, bag.instance(i), k);
      margins[static_cast<std::size_t>(i)] = e.own - e.other;
    }
    // t-th largest margin
    auto nth = margins.begin() + (t - 1);
    std::nth_element(margins.begin(), nth, margins.end(), std::greater<>{});
    score = std::min(score, *nth);
  }
  return score;
}

double oracle_poison_cheat_score(const ConceptRule& rule, const Bag& bag) {
  check_dim(rule, bag.dim());
  for (Eigen::Index i = 0; i < bag.size(); ++i) {
    const auto x = bag.instance(i);
    double best = kNegInf;
    bool poison_wins = false;
    for (const auto& r : rule.background) {
      const double ld = isotropic_log_density(x, r.mean, r.variance);
      if (ld > best) {
        best = ld;
        poison_wins = r.poison;
      }
    }
    for (const auto& r : rule.regions) {
      if (isotropic_log_density(x, r.mean, r.variance) > best) {
        poison_wins = false;
        break;
      }
    }
    if (poison_wins) return 0.0;
  }
  return 1.0;
}

double oracle_frequency_cheat_score(const ConceptRule& rule, const Bag& bag) {
  const auto counts = count_concepts(rule, bag);
  return static_cast<double>(std::accumulate(counts.begin(), counts.end(), 0));
}

}  // namespace milcheck
