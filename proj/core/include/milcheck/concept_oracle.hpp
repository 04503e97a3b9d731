#pragma once

#include <optional>
#include <vector>

#include "milcheck/milgen.hpp"

namespace milcheck {

/// One isotropic Gaussian region of instance space mapped to a concept.
struct ConceptRegion {
  double mean = 0.0;
  double variance = 1.0;
  int concept_id = 1;
};

/// A region assigned to the null class. `poison` marks the bait region that
/// only absence-detecting rules can exploit.
struct NullRegion {
  double mean = 0.0;
  double variance = 1.0;
  bool poison = false;
};

/**
 * Generalized MIL decision: h assigns each instance to the null class or one
 * of K concepts, and g labels a bag positive iff every concept k occurs at
 * least thresholds[k-1] times. Several regions may share a concept id.
 *
 * h is the arg-max of the isotropic Gaussian log-density over all declared
 * regions; ties go to the null class first, then to the lowest concept id.
 */
struct ConceptRule {
  int dim = 16;
  std::vector<ConceptRegion> regions;
  std::vector<NullRegion> background;
  std::vector<int> thresholds;  // thresholds[k-1] is t_k

  int concept_count() const noexcept { return static_cast<int>(thresholds.size()); }

  /// Throws ArgumentError if a region has variance <= 0, a concept id lies
  /// outside 1..K, a threshold is negative, or K concepts lack a region.
  void validate() const;

  static ConceptRule standard(const GeneratorConfig& cfg);
  static ConceptRule threshold_poison(const GeneratorConfig& cfg);
  static ConceptRule false_frequency(const GeneratorConfig& cfg);
  /// The rule matching cfg.test_id.
  static ConceptRule for_config(const GeneratorConfig& cfg);
};

double isotropic_log_density(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                             double mean, double variance);

/// h(x): concept id, or std::nullopt for the null class.
std::optional<int> assign_concept(const ConceptRule& rule,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Entry k-1 counts instances assigned to concept k.
std::vector<int> count_concepts(const ConceptRule& rule, const Bag& bag);

/// +1 iff counts[k] >= t_k for every k. Throws ArgumentError on length
/// mismatch.
int decide(const ConceptRule& rule, std::span<const int> counts);

/// 1.0 when the rule labels the bag positive, else 0.0.
double oracle_mil_score(const ConceptRule& rule, const Bag& bag);

/// min over k of clamp(count_k - t_k + 1, 0, 1); equals the hard score on
/// integer counts.
double oracle_mil_soft_score(const ConceptRule& rule, const Bag& bag);

/**
 * Graded score whose sign reproduces the hard decision: for each concept k
 * with t_k >= 1 take the t_k-th largest per-instance log-density margin of k
 * over every other region, then the minimum over concepts. Adding an
 * instance never lowers it. Used to rank bags where regions overlap and hard
 * counts tie.
 */
double oracle_mil_margin_score(const ConceptRule& rule, const Bag& bag);

/// 1.0 when no instance falls in a poison region, else 0.0. MIL-violating.
double oracle_poison_cheat_score(const ConceptRule& rule, const Bag& bag);

/// Total concept count, ignoring which concept occurred. MIL-respecting but
/// blind to the threshold structure.
double oracle_frequency_cheat_score(const ConceptRule& rule, const Bag& bag);

}  // namespace milcheck
