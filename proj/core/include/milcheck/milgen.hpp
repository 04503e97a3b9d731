#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "milcheck/randgen.hpp"

namespace milcheck {

enum class TestId { Standard, ThresholdPoison, FalseFrequency };

std::string_view to_string(TestId id) noexcept;
/// Accepts "standard", "threshold-poison", "false-frequency". Throws
/// UsageError naming the valid ids otherwise.
TestId parse_test_id(std::string_view text);
std::span<const TestId> all_tests() noexcept;

enum class Split { Train, Test };

std::string_view to_string(Split split) noexcept;

/// Generation-side ground truth for one instance.
struct InstanceRole {
  enum class Kind { Background, Poison, Concept };

  Kind kind = Kind::Background;
  int concept_id = 0;  // 1..K when kind == Concept, else 0

  static constexpr InstanceRole background() noexcept { return {Kind::Background, 0}; }
  static constexpr InstanceRole poison() noexcept { return {Kind::Poison, 0}; }
  static constexpr InstanceRole concept_of(int k) noexcept { return {Kind::Concept, k}; }

  friend bool operator==(const InstanceRole&, const InstanceRole&) = default;
};

std::string to_string(const InstanceRole& role);
/// Inverse of to_string: "background", "poison", "concept:<k>".
InstanceRole parse_role(std::string_view text);

using InstanceVector = Eigen::VectorXd;
using InstanceMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A labelled bag of instances (one per row). Instance order is generation
/// order and carries no meaning. Roles are either absent (stripped wire
/// format) or one per instance.
class Bag {
 public:
  Bag(std::uint64_t bag_id, int label, Split split, InstanceMatrix instances,
      std::vector<InstanceRole> roles = {});

  std::uint64_t bag_id() const noexcept { return bag_id_; }
  int label() const noexcept { return label_; }
  bool positive() const noexcept { return label_ > 0; }
  Split split() const noexcept { return split_; }

  const InstanceMatrix& instances() const noexcept { return instances_; }
  Eigen::Index size() const noexcept { return instances_.rows(); }
  Eigen::Index dim() const noexcept { return instances_.cols(); }
  auto instance(Eigen::Index i) const { return instances_.row(i); }

  bool has_roles() const noexcept { return !roles_.empty(); }
  std::span<const InstanceRole> roles() const noexcept { return roles_; }
  std::size_t count_role(const InstanceRole& role) const noexcept;

  /// Same id, label and split with a different instance set.
  Bag with_instances(InstanceMatrix instances,
                     std::vector<InstanceRole> roles = {}) const;
  Bag without_roles() const;

  friend bool operator==(const Bag& a, const Bag& b);

 private:
  std::uint64_t bag_id_;
  int label_;
  Split split_;
  InstanceMatrix instances_;
  std::vector<InstanceRole> roles_;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

/// Isotropic Gaussian N(mean * 1, variance * I).
struct GaussianParams {
  double mean = 0.0;
  double variance = 1.0;
  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

/// Per-role sampling distributions for all three tests.
struct DistributionTable {
  GaussianParams background{0.0, 1.0};
  GaussianParams poison{-10.0, 0.1};
  // Standard: two never co-occurring sources of the single concept.
  GaussianParams standard_wide{0.0, 3.0};
  GaussianParams standard_shifted{1.0, 1.0};
  // Threshold-poison: concepts 1 and 2.
  GaussianParams threshold_first{2.0, 0.1};
  GaussianParams threshold_second{3.0, 0.1};
  // False-frequency: concepts 1 and 2.
  GaussianParams frequency_first{-2.0, 0.1};
  GaussianParams frequency_second{2.0, 0.1};

  friend bool operator==(const DistributionTable&, const DistributionTable&) = default;
};

struct GeneratorConfig {
  TestId test_id = TestId::Standard;
  int dim = 16;
  int n_train = 20000;
  int n_test = 4000;
  double positive_fraction = 0.5;
  std::uint64_t root_seed = 0;
  IntRange k_range{1, 4};
  IntRange b_range{1, 10};
  IntRange neg_test_t_range{35, 40};
  IntRange small_t_range{1, 2};
  DistributionTable distributions{};

  static GeneratorConfig for_test(TestId id, int n_train, int n_test,
                                  std::uint64_t seed);

  /// Throws ValidationError naming the first offending field.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct Dataset {
  GeneratorConfig config;
  std::vector<Bag> train;
  std::vector<Bag> test;
};

Bag generate_standard_bag(const GeneratorConfig& cfg, bool training,
                          bool positive, SeedStream& stream,
                          std::uint64_t bag_id = 0);
Bag generate_threshold_poison_bag(const GeneratorConfig& cfg, bool training,
                                  bool positive, SeedStream& stream,
                                  std::uint64_t bag_id = 0);
Bag generate_false_frequency_bag(const GeneratorConfig& cfg, bool training,
                                 bool positive, SeedStream& stream,
                                 std::uint64_t bag_id = 0);

/// Dispatches on cfg.test_id.
Bag generate_bag(const GeneratorConfig& cfg, bool training, bool positive,
                 SeedStream& stream, std::uint64_t bag_id = 0);

/// Bag i (0-based, train first then test) is built from derive_stream(seed, i):
/// the stream's first draw is the Bernoulli label, the rest feed the
/// generator. The result does not depend on `workers`.
Dataset generate_dataset(const GeneratorConfig& cfg, unsigned workers = 1);

/// The bag with global index `bag_id`, identical to its entry in
/// generate_dataset(cfg).
Bag generate_indexed_bag(const GeneratorConfig& cfg, std::uint64_t bag_id);

}  // namespace milcheck
