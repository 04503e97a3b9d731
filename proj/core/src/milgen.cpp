#include "milcheck/milgen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <thread>

#include "milcheck/errors.hpp"

namespace milcheck {

namespace {

constexpr std::array<TestId, 3> kAllTests = {
    TestId::Standard, TestId::ThresholdPoison, TestId::FalseFrequency};

// Accumulates rows and roles in generation order.
class BagBuilder {
 public:
  BagBuilder(const GeneratorConfig& cfg, SeedStream& stream)
      : cfg_(cfg), stream_(stream) {}

  void add(const GaussianParams& g, InstanceRole role) {
    rows_.push_back(stream_.next_gaussian_vector(g.mean, g.variance, cfg_.dim));
    roles_.push_back(role);
  }

  void add_background(int count) {
    for (int i = 0; i < count; ++i) {
      add(cfg_.distributions.background, InstanceRole::background());
    }
  }

  void add_poison() { add(cfg_.distributions.poison, InstanceRole::poison()); }

  int draw(const IntRange& r) {
    return static_cast<int>(stream_.next_uniform_int(r.lo, r.hi));
  }

  bool coin() { return stream_.coin_flip(); }

  Bag finish(std::uint64_t bag_id, bool positive, bool training) {
    InstanceMatrix m(static_cast<Eigen::Index>(rows_.size()), cfg_.dim);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = rows_[i].transpose();
    }
    return Bag(bag_id, positive ? 1 : -1, training ? Split::Train : Split::Test,
               std::move(m), std::move(roles_));
  }

 private:
  const GeneratorConfig& cfg_;
  SeedStream& stream_;
  std::vector<Eigen::VectorXd> rows_;
  std::vector<InstanceRole> roles_;
};

void require_test(const GeneratorConfig& cfg, TestId expected) {
  if (cfg.test_id != expected) {
    throw UsageError("generator for '" + std::string(to_string(expected)) +
                     "' called with test_id '" +
                     std::string(to_string(cfg.test_id)) + "'");
  }
}

void check_range(const IntRange& r, const char* name, int min_lo) {
  if (r.lo > r.hi || r.lo < min_lo) {
    throw ValidationError(std::string("invalid GeneratorConfig field '") + name +
                          "': range [" + std::to_string(r.lo) + ", " +
                          std::to_string(r.hi) + "]");
  }
}

void check_gaussian(const GaussianParams& g, const char* name) {
  if (!std::isfinite(g.mean) || !(g.variance > 0.0) || !std::isfinite(g.variance)) {
    throw ValidationError(std::string("invalid GeneratorConfig field 'distributions.") +
                          name + "'");
  }
}

void check_both_labels(const std::vector<Bag>& bags, const char* split) {
  const bool has_pos = std::any_of(bags.begin(), bags.end(),
                                   [](const Bag& b) { return b.positive(); });
  const bool has_neg = std::any_of(bags.begin(), bags.end(),
                                   [](const Bag& b) { return !b.positive(); });
  if (!has_pos || !has_neg) {
    throw ValidationError(std::string("generated ") + split +
                          " split has a single label; increase the bag count "
                          "or change positive_fraction/root_seed");
  }
}

}  // namespace

std::string_view to_string(TestId id) noexcept {
  switch (id) {
    case TestId::Standard:
      return "standard";
    case TestId::ThresholdPoison:
      return "threshold-poison";
    case TestId::FalseFrequency:
      return "false-frequency";
  }
  return "unknown";
}

TestId parse_test_id(std::string_view text) {
  for (TestId id : kAllTests) {
    if (text == to_string(id)) {
      return id;
    }
  }
  throw UsageError("unknown test id '" + std::string(text) +
                   "'; valid ids: standard, threshold-poison, false-frequency");
}

std::span<const TestId> all_tests() noexcept { return kAllTests; }

std::string_view to_string(Split split) noexcept {
  return split == Split::Train ? "train" : "test";
}

std::string to_string(const InstanceRole& role) {
  switch (role.kind) {
    case InstanceRole::Kind::Background:
      return "background";
    case InstanceRole::Kind::Poison:
      return "poison";
    case InstanceRole::Kind::Concept:
      return "concept:" + std::to_string(role.concept_id);
  }
  return "unknown";
}

InstanceRole parse_role(std::string_view text) {
  if (text == "background") return InstanceRole::background();
  if (text == "poison") return InstanceRole::poison();
  constexpr std::string_view prefix = "concept:";
  if (text.starts_with(prefix)) {
    int k = 0;
    const auto digits = text.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && k >= 1) {
      return InstanceRole::concept_of(k);
    }
  }
  throw ParseError("unknown instance role '" + std::string(text) + "'");
}

Bag::Bag(std::uint64_t bag_id, int label, Split split, InstanceMatrix instances,
         std::vector<InstanceRole> roles)
    : bag_id_(bag_id),
      label_(label),
      split_(split),
      instances_(std::move(instances)),
      roles_(std::move(roles)) {
  if (label_ != 1 && label_ != -1) {
    throw ValidationError("bag " + std::to_string(bag_id_) + ": label must be -1 or +1");
  }
  if (instances_.rows() == 0 || instances_.cols() == 0) {
    throw ValidationError("bag " + std::to_string(bag_id_) + ": no instances");
  }
  if (!roles_.empty() && roles_.size() != static_cast<std::size_t>(instances_.rows())) {
    throw ValidationError("bag " + std::to_string(bag_id_) +
                          ": roles length differs from instance count");
  }
  if (!instances_.allFinite()) {
    throw ValidationError("bag " + std::to_string(bag_id_) + ": non-finite instance value");
  }
}

std::size_t Bag::count_role(const InstanceRole& role) const noexcept {
  return static_cast<std::size_t>(std::count(roles_.begin(), roles_.end(), role));
}

Bag Bag::with_instances(InstanceMatrix instances, std::vector<InstanceRole> roles) const {
  return Bag(bag_id_, label_, split_, std::move(instances), std::move(roles));
}

Bag Bag::without_roles() const { return with_instances(instances_); }

bool operator==(const Bag& a, const Bag& b) {
  return a.bag_id_ == b.bag_id_ && a.label_ == b.label_ && a.split_ == b.split_ &&
         a.instances_.rows() == b.instances_.rows() &&
         a.instances_.cols() == b.instances_.cols() && a.instances_ == b.instances_ &&
         a.roles_ == b.roles_;
}

GeneratorConfig GeneratorConfig::for_test(TestId id, int n_train, int n_test,
                                          std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.test_id = id;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.root_seed = seed;
  return cfg;
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("invalid GeneratorConfig field '" + field + "': " + why);
  };
  if (dim < 1) fail("dim", "must be >= 1");
  if (n_train < 2) fail("n_train", "must be >= 2");
  if (n_test < 2) fail("n_test", "must be >= 2");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    fail("positive_fraction", "must lie in (0, 1)");
  }
  check_range(k_range, "k_range", 1);
  check_range(b_range, "b_range", 1);
  check_range(neg_test_t_range, "neg_test_t_range", 1);
  check_range(small_t_range, "small_t_range", 1);
  const auto& d = distributions;
  check_gaussian(d.background, "background");
  check_gaussian(d.poison, "poison");
  check_gaussian(d.standard_wide, "standard_wide");
  check_gaussian(d.standard_shifted, "standard_shifted");
  check_gaussian(d.threshold_first, "threshold_first");
  check_gaussian(d.threshold_second, "threshold_second");
  check_gaussian(d.frequency_first, "frequency_first");
  check_gaussian(d.frequency_second, "frequency_second");
}

Bag generate_standard_bag(const GeneratorConfig& cfg, bool training, bool positive,
                          SeedStream& stream, std::uint64_t bag_id) {
  require_test(cfg, TestId::Standard);
  BagBuilder bag(cfg, stream);
  const auto& d = cfg.distributions;
  if (!positive) {
    if (training) bag.add_poison();
    bag.add_background(bag.draw(cfg.b_range));
    return bag.finish(bag_id, false, training);
  }
  if (!training) bag.add_poison();
  const int k = bag.draw(cfg.k_range);
  for (int i = 0; i < k; ++i) {
    bag.add(bag.coin() ? d.standard_wide : d.standard_shifted, InstanceRole::concept_of(1));
  }
  bag.add_background(bag.draw(cfg.b_range));
  return bag.finish(bag_id, true, training);
}

Bag generate_threshold_poison_bag(const GeneratorConfig& cfg, bool training,
                                  bool positive, SeedStream& stream,
                                  std::uint64_t bag_id) {
  require_test(cfg, TestId::ThresholdPoison);
  BagBuilder bag(cfg, stream);
  const auto& d = cfg.distributions;
  if (!positive) {
    if (training) bag.add_poison();
    if (bag.coin()) {
      bag.add(d.threshold_first, InstanceRole::concept_of(1));
    } else {
      bag.add(d.threshold_second, InstanceRole::concept_of(2));
    }
    bag.add_background(bag.draw(cfg.b_range));
    return bag.finish(bag_id, false, training);
  }
  if (!training) bag.add_poison();
  const int k = bag.draw(cfg.k_range);
  for (int i = 0; i < k; ++i) {
    bag.add(d.threshold_first, InstanceRole::concept_of(1));
    bag.add(d.threshold_second, InstanceRole::concept_of(2));
  }
  bag.add_background(bag.draw(cfg.b_range));
  return bag.finish(bag_id, true, training);
}

Bag generate_false_frequency_bag(const GeneratorConfig& cfg, bool training,
                                 bool positive, SeedStream& stream,
                                 std::uint64_t bag_id) {
  require_test(cfg, TestId::FalseFrequency);
  BagBuilder bag(cfg, stream);
  const auto& d = cfg.distributions;
  if (!positive) {
    const int t = bag.draw(training ? cfg.small_t_range : cfg.neg_test_t_range);
    const bool first = bag.coin();
    for (int i = 0; i < t; ++i) {
      if (first) {
        bag.add(d.frequency_first, InstanceRole::concept_of(1));
      } else {
        bag.add(d.frequency_second, InstanceRole::concept_of(2));
      }
    }
    bag.add_background(bag.draw(cfg.b_range));
    return bag.finish(bag_id, false, training);
  }
  const int t1 = bag.draw(cfg.small_t_range);
  for (int i = 0; i < t1; ++i) bag.add(d.frequency_first, InstanceRole::concept_of(1));
  const int t2 = bag.draw(cfg.small_t_range);
  for (int i = 0; i < t2; ++i) bag.add(d.frequency_second, InstanceRole::concept_of(2));
  bag.add_background(bag.draw(cfg.b_range));
  return bag.finish(bag_id, true, training);
}

Bag generate_bag(const GeneratorConfig& cfg, bool training, bool positive,
                 SeedStream& stream, std::uint64_t bag_id) {
  switch (cfg.test_id) {
    case TestId::Standard:
      return generate_standard_bag(cfg, training, positive, stream, bag_id);
    case TestId::ThresholdPoison:
      return generate_threshold_poison_bag(cfg, training, positive, stream, bag_id);
    case TestId::FalseFrequency:
      return generate_false_frequency_bag(cfg, training, positive, stream, bag_id);
  }
  throw UsageError("unknown test id");
}

Bag generate_indexed_bag(const GeneratorConfig& cfg, std::uint64_t bag_id) {
  const bool training = bag_id < static_cast<std::uint64_t>(cfg.n_train);
  SeedStream stream = derive_stream(cfg.root_seed, bag_id);
  const bool positive = stream.next_bernoulli(cfg.positive_fraction);
  return generate_bag(cfg, training, positive, stream, bag_id);
}

Dataset generate_dataset(const GeneratorConfig& cfg, unsigned workers) {
  cfg.validate();
  const std::size_t total =
      static_cast<std::size_t>(cfg.n_train) + static_cast<std::size_t>(cfg.n_test);
  std::vector<std::optional<Bag>> slots(total);

  auto fill = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < total; i += stride) {
      slots[i].emplace(generate_indexed_bag(cfg, i));
    }
  };

  workers = std::max(1u, workers);
  if (workers == 1) {
    fill(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(fill, w, workers);
    }
  }

  Dataset ds{cfg, {}, {}};
  ds.train.reserve(static_cast<std::size_t>(cfg.n_train));
  ds.test.reserve(static_cast<std::size_t>(cfg.n_test));
  for (std::size_t i = 0; i < total; ++i) {
    auto& target = i < static_cast<std::size_t>(cfg.n_train) ? ds.train : ds.test;
    target.push_back(std::move(*slots[i]));
  }
  check_both_labels(ds.train, "train");
  check_both_labels(ds.test, "test");
  return ds;
}

}  // namespace milcheck
