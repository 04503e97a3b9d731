#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "milcheck/metrics.hpp"
#include "milcheck/milgen.hpp"
#include "milcheck/network.hpp"

namespace milcheck {

/// Reference MIL architectures.
///  - Witness: logit = max_i f(x_i), f a scalar 3-layer MLP.
///  - EmbedPool: feature-wise mean of a 2-layer embedding, then a linear head.
///  - AttentionPool: softmax(u . tanh(V e_i)) weighted sum of embeddings,
///    then a linear head.
///  - SingleInstance: logit of the mean instance probability sigmoid(f(x_i)).
/// Instances are processed in lexicographic order, so every model is exactly
/// invariant to instance permutation.
enum class ModelKind { Witness, EmbedPool, AttentionPool, SingleInstance };

std::string_view to_string(ModelKind kind) noexcept;
/// "witness", "embed-pool", "attention-pool", "single-instance".
ModelKind parse_model_kind(std::string_view text);
std::span<const ModelKind> all_model_kinds() noexcept;

struct ModelShape {
  Eigen::Index input_dim = 16;
  Eigen::Index hidden = 64;
  Eigen::Index attention = 32;
  nn::Activation activation = nn::Activation::Tanh;  // hidden layers

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Parameter tensor layout plus the pooling structure of one model kind.
class Architecture {
 public:
  Architecture(ModelKind kind, ModelShape shape);

  ModelKind kind() const noexcept { return kind_; }
  const ModelShape& shape() const noexcept { return shape_; }
  const nn::ParamLayout& layout() const noexcept { return layout_; }
  Eigen::Index parameter_count() const noexcept { return layout_.total_size(); }

  /// Bag logit; throws ArgumentError if the bag's dimension differs from
  /// shape().input_dim.
  double forward(const Eigen::VectorXd& params, const Bag& bag) const;

  /// Binary cross-entropy of sigmoid(logit) against (label + 1) / 2. Adds
  /// dLoss/dparams into `grad` and returns the loss.
  double loss_and_grad(const Eigen::VectorXd& params, const Bag& bag, int label,
                       Eigen::VectorXd& grad) const;

  double loss(const Eigen::VectorXd& params, const Bag& bag, int label) const;

  /// Attention weights for a bag (AttentionPool only).
  Eigen::VectorXd attention_weights(const Eigen::VectorXd& params, const Bag& bag) const;

 private:
  struct Pass;
  double run(const Eigen::VectorXd& params, const Bag& bag, Pass& pass) const;
  void backprop(const Eigen::VectorXd& params, const Pass& pass, double dlogit,
                Eigen::VectorXd& grad) const;

  ModelKind kind_;
  ModelShape shape_;
  nn::ParamLayout layout_;
  nn::Mlp trunk_;           // instance scorer or embedding
  std::size_t attn_v_ = 0;  // AttentionPool
  std::size_t attn_u_ = 0;
  nn::Mlp head_;            // pooled models
};

struct ModelParams {
  ModelKind kind = ModelKind::Witness;
  ModelShape shape{};
  Eigen::VectorXd values;

  Architecture architecture() const { return Architecture(kind, shape); }
  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Glorot-uniform weights from derive_stream(seed, kInitStream).
ModelParams init_params(ModelKind kind, ModelShape shape, std::uint64_t seed);

struct TrainConfig {
  int epochs = 20;
  int batch_bags = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  ModelShape shape{};
  unsigned workers = 1;

  /// Throws ValidationError on epochs < 1, batch_bags < 1 or learning_rate <= 0.
  void validate() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean per-bag loss of each epoch
};

/**
 * Mini-batch Adam on per-bag binary cross-entropy. Bags are reshuffled each
 * epoch from derive_stream(seed, epoch + 1). Per-bag gradients are summed in
 * batch order, so the result is bit-identical for any worker count.
 *
 * Throws ValidationError when the bags do not contain both labels.
 */
TrainResult train(ModelKind kind, const TrainConfig& cfg, std::span<const Bag> bags);

double forward_bag(const ModelParams& params, const Bag& bag);

/// sigmoid(logit) keyed by bag_id.
ScoreTable score_bags(const ModelParams& params, std::span<const Bag> bags,
                      unsigned workers = 1);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences (step 1e-5) on `samples` random coordinates drawn from
/// derive_stream(seed, 0) versus the analytic gradient of the per-bag loss.
/// Relative error is |a - n| / max(|a| + |n|, 1e-6).
GradientCheck check_gradients(const ModelParams& params, const Bag& bag, int label,
                              std::size_t samples = 64, std::uint64_t seed = 0,
                              double step = 1e-5);

/// Analytic gradient of the per-bag loss.
Eigen::VectorXd loss_gradient(const ModelParams& params, const Bag& bag, int label);

/**
 * Text checkpoint:
 *
 *   milcheck-checkpoint 1
 *   kind <model kind>
 *   shape <input_dim> <hidden> <attention> <activation>
 *   tensors <count>
 *   <name> <rows> <cols>
 *   <rows*cols values, row-major, shortest round-trip decimals>
 *   ...
 *
 * Load throws ParseError on any mismatch with the layout implied by kind and
 * shape.
 */
void save_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams load_checkpoint(std::istream& in);

}  // namespace milcheck
