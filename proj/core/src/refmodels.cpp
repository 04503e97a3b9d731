#include "milcheck/refmodels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <thread>

#include "milcheck/errors.hpp"
#include "milcheck/randgen.hpp"

namespace milcheck {

namespace {

constexpr std::array<ModelKind, 4> kAllKinds = {ModelKind::Witness, ModelKind::EmbedPool,
                                                ModelKind::AttentionPool,
                                                ModelKind::SingleInstance};

constexpr std::uint64_t kInitStream = 0x1417'0000'0000'0000ULL;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

// Runs fn(i) for i in [0, n) on up to `workers` threads with static striping.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

double bce_with_logit(double logit, int label) {
  const double y = label > 0 ? 1.0 : 0.0;
  return nn::softplus(logit) - y * logit;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Witness:
      return "witness";
    case ModelKind::EmbedPool:
      return "embed-pool";
    case ModelKind::AttentionPool:
      return "attention-pool";
    case ModelKind::SingleInstance:
      return "single-instance";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : kAllKinds) {
    if (text == to_string(k)) return k;
  }
  throw UsageError("unknown model kind '" + std::string(text) +
                   "'; valid kinds: witness, embed-pool, attention-pool, single-instance");
}

std::span<const ModelKind> all_model_kinds() noexcept { return kAllKinds; }

struct Architecture::Pass {
  nn::Mlp::Cache trunk;
  nn::Mlp::Cache head;
  Eigen::Index argmax = 0;
  Eigen::VectorXd weights;      // attention softmax
  nn::Matrix attn_hidden;       // tanh(E V^T)
  Eigen::VectorXd pos_weights;  // SingleInstance: p_i / sum p
  Eigen::VectorXd neg_weights;  // SingleInstance: (1 - p_i) / sum (1 - p)
  Eigen::VectorXd probs;
  std::vector<Eigen::Index> order;  // canonical row i is bag row order[i]
};

Architecture::Architecture(ModelKind kind, ModelShape shape) : kind_(kind), shape_(shape) {
  if (shape.input_dim < 1 || shape.hidden < 1 || shape.attention < 1) {
    throw ArgumentError("model shape dimensions must be positive");
  }
  const auto d = shape.input_dim;
  const auto h = shape.hidden;
  switch (kind) {
    case ModelKind::Witness:
    case ModelKind::SingleInstance:
      trunk_ = nn::Mlp(layout_, "trunk", {d, h, h, 1}, false, shape.activation);
      break;
    case ModelKind::EmbedPool:
      trunk_ = nn::Mlp(layout_, "trunk", {d, h, h}, true, shape.activation);
      head_ = nn::Mlp(layout_, "head", {h, 1}, false);
      break;
    case ModelKind::AttentionPool:
      trunk_ = nn::Mlp(layout_, "trunk", {d, h, h}, true, shape.activation);
      attn_v_ = layout_.add("attention.weight", shape.attention, h);
      attn_u_ = layout_.add("attention.vector", 1, shape.attention);
      head_ = nn::Mlp(layout_, "head", {h, 1}, false);
      break;
  }
}

double Architecture::run(const Eigen::VectorXd& params, const Bag& bag, Pass& pass) const {
  if (bag.dim() != shape_.input_dim) {
    throw ArgumentError("bag " + std::to_string(bag.bag_id()) + " has dimension " +
                        std::to_string(bag.dim()) + ", model expects " +
                        std::to_string(shape_.input_dim));
  }
  if (params.size() != layout_.total_size()) {
    throw ArgumentError("parameter vector size does not match the architecture");
  }
  // Rows are visited in lexicographic order so that pooled sums, and hence
  // the logit, are bit-identical under any permutation of the bag.
  const auto& inst = bag.instances();
  pass.order.resize(static_cast<std::size_t>(inst.rows()));
  std::iota(pass.order.begin(), pass.order.end(), Eigen::Index{0});
  std::stable_sort(pass.order.begin(), pass.order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double* ra = inst.row(a).data();
    const double* rb = inst.row(b).data();
    return std::lexicographical_compare(ra, ra + inst.cols(), rb, rb + inst.cols());
  });
  nn::Matrix x(inst.rows(), inst.cols());
  for (Eigen::Index i = 0; i < inst.rows(); ++i) {
    x.row(i) = inst.row(pass.order[static_cast<std::size_t>(i)]);
  }
  const nn::Matrix& t = trunk_.forward(layout_, params, x, pass.trunk);
  const auto n = static_cast<double>(t.rows());

  switch (kind_) {
    case ModelKind::Witness: {
      double best = t(0, 0);
      pass.argmax = 0;
      for (Eigen::Index i = 1; i < t.rows(); ++i) {
        if (t(i, 0) > best) {
          best = t(i, 0);
          pass.argmax = i;
        }
      }
      return best;
    }
    case ModelKind::SingleInstance: {
      const Eigen::VectorXd s = t.col(0);
      // log p_i and log(1 - p_i), both without overflow.
      Eigen::VectorXd log_p = s.unaryExpr([](double v) { return -nn::softplus(-v); });
      Eigen::VectorXd log_q = s.unaryExpr([](double v) { return -nn::softplus(v); });
      pass.probs = s.unaryExpr([](double v) { return nn::sigmoid(v); });
      pass.pos_weights = softmax(log_p);
      pass.neg_weights = softmax(log_q);
      return (log_sum_exp(log_p) - std::log(n)) - (log_sum_exp(log_q) - std::log(n));
    }
    case ModelKind::EmbedPool: {
      const nn::Matrix pooled = t.colwise().mean();
      return head_.forward(layout_, params, pooled, pass.head)(0, 0);
    }
    case ModelKind::AttentionPool: {
      const auto v = layout_.view(params, attn_v_);
      const auto u = layout_.view(params, attn_u_);
      pass.attn_hidden = (t * v.transpose()).array().tanh().matrix();
      const Eigen::VectorXd a = pass.attn_hidden * u.row(0).transpose();
      pass.weights = softmax(a);
      const nn::Matrix pooled = pass.weights.transpose() * t;
      return head_.forward(layout_, params, pooled, pass.head)(0, 0);
    }
  }
  return 0.0;
}

void Architecture::backprop(const Eigen::VectorXd& params, const Pass& pass, double dlogit,
                            Eigen::VectorXd& grad) const {
  const nn::Matrix& t = pass.trunk.acts.back();
  const Eigen::Index n = t.rows();
  switch (kind_) {
    case ModelKind::Witness: {
      nn::Matrix g = nn::Matrix::Zero(n, 1);
      g(pass.argmax, 0) = dlogit;
      trunk_.backward(layout_, params, pass.trunk, std::move(g), grad);
      return;
    }
    case ModelKind::SingleInstance: {
      // d logit / d s_i = w_i (1 - p_i) + w'_i p_i
      nn::Matrix g(n, 1);
      g.col(0) = dlogit * (pass.pos_weights.array() * (1.0 - pass.probs.array()) +
                           pass.neg_weights.array() * pass.probs.array())
                              .matrix();
      trunk_.backward(layout_, params, pass.trunk, std::move(g), grad);
      return;
    }
    case ModelKind::EmbedPool: {
      const nn::Matrix gz =
          head_.backward(layout_, params, pass.head, nn::Matrix::Constant(1, 1, dlogit), grad, true);
      nn::Matrix g = nn::Matrix::Ones(n, 1) * (gz / static_cast<double>(n));
      trunk_.backward(layout_, params, pass.trunk, std::move(g), grad);
      return;
    }
    case ModelKind::AttentionPool: {
      const nn::Matrix gz =
          head_.backward(layout_, params, pass.head, nn::Matrix::Constant(1, 1, dlogit), grad, true);
      const Eigen::VectorXd& w = pass.weights;
      nn::Matrix g = w * gz;                           // through the weighted sum
      const Eigen::VectorXd dw = t * gz.transpose();   // dL/dw_i = e_i . gz
      const Eigen::VectorXd da = w.array() * (dw.array() - w.dot(dw));
      const auto v = layout_.view(params, attn_v_);
      const auto u = layout_.view(params, attn_u_);
      auto gv = layout_.view(grad, attn_v_);
      auto gu = layout_.view(grad, attn_u_);
      gu.row(0) += da.transpose() * pass.attn_hidden;
      const nn::Matrix dpre =
          ((da * u.row(0)).array() * (1.0 - pass.attn_hidden.array().square())).matrix();
      gv.noalias() += dpre.transpose() * t;
      g.noalias() += dpre * v;
      trunk_.backward(layout_, params, pass.trunk, std::move(g), grad);
      return;
    }
  }
}

double Architecture::forward(const Eigen::VectorXd& params, const Bag& bag) const {
  Pass pass;
  return run(params, bag, pass);
}

double Architecture::loss(const Eigen::VectorXd& params, const Bag& bag, int label) const {
  return bce_with_logit(forward(params, bag), label);
}

double Architecture::loss_and_grad(const Eigen::VectorXd& params, const Bag& bag, int label,
                                   Eigen::VectorXd& grad) const {
  Pass pass;
  const double logit = run(params, bag, pass);
  const double y = label > 0 ? 1.0 : 0.0;
  backprop(params, pass, nn::sigmoid(logit) - y, grad);
  return bce_with_logit(logit, label);
}

Eigen::VectorXd Architecture::attention_weights(const Eigen::VectorXd& params,
                                                const Bag& bag) const {
  if (kind_ != ModelKind::AttentionPool) {
    throw UsageError("attention weights requested from a non-attention model");
  }
  Pass pass;
  run(params, bag, pass);
  Eigen::VectorXd out(pass.weights.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[pass.order[static_cast<std::size_t>(i)]] = pass.weights[i];
  }
  return out;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  return a.kind == b.kind && a.shape == b.shape && a.values.size() == b.values.size() &&
         a.values == b.values;
}

ModelParams init_params(ModelKind kind, ModelShape shape, std::uint64_t seed) {
  const Architecture arch(kind, shape);
  ModelParams p{kind, shape, {}};
  SeedStream stream = derive_stream(seed, kInitStream);
  nn::glorot_init(arch.layout(), p.values, [&] { return stream.next_unit(); });
  return p;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("TrainConfig.epochs must be >= 1");
  if (batch_bags < 1) throw ValidationError("TrainConfig.batch_bags must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig.learning_rate must be > 0");
}

TrainResult train(ModelKind kind, const TrainConfig& cfg, std::span<const Bag> bags) {
  cfg.validate();
  const bool has_pos = std::any_of(bags.begin(), bags.end(), [](const Bag& b) { return b.positive(); });
  const bool has_neg = std::any_of(bags.begin(), bags.end(), [](const Bag& b) { return !b.positive(); });
  if (!has_pos || !has_neg) {
    throw ValidationError("training set must contain both labels");
  }

  TrainResult result{init_params(kind, cfg.shape, cfg.seed), {}};
  Eigen::VectorXd& params = result.params.values;
  const Architecture arch(kind, cfg.shape);
  nn::Adam adam(params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);

  std::vector<std::size_t> order(bags.size());
  const auto batch = static_cast<std::size_t>(cfg.batch_bags);
  std::vector<Eigen::VectorXd> per_bag(batch);
  std::vector<double> per_loss(batch);
  Eigen::VectorXd total(params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeedStream shuffle = derive_stream(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.next_uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      parallel_for(count, cfg.workers, [&](std::size_t j) {
        const Bag& bag = bags[order[start + j]];
        per_bag[j].setZero(params.size());
        per_loss[j] = arch.loss_and_grad(params, bag, bag.label(), per_bag[j]);
      });
      total.setZero();
      for (std::size_t j = 0; j < count; ++j) {
        total += per_bag[j];
        epoch_loss += per_loss[j];
      }
      total /= static_cast<double>(count);
      adam.step(params, total);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

double forward_bag(const ModelParams& params, const Bag& bag) {
  return params.architecture().forward(params.values, bag);
}

ScoreTable score_bags(const ModelParams& params, std::span<const Bag> bags, unsigned workers) {
  const Architecture arch = params.architecture();
  std::vector<double> scores(bags.size());
  parallel_for(bags.size(), workers, [&](std::size_t i) {
    scores[i] = nn::sigmoid(arch.forward(params.values, bags[i]));
  });
  ScoreTable table;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    table.insert(bags[i].bag_id(), scores[i]);
  }
  return table;
}

Eigen::VectorXd loss_gradient(const ModelParams& params, const Bag& bag, int label) {
  const Architecture arch = params.architecture();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values.size());
  arch.loss_and_grad(params.values, bag, label, grad);
  return grad;
}

GradientCheck check_gradients(const ModelParams& params, const Bag& bag, int label,
                              std::size_t samples, std::uint64_t seed, double step) {
  const Architecture arch = params.architecture();
  const Eigen::VectorXd analytic = loss_gradient(params, bag, label);
  Eigen::VectorXd probe = params.values;
  SeedStream pick = derive_stream(seed, 0);
  GradientCheck out;
  const auto last = static_cast<std::int64_t>(probe.size() - 1);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto i = static_cast<Eigen::Index>(pick.next_uniform_int(0, last));
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = arch.loss(probe, bag, label);
    probe[i] = saved - step;
    const double down = arch.loss(probe, bag, label);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    // Floor sits above central-difference roundoff (~eps * loss / step) so
    // saturated units with ~1e-12 gradients are not reported as mismatches.
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
    out.max_relative_error = std::max(out.max_relative_error, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace milcheck
