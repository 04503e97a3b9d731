#include "milcheck/network.hpp"

#include <cmath>
#include <stdexcept>

namespace milcheck::nn {

std::size_t ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  tensors_.push_back(TensorSpec{std::move(name), rows, cols, total_});
  total_ += rows * cols;
  return tensors_.size() - 1;
}

const TensorSpec& ParamLayout::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no tensor named '" + std::string(name) + "'");
}

ConstTensor ParamLayout::view(const Eigen::VectorXd& flat, std::size_t i) const {
  const auto& t = tensors_[i];
  return ConstTensor(flat.data() + t.offset, t.rows, t.cols);
}

Tensor ParamLayout::view(Eigen::VectorXd& flat, std::size_t i) const {
  const auto& t = tensors_[i];
  return Tensor(flat.data() + t.offset, t.rows, t.cols);
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.name != y.name || x.rows != y.rows || x.cols != y.cols) return false;
  }
  return true;
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
  }
  return "unknown";
}

Activation parse_activation(std::string_view text) {
  for (auto a : {Activation::Identity, Activation::Tanh, Activation::Relu}) {
    if (to_string(a) == text) return a;
  }
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

Mlp::Mlp(ParamLayout& layout, const std::string& prefix,
         const std::vector<Eigen::Index>& widths, bool activate_last, Activation hidden) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least two widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Dense d;
    d.in = widths[l];
    d.out = widths[l + 1];
    const std::string base = prefix + std::to_string(l);
    d.weight = layout.add(base + ".weight", d.out, d.in);
    d.bias = layout.add(base + ".bias", 1, d.out);
    const bool last = l + 2 == widths.size();
    d.activation = (!last || activate_last) ? hidden : Activation::Identity;
    layers_.push_back(d);
  }
}

const Matrix& Mlp::forward(const ParamLayout& layout, const Eigen::VectorXd& params,
                           const Eigen::Ref<const Matrix>& x, Cache& cache) const {
  cache.acts.resize(layers_.size() + 1);
  cache.acts[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& d = layers_[l];
    const auto w = layout.view(params, d.weight);
    const auto b = layout.view(params, d.bias);
    Matrix& y = cache.acts[l + 1];
    // Coefficient-wise product: a row's result must not depend on how many rows
    // share the call, or witness max-pooling loses exact monotonicity.
    y.noalias() = cache.acts[l].lazyProduct(w.transpose());
    y.rowwise() += b.row(0);
    if (d.activation == Activation::Tanh) {
      y = y.array().tanh().matrix();
    } else if (d.activation == Activation::Relu) {
      y = y.cwiseMax(0.0);
    }
  }
  return cache.acts.back();
}

Matrix Mlp::backward(const ParamLayout& layout, const Eigen::VectorXd& params,
                     const Cache& cache, Matrix grad_out, Eigen::VectorXd& grad,
                     bool want_input_grad) const {
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& d = layers_[l];
    const Matrix& y = cache.acts[l + 1];
    if (d.activation == Activation::Tanh) {
      grad_out.array() *= 1.0 - y.array().square();
    } else if (d.activation == Activation::Relu) {
      grad_out.array() *= (y.array() > 0.0).cast<double>();
    }
    auto gw = layout.view(grad, d.weight);
    auto gb = layout.view(grad, d.bias);
    gw.noalias() += grad_out.transpose() * cache.acts[l];
    gb.row(0) += grad_out.colwise().sum();
    if (l > 0 || want_input_grad) {
      const auto w = layout.view(params, d.weight);
      Matrix next = grad_out * w;
      grad_out = std::move(next);
    }
  }
  return want_input_grad ? grad_out : Matrix{};
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace milcheck::nn
