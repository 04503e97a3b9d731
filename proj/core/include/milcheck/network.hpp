#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

// Minimal reverse-mode building blocks over a single flat parameter vector.
// Every tensor is a row-major (rows x cols) slice of that vector, so Adam and
// finite-difference checks operate on one contiguous buffer.

namespace milcheck::nn {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstTensor = Eigen::Map<const RowMatrix>;
using Tensor = Eigen::Map<RowMatrix>;

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const noexcept { return rows * cols; }
};

class ParamLayout {
 public:
  /// Appends a tensor and returns its index.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  const std::vector<TensorSpec>& tensors() const noexcept { return tensors_; }
  const TensorSpec& at(std::size_t i) const { return tensors_.at(i); }
  /// Throws std::out_of_range for unknown names.
  const TensorSpec& find(std::string_view name) const;
  Eigen::Index total_size() const noexcept { return total_; }

  ConstTensor view(const Eigen::VectorXd& flat, std::size_t i) const;
  Tensor view(Eigen::VectorXd& flat, std::size_t i) const;

  friend bool operator==(const ParamLayout& a, const ParamLayout& b);

 private:
  std::vector<TensorSpec> tensors_;
  Eigen::Index total_ = 0;
};

enum class Activation { Identity, Tanh, Relu };

/// "identity", "tanh", "relu".
std::string_view to_string(Activation a) noexcept;
/// Throws std::invalid_argument on an unknown name.
Activation parse_activation(std::string_view text);

/// y = act(x W^T + b) over a batch of rows.
struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Activation activation = Activation::Identity;
};

/// Stack of Dense layers. Cache holds the input and each layer's output.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> acts;
  };

  Mlp() = default;
  /// Registers tensors "<prefix><i>.weight" and "<prefix><i>.bias".
  Mlp(ParamLayout& layout, const std::string& prefix, const std::vector<Eigen::Index>& widths,
      bool activate_last, Activation hidden = Activation::Tanh);

  Eigen::Index in_dim() const { return layers_.front().in; }
  Eigen::Index out_dim() const { return layers_.back().out; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }

  const Matrix& forward(const ParamLayout& layout, const Eigen::VectorXd& params,
                        const Eigen::Ref<const Matrix>& x, Cache& cache) const;

  /// Accumulates parameter gradients into `grad` given dL/d(output). Returns
  /// dL/d(input) when `want_input_grad` is set, else an empty matrix.
  Matrix backward(const ParamLayout& layout, const Eigen::VectorXd& params,
                  const Cache& cache, Matrix grad_out, Eigen::VectorXd& grad,
                  bool want_input_grad = false) const;

 private:
  std::vector<Dense> layers_;
};

/// Glorot-uniform weights and zero biases for every tensor whose name ends in
/// ".weight"; "*.vector" tensors are treated as 1 x n weights.
template <class UniformSource>
void glorot_init(const ParamLayout& layout, Eigen::VectorXd& params, UniformSource&& unit) {
  params.setZero(layout.total_size());
  for (std::size_t i = 0; i < layout.tensors().size(); ++i) {
    const auto& t = layout.at(i);
    const bool is_weight = t.name.ends_with(".weight") || t.name.ends_with(".vector");
    if (!is_weight) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      params[t.offset + j] = (2.0 * unit() - 1.0) * limit;
    }
  }
}

/// Adam with bias correction on a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double epsilon);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const noexcept { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

double sigmoid(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

}  // namespace milcheck::nn
