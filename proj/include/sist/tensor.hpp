#pragma once

// Dense reverse-mode autodiff. A Tensor is a shared handle to a graph node;
// ops on tensors that require gradients record a backward rule, and
// Tensor::backward() replays those rules once each in reverse topological
// order, summing contributions where a value fans out.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sist::nn {

using Shape = std::vector<int>;

inline constexpr int kMaxRank = 4;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  /// In-place access for optimizers and initializers; bypasses the graph.
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  /// Seeds d(this)/d(this) = 1 and propagates. Throws std::domain_error unless
  /// this tensor holds exactly one element.
  void backward() const;

  /// Same values, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

// ---- elementwise and structural ----

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
/// a [n, m] + bias [m] broadcast over rows.
template <typename T> Tensor<T> add_row_bias(const Tensor<T>& a, const Tensor<T>& bias);
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, const Shape& shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, int start, int length);

// ---- reductions and nonlinearities ----

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> softmax_lastaxis(const Tensor<T>& a);
/// Zero-mean unit-variance over the last axis (no affine part).
template <typename T> Tensor<T> layer_norm_lastaxis(const Tensor<T>& a, T eps = T(1e-5));
/// mean |a - b|
template <typename T> Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);

// ---- convolution and resampling ----

/// x [n, cin, len], weight [cout, cin, k], bias [cout] -> [n, cout, len].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
/// x [cin, h, w], weight [cout, cin, k, k], bias [cout] -> [cout, h, w].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
/// 2x2 mean pooling of [c, h, w] with even h, w.
template <typename T> Tensor<T> avg_pool2(const Tensor<T>& x);
/// Nearest-neighbour 2x upsampling of [c, h, w].
template <typename T> Tensor<T> upsample2(const Tensor<T>& x);

/// Scalar loss evaluated outside the graph: `fn` returns the value and the
/// gradient with respect to x (flattened, double precision).
using ExternalLoss = std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;
template <typename T> Tensor<T> external_loss(const Tensor<T>& x, const ExternalLoss& fn);

}  // namespace sist::nn
