#include "sist/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "sist/kernels.hpp"

namespace sist::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) s += (k ? "," : "") + std::to_string(shape[k]);
  return s + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || static_cast<int>(shape.size()) > kMaxRank)
    throw std::domain_error("tensor rank must be 1.." + std::to_string(kMaxRank));
  for (int d : shape)
    if (d < 1) throw std::domain_error("tensor dimensions must be positive: " + shape_string(shape));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw std::domain_error(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                            shape_string(b));
}

void require_rank(const Shape& s, int rank, const char* op) {
  if (static_cast<int>(s.size()) != rank)
    throw std::domain_error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                            shape_string(s));
}

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                      BackwardFn<T> fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(fn);
  }
  return Tensor<T>(std::move(node));
}

// Gradient slot of parent k, or nullptr when it does not need one.
template <typename T>
T* parent_grad(Node<T>& self, std::size_t k) {
  Node<T>& p = *self.parents[k];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

// Splits a shape around `axis` into (outer, axis extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit a;
  for (int k = 0; k < axis; ++k) a.outer *= s[k];
  a.extent = s[axis];
  for (std::size_t k = axis + 1; k < s.size(); ++k) a.inner *= s[k];
  return a;
}

}  // namespace

// ---- Tensor ----

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape(shape);
  if (numel(shape) != values.size())
    throw std::domain_error("tensor: " + std::to_string(values.size()) +
                            " values do not fill shape " + shape_string(shape));
  node_ = std::make_shared<Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  check_shape(shape);
  return Tensor(shape, std::vector<T>(numel(shape), T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  check_shape(shape);
  return Tensor(shape, std::vector<T>(numel(shape), value), requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw std::domain_error("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (size() != 1) throw std::domain_error("backward() needs a scalar, got " + shape_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS: parents land before children in `order`.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
}

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] + b.values()[k];
  return make_result<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (T* g = parent_grad(self, p))
        for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] - b.values()[k];
  return make_result<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k];
    if (T* g = parent_grad(self, 1))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] -= self.grad[k];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] * b.values()[k];
  return make_result<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k] * bv[k];
    if (T* g = parent_grad(self, 1))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k] * av[k];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = factor * a.values()[k];
  return make_result<T>(a.shape(), std::move(v), {a}, [factor](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += factor * self.grad[k];
  });
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  require_rank(a.shape(), 2, "add_row_bias");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  if (bias.size() != static_cast<std::size_t>(cols))
    throw std::domain_error("add_row_bias: bias length does not match columns");
  std::vector<T> v(a.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      v[static_cast<std::size_t>(r) * cols + c] = a.values()[static_cast<std::size_t>(r) * cols + c] + bias.values()[c];
  return make_result<T>(a.shape(), std::move(v), {a, bias}, [rows, cols](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k];
    if (T* g = parent_grad(self, 1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) g[c] += self.grad[static_cast<std::size_t>(r) * cols + c];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const int n = a.dim(0);
  const int k = a.dim(1);
  const int m = b.dim(1);
  if (b.dim(0) != k)
    throw std::domain_error("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                            shape_string(b.shape()));
  std::vector<T> v(static_cast<std::size_t>(n) * m);
  kernels::omp::gemm(false, false, n, k, m, a.values().data(), b.values().data(), v.data(), false);
  return make_result<T>({n, m}, std::move(v), {a, b}, [n, k, m](Node<T>& self) {
    const T* av = self.parents[0]->value.data();
    const T* bv = self.parents[1]->value.data();
    if (T* g = parent_grad(self, 0))  // dA = dC B^T
      kernels::omp::gemm(false, true, n, m, k, self.grad.data(), bv, g, true);
    if (T* g = parent_grad(self, 1))  // dB = A^T dC
      kernels::omp::gemm(true, false, k, n, m, av, self.grad.data(), g, true);
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  std::vector<T> v(a.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      v[static_cast<std::size_t>(c) * rows + r] = a.values()[static_cast<std::size_t>(r) * cols + c];
  return make_result<T>({cols, rows}, std::move(v), {a}, [rows, cols](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          g[static_cast<std::size_t>(r) * cols + c] += self.grad[static_cast<std::size_t>(c) * rows + r];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  check_shape(shape);
  if (numel(shape) != a.size())
    throw std::domain_error("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  std::vector<T> v(a.values().begin(), a.values().end());
  return make_result<T>(shape, std::move(v), {a}, [](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) g[k] += self.grad[k];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw std::domain_error("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) throw std::domain_error("concat: bad axis");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) throw std::domain_error("concat: rank mismatch");
    for (std::size_t d = 0; d < probe.size(); ++d)
      if (static_cast<int>(d) != axis && probe[d] != first[d])
        throw std::domain_error("concat: shape mismatch " + shape_string(probe) + " vs " + shape_string(first));
    out_shape[axis] += probe[axis];
    extents.push_back(static_cast<std::size_t>(probe[axis]));
  }
  const AxisSplit split = split_axis(out_shape, axis);
  std::vector<T> v(numel(out_shape));
  std::size_t base = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].values();
    const std::size_t block = extents[p] * split.inner;
    for (std::size_t o = 0; o < split.outer; ++o)
      std::copy_n(src.begin() + o * block, block, v.begin() + o * split.extent * split.inner + base);
    base += block;
  }
  return make_result<T>(out_shape, std::move(v), parts, [split, extents](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const std::size_t block = extents[p] * split.inner;
      if (T* g = parent_grad(self, p))
        for (std::size_t o = 0; o < split.outer; ++o)
          for (std::size_t q = 0; q < block; ++q)
            g[o * block + q] += self.grad[o * split.extent * split.inner + offset + q];
      offset += block;
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int start, int length) {
  const Shape& s = a.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) throw std::domain_error("slice: bad axis");
  if (start < 0 || length < 1 || start + length > s[axis])
    throw std::domain_error("slice: range out of bounds for " + shape_string(s));
  const AxisSplit split = split_axis(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t block = static_cast<std::size_t>(length) * split.inner;
  const std::size_t skip = static_cast<std::size_t>(start) * split.inner;
  std::vector<T> v(numel(out_shape));
  for (std::size_t o = 0; o < split.outer; ++o)
    std::copy_n(a.values().begin() + o * split.extent * split.inner + skip, block, v.begin() + o * block);
  return make_result<T>(out_shape, std::move(v), {a}, [split, block, skip](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t o = 0; o < split.outer; ++o)
        for (std::size_t q = 0; q < block; ++q)
          g[o * split.extent * split.inner + skip + q] += self.grad[o * block + q];
  });
}

// ---- reductions and nonlinearities ----

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T x : a.values()) acc += x;
  return make_result<T>({1}, {acc}, {a}, [](Node<T>& self) {
    if (T* g = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t k = 0; k < n; ++k) g[k] += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a.values()[k] > T(0) ? a.values()[k] : T(0);
  return make_result<T>(a.shape(), std::move(v), {a}, [](Node<T>& self) {
    const auto& x = self.parents[0]->value;
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k)
        if (x[k] > T(0)) g[k] += self.grad[k];
  });
}

template <typename T>
Tensor<T> softmax_lastaxis(const Tensor<T>& a) {
  const std::size_t width = static_cast<std::size_t>(a.shape().back());
  const std::size_t rows = a.size() / width;
  std::vector<T> v(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.values().data() + r * width;
    T* y = v.data() + r * width;
    const T peak = *std::max_element(x, x + width);
    T total = T(0);
    for (std::size_t c = 0; c < width; ++c) total += (y[c] = std::exp(x[c] - peak));
    for (std::size_t c = 0; c < width; ++c) y[c] /= total;
  }
  return make_result<T>(a.shape(), std::move(v), {a}, [rows, width](Node<T>& self) {
    if (T* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = self.value.data() + r * width;
        const T* gy = self.grad.data() + r * width;
        T dot = T(0);
        for (std::size_t c = 0; c < width; ++c) dot += gy[c] * y[c];
        for (std::size_t c = 0; c < width; ++c) g[r * width + c] += y[c] * (gy[c] - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm_lastaxis(const Tensor<T>& a, T eps) {
  const std::size_t width = static_cast<std::size_t>(a.shape().back());
  const std::size_t rows = a.size() / width;
  std::vector<T> v(a.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.values().data() + r * width;
    T mu = T(0);
    for (std::size_t c = 0; c < width; ++c) mu += x[c];
    mu /= static_cast<T>(width);
    T var = T(0);
    for (std::size_t c = 0; c < width; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<T>(width);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < width; ++c) v[r * width + c] = (x[c] - mu) * inv_std[r];
  }
  return make_result<T>(a.shape(), std::move(v), {a}, [rows, width, inv_std](Node<T>& self) {
    if (T* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = self.value.data() + r * width;
        const T* gy = self.grad.data() + r * width;
        T mean_g = T(0);
        T mean_gy = T(0);
        for (std::size_t c = 0; c < width; ++c) {
          mean_g += gy[c];
          mean_gy += gy[c] * y[c];
        }
        mean_g /= static_cast<T>(width);
        mean_gy /= static_cast<T>(width);
        for (std::size_t c = 0; c < width; ++c)
          g[r * width + c] += inv_std[r] * (gy[c] - mean_g - y[c] * mean_gy);
      }
    }
  });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  T acc = T(0);
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::abs(a.values()[k] - b.values()[k]);
  const T inv_n = T(1) / static_cast<T>(a.size());
  return make_result<T>({1}, {acc * inv_n}, {a, b}, [inv_n](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const T scale_g = self.grad[0] * inv_n;
    auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < av.size(); ++k) g[k] += scale_g * sign(av[k] - bv[k]);
    if (T* g = parent_grad(self, 1))
      for (std::size_t k = 0; k < av.size(); ++k) g[k] -= scale_g * sign(av[k] - bv[k]);
  });
}

// ---- convolution and resampling ----

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x.shape(), 3, "conv1d");
  require_rank(weight.shape(), 3, "conv1d weight");
  const int n = x.dim(0);
  const int cin = x.dim(1);
  const int len = x.dim(2);
  const int cout = weight.dim(0);
  const int k = weight.dim(2);
  if (weight.dim(1) != cin) throw std::domain_error("conv1d: channel mismatch");
  if (k % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
  if (bias.size() != static_cast<std::size_t>(cout)) throw std::domain_error("conv1d: bias size");
  const int pad = k / 2;
  std::vector<T> v(static_cast<std::size_t>(n) * cout * len);
  const T* xv = x.values().data();
  const T* wv = weight.values().data();
  for (int s = 0; s < n; ++s)
    for (int co = 0; co < cout; ++co) {
      T* out = v.data() + (static_cast<std::size_t>(s) * cout + co) * len;
      for (int t = 0; t < len; ++t) out[t] = bias.values()[co];
      for (int ci = 0; ci < cin; ++ci) {
        const T* in = xv + (static_cast<std::size_t>(s) * cin + ci) * len;
        for (int q = 0; q < k; ++q) {
          const T w = wv[(static_cast<std::size_t>(co) * cin + ci) * k + q];
          const int off = q - pad;
          for (int t = std::max(0, -off); t < std::min(len, len - off); ++t) out[t] += w * in[t + off];
        }
      }
    }
  return make_result<T>({n, cout, len}, std::move(v), {x, weight, bias},
                        [n, cin, len, cout, k, pad](Node<T>& self) {
    const T* xv = self.parents[0]->value.data();
    const T* wv = self.parents[1]->value.data();
    T* gx = parent_grad(self, 0);
    T* gw = parent_grad(self, 1);
    T* gb = parent_grad(self, 2);
    for (int s = 0; s < n; ++s)
      for (int co = 0; co < cout; ++co) {
        const T* go = self.grad.data() + (static_cast<std::size_t>(s) * cout + co) * len;
        if (gb)
          for (int t = 0; t < len; ++t) gb[co] += go[t];
        for (int ci = 0; ci < cin; ++ci) {
          const std::size_t in_off = (static_cast<std::size_t>(s) * cin + ci) * len;
          for (int q = 0; q < k; ++q) {
            const std::size_t widx = (static_cast<std::size_t>(co) * cin + ci) * k + q;
            const int off = q - pad;
            const int t0 = std::max(0, -off);
            const int t1 = std::min(len, len - off);
            if (gw) {
              T acc = T(0);
              for (int t = t0; t < t1; ++t) acc += go[t] * xv[in_off + t + off];
              gw[widx] += acc;
            }
            if (gx)
              for (int t = t0; t < t1; ++t) gx[in_off + t + off] += wv[widx] * go[t];
          }
        }
      }
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x.shape(), 3, "conv2d");
  require_rank(weight.shape(), 4, "conv2d weight");
  kernels::ConvShape s;
  s.cin = x.dim(0);
  s.height = x.dim(1);
  s.width = x.dim(2);
  s.cout = weight.dim(0);
  s.ksize = weight.dim(2);
  if (weight.dim(1) != s.cin) throw std::domain_error("conv2d: channel mismatch");
  if (weight.dim(3) != s.ksize) throw std::domain_error("conv2d: kernel must be square");
  if (s.ksize % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
  if (bias.size() != static_cast<std::size_t>(s.cout)) throw std::domain_error("conv2d: bias size");
  std::vector<T> v(static_cast<std::size_t>(s.cout) * s.height * s.width);
  kernels::omp::conv2d_forward(s, x.values().data(), weight.values().data(), bias.values().data(), v.data());
  return make_result<T>({s.cout, s.height, s.width}, std::move(v), {x, weight, bias}, [s](Node<T>& self) {
    const T* xv = self.parents[0]->value.data();
    const T* wv = self.parents[1]->value.data();
    if (T* gx = parent_grad(self, 0)) kernels::omp::conv2d_backward_input(s, self.grad.data(), wv, gx);
    T* gw = parent_grad(self, 1);
    T* gb = parent_grad(self, 2);
    if (gw) {
      kernels::omp::conv2d_backward_weight(s, self.grad.data(), xv, gw, gb);
    } else if (gb) {
      const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
      for (int co = 0; co < s.cout; ++co)
        for (std::size_t q = 0; q < plane; ++q) gb[co] += self.grad[co * plane + q];
    }
  });
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "avg_pool2");
  const int c = x.dim(0);
  const int h = x.dim(1);
  const int w = x.dim(2);
  if (h % 2 || w % 2) throw std::invalid_argument("avg_pool2: spatial size must be even");
  const int oh = h / 2;
  const int ow = w / 2;
  std::vector<T> v(static_cast<std::size_t>(c) * oh * ow);
  const T* xv = x.values().data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int z = 0; z < ow; ++z) {
        const std::size_t base = (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * z;
        v[(static_cast<std::size_t>(ch) * oh + y) * ow + z] =
            T(0.25) * (xv[base] + xv[base + 1] + xv[base + w] + xv[base + w + 1]);
      }
  return make_result<T>({c, oh, ow}, std::move(v), {x}, [c, h, w, oh, ow](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
          for (int z = 0; z < ow; ++z) {
            const T d = T(0.25) * self.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + z];
            const std::size_t base = (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * z;
            g[base] += d;
            g[base + 1] += d;
            g[base + w] += d;
            g[base + w + 1] += d;
          }
  });
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  require_rank(x.shape(), 3, "upsample2");
  const int c = x.dim(0);
  const int h = x.dim(1);
  const int w = x.dim(2);
  const int oh = 2 * h;
  const int ow = 2 * w;
  std::vector<T> v(static_cast<std::size_t>(c) * oh * ow);
  const T* xv = x.values().data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int z = 0; z < ow; ++z)
        v[(static_cast<std::size_t>(ch) * oh + y) * ow + z] = xv[(static_cast<std::size_t>(ch) * h + y / 2) * w + z / 2];
  return make_result<T>({c, oh, ow}, std::move(v), {x}, [c, h, w, oh, ow](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
          for (int z = 0; z < ow; ++z)
            g[(static_cast<std::size_t>(ch) * h + y / 2) * w + z / 2] +=
                self.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + z];
  });
}

template <typename T>
Tensor<T> external_loss(const Tensor<T>& x, const ExternalLoss& fn) {
  std::vector<double> in(x.values().begin(), x.values().end());
  auto [value, gradient] = fn(in);
  if (gradient.size() != x.size()) throw std::domain_error("external_loss: gradient size mismatch");
  std::vector<T> grad(gradient.begin(), gradient.end());
  return make_result<T>({1}, {static_cast<T>(value)}, {x}, [grad = std::move(grad)](Node<T>& self) {
    if (T* g = parent_grad(self, 0))
      for (std::size_t k = 0; k < grad.size(); ++k) g[k] += self.grad[0] * grad[k];
  });
}

#define SIST_INSTANTIATE(T)                                                                 \
  template class Tensor<T>;                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                            \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> transpose(const Tensor<T>&);                                           \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                            \
  template Tensor<T> slice(const Tensor<T>&, int, int, int);                                \
  template Tensor<T> sum(const Tensor<T>&);                                                 \
  template Tensor<T> mean(const Tensor<T>&);                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                \
  template Tensor<T> softmax_lastaxis(const Tensor<T>&);                                    \
  template Tensor<T> layer_norm_lastaxis(const Tensor<T>&, T);                              \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> avg_pool2(const Tensor<T>&);                                           \
  template Tensor<T> upsample2(const Tensor<T>&);                                           \
  template Tensor<T> external_loss(const Tensor<T>&, const ExternalLoss&);

SIST_INSTANTIATE(float)
SIST_INSTANTIATE(double)
#undef SIST_INSTANTIATE

}  // namespace sist::nn
