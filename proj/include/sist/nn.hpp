#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sist/tensor.hpp"

namespace sist::nn {

enum class Init { uniform_fan_in, zeros };

/// Ordered, named parameter registry. Parameter k is initialized from its own
/// generator seeded by (seed, k), so adding layers at the end never changes
/// the values of earlier ones.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Registers a trainable tensor. Throws std::invalid_argument on a
  /// duplicate path.
  Tensor<T> add(const std::string& path, const Shape& shape, Init init, int fan_in);

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor<T>>>& entries() { return entries_; }
  /// nullptr when absent.
  const Tensor<T>* find(const std::string& path) const;
  std::size_t parameter_count() const;
  void zero_grad();
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// y = x W + b for x [n, in].
template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& path, int in, int out);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Same-padded 1D cross-correlation over x [n, cin, len].
template <typename T>
struct Conv1d {
  Tensor<T> weight;  // [cout, cin, k]
  Tensor<T> bias;

  Conv1d() = default;
  Conv1d(ParamStore<T>& store, const std::string& path, int cin, int cout, int k,
         Init init = Init::uniform_fan_in);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Same-padded 2D cross-correlation over x [cin, h, w].
template <typename T>
struct Conv2d {
  Tensor<T> weight;  // [cout, cin, k, k]
  Tensor<T> bias;

  Conv2d() = default;
  Conv2d(ParamStore<T>& store, const std::string& path, int cin, int cout, int k,
         Init init = Init::uniform_fan_in);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// x + conv_b(relu(conv_a(x))), 3x3 kernels.
template <typename T>
struct ResidualBlock2d {
  Conv2d<T> conv_a;
  Conv2d<T> conv_b;

  ResidualBlock2d() = default;
  ResidualBlock2d(ParamStore<T>& store, const std::string& path, int channels, int hidden);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Self-attention over the rows of x [P, dim] split into `heads` heads.
template <typename T>
struct MultiHeadAttention {
  Linear<T> query;
  Linear<T> key;
  Linear<T> value;
  Linear<T> output;
  int heads = 1;

  MultiHeadAttention() = default;
  /// Throws std::invalid_argument unless dim is divisible by heads.
  MultiHeadAttention(ParamStore<T>& store, const std::string& path, int dim, int heads);
  /// When `weights` is given it receives one [P, P] attention matrix per head.
  Tensor<T> operator()(const Tensor<T>& x, std::vector<Tensor<T>>* weights = nullptr) const;
};

/// One encoder block: q = proj(norm?(z)); z' = MSA(q) + z; out = MLP(z') + z'.
/// `proj` is a learned linear map; `pre_norm` additionally applies a
/// parameter-free layer normalization in front of it.
template <typename T>
struct EncoderLayer {
  Linear<T> proj;
  MultiHeadAttention<T> attention;
  Linear<T> mlp_in;
  Linear<T> mlp_out;
  bool pre_norm = false;

  EncoderLayer() = default;
  EncoderLayer(ParamStore<T>& store, const std::string& path, int dim, int heads, int mlp_hidden,
               bool pre_norm);
  Tensor<T> operator()(const Tensor<T>& z) const;
};

/// Encoder-decoder over x [channels, h, w] with 2x average-pool downsampling,
/// nearest upsampling and skip concatenation. The last convolution starts at
/// zero and its output is added to x, so a fresh network is the identity.
template <typename T>
struct UNet {
  struct Level {
    Conv2d<T> down_a;
    Conv2d<T> down_b;
    Conv2d<T> up;  // consumes [upsampled deeper features, skip]
  };
  std::vector<Level> levels;
  Conv2d<T> bottleneck;
  Conv2d<T> head;
  int depth = 0;

  UNet() = default;
  UNet(ParamStore<T>& store, const std::string& path, int channels, int base, int depth);
  /// Throws std::invalid_argument unless h and w are multiples of 2^depth.
  Tensor<T> operator()(const Tensor<T>& x) const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every tensor in a ParamStore.
template <typename T>
class Adam {
 public:
  explicit Adam(ParamStore<T>& store, AdamHyper hyper = {});

  /// Applies one update with learning rate lr using the stored gradients.
  /// Parameters that never received a gradient are treated as g = 0.
  void step(double lr);

  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }
  std::vector<std::vector<T>>& first_moment() { return m_; }
  std::vector<std::vector<T>>& second_moment() { return v_; }
  const std::vector<std::vector<T>>& first_moment() const { return m_; }
  const std::vector<std::vector<T>>& second_moment() const { return v_; }

 private:
  ParamStore<T>* store_;
  AdamHyper hyper_;
  long long t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

/// lr(epoch) = initial * decay^floor(epoch / period).
struct LrSchedule {
  double initial = 1e-5;
  double decay = 0.7;
  int period = 10;

  double at(int epoch) const;
};

}  // namespace sist::nn
