#include "sist/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sist::nn {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

// ---- ParamStore ----

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& path, const Shape& shape, Init init, int fan_in) {
  if (find(path)) throw std::invalid_argument("duplicate parameter path: " + path);
  std::vector<T> values(numel(shape), T(0));
  if (init == Init::uniform_fan_in) {
    if (fan_in < 1) throw std::invalid_argument("fan_in must be positive for " + path);
    const double bound = std::sqrt(1.0 / fan_in);
    std::mt19937_64 gen(mix64(mix64(seed_) ^ entries_.size()));
    for (T& v : values) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      v = static_cast<T>((2.0 * u - 1.0) * bound);
    }
  }
  Tensor<T> t(shape, std::move(values), true);
  entries_.emplace_back(path, t);
  return t;
}

template <typename T>
const Tensor<T>* ParamStore<T>::find(const std::string& path) const {
  for (const auto& [name, t] : entries_)
    if (name == path) return &t;
  return nullptr;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

// ---- layers ----

template <typename T>
Linear<T>::Linear(ParamStore<T>& store, const std::string& path, int in, int out)
    : weight(store.add(path + ".weight", {in, out}, Init::uniform_fan_in, in)),
      bias(store.add(path + ".bias", {out}, Init::zeros, in)) {}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  return add_row_bias(matmul(x, weight), bias);
}

template <typename T>
Conv1d<T>::Conv1d(ParamStore<T>& store, const std::string& path, int cin, int cout, int k, Init init)
    : weight(store.add(path + ".weight", {cout, cin, k}, init, cin * k)),
      bias(store.add(path + ".bias", {cout}, Init::zeros, cin * k)) {
  if (k % 2 == 0) throw std::invalid_argument(path + ": kernel size must be odd");
}

template <typename T>
Tensor<T> Conv1d<T>::operator()(const Tensor<T>& x) const {
  return conv1d(x, weight, bias);
}

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& store, const std::string& path, int cin, int cout, int k, Init init)
    : weight(store.add(path + ".weight", {cout, cin, k, k}, init, cin * k * k)),
      bias(store.add(path + ".bias", {cout}, Init::zeros, cin * k * k)) {
  if (k % 2 == 0) throw std::invalid_argument(path + ": kernel size must be odd");
}

template <typename T>
Tensor<T> Conv2d<T>::operator()(const Tensor<T>& x) const {
  return conv2d(x, weight, bias);
}

template <typename T>
ResidualBlock2d<T>::ResidualBlock2d(ParamStore<T>& store, const std::string& path, int channels,
                                    int hidden)
    : conv_a(store, path + ".conv_a", channels, hidden, 3),
      conv_b(store, path + ".conv_b", hidden, channels, 3) {}

template <typename T>
Tensor<T> ResidualBlock2d<T>::operator()(const Tensor<T>& x) const {
  return add(x, conv_b(relu(conv_a(x))));
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParamStore<T>& store, const std::string& path, int dim,
                                          int heads_)
    : heads(heads_) {
  if (heads < 1 || dim % heads != 0)
    throw std::invalid_argument(path + ": embedding dim " + std::to_string(dim) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  query = Linear<T>(store, path + ".query", dim, dim);
  key = Linear<T>(store, path + ".key", dim, dim);
  value = Linear<T>(store, path + ".value", dim, dim);
  output = Linear<T>(store, path + ".output", dim, dim);
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& x, std::vector<Tensor<T>>* weights) const {
  const int dim = x.dim(1);
  const int dh = dim / heads;
  const Tensor<T> q = query(x);
  const Tensor<T> k = key(x);
  const Tensor<T> v = value(x);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  if (weights) weights->clear();
  for (int h = 0; h < heads; ++h) {
    const Tensor<T> qh = slice(q, 1, h * dh, dh);
    const Tensor<T> kh = slice(k, 1, h * dh, dh);
    const Tensor<T> vh = slice(v, 1, h * dh, dh);
    const Tensor<T> att = softmax_lastaxis(scale(matmul(qh, transpose(kh)), inv_sqrt));
    if (weights) weights->push_back(att);
    outs.push_back(matmul(att, vh));
  }
  return output(heads == 1 ? outs[0] : concat(outs, 1));
}

template <typename T>
EncoderLayer<T>::EncoderLayer(ParamStore<T>& store, const std::string& path, int dim, int heads,
                              int mlp_hidden, bool pre_norm_)
    : proj(store, path + ".proj", dim, dim),
      attention(store, path + ".attention", dim, heads),
      mlp_in(store, path + ".mlp_in", dim, mlp_hidden),
      mlp_out(store, path + ".mlp_out", mlp_hidden, dim),
      pre_norm(pre_norm_) {}

template <typename T>
Tensor<T> EncoderLayer<T>::operator()(const Tensor<T>& z) const {
  const Tensor<T> q = proj(pre_norm ? layer_norm_lastaxis(z) : z);
  const Tensor<T> mid = add(attention(q), z);
  return add(mlp_out(relu(mlp_in(mid))), mid);
}

template <typename T>
UNet<T>::UNet(ParamStore<T>& store, const std::string& path, int channels, int base, int depth_)
    : depth(depth_) {
  if (depth < 1) throw std::invalid_argument(path + ": depth must be at least 1");
  int in = channels;
  for (int d = 0; d < depth; ++d) {
    const int width = base << d;
    const std::string p = path + ".level" + std::to_string(d);
    Level level;
    level.down_a = Conv2d<T>(store, p + ".down_a", in, width, 3);
    level.down_b = Conv2d<T>(store, p + ".down_b", width, width, 3);
    levels.push_back(std::move(level));
    in = width;
  }
  bottleneck = Conv2d<T>(store, path + ".bottleneck", in, base << depth, 3);
  int deeper = base << depth;
  for (int d = depth - 1; d >= 0; --d) {
    const int width = base << d;
    levels[d].up = Conv2d<T>(store, path + ".level" + std::to_string(d) + ".up", deeper + width, width, 3);
    deeper = width;
  }
  head = Conv2d<T>(store, path + ".head", base, channels, 3, Init::zeros);
}

template <typename T>
Tensor<T> UNet<T>::operator()(const Tensor<T>& x) const {
  const int unit = 1 << depth;
  if (x.dim(1) % unit || x.dim(2) % unit)
    throw std::invalid_argument("unet: spatial size " + shape_string(x.shape()) +
                                " must be a multiple of " + std::to_string(unit));
  std::vector<Tensor<T>> skips;
  Tensor<T> h = x;
  for (int d = 0; d < depth; ++d) {
    h = relu(levels[d].down_b(relu(levels[d].down_a(h))));
    skips.push_back(h);
    h = avg_pool2(h);
  }
  h = relu(bottleneck(h));
  for (int d = depth - 1; d >= 0; --d) h = relu(levels[d].up(concat<T>({upsample2(h), skips[d]}, 0)));
  return add(x, head(h));
}

// ---- Adam ----

template <typename T>
Adam<T>::Adam(ParamStore<T>& store, AdamHyper hyper) : store_(&store), hyper_(hyper) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.second.size(), T(0));
    v_.emplace_back(e.second.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  auto& entries = store_->entries();
  if (entries.size() != m_.size()) throw std::logic_error("adam: parameter set changed after construction");
  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(hyper_.beta1);
  const T b2 = static_cast<T>(hyper_.beta2);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor<T>& param = entries[p].second;
    const auto grad = param.grad();
    auto values = param.mutable_values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const T g = grad.empty() ? T(0) : grad[k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      values[k] = static_cast<T>(values[k] - lr * m_hat / (std::sqrt(v_hat) + hyper_.eps));
    }
  }
}

double LrSchedule::at(int epoch) const {
  if (epoch < 0) throw std::domain_error("learning-rate schedule: negative epoch");
  return initial * std::pow(decay, epoch / period);
}

#define SIST_INSTANTIATE(T)          \
  template class ParamStore<T>;      \
  template struct Linear<T>;         \
  template struct Conv1d<T>;         \
  template struct Conv2d<T>;         \
  template struct ResidualBlock2d<T>; \
  template struct MultiHeadAttention<T>; \
  template struct EncoderLayer<T>;   \
  template struct UNet<T>;           \
  template class Adam<T>;

SIST_INSTANTIATE(float)
SIST_INSTANTIATE(double)
#undef SIST_INSTANTIATE

}  // namespace sist::nn
