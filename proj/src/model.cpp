#include "sist/model.hpp"

#include <stdexcept>

namespace sist {

SistConfig SistConfig::desk() { return SistConfig{}; }

SistConfig SistConfig::full() {
  SistConfig c;
  c.geometry = FanGeometry::exact_fan(1152, 737, 1, 2.0);
  // 1024 is not divisible by 6 heads; 1020 is the nearest width that is.
  c.embed_dim = 1020;
  c.heads = 6;
  c.encoder_layers = 6;
  c.head_layers = 2;
  c.mlp_hidden = 2 * c.embed_dim;
  c.tail_blocks = 2;
  c.tail_hidden = 32;
  c.image_size = 512;
  c.noise_channels = 16;
  c.recon_blocks = 2;
  c.recon_hidden = 32;
  c.unet_depth = 4;
  c.unet_base = 32;
  return c;
}

void SistConfig::validate() const {
  try {
    geometry.validate();
  } catch (const std::domain_error& e) {
    throw std::invalid_argument(std::string("model geometry: ") + e.what());
  }
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(heads, "heads");
  positive(head_layers, "head_layers");
  positive(mlp_hidden, "mlp_hidden");
  positive(tail_hidden, "tail_hidden");
  positive(image_size, "image_size");
  positive(noise_channels, "noise_channels");
  positive(recon_hidden, "recon_hidden");
  positive(unet_depth, "unet_depth");
  positive(unet_base, "unet_base");
  if (encoder_layers < 0) throw std::invalid_argument("encoder_layers must be nonnegative");
  if (tail_blocks < 0 || recon_blocks < 0) throw std::invalid_argument("block counts must be nonnegative");
  if (embed_dim % heads != 0)
    throw std::invalid_argument("embed_dim " + std::to_string(embed_dim) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  if (image_size < 8 || image_size % (1 << unet_depth) != 0)
    throw std::invalid_argument("image_size must be at least 8 and a multiple of 2^unet_depth");
  if (geometry.num_views < 3 || geometry.num_detectors < 3)
    throw std::invalid_argument("model needs at least 3 views and 3 detectors");
  for (double w : {weight_sino, weight_global, weight_local, weight_image, weight_noise})
    if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be nonnegative");
}

void SistConfig::write(KeyValues& kv, const std::string& p) const {
  write_geometry(kv, geometry, p + "geometry.");
  kv.set(p + "embed_dim", embed_dim);
  kv.set(p + "heads", heads);
  kv.set(p + "encoder_layers", encoder_layers);
  kv.set(p + "head_layers", head_layers);
  kv.set(p + "mlp_hidden", mlp_hidden);
  kv.set(p + "pre_norm", pre_norm ? 1 : 0);
  kv.set(p + "tail_blocks", tail_blocks);
  kv.set(p + "tail_hidden", tail_hidden);
  kv.set(p + "image_size", image_size);
  kv.set(p + "noise_channels", noise_channels);
  kv.set(p + "recon_blocks", recon_blocks);
  kv.set(p + "recon_hidden", recon_hidden);
  kv.set(p + "unet_depth", unet_depth);
  kv.set(p + "unet_base", unet_base);
  kv.set(p + "weight_sino", weight_sino);
  kv.set(p + "weight_global", weight_global);
  kv.set(p + "weight_local", weight_local);
  kv.set(p + "weight_image", weight_image);
  kv.set(p + "weight_noise", weight_noise);
  kv.set(p + "seed", std::to_string(seed));
}

SistConfig SistConfig::read(const KeyValues& kv, const std::string& p) {
  SistConfig c;
  if (kv.contains(p + "geometry.num_views")) c.geometry = read_geometry(kv, p + "geometry.");
  auto get = [&](const char* key, int fallback) {
    return static_cast<int>(kv.get_int_or(p + key, fallback));
  };
  c.embed_dim = get("embed_dim", c.embed_dim);
  c.heads = get("heads", c.heads);
  c.encoder_layers = get("encoder_layers", c.encoder_layers);
  c.head_layers = get("head_layers", c.head_layers);
  c.mlp_hidden = get("mlp_hidden", 2 * c.embed_dim);
  c.pre_norm = get("pre_norm", c.pre_norm ? 1 : 0) != 0;
  c.tail_blocks = get("tail_blocks", c.tail_blocks);
  c.tail_hidden = get("tail_hidden", c.tail_hidden);
  c.image_size = get("image_size", c.image_size);
  c.noise_channels = get("noise_channels", c.noise_channels);
  c.recon_blocks = get("recon_blocks", c.recon_blocks);
  c.recon_hidden = get("recon_hidden", c.recon_hidden);
  c.unet_depth = get("unet_depth", c.unet_depth);
  c.unet_base = get("unet_base", c.unet_base);
  c.weight_sino = kv.get_double_or(p + "weight_sino", c.weight_sino);
  c.weight_global = kv.get_double_or(p + "weight_global", c.weight_global);
  c.weight_local = kv.get_double_or(p + "weight_local", c.weight_local);
  c.weight_image = kv.get_double_or(p + "weight_image", c.weight_image);
  c.weight_noise = kv.get_double_or(p + "weight_noise", c.weight_noise);
  if (kv.contains(p + "seed")) c.seed = std::stoull(kv.get(p + "seed"));
  c.validate();
  return c;
}

namespace nn {

namespace {

// Starting bias of the tail's last (ReLU) layer. At zero, detector columns
// whose weight row starts negative never fire and never recover.
constexpr double kTailOutputBias = 0.25;

const SistConfig& checked(const SistConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

template <typename T>
SistModel<T>::SistModel(const SistConfig& cfg)
    : cfg_(checked(cfg)), map_(cfg.geometry), store_(cfg.seed) {
  const int P = cfg_.geometry.num_views;
  const int D = cfg_.geometry.num_detectors;
  const int E = cfg_.embed_dim;
  const int W = cfg_.image_size;
  for (int k = 0; k < cfg_.head_layers; ++k)
    head_.emplace_back(store_, "head." + std::to_string(k), k == 0 ? D : E, E);
  positional_ = store_.add("encoder.positional", {P, E}, Init::uniform_fan_in, E);
  for (int k = 0; k < cfg_.encoder_layers; ++k)
    encoder_.emplace_back(store_, "encoder.layer" + std::to_string(k), E, cfg_.heads, cfg_.mlp_hidden,
                          cfg_.pre_norm);
  for (int k = 0; k < cfg_.head_layers; ++k)
    tail_.emplace_back(store_, "tail." + std::to_string(k), E, k + 1 == cfg_.head_layers ? D : E);
  for (T& b : tail_.back().bias.mutable_values()) b = static_cast<T>(kTailOutputBias);
  for (int k = 0; k < cfg_.tail_blocks; ++k)
    tail_blocks_.emplace_back(store_, "tail.block" + std::to_string(k), 1, cfg_.tail_hidden);
  noise_embed_ = Conv1d<T>(store_, "recon.embed", 1, cfg_.noise_channels, 3);
  noise_merge_ = Conv1d<T>(store_, "recon.merge", cfg_.noise_channels, 1, 3);
  view_to_image_ = Linear<T>(store_, "recon.view_to_image", P * D, W * W);
  for (int k = 0; k < cfg_.recon_blocks; ++k)
    recon_blocks_.emplace_back(store_, "recon.block" + std::to_string(k), 1, cfg_.recon_hidden);
  unet_ = UNet<T>(store_, "refine.unet", 1, cfg_.unet_base, cfg_.unet_depth);
}

template <typename T>
Tensor<T> SistModel<T>::st_head(const Tensor<T>& s_ld) const {
  const Shape want{cfg_.geometry.num_views, cfg_.geometry.num_detectors};
  if (s_ld.shape() != want)
    throw std::invalid_argument("st_head: expected sinogram " + shape_string(want) + ", got " +
                                shape_string(s_ld.shape()));
  Tensor<T> h = s_ld;
  for (const auto& layer : head_) h = relu(layer(h));
  return h;
}

template <typename T>
Tensor<T> SistModel<T>::st_encoder(const Tensor<T>& h) const {
  Tensor<T> z = add(h, positional_);
  for (const auto& layer : encoder_) z = layer(z);
  return z;
}

template <typename T>
Tensor<T> SistModel<T>::st_tail(const Tensor<T>& z, const Tensor<T>& h) const {
  Tensor<T> s = add(z, h);
  for (const auto& layer : tail_) s = relu(layer(s));
  const int P = cfg_.geometry.num_views;
  const int D = cfg_.geometry.num_detectors;
  s = reshape(s, {1, P, D});
  for (const auto& block : tail_blocks_) s = block(s);
  return reshape(s, {P, D});
}

template <typename T>
Tensor<T> SistModel<T>::noise_to_image(const Tensor<T>& s_ld, const Tensor<T>& s_hat) const {
  const int P = cfg_.geometry.num_views;
  const int D = cfg_.geometry.num_detectors;
  const int W = cfg_.image_size;
  Tensor<T> r = reshape(sub(s_ld, s_hat), {P, 1, D});
  r = noise_merge_(relu(noise_embed_(r)));
  Tensor<T> img = reshape(view_to_image_(reshape(r, {1, P * D})), {1, W, W});
  for (const auto& block : recon_blocks_) img = block(img);
  return reshape(img, {W, W});
}

template <typename T>
Tensor<T> SistModel<T>::refine_image(const Tensor<T>& i_ld, const Tensor<T>& i_noise) const {
  const int W = cfg_.image_size;
  const Shape want{W, W};
  if (i_ld.shape() != want || i_noise.shape() != want)
    throw std::invalid_argument("refine_image: expected images of shape " + shape_string(want));
  return reshape(unet_(reshape(sub(i_ld, i_noise), {1, W, W})), {W, W});
}

template <typename T>
SistOutputs<T> SistModel<T>::forward(const Tensor<T>& s_ld, const Tensor<T>& i_ld) const {
  SistOutputs<T> out;
  const Tensor<T> h = st_head(s_ld);
  out.s_hat = st_tail(st_encoder(h), h);
  out.i_noise = noise_to_image(s_ld, out.s_hat);
  out.i_hat = refine_image(i_ld, out.i_noise);
  return out;
}

template <typename T>
Tensor<T> SistModel<T>::total_loss(const SistOutputs<T>& out, const Tensor<T>& s_nd,
                                   const Tensor<T>& i_nd, const Tensor<T>& i_ld,
                                   LossTerms* terms) const {
  const Tensor<T> sino = l1_loss(out.s_hat, s_nd);
  const Tensor<T> image = l1_loss(out.i_hat, i_nd);
  const Tensor<T> noise = l1_loss(out.i_noise, sub(i_ld, i_nd).detach());
  Tensor<T> total = add(scale(sino, T(cfg_.weight_sino)),
                        add(scale(image, T(cfg_.weight_image)), scale(noise, T(cfg_.weight_noise))));
  LossTerms t;
  t.sino = sino.item();
  t.image = image.item();
  t.noise = noise.item();
  if (cfg_.weight_global != 0.0 || cfg_.weight_local != 0.0) {
    std::vector<double> reference(s_nd.values().begin(), s_nd.values().end());
    const SislWeights weights{cfg_.weight_global, cfg_.weight_local};
    const ConjugateMap& map = map_;
    const Tensor<T> structure = external_loss<T>(
        out.s_hat, [&reference, &map, weights](std::span<const double> s_hat) {
          LossGrad lg = sisl(s_hat, reference, map, weights);
          return std::make_pair(lg.value, std::move(lg.gradient));
        });
    t.sisl = structure.item();
    total = add(total, structure);
  }
  t.total = total.item();
  if (terms) *terms = t;
  return total;
}

template <typename T>
Tensor<T> as_tensor(const Sinogram& sino, bool requires_grad) {
  return Tensor<T>({sino.views(), sino.detectors()},
                   std::vector<T>(sino.values.begin(), sino.values.end()), requires_grad);
}

template <typename T>
Tensor<T> as_tensor(const Image& image, bool requires_grad) {
  return Tensor<T>({image.height, image.width},
                   std::vector<T>(image.values.begin(), image.values.end()), requires_grad);
}

template class SistModel<float>;
template class SistModel<double>;
template Tensor<float> as_tensor(const Sinogram&, bool);
template Tensor<double> as_tensor(const Sinogram&, bool);
template Tensor<float> as_tensor(const Image&, bool);
template Tensor<double> as_tensor(const Image&, bool);

}  // namespace nn
}  // namespace sist
