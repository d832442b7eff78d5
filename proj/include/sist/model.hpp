#pragma once

#include <cstdint>
#include <string>

#include "sist/geometry.hpp"
#include "sist/io.hpp"
#include "sist/nn.hpp"
#include "sist/structure.hpp"

namespace sist {

/// Architecture and loss weights of the two-domain denoiser.
struct SistConfig {
  FanGeometry geometry = FanGeometry::parallel_beam(36, 33, 2.0 / 32);
  int embed_dim = 64;       // D'
  int heads = 4;
  int encoder_layers = 2;
  int head_layers = 2;      // n, used by both head and tail
  int mlp_hidden = 128;     // encoder MLP width
  bool pre_norm = false;    // layer-normalize before the encoder projection
  int tail_blocks = 1;
  int tail_hidden = 8;
  int image_size = 64;
  int noise_channels = 4;   // width of the per-view 1D embedding
  int recon_blocks = 1;
  int recon_hidden = 8;
  int unet_depth = 2;
  int unet_base = 8;
  double weight_sino = 1.0;
  double weight_global = 1.0;
  double weight_local = 1.0;
  double weight_image = 1.0;
  double weight_noise = 1.0;
  std::uint64_t seed = 1;

  static SistConfig desk();
  /// Clinical-scale dimensions. Representable, not exercised at desk scale.
  static SistConfig full();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  void write(KeyValues& kv, const std::string& prefix = "model.") const;
  /// Missing keys keep their desk defaults.
  static SistConfig read(const KeyValues& kv, const std::string& prefix = "model.");

  bool operator==(const SistConfig&) const = default;
};

namespace nn {

template <typename T>
struct SistOutputs {
  Tensor<T> s_hat;    // [P, D]
  Tensor<T> i_noise;  // [W, W]
  Tensor<T> i_hat;    // [W, W]
};

struct LossTerms {
  double sino = 0.0;
  double sisl = 0.0;
  double image = 0.0;
  double noise = 0.0;
  double total = 0.0;
};

template <typename T>
class SistModel {
 public:
  explicit SistModel(const SistConfig& cfg);

  SistModel(const SistModel&) = delete;
  SistModel& operator=(const SistModel&) = delete;

  const SistConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const ConjugateMap& conjugate_map() const { return map_; }

  /// [P, D] -> [P, D'] through n shared (linear, ReLU) blocks.
  Tensor<T> st_head(const Tensor<T>& s_ld) const;
  /// Adds positional embeddings, then runs the encoder stack.
  Tensor<T> st_encoder(const Tensor<T>& h) const;
  /// (Z + H) -> n (linear, ReLU) blocks to width D -> residual refinement.
  Tensor<T> st_tail(const Tensor<T>& z, const Tensor<T>& h) const;
  /// Maps the sinogram residual S_ld - S_hat to an image-domain noise
  /// estimate [W, W].
  Tensor<T> noise_to_image(const Tensor<T>& s_ld, const Tensor<T>& s_hat) const;
  /// U-Net applied to I_ld - I_noise.
  Tensor<T> refine_image(const Tensor<T>& i_ld, const Tensor<T>& i_noise) const;

  SistOutputs<T> forward(const Tensor<T>& s_ld, const Tensor<T>& i_ld) const;

  /// L1(S_hat, S_nd) + SISL(S_hat, S_nd) + L1(I_hat, I_nd) + L1(I_noise, I_ld - I_nd),
  /// each scaled by its config weight. L1 terms are mean-reduced.
  Tensor<T> total_loss(const SistOutputs<T>& out, const Tensor<T>& s_nd, const Tensor<T>& i_nd,
                       const Tensor<T>& i_ld, LossTerms* terms = nullptr) const;

  const Tensor<T>& positional_embedding() const { return positional_; }

 private:
  SistConfig cfg_;
  ConjugateMap map_;
  ParamStore<T> store_;
  std::vector<Linear<T>> head_;
  Tensor<T> positional_;  // [P, D']
  std::vector<EncoderLayer<T>> encoder_;
  std::vector<Linear<T>> tail_;
  std::vector<ResidualBlock2d<T>> tail_blocks_;
  Conv1d<T> noise_embed_;
  Conv1d<T> noise_merge_;
  Linear<T> view_to_image_;
  std::vector<ResidualBlock2d<T>> recon_blocks_;
  UNet<T> unet_;
};

/// Sinogram or image values as a 2D tensor.
template <typename T>
Tensor<T> as_tensor(const Sinogram& sino, bool requires_grad = false);
template <typename T>
Tensor<T> as_tensor(const Image& image, bool requires_grad = false);

}  // namespace nn
}  // namespace sist
