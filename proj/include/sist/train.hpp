#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sist/dataset.hpp"
#include "sist/metrics.hpp"
#include "sist/model.hpp"

namespace sist {

/// Everything a training run needs; read from a `key=value` file.
struct TrainConfig {
  SistConfig model;
  std::filesystem::path train_dir;
  std::filesystem::path val_dir;  // empty: validate on the training set
  std::filesystem::path out_dir = "run";
  int epochs = 200;
  int batch_size = 4;
  int checkpoint_every = 50;  // 0 disables periodic checkpoints
  nn::LrSchedule schedule{3e-3, 0.7, 10};  // desk rate; the full-scale rate is 1e-5
  std::uint64_t seed = 1;     // batch order

  void validate() const;
  void write(KeyValues& kv) const;
  /// Relative dataset and output paths are resolved against `base`.
  static TrainConfig read(const KeyValues& kv, const std::filesystem::path& base = {});
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean total loss over the training set after the epoch
  Quality val_sino;
  Quality val_image;
};

inline constexpr const char* kMetricsHeader =
    "epoch,lr,train_loss,val_sino_psnr,val_sino_ssim,val_sino_rmse,val_img_psnr,val_img_ssim,val_img_rmse";

std::string format_record(const EpochRecord& r);

/// Per-sample tensors in training precision.
struct TensorSample {
  nn::Tensor<float> s_ld, s_nd, i_ld, i_nd;
};

TensorSample to_tensors(const Sample& s);

/// Mean total loss over `data`, no parameter updates.
double mean_loss(const nn::SistModel<float>& model, const std::vector<TensorSample>& data);

struct Evaluation {
  Quality sino;
  Quality image;
};

/// Mean quality of S_hat vs S_nd and I_hat vs I_nd.
Evaluation evaluate(const nn::SistModel<float>& model, const std::vector<Sample>& data);

struct TrainResult {
  std::vector<EpochRecord> log;  // row 0 is the untrained model
};

/// Mini-batch Adam over `train`. Writes `metrics.csv`, periodic
/// `checkpoint_NNNN.ckpt` files and `model.ckpt` into cfg.out_dir unless it
/// is empty. `on_epoch` (optional) sees every row as it is produced.
TrainResult train(const TrainConfig& cfg, nn::SistModel<float>& model, const std::vector<Sample>& train,
                  const std::vector<Sample>& val,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Checkpoint metadata for a model trained with `cfg`.
KeyValues checkpoint_meta(const TrainConfig& cfg, int epoch);

struct Denoised {
  Sinogram s_hat;
  Image i_noise;
  Image i_hat;
};

Denoised denoise(const nn::SistModel<float>& model, const Sinogram& s_ld, const Image& i_ld);

}  // namespace sist
