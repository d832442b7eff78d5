#include "sist/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sist/checkpoint.hpp"

namespace sist {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be nonnegative");
  if (!(schedule.initial > 0.0) || !(schedule.decay > 0.0) || schedule.period < 1)
    throw std::invalid_argument("learning-rate schedule must be positive");
}

void TrainConfig::write(KeyValues& kv) const {
  model.write(kv);
  kv.set("train_dir", train_dir.string());
  if (!val_dir.empty()) kv.set("val_dir", val_dir.string());
  kv.set("out_dir", out_dir.string());
  kv.set("epochs", epochs);
  kv.set("batch_size", batch_size);
  kv.set("checkpoint_every", checkpoint_every);
  kv.set("lr", schedule.initial);
  kv.set("lr_decay", schedule.decay);
  kv.set("lr_period", schedule.period);
  kv.set("seed", std::to_string(seed));
}

TrainConfig TrainConfig::read(const KeyValues& kv, const fs::path& base) {
  TrainConfig c;
  c.model = SistConfig::read(kv);
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };
  if (kv.contains("train_dir")) c.train_dir = resolve(kv.get("train_dir"));
  if (kv.contains("val_dir")) c.val_dir = resolve(kv.get("val_dir"));
  if (kv.contains("out_dir")) c.out_dir = resolve(kv.get("out_dir"));
  c.epochs = static_cast<int>(kv.get_int_or("epochs", c.epochs));
  c.batch_size = static_cast<int>(kv.get_int_or("batch_size", c.batch_size));
  c.checkpoint_every = static_cast<int>(kv.get_int_or("checkpoint_every", c.checkpoint_every));
  c.schedule.initial = kv.get_double_or("lr", c.schedule.initial);
  c.schedule.decay = kv.get_double_or("lr_decay", c.schedule.decay);
  c.schedule.period = static_cast<int>(kv.get_int_or("lr_period", c.schedule.period));
  if (kv.contains("seed")) c.seed = std::stoull(kv.get("seed"));
  c.validate();
  return c;
}

std::string format_record(const EpochRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.6f,%.6f,%.8f,%.6f,%.6f,%.8f", r.epoch, r.lr, r.train_loss,
                r.val_sino.psnr, r.val_sino.ssim, r.val_sino.rmse, r.val_image.psnr, r.val_image.ssim,
                r.val_image.rmse);
  return buf;
}

TensorSample to_tensors(const Sample& s) {
  return {nn::as_tensor<float>(s.s_ld), nn::as_tensor<float>(s.s_nd), nn::as_tensor<float>(s.i_ld),
          nn::as_tensor<float>(s.i_nd)};
}

double mean_loss(const nn::SistModel<float>& model, const std::vector<TensorSample>& data) {
  double acc = 0.0;
  for (const auto& t : data) {
    nn::LossTerms terms;
    model.total_loss(model.forward(t.s_ld, t.i_ld), t.s_nd, t.i_nd, t.i_ld, &terms);
    acc += terms.total;
  }
  return acc / static_cast<double>(data.size());
}

Denoised denoise(const nn::SistModel<float>& model, const Sinogram& s_ld, const Image& i_ld) {
  const SistConfig& cfg = model.config();
  if (!(s_ld.geometry == cfg.geometry))
    throw std::invalid_argument("denoise: sinogram geometry does not match the model");
  if (i_ld.width != cfg.image_size || i_ld.height != cfg.image_size)
    throw std::invalid_argument("denoise: image size does not match the model");
  const auto out = model.forward(nn::as_tensor<float>(s_ld), nn::as_tensor<float>(i_ld));
  Denoised d;
  d.s_hat = Sinogram(s_ld.geometry);
  std::copy(out.s_hat.values().begin(), out.s_hat.values().end(), d.s_hat.values.begin());
  d.i_noise = Image::square(cfg.image_size);
  std::copy(out.i_noise.values().begin(), out.i_noise.values().end(), d.i_noise.values.begin());
  d.i_hat = Image::square(cfg.image_size);
  std::copy(out.i_hat.values().begin(), out.i_hat.values().end(), d.i_hat.values.begin());
  return d;
}

Evaluation evaluate(const nn::SistModel<float>& model, const std::vector<Sample>& data) {
  std::vector<double> sp, ss, sr, ip, is, ir;
  for (const Sample& s : data) {
    const Denoised d = denoise(model, s.s_ld, s.i_ld);
    const Quality qs = compare(d.s_hat, s.s_nd);
    const Quality qi = compare(d.i_hat, s.i_nd);
    sp.push_back(qs.psnr);
    ss.push_back(qs.ssim);
    sr.push_back(qs.rmse);
    ip.push_back(qi.psnr);
    is.push_back(qi.ssim);
    ir.push_back(qi.rmse);
  }
  Evaluation e;
  e.sino = {mean_std(sp).mean, mean_std(ss).mean, mean_std(sr).mean};
  e.image = {mean_std(ip).mean, mean_std(is).mean, mean_std(ir).mean};
  return e;
}

KeyValues checkpoint_meta(const TrainConfig& cfg, int epoch) {
  KeyValues meta;
  cfg.model.write(meta);
  meta.set("train.epoch", epoch);
  meta.set("train.lr", cfg.schedule.initial);
  meta.set("train.lr_decay", cfg.schedule.decay);
  meta.set("train.lr_period", cfg.schedule.period);
  meta.set("train.batch_size", cfg.batch_size);
  meta.set("train.seed", std::to_string(cfg.seed));
  return meta;
}

TrainResult train(const TrainConfig& cfg, nn::SistModel<float>& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  if (!(cfg.model == model.config())) throw std::invalid_argument("train: config does not match model");
  const std::vector<Sample>& val = val_set.empty() ? train_set : val_set;
  for (const auto* set : {&train_set, &val_set})
    for (const Sample& s : *set)
      if (!(s.s_ld.geometry == cfg.model.geometry) || s.i_ld.width != cfg.model.image_size ||
          s.i_ld.height != cfg.model.image_size)
        throw std::invalid_argument("train: sample geometry or image size does not match the model config");

  std::vector<TensorSample> data;
  for (const Sample& s : train_set) data.push_back(to_tensors(s));

  std::ofstream csv;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    csv.open(cfg.out_dir / "metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error((cfg.out_dir / "metrics.csv").string() + ": cannot open for writing");
    csv << kMetricsHeader << "\n";
  }

  TrainResult result;
  auto record = [&](int epoch, double lr) {
    EpochRecord r;
    r.epoch = epoch;
    r.lr = lr;
    r.train_loss = mean_loss(model, data);
    const Evaluation e = evaluate(model, val);
    r.val_sino = e.sino;
    r.val_image = e.image;
    result.log.push_back(r);
    if (csv.is_open()) csv << format_record(r) << "\n" << std::flush;
    if (on_epoch) on_epoch(r);
  };

  nn::Adam<float> adam(model.params());
  record(0, cfg.schedule.at(0));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.schedule.at(epoch - 1);
    std::mt19937_64 gen(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const float inv = 1.0f / static_cast<float>(stop - start);
      model.params().zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const TensorSample& t = data[order[b]];
        const auto out = model.forward(t.s_ld, t.i_ld);
        nn::scale(model.total_loss(out, t.s_nd, t.i_nd, t.i_ld), inv).backward();
      }
      adam.step(lr);
    }
    record(epoch, lr);
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%04d.ckpt", epoch);
      write_checkpoint(cfg.out_dir / name, model.params(), &adam, checkpoint_meta(cfg, epoch));
    }
  }
  if (!cfg.out_dir.empty())
    write_checkpoint(cfg.out_dir / "model.ckpt", model.params(), &adam, checkpoint_meta(cfg, cfg.epochs));
  return result;
}

}  // namespace sist
