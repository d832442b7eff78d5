#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sist/checkpoint.hpp"
#include "sist/dataset.hpp"
#include "sist/evaluate.hpp"
#include "sist/metrics.hpp"
#include "sist/train.hpp"

using namespace sist;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sist_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

Image constant_image(int w, double v) {
  Image img = Image::square(w);
  std::fill(img.values.begin(), img.values.end(), v);
  return img;
}

DatasetSpec tiny_spec(int count, double dose, std::uint64_t seed = 3) {
  DatasetSpec s;
  s.count = count;
  s.dose_fraction = dose;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("psnr") {
  const std::vector<double> ref(100, 0.5);
  CHECK(psnr(ref, ref) == kPsnrCap);
  std::vector<double> off = ref;
  for (double& v : off) v += 0.1;  // MSE 0.01
  CHECK(psnr(off, ref) == doctest::Approx(20.0).epsilon(1e-12));
  for (double& v : off) v = 0.51;  // MSE 1e-4
  CHECK(psnr(off, ref) == doctest::Approx(40.0).epsilon(1e-10));
  CHECK_THROWS_AS(psnr(std::vector<double>(3), std::vector<double>(4)), std::domain_error);
}

TEST_CASE("rmse") {
  const std::vector<double> ref = gradcheck::uniform(64, 1, 0, 1);
  CHECK(rmse(ref, ref) == 0.0);
  std::vector<double> off = ref;
  for (double& v : off) v += 0.1;
  CHECK(rmse(off, ref) == doctest::Approx(0.1).epsilon(1e-12));
  for (std::uint64_t seed = 2; seed < 12; ++seed) {
    const auto pred = gradcheck::uniform(64, seed, 0, 1);
    CHECK(psnr(pred, ref) == doctest::Approx(-20.0 * std::log10(rmse(pred, ref))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rmse(std::vector<double>(3), std::vector<double>(4)), std::domain_error);
}

TEST_CASE("ssim") {
  const Image a = rasterize(make_phantom(2), 32);
  CHECK(ssim(a.values, a.values, 32, 32) == doctest::Approx(1.0).epsilon(1e-15));

  Image ramp = Image::square(24), neg = Image::square(24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c) {
      ramp.at(r, c) = (c + 0.5) / 24.0;
      neg.at(r, c) = 1.0 - ramp.at(r, c);
    }
  CHECK(ssim(neg.values, ramp.values, 24, 24) < 0.0);

  // Luminance-only closed form; value from the numpy oracle.
  const Image lo = constant_image(16, 0.5), hi = constant_image(16, 0.6);
  CHECK(ssim(hi.values, lo.values, 16, 16) == doctest::Approx(0.983609244386166).epsilon(1e-12));

  CHECK_THROWS_AS(ssim(std::vector<double>(100), std::vector<double>(100), 10, 10), std::domain_error);
  CHECK_THROWS_AS(ssim(std::vector<double>(144), std::vector<double>(144), 12, 11), std::domain_error);
}

TEST_CASE("compare normalizes by the reference maximum") {
  const Image ref = rasterize(make_phantom(4), 32);
  Image pred = ref;
  for (double& v : pred.values) v += 0.05;
  Image ref10 = ref, pred10 = pred;
  for (double& v : ref10.values) v *= 10;
  for (double& v : pred10.values) v *= 10;
  const Quality q = compare(pred, ref), q10 = compare(pred10, ref10);
  CHECK(q.psnr == doctest::Approx(q10.psnr).epsilon(1e-12));
  CHECK(q.ssim == doctest::Approx(q10.ssim).epsilon(1e-12));
  CHECK(q.rmse == doctest::Approx(q10.rmse).epsilon(1e-12));
  CHECK(q.psnr == doctest::Approx(-20.0 * std::log10(q.rmse)).epsilon(1e-12));
}

TEST_CASE("mean and population std") {
  const MeanStd m = mean_std(std::vector<double>{1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
}

TEST_CASE("full-dose dataset reproduces the clean data") {
  const fs::path dir = scratch("fulldose");
  const auto samples = gen_dataset(tiny_spec(1, 1.0), dir);
  REQUIRE(samples.size() == 1);
  const Sample& s = samples[0];
  CHECK(s.s_ld.values == s.s_nd.values);
  CHECK(s.i_ld.values == fbp(s.s_nd, FilterKind::ramp, 64).values);
  CHECK(s.i_nd.values == rasterize(make_phantom(s.phantom_seed), 64).values);
  fs::remove_all(dir);
}

TEST_CASE("dataset generation is byte-reproducible") {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  gen_dataset(tiny_spec(2, 0.1), a);
  gen_dataset(tiny_spec(2, 0.1), b);
  const auto ta = tree(a), tb = tree(b);
  CHECK(ta.size() == 9);
  CHECK(ta == tb);

  const Dataset loaded = load_dataset(a);
  REQUIRE(loaded.samples.size() == 2);
  CHECK(loaded.manifest.get_int("count") == 2);
  CHECK(loaded.manifest.get_double("dose_fraction") == 0.1);
  const Sample fresh = make_sample(tiny_spec(2, 0.1), 1);
  CHECK(loaded.samples[1].phantom_seed == fresh.phantom_seed);
  for (std::size_t k = 0; k < fresh.s_ld.values.size(); ++k)
    CHECK(loaded.samples[1].s_ld.values[k] == static_cast<double>(static_cast<float>(fresh.s_ld.values[k])));
  fs::remove_all(a);
  fs::remove_all(b);
  CHECK_THROWS_AS(load_dataset(a), std::runtime_error);
}

TEST_CASE("lower dose gives a noisier reconstruction") {
  const Sample lo = make_sample(tiny_spec(1, 0.05), 0);
  const Sample hi = make_sample(tiny_spec(1, 0.2), 0);
  CHECK(lo.phantom_seed == hi.phantom_seed);
  CHECK(lo.i_nd.values == hi.i_nd.values);
  CHECK(rmse(lo.i_ld.values, lo.i_nd.values) > rmse(hi.i_ld.values, hi.i_nd.values));
}

TEST_CASE("dataset parameter validation") {
  CHECK_THROWS_AS(gen_dataset(tiny_spec(0, 0.1), scratch("empty")), std::invalid_argument);
  fs::remove_all(fs::temp_directory_path() / "sist_harness_empty");
}

TEST_CASE("evaluation over directories") {
  const fs::path pred = scratch("eval_pred"), ref = scratch("eval_ref");
  Image r1 = constant_image(16, 0.5);
  r1.at(3, 3) = 1.0;
  const Image r2 = rasterize(make_phantom(5), 16);
  write_image(ref / "a_nd.img1", r1);
  write_image(ref / "b_nd.img1", r2);

  SUBCASE("identical inputs") {
    write_image(pred / "a_img.img1", r1);
    write_image(pred / "b_img.img1", r2);
    const MetricReport rep = evaluate_dirs(pred, ref, "_img.img1", "_nd.img1");
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.missing.empty());
    for (const auto& row : rep.rows) {
      CHECK(row.domain == "image");
      CHECK(row.quality.psnr == kPsnrCap);
      CHECK(row.quality.ssim == doctest::Approx(1.0));
      CHECK(row.quality.rmse == 0.0);
    }
  }
  SUBCASE("constant offset, aggregate and a missing pair") {
    Image p1 = r1;
    for (double& v : p1.values) v += 0.1;
    write_image(pred / "a_img.img1", p1);
    fs::create_directories(ref);
    write_image(ref / "c_nd.img1", r2);
    Image p2 = r2;
    p2.values[7] += 0.3;
    write_image(pred / "b_img.img1", p2);
    const MetricReport rep = evaluate_dirs(pred, ref, "_img.img1", "_nd.img1");
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].id == "a");
    CHECK(rep.rows[0].quality.rmse == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(rep.psnr.mean == doctest::Approx((rep.rows[0].quality.psnr + rep.rows[1].quality.psnr) / 2));
    CHECK(rep.rmse.mean == doctest::Approx((rep.rows[0].quality.rmse + rep.rows[1].quality.rmse) / 2));
    REQUIRE(rep.missing.size() == 1);
    CHECK(rep.missing[0] == "c");
    for (const auto& row : rep.rows)
      CHECK(row.quality.psnr == doctest::Approx(-20.0 * std::log10(row.quality.rmse)).epsilon(1e-12));

    std::ostringstream csv;
    write_report_csv(csv, rep);
    const std::string text = csv.str();
    CHECK(text.rfind("id,domain,psnr,ssim,rmse\na,image,", 0) == 0);
    CHECK(text.find("\nmean,image,") != std::string::npos);
    CHECK(text.find("\nstd,image,") != std::string::npos);
    CHECK(text.find("\nmissing,c,,,\n") != std::string::npos);
  }
  fs::remove_all(pred);
  fs::remove_all(ref);
}

TEST_CASE("training configuration file") {
  TrainConfig c;
  c.model.embed_dim = 16;
  c.model.heads = 2;
  c.train_dir = "/data/train";
  c.out_dir = "/data/run";
  c.epochs = 7;
  c.schedule = {2e-4, 0.5, 3};
  c.seed = 99;
  KeyValues kv;
  c.write(kv);
  const TrainConfig back = TrainConfig::read(KeyValues::parse(kv.serialize()));
  CHECK(back.model == c.model);
  CHECK(back.train_dir == c.train_dir);
  CHECK(back.out_dir == c.out_dir);
  CHECK(back.epochs == 7);
  CHECK(back.schedule.initial == 2e-4);
  CHECK(back.schedule.period == 3);
  CHECK(back.seed == 99);

  const TrainConfig rel = TrainConfig::read(KeyValues::parse("train_dir=data\nout_dir=run\n"), "/base");
  CHECK(rel.train_dir == fs::path("/base/data"));
  CHECK(rel.out_dir == fs::path("/base/run"));
}

TEST_CASE("short training runs") {
  SistConfig m;
  m.embed_dim = 16;
  m.heads = 2;
  m.encoder_layers = 1;
  m.mlp_hidden = 16;
  m.image_size = 32;
  DatasetSpec spec = tiny_spec(1, 0.1);
  spec.image_size = 32;
  const std::vector<Sample> data{make_sample(spec, 0)};

  TrainConfig cfg;
  cfg.model = m;
  cfg.epochs = 1;
  cfg.checkpoint_every = 1;

  SUBCASE("one epoch on one sample") {
    cfg.out_dir = scratch("train_one");
    nn::SistModel<float> model(m);
    const TrainResult r = train(cfg, model, data, {});
    REQUIRE(r.log.size() == 2);
    CHECK(std::isfinite(r.log[1].train_loss));
    CHECK(fs::exists(cfg.out_dir / "checkpoint_0001.ckpt"));
    CHECK(slurp(cfg.out_dir / "checkpoint_0001.ckpt") == slurp(cfg.out_dir / "model.ckpt"));

    const Checkpoint ckpt = read_checkpoint(cfg.out_dir / "model.ckpt");
    CHECK(ckpt.header.get_int("train.epoch") == 1);
    nn::SistModel<float> copy(SistConfig::read(ckpt.header));
    nn::Adam<float> adam(copy.params());
    restore_checkpoint(ckpt, copy.params(), &adam);
    write_checkpoint(cfg.out_dir / "again.ckpt", copy.params(), &adam, checkpoint_meta(cfg, 1));
    CHECK(slurp(cfg.out_dir / "again.ckpt") == slurp(cfg.out_dir / "model.ckpt"));

    const std::string csv = slurp(cfg.out_dir / "metrics.csv");
    CHECK(csv.rfind(std::string(kMetricsHeader) + "\n0,", 0) == 0);
    fs::remove_all(cfg.out_dir);
  }
  SUBCASE("equal seeds give identical logs") {
    cfg.epochs = 2;
    const std::vector<Sample> two{make_sample(spec, 0), make_sample(spec, 1)};
    cfg.batch_size = 1;
    std::string logs[2];
    for (int run = 0; run < 2; ++run) {
      cfg.out_dir = scratch("train_seed" + std::to_string(run));
      nn::SistModel<float> model(m);
      train(cfg, model, two, {});
      logs[run] = slurp(cfg.out_dir / "metrics.csv");
      CHECK(slurp(cfg.out_dir / "model.ckpt").size() > 0);
      fs::remove_all(cfg.out_dir);
    }
    CHECK(logs[0] == logs[1]);
  }
  SUBCASE("empty dataset is rejected") {
    cfg.out_dir.clear();
    nn::SistModel<float> model(m);
    CHECK_THROWS_AS(train(cfg, model, {}, {}), std::invalid_argument);
  }
}

}  // TEST_SUITE
