// Command-line front end: phantom generation, projection, noise simulation,
// reconstruction, structure checks, dataset generation, training,
// denoising and evaluation.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include "CLI11.hpp"
#include "sist/checkpoint.hpp"
#include "sist/dataset.hpp"
#include "sist/evaluate.hpp"
#include "sist/io.hpp"
#include "sist/kernels.hpp"
#include "sist/projector.hpp"
#include "sist/structure.hpp"
#include "sist/train.hpp"

namespace fs = std::filesystem;

namespace {

struct GeometryFlags {
  int views = 36;
  int detectors = 33;
  std::string mode = "parallel";
  double spacing = 0.0;  // 0: derived
  int exact_k = 1;
  double radius = 2.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--views", views, "Views over a full turn")->capture_default_str();
    cmd->add_option("--detectors", detectors, "Detector bins (odd)")->capture_default_str();
    cmd->add_option("--mode", mode, "fan | parallel")->capture_default_str();
    cmd->add_option("--spacing", spacing,
                    "Detector pitch (radians in fan mode, length in parallel mode); "
                    "default: k*pi/views for fan, 2/(detectors-1) for parallel");
    cmd->add_option("--exact-k", exact_k, "Fan pitch multiplier k in k*pi/views")->capture_default_str();
    cmd->add_option("--radius", radius, "Source radius (fan mode)")->capture_default_str();
  }

  sist::FanGeometry build() const {
    sist::FanGeometry g;
    if (sist::parse_scan_mode(mode) == sist::ScanMode::fan) {
      g = sist::FanGeometry::exact_fan(views, detectors, exact_k, radius);
    } else {
      g = sist::FanGeometry::parallel_beam(views, detectors, 2.0 / std::max(1, detectors - 1));
    }
    if (spacing > 0.0) g.detector_spacing = spacing;
    g.validate();
    return g;
  }
};

void require_out(const std::string& out, const char* what) {
  if (out.empty()) throw std::invalid_argument(std::string(what) + " needs --out");
}

std::ostream* open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty()) return &std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw std::runtime_error(path + ": cannot open for writing");
  return &file;
}

// Quantiles of |S - S_C| within each view.
void write_structure_report(std::ostream& out, const sist::Sinogram& sino, const sist::Sinogram* ref,
                            sist::ConjugateMode mode) {
  const sist::ConjugateMap map(sino.geometry, mode);
  const auto lc = sist::global_loss(sino.values, map);
  out << "metric,value\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "L_C,%.10g\n", lc.value);
  out << buf;
  if (ref) {
    const auto ls = sist::local_loss(sino, *ref);
    std::snprintf(buf, sizeof buf, "L_S,%.10g\n", ls.value);
    out << buf;
  }
  out << "exact," << (map.exact() ? 1 : 0) << "\n";
  out << "view,q0,q25,q50,q75,q100\n";
  const auto residual = sist::conjugate_residual(sino.values, map);
  const int cols = sino.detectors();
  std::vector<double> row(cols);
  for (int i = 0; i < sino.views(); ++i) {
    for (int c = 0; c < cols; ++c) row[c] = std::abs(residual[static_cast<std::size_t>(i) * cols + c]);
    std::sort(row.begin(), row.end());
    auto q = [&](double f) { return row[static_cast<std::size_t>(f * (cols - 1) + 0.5)]; };
    std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", i, q(0), q(0.25), q(0.5), q(0.75), q(1));
    out << buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sinogram-domain low-dose CT denoising toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");
  app.add_option("--out", out, "Output file or directory");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Rasterize an ellipse phantom (seed 0: Shepp-Logan)");
  int width = 128;
  std::string complexity = "small";
  phantom->add_option("--width", width, "Image width")->capture_default_str();
  phantom->add_option("--complexity", complexity, "small | medium")->capture_default_str();

  // project
  auto* project = app.add_subcommand("project", "Forward-project an image, or a phantom analytically");
  GeometryFlags geo;
  geo.attach(project);
  std::string image_in;
  bool analytic = false;
  project->add_option("--img", image_in, "IMG1 input (numeric projection)");
  project->add_flag("--analytic", analytic, "Project the seeded phantom exactly instead");
  project->add_option("--complexity", complexity, "Phantom complexity for --analytic")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Insert low-dose noise into a sinogram");
  std::string sino_in;
  sist::DoseConfig dose;
  simulate->add_option("--sino", sino_in, "SGM1 input")->required();
  simulate->add_option("--dose", dose.dose_fraction, "Dose fraction a in (0, 1]")->required();
  simulate->add_option("--photons", dose.incident_photons, "Incident photons")->capture_default_str();
  simulate->add_option("--electronic", dose.electronic_noise, "Electronic noise")->capture_default_str();

  // recon
  auto* recon = app.add_subcommand("recon", "Filtered back-projection");
  std::string filter = "ramp";
  recon->add_option("--sino", sino_in, "SGM1 input")->required();
  recon->add_option("--filter", filter, "ramp | hann")->capture_default_str();
  recon->add_option("--width", width, "Output width")->capture_default_str();

  // check-structure
  auto* check = app.add_subcommand("check-structure", "Conjugate and curvature statistics as CSV");
  std::string ref_in;
  bool interpolate = false;
  check->add_option("--sino", sino_in, "SGM1 input")->required();
  check->add_option("--ref", ref_in, "Reference SGM1 for the local loss");
  check->add_flag("--interpolate", interpolate, "Interpolate fractional conjugate views");

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Generate (S_ld, S_nd, I_ld, I_nd) samples");
  GeometryFlags gen_geo;
  gen_geo.attach(gen);
  int count = 8;
  double gen_dose = 0.1;
  int gen_width = 64;
  gen->add_option("--count", count, "Number of samples")->capture_default_str();
  gen->add_option("--dose", gen_dose, "Dose fraction")->capture_default_str();
  gen->add_option("--width", gen_width, "Image width")->capture_default_str();
  gen->add_option("--complexity", complexity, "small | medium")->capture_default_str();
  gen->add_option("--filter", filter, "FBP filter for I_ld")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model from a key=value config");
  std::string config_path;
  train->add_option("--config", config_path, "Training config")->required();

  // denoise
  auto* denoise = app.add_subcommand("denoise", "Run a trained model on one sample");
  std::string model_path, prefix;
  denoise->add_option("--model", model_path, "CKPT1 checkpoint")->required();
  denoise->add_option("--sino", sino_in, "Low-dose SGM1")->required();
  denoise->add_option("--img", image_in, "Low-dose IMG1")->required();
  denoise->add_option("--out-prefix", prefix, "Writes <p>_sino.sgm1, <p>_img.img1, <p>_noise.img1")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against references");
  std::string pred_dir, ref_dir, pred_suffix = "_img.img1", ref_suffix = "_nd.img1";
  eval->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval->add_option("--ref", ref_dir, "Reference directory")->required();
  eval->add_option("--pred-suffix", pred_suffix, "Prediction file suffix")->capture_default_str();
  eval->add_option("--ref-suffix", ref_suffix, "Reference file suffix")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) sist::kernels::omp::set_threads(threads);

    if (phantom->parsed()) {
      require_out(out, "phantom");
      sist::write_image(out, sist::rasterize(sist::make_phantom(seed, sist::parse_complexity(complexity)), width));
    } else if (project->parsed()) {
      require_out(out, "project");
      const sist::FanGeometry g = geo.build();
      if (analytic) {
        sist::write_sinogram(out, sist::analytic_sinogram(sist::make_phantom(seed, sist::parse_complexity(complexity)), g));
      } else {
        if (image_in.empty()) throw std::invalid_argument("project needs --img or --analytic");
        sist::write_sinogram(out, sist::forward_project(sist::read_image(image_in), g));
      }
    } else if (simulate->parsed()) {
      require_out(out, "simulate");
      dose.seed = seed;
      sist::write_sinogram(out, sist::insert_low_dose_noise(sist::read_sinogram(sino_in), dose));
    } else if (recon->parsed()) {
      require_out(out, "recon");
      sist::write_image(out, sist::fbp(sist::read_sinogram(sino_in), sist::parse_filter_kind(filter), width));
    } else if (check->parsed()) {
      const sist::Sinogram sino = sist::read_sinogram(sino_in);
      sist::Sinogram ref;
      if (!ref_in.empty()) ref = sist::read_sinogram(ref_in);
      std::ofstream file;
      write_structure_report(*open_or_stdout(out, file), sino, ref_in.empty() ? nullptr : &ref,
                             interpolate ? sist::ConjugateMode::interpolate : sist::ConjugateMode::truncate);
    } else if (gen->parsed()) {
      require_out(out, "gen-dataset");
      sist::DatasetSpec spec;
      spec.count = count;
      spec.geometry = gen_geo.build();
      spec.image_size = gen_width;
      spec.dose_fraction = gen_dose;
      spec.seed = seed;
      spec.complexity = sist::parse_complexity(complexity);
      spec.filter = sist::parse_filter_kind(filter);
      sist::gen_dataset(spec, out);
    } else if (train->parsed()) {
      const sist::KeyValues kv = sist::KeyValues::load(config_path);
      sist::TrainConfig cfg = sist::TrainConfig::read(kv, fs::path(config_path).parent_path());
      if (!out.empty()) cfg.out_dir = out;
      if (app.count("--seed")) cfg.seed = seed;
      if (cfg.train_dir.empty()) throw std::invalid_argument("config needs train_dir");
      const auto train_set = sist::load_dataset(cfg.train_dir).samples;
      std::vector<sist::Sample> val_set;
      if (!cfg.val_dir.empty()) val_set = sist::load_dataset(cfg.val_dir).samples;
      sist::nn::SistModel<float> model(cfg.model);
      sist::train(cfg, model, train_set, val_set, [](const sist::EpochRecord& r) {
        std::cerr << sist::format_record(r) << "\n";
      });
    } else if (denoise->parsed()) {
      const sist::Checkpoint ckpt = sist::read_checkpoint(model_path);
      sist::nn::SistModel<float> model(sist::SistConfig::read(ckpt.header));
      sist::restore_checkpoint(ckpt, model.params());
      const auto d = sist::denoise(model, sist::read_sinogram(sino_in), sist::read_image(image_in));
      sist::write_sinogram(prefix + "_sino.sgm1", d.s_hat);
      sist::write_image(prefix + "_img.img1", d.i_hat);
      sist::write_image(prefix + "_noise.img1", d.i_noise);
    } else if (eval->parsed()) {
      const auto report = sist::evaluate_dirs(pred_dir, ref_dir, pred_suffix, ref_suffix);
      std::ofstream file;
      sist::write_report_csv(*open_or_stdout(out, file), report);
      if (!report.missing.empty()) {
        for (const auto& id : report.missing) std::cerr << "missing prediction for " << id << "\n";
        return 2;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
