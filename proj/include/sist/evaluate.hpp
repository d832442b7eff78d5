#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sist/metrics.hpp"

namespace sist {

struct PairScore {
  std::string id;
  std::string domain;  // "image" or "sinogram"
  Quality quality;
};

struct MetricReport {
  std::vector<PairScore> rows;        // sorted by id
  std::vector<std::string> missing;   // reference ids with no prediction
  MeanStd psnr;
  MeanStd ssim;
  MeanStd rmse;
};

/// Scores every `<id><ref_suffix>` file in ref_dir against
/// `<id><pred_suffix>` in pred_dir. Files ending in .img1 are images,
/// .sgm1 sinograms.
MetricReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                           const std::string& pred_suffix, const std::string& ref_suffix);

MetricReport summarize(std::vector<PairScore> rows);

/// Per-sample rows, then `mean` and `std` rows, then one `missing` row per
/// absent prediction.
void write_report_csv(std::ostream& out, const MetricReport& report);

}  // namespace sist
