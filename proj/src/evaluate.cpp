#include "sist/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "sist/io.hpp"

namespace sist {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

PairScore score(const fs::path& pred, const fs::path& ref, const std::string& id) {
  PairScore p;
  p.id = id;
  if (ref.extension() == ".img1") {
    p.domain = "image";
    p.quality = compare(read_image(pred), read_image(ref));
  } else {
    p.domain = "sinogram";
    p.quality = compare(read_sinogram(pred), read_sinogram(ref));
  }
  return p;
}

}  // namespace

MetricReport summarize(std::vector<PairScore> rows) {
  std::sort(rows.begin(), rows.end(), [](const PairScore& a, const PairScore& b) { return a.id < b.id; });
  MetricReport r;
  std::vector<double> p, s, e;
  for (const auto& row : rows) {
    p.push_back(row.quality.psnr);
    s.push_back(row.quality.ssim);
    e.push_back(row.quality.rmse);
  }
  r.psnr = mean_std(p);
  r.ssim = mean_std(s);
  r.rmse = mean_std(e);
  r.rows = std::move(rows);
  return r;
}

MetricReport evaluate_dirs(const fs::path& pred_dir, const fs::path& ref_dir, const std::string& pred_suffix,
                           const std::string& ref_suffix) {
  if (!ends_with(ref_suffix, ".img1") && !ends_with(ref_suffix, ".sgm1"))
    throw std::invalid_argument("reference suffix must end in .img1 or .sgm1");
  if (!fs::is_directory(ref_dir)) throw std::runtime_error(ref_dir.string() + ": not a directory");
  if (!fs::is_directory(pred_dir)) throw std::runtime_error(pred_dir.string() + ": not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(ref_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && ends_with(name, ref_suffix))
      ids.push_back(name.substr(0, name.size() - ref_suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error(ref_dir.string() + ": no files ending in " + ref_suffix);
  std::vector<PairScore> rows;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const fs::path pred = pred_dir / (id + pred_suffix);
    if (!fs::exists(pred)) {
      missing.push_back(id);
      continue;
    }
    rows.push_back(score(pred, ref_dir / (id + ref_suffix), id));
  }
  MetricReport report = summarize(std::move(rows));
  report.missing = std::move(missing);
  return report;
}

void write_report_csv(std::ostream& out, const MetricReport& report) {
  char buf[256];
  out << "id,domain,psnr,ssim,rmse\n";
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.8f\n", r.id.c_str(), r.domain.c_str(), r.quality.psnr,
                  r.quality.ssim, r.quality.rmse);
    out << buf;
  }
  const std::string domain = report.rows.empty() ? "" : report.rows.front().domain;
  std::snprintf(buf, sizeof buf, "mean,%s,%.6f,%.6f,%.8f\n", domain.c_str(), report.psnr.mean, report.ssim.mean,
                report.rmse.mean);
  out << buf;
  std::snprintf(buf, sizeof buf, "std,%s,%.6f,%.6f,%.8f\n", domain.c_str(), report.psnr.std, report.ssim.std,
                report.rmse.std);
  out << buf;
  for (const auto& id : report.missing) out << "missing," << id << ",,,\n";
}

}  // namespace sist
