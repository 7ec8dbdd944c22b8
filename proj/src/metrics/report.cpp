#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "braindec/metrics.hpp"
#include "braindec/npy.hpp"

namespace braindec::metrics {

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw PathError("image directory '" + dir.string() + "' does not exist");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

MetricReport build_report(std::span<const ImageRgb> recon, std::span<const ImageRgb> gt,
                          const std::map<std::string, std::pair<FeatureSet, FeatureSet>>& features,
                          std::vector<std::string> sample_names) {
  const std::size_t n = gt.size();
  std::string counts = "recon images=" + std::to_string(recon.size()) + ", gt images=" + std::to_string(gt.size());
  bool consistent = recon.size() == n;
  for (const auto& name : kIdentificationExtractors) {
    if (!features.count(name)) throw ConsistencyError("missing features for extractor '" + name + "'");
  }
  for (const auto& name : kDistanceExtractors) {
    if (!features.count(name)) throw ConsistencyError("missing features for extractor '" + name + "'");
  }
  for (const auto& [name, pair] : features) {
    counts += ", " + name + " recon=" + std::to_string(pair.first.n_samples()) + " gt=" +
              std::to_string(pair.second.n_samples());
    consistent = consistent && pair.first.n_samples() == n && pair.second.n_samples() == n;
  }
  if (!consistent) throw ConsistencyError("sample counts disagree: " + counts);
  if (sample_names.empty()) {
    for (std::size_t i = 0; i < n; ++i) sample_names.push_back(std::to_string(i));
  }

  MetricReport report;
  report.n_samples = n;
  report.sample_names = std::move(sample_names);
  auto& pc = report.per_sample["pixcorr"];
  auto& ss = report.per_sample["ssim"];
  for (std::size_t i = 0; i < n; ++i) {
    pc.push_back(pixcorr(recon[i], gt[i]));
    ss.push_back(ssim(recon[i], gt[i]));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  report.pixcorr = mean(pc);
  report.ssim = mean(ss);

  for (const auto& name : kIdentificationExtractors) {
    const auto& [r, g] = features.at(name);
    auto res = identification(r, g, 2);
    report.per_sample[name] = std::move(res.per_sample);
    report.excluded[name] = res.excluded;
    if (name == "alexnet2") report.alexnet2 = res.accuracy;
    if (name == "alexnet5") report.alexnet5 = res.accuracy;
    if (name == "inception") report.inception = res.accuracy;
    if (name == "clip") report.clip = res.accuracy;
  }
  for (const auto& name : kDistanceExtractors) {
    const auto& [r, g] = features.at(name);
    auto res = distances(r, g);
    report.per_sample[name] = std::move(res.per_sample);
    report.excluded[name] = res.excluded;
    if (name == "effnet") report.effnet_dist = res.mean;
    if (name == "swav") report.swav_dist = res.mean;
  }
  return report;
}

MetricReport build_report(const std::filesystem::path& recon_dir, const std::filesystem::path& gt_dir,
                          const PathManifest& feature_files) {
  std::map<std::string, std::pair<FeatureSet, FeatureSet>> features;
  std::vector<std::string> all = kIdentificationExtractors;
  all.insert(all.end(), kDistanceExtractors.begin(), kDistanceExtractors.end());
  for (const auto& name : all) {
    const auto r = feature_files.find(name + "_recon");
    const auto g = feature_files.find(name + "_gt");
    if (r == feature_files.end() || g == feature_files.end()) {
      throw ConsistencyError("feature manifest lacks '" + name + "_recon' / '" + name + "_gt'");
    }
    if (!std::filesystem::exists(r->second) || !std::filesystem::exists(g->second)) {
      throw ConsistencyError("feature file missing for extractor '" + name + "'");
    }
    features.emplace(name, std::make_pair(FeatureSet(name, npy::read(r->second)), FeatureSet(name, npy::read(g->second))));
  }

  const auto recon_files = list_pngs(recon_dir);
  const auto gt_files = list_pngs(gt_dir);
  if (recon_files.size() != gt_files.size()) {
    throw ConsistencyError("sample counts disagree: recon images=" + std::to_string(recon_files.size()) +
                           ", gt images=" + std::to_string(gt_files.size()));
  }
  std::vector<ImageRgb> recon, gt;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < gt_files.size(); ++i) {
    recon.push_back(read_png(recon_files[i]));
    gt.push_back(read_png(gt_files[i]));
    names.push_back(gt_files[i].filename().string());
  }
  return build_report(recon, gt, features, std::move(names));
}

void write_report_json(const MetricReport& report, const std::filesystem::path& path) {
  nlohmann::json j = {
      {"format", "braindec.metric_report"},
      {"version", 1},
      {"n_samples", report.n_samples},
      {"metrics",
       {{"pixcorr", report.pixcorr},
        {"ssim", report.ssim},
        {"alexnet2", report.alexnet2},
        {"alexnet5", report.alexnet5},
        {"inception", report.inception},
        {"clip", report.clip},
        {"effnet_dist", report.effnet_dist},
        {"swav_dist", report.swav_dist}}},
      {"excluded", report.excluded},
      {"protocol",
       {{"resize", "bilinear, pixel-center aligned, edge clamped; reconstruction resized to ground-truth size"},
        {"pixcorr", "pearson over flattened RGB"},
        {"ssim", {{"channel", "luma BT.601 (0.299, 0.587, 0.114)"}, {"window", 11}, {"sigma", 1.5},
                  {"k1", 0.01}, {"k2", 0.03}, {"dynamic_range", 255}, {"aggregation", "mean over valid window positions"}}},
        {"identification", "exhaustive 2-way over all distractors, pearson similarity, ties score 0.5"},
        {"distance", "mean correlation distance 1 - pearson"}}},
  };
  std::ofstream out(path);
  if (!out) throw PathError("cannot write report '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void write_per_sample_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PathError("cannot write '" + path.string() + "'");
  const std::vector<std::string> cols{"pixcorr", "ssim", "alexnet2", "alexnet5", "inception", "clip", "effnet", "swav"};
  out << "sample";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < report.n_samples; ++i) {
    out << report.sample_names[i];
    for (const auto& c : cols) {
      out << ',';
      const auto it = report.per_sample.find(c);
      if (it != report.per_sample.end() && std::isfinite(it->second[i])) out << it->second[i];
    }
    out << '\n';
  }
}

}  // namespace braindec::metrics
