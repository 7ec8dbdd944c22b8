#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "braindec/dataset.hpp"
#include "braindec/image.hpp"
#include "braindec/tensor.hpp"

namespace braindec::metrics {

/// Pearson correlation; throws DegenerateInputError when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Correlation of the flattened RGB vectors. `recon` is first resized to gt's size.
double pixcorr(const ImageRgb& recon, const ImageRgb& gt);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Luma SSIM with a Gaussian window, averaged over all window positions that
/// fit inside the image. `recon` is resized to gt's size first.
double ssim(const ImageRgb& recon, const ImageRgb& gt, const SsimParams& params = {});
/// Same on precomputed single-channel planes of equal size.
double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height,
                  const SsimParams& params = {});

/// n_samples x d feature matrix from one metric network.
struct FeatureSet {
  std::string extractor;
  Tensor features;

  FeatureSet(std::string extractor, Tensor features);
  std::size_t n_samples() const { return features.dim(0); }
  std::size_t dim() const { return features.dim(1); }
};

/// corr(a_i, b_j) for all i, j, computed block-wise in double.
Eigen::MatrixXd correlation_matrix(const Tensor& a, const Tensor& b);

struct IdentificationResult {
  double accuracy = 0.0;
  /// Per-sample fraction of distractors beaten; NaN for excluded samples.
  std::vector<double> per_sample;
  std::size_t excluded = 0;
};

/// Exhaustive 2-way identification: for each i and every j != i, 1 if
/// corr(recon_i, gt_i) > corr(recon_i, gt_j), 0.5 on an exact tie. Samples
/// with a constant feature row are dropped (with a warning) from both roles.
IdentificationResult identification(const FeatureSet& recon, const FeatureSet& gt, int n = 2);
double nway_identification(const FeatureSet& recon, const FeatureSet& gt, int n = 2);

struct DistanceResult {
  double mean = 0.0;
  std::vector<double> per_sample;
  std::size_t excluded = 0;
};

/// Mean correlation distance 1 - corr(recon_i, gt_i).
DistanceResult distances(const FeatureSet& recon, const FeatureSet& gt);
double feature_distance(const FeatureSet& recon, const FeatureSet& gt);

inline const std::vector<std::string> kIdentificationExtractors{"alexnet2", "alexnet5", "inception", "clip"};
inline const std::vector<std::string> kDistanceExtractors{"effnet", "swav"};

struct MetricReport {
  double pixcorr = 0.0;
  double ssim = 0.0;
  double alexnet2 = 0.0;
  double alexnet5 = 0.0;
  double inception = 0.0;
  double clip = 0.0;
  double effnet_dist = 0.0;
  double swav_dist = 0.0;
  std::size_t n_samples = 0;

  std::vector<std::string> sample_names;
  /// Per-sample values keyed by metric name, each of length n_samples.
  std::map<std::string, std::vector<double>> per_sample;
  std::map<std::string, std::size_t> excluded;
};

/// PNGs are paired by sorted filename. `features` maps "<extractor>_recon" and
/// "<extractor>_gt" to NPY files for all six extractors.
MetricReport build_report(const std::filesystem::path& recon_dir, const std::filesystem::path& gt_dir,
                          const PathManifest& features);

/// Report assembly from in-memory inputs.
MetricReport build_report(std::span<const ImageRgb> recon, std::span<const ImageRgb> gt,
                          const std::map<std::string, std::pair<FeatureSet, FeatureSet>>& features,
                          std::vector<std::string> sample_names = {});

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

void write_report_json(const MetricReport& report, const std::filesystem::path& path);
void write_per_sample_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace braindec::metrics
