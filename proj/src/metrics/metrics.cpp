#include "braindec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

namespace braindec::metrics {

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("correlation inputs differ in length");
  if (a.empty()) throw DegenerateInputError("correlation of empty vectors is undefined");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInputError("correlation is undefined for a constant input");
  return sab / std::sqrt(saa * sbb);
}

namespace {

ImageRgb matched(const ImageRgb& recon, const ImageRgb& gt) {
  return resize_bilinear(recon, gt.width(), gt.height());
}

std::vector<double> as_doubles(const ImageRgb& img) {
  return {img.pixels().begin(), img.pixels().end()};
}

}  // namespace

double pixcorr(const ImageRgb& recon, const ImageRgb& gt) {
  const ImageRgb r = matched(recon, gt);
  return pearson(as_doubles(r), as_doubles(gt));
}

double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height,
                  const SsimParams& params) {
  const int win = params.window;
  if (win < 1) throw ArgumentError("SSIM window must be positive");
  if (width < win || height < win) {
    throw ArgumentError("image " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than the " +
                        std::to_string(win) + "x" + std::to_string(win) + " SSIM window");
  }
  const auto npx = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (a.size() != npx || b.size() != npx) throw ArgumentError("SSIM planes do not match the stated size");

  std::vector<double> g(static_cast<std::size_t>(win));
  const double centre = (win - 1) / 2.0;
  for (int k = 0; k < win; ++k) g[static_cast<std::size_t>(k)] = std::exp(-(k - centre) * (k - centre) / (2.0 * params.sigma * params.sigma));
  const double gsum = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= gsum;

  const int ow = width - win + 1;
  const int oh = height - win + 1;
  // Horizontal pass over all rows, then vertical pass on valid positions only.
  auto filter = [&](auto&& value) {
    std::vector<double> h(static_cast<std::size_t>(ow) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < win; ++k) s += g[static_cast<std::size_t>(k)] * value(static_cast<std::size_t>(y) * width + x + k);
        h[static_cast<std::size_t>(y) * ow + x] = s;
      }
    std::vector<double> v(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < win; ++k) s += g[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(y + k) * ow + x];
        v[static_cast<std::size_t>(y) * ow + x] = s;
      }
    return v;
  };
  const auto mu_a = filter([&](std::size_t i) { return a[i]; });
  const auto mu_b = filter([&](std::size_t i) { return b[i]; });
  const auto e_aa = filter([&](std::size_t i) { return a[i] * a[i]; });
  const auto e_bb = filter([&](std::size_t i) { return b[i] * b[i]; });
  const auto e_ab = filter([&](std::size_t i) { return a[i] * b[i]; });

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const ImageRgb& recon, const ImageRgb& gt, const SsimParams& params) {
  const ImageRgb r = matched(recon, gt);
  return ssim_plane(luminance(r), luminance(gt), gt.width(), gt.height(), params);
}

// --- Feature metrics --------------------------------------------------------

FeatureSet::FeatureSet(std::string extractor_name, Tensor values)
    : extractor(std::move(extractor_name)), features(std::move(values)) {
  if (features.rank() != 2) {
    throw ConsistencyError("features for '" + extractor + "' must be rank-2, got " + shape_string(features.shape()));
  }
  if (features.dtype() != DType::f32 && features.dtype() != DType::f64) {
    throw ConsistencyError("features for '" + extractor + "' must be floating point");
  }
  for (std::size_t i = 0; i < features.numel(); ++i) {
    if (std::isnan(features.as_double(i))) {
      throw DataError("features for '" + extractor + "' contain NaN (row " + std::to_string(i / features.dim(1)) + ")");
    }
  }
}

namespace {

// Rows [first, first + count) centered and scaled to unit norm; constant rows become zero.
Eigen::MatrixXd normalized_rows(const Tensor& t, std::size_t first, std::size_t count) {
  const std::size_t d = t.dim(1);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t k = 0; k < d; ++k) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = t.as_double((first + r) * d + k);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() -= out.row(r).mean();
    const double norm = out.row(r).norm();
    if (norm > 0.0) out.row(r) /= norm;
  }
  return out;
}

std::vector<double> row_values(const Tensor& t, std::size_t row) {
  const std::size_t d = t.dim(1);
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d; ++k) out[k] = t.as_double(row * d + k);
  return out;
}

std::vector<bool> nonconstant_rows(const Tensor& t) {
  const std::size_t d = t.dim(1);
  std::vector<bool> ok(t.dim(0), false);
  for (std::size_t r = 0; r < ok.size(); ++r) {
    const double first = t.as_double(r * d);
    for (std::size_t k = 1; k < d && !ok[r]; ++k) ok[r] = t.as_double(r * d + k) != first;
  }
  return ok;
}

void check_pair(const FeatureSet& recon, const FeatureSet& gt) {
  if (recon.n_samples() != gt.n_samples() || recon.dim() != gt.dim()) {
    throw ConsistencyError("feature sets for '" + recon.extractor + "' differ in shape: " +
                           shape_string(recon.features.shape()) + " vs " + shape_string(gt.features.shape()));
  }
}

std::vector<bool> usable_samples(const FeatureSet& recon, const FeatureSet& gt, std::size_t& excluded) {
  const auto a = nonconstant_rows(recon.features);
  const auto b = nonconstant_rows(gt.features);
  std::vector<bool> keep(a.size());
  excluded = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    keep[i] = a[i] && b[i];
    if (!keep[i]) ++excluded;
  }
  if (excluded > 0) {
    spdlog::warn("{}: {} sample(s) with a constant feature row excluded", recon.extractor, excluded);
  }
  return keep;
}

}  // namespace

Eigen::MatrixXd correlation_matrix(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ArgumentError("correlation_matrix needs rank-2 inputs of equal width");
  }
  constexpr std::size_t kBlock = 256;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(b.dim(0)));
  for (std::size_t i0 = 0; i0 < a.dim(0); i0 += kBlock) {
    const std::size_t ni = std::min(kBlock, a.dim(0) - i0);
    const Eigen::MatrixXd ra = normalized_rows(a, i0, ni);
    for (std::size_t j0 = 0; j0 < b.dim(0); j0 += kBlock) {
      const std::size_t nj = std::min(kBlock, b.dim(0) - j0);
      out.block(static_cast<Eigen::Index>(i0), static_cast<Eigen::Index>(j0), static_cast<Eigen::Index>(ni),
                static_cast<Eigen::Index>(nj)) = ra * normalized_rows(b, j0, nj).transpose();
    }
  }
  return out;
}

IdentificationResult identification(const FeatureSet& recon, const FeatureSet& gt, int n) {
  if (n != 2) throw ArgumentError("only the exhaustive 2-way protocol is implemented (n=" + std::to_string(n) + ")");
  check_pair(recon, gt);
  IdentificationResult res;
  const auto keep = usable_samples(recon, gt, res.excluded);
  const std::size_t N = keep.size();
  const std::size_t used = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  if (used < 2) throw DegenerateInputError(recon.extractor + ": identification needs at least 2 usable samples");

  const Eigen::MatrixXd C = correlation_matrix(recon.features, gt.features);
  res.per_sample.assign(N, std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!keep[i]) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double own = C(ii, ii);
    double score = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i || !keep[j]) continue;
      const double other = C(ii, static_cast<Eigen::Index>(j));
      score += own > other ? 1.0 : own == other ? 0.5 : 0.0;
    }
    total += score;
    res.per_sample[i] = score / static_cast<double>(used - 1);
  }
  res.accuracy = total / static_cast<double>(used * (used - 1));
  return res;
}

double nway_identification(const FeatureSet& recon, const FeatureSet& gt, int n) {
  return identification(recon, gt, n).accuracy;
}

DistanceResult distances(const FeatureSet& recon, const FeatureSet& gt) {
  check_pair(recon, gt);
  DistanceResult res;
  const auto keep = usable_samples(recon, gt, res.excluded);
  const std::size_t N = keep.size();
  res.per_sample.assign(N, std::numeric_limits<double>::quiet_NaN());
  std::size_t used = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!keep[i]) continue;
    res.per_sample[i] = 1.0 - pearson(row_values(recon.features, i), row_values(gt.features, i));
    total += res.per_sample[i];
    ++used;
  }
  if (used == 0) throw DegenerateInputError(recon.extractor + ": no usable samples for feature distance");
  res.mean = total / static_cast<double>(used);
  return res;
}

double feature_distance(const FeatureSet& recon, const FeatureSet& gt) { return distances(recon, gt).mean; }

}  // namespace braindec::metrics
