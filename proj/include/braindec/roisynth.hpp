#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "braindec/dataset.hpp"
#include "braindec/latents.hpp"
#include "braindec/ridge.hpp"
#include "braindec/tensor.hpp"

namespace braindec::roisynth {

inline constexpr std::array<std::string_view, 5> kEccentricityLabels{
    "0°<e<0.5°", "0.5°<e<1°", "1°<e<2°", "2°<e<4°", "4°<e"};

/// The eight regions used for the weight analysis and ROI-optimal patterns.
inline const std::vector<std::string> kDefaultRois{"V1",       "V2",       "V3",        "V4",
                                                   "Face-ROI", "Word-ROI", "Place-ROI", "Body-ROI"};

/// Named voxel masks over one voxel universe plus composition rules
/// (e.g. V1 = V1v + V1d). Compositions may reference other compositions.
class RoiCatalog {
 public:
  RoiCatalog(std::size_t universe_size, std::string general_name);

  /// JSON catalog: mask name -> NPY index file, composition name -> member names,
  /// ordered eccentricity band names. Relative paths resolve against the catalog file.
  static RoiCatalog load(const std::filesystem::path& path);

  void add_mask(RoiMask mask);
  void add_composition(std::string name, std::vector<std::string> members);
  void set_eccentricity_bands(std::vector<std::string> names);

  std::size_t universe_size() const noexcept { return universe_size_; }
  const std::string& general_name() const noexcept { return general_; }
  /// The broad mask that defines the model's voxel order.
  RoiMask general() const { return resolve(general_); }
  /// Base mask or composition; LookupError lists the available names.
  RoiMask resolve(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::vector<std::string>& eccentricity_band_names() const noexcept { return bands_; }

 private:
  RoiMask resolve_impl(const std::string& name, int depth) const;

  std::size_t universe_size_;
  std::string general_;
  std::map<std::string, RoiMask> masks_;
  std::map<std::string, std::vector<std::string>> compositions_;
  std::vector<std::string> bands_;
};

struct EccentricityBand {
  std::string label;
  RoiMask mask;
};

/// The five bands in foveal-to-peripheral order; throws ConsistencyError if any overlap.
std::vector<EccentricityBand> eccentricity_bands(const RoiCatalog& catalog);

/// Sorted union of the named masks.
RoiMask union_rois(const RoiCatalog& catalog, const std::vector<std::string>& names);

/// Binary activation vector in `general`'s voxel order: 1 where the voxel is in
/// `roi`, 0 elsewhere. An empty intersection logs a warning and returns zeros.
Tensor synth_pattern(const RoiMask& roi, const RoiMask& general);

/// Positions within `general` of the voxels in roi ∩ general.
std::vector<std::size_t> positions_in(const RoiMask& roi, const RoiMask& general);

/// Average-rank percentiles (ties share their mean rank), 100 * rank / n.
std::vector<double> percentile_ranks(std::span<const double> values);

struct RoiDifference {
  std::string roi;
  LatentFamily family;
  double difference = 0.0;
  double mean_percentile = 0.0;
  double baseline_percentile = 0.0;
  std::size_t n_voxels = 0;
};

/// For each comparison family and ROI: (mean pct_family - mean pct_baseline) / mean pct_baseline
/// over the ROI's voxels. `l1_norms` holds one voxelwise L1 vector per family, in
/// general-mask order. ROIs with no voxels inside `general` are skipped with a warning.
std::vector<RoiDifference> weight_percentile_analysis(const std::map<LatentFamily, std::vector<double>>& l1_norms,
                                                      const RoiCatalog& catalog, const std::vector<std::string>& rois,
                                                      LatentFamily baseline = LatentFamily::vdvae);

/// Model-level entry point: voxelwise L1 norms from each family's ridge model.
std::vector<RoiDifference> weight_percentile_analysis(const std::map<LatentFamily, const ridge::RidgeModel*>& models,
                                                      const RoiCatalog& catalog, const std::vector<std::string>& rois,
                                                      const ridge::L1Options& l1 = {});

struct SemSummary {
  std::vector<double> mean;
  std::vector<double> sem;
};

/// values[subject][roi] -> per-ROI mean and sample-sd / sqrt(k). Needs k >= 2 subjects.
SemSummary sem_across_subjects(const std::vector<std::vector<double>>& values);

}  // namespace braindec::roisynth
