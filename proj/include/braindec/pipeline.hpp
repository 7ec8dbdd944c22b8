#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "braindec/latents.hpp"
#include "braindec/metrics.hpp"
#include "braindec/ridge.hpp"
#include "braindec/roisynth.hpp"
#include "braindec/schedule.hpp"

namespace braindec::pipeline {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;

struct Paths {
  /// Training betas (trials x voxels) and optional per-trial image ids for averaging.
  fs::path fmri_train;
  fs::path fmri_train_ids;
  fs::path fmri_test;
  fs::path fmri_test_ids;
  /// Optional index mask applied to the betas' voxel axis before fitting.
  fs::path general_mask;
  /// Training latents per family (NPY, optional bundle sidecar).
  std::map<LatentFamily, fs::path> latents;
  fs::path models_dir;
  fs::path catalog;
  fs::path recon_dir;
  fs::path gt_dir;
  /// Flat JSON manifest of metric feature files.
  fs::path features;
  fs::path vdvae_layers;
};

/// Everything one invocation needs. Loaded from TOML, then overridden by flags.
struct PipelineConfig {
  std::string subject = "sub1";
  fs::path output_dir = "out";
  std::uint64_t seed = 0;
  Paths paths;
  std::vector<LatentFamily> families{LatentFamily::vdvae, LatentFamily::clip_vision, LatentFamily::clip_text};
  ridge::FitConfig ridge;
  schedule::GuidanceConfig guidance;
  schedule::ScheduleParams schedule;
  bool use_vdvae_init = true;
  bool use_clip_text = true;
  bool use_clip_vision = true;
};

/// Parses a TOML config; relative paths resolve against the file's directory.
PipelineConfig load_config(const fs::path& path);
PipelineConfig parse_config(std::string_view toml_text, const fs::path& base_dir = {});

nlohmann::json config_to_json(const PipelineConfig& cfg);
/// SHA-256 (hex) of the canonical JSON form of the config.
std::string config_hash(const PipelineConfig& cfg);

/// Guidance after applying the modality ablations: a single remaining modality
/// gets weight 1. Throws ConfigError when both CLIP modalities are disabled.
schedule::GuidanceConfig effective_guidance(const PipelineConfig& cfg);

/// Families a generation job needs under the current ablation flags.
std::vector<LatentFamily> generation_families(const PipelineConfig& cfg);

fs::path model_dir(const PipelineConfig& cfg, LatentFamily family);

struct TrainResult {
  std::map<LatentFamily, fs::path> model_dirs;
};
TrainResult cmd_train(const PipelineConfig& cfg);

struct PredictResult {
  std::map<LatentFamily, fs::path> bundles;
  fs::path manifest;
};
PredictResult cmd_predict(const PipelineConfig& cfg);
/// Averages bundles from earlier `predict` runs (one directory per subject) and
/// emits a manifest for the averaged set.
PredictResult cmd_predict_average(const PipelineConfig& cfg, const std::vector<fs::path>& prediction_dirs);

struct EvaluateResult {
  metrics::MetricReport report;
  fs::path report_json;
  fs::path per_sample_csv;
};
EvaluateResult cmd_evaluate(const PipelineConfig& cfg);

struct RoiSynthResult {
  /// One entry per requested region, in request order.
  std::vector<std::string> regions;
  std::vector<fs::path> patterns;
  std::vector<fs::path> manifests;
  std::vector<std::size_t> support;
};
/// Synthetic activation per ROI, predicted + renormalized latents, one manifest each.
/// `eccentricity` ignores `rois` and runs the five eccentricity bands in order.
RoiSynthResult cmd_roi_synth(const PipelineConfig& cfg, const std::vector<std::string>& rois, bool eccentricity);

struct WeightAnalysisResult {
  /// Rows of (subject, roi, family, difference).
  std::vector<std::tuple<std::string, std::string, LatentFamily, double>> rows;
  fs::path csv;
};
/// One config per subject (subject label, models, catalog).
WeightAnalysisResult cmd_analyze_weights(const std::vector<PipelineConfig>& subjects, const std::vector<std::string>& rois,
                                         const fs::path& output_dir);

/// Manifest for a generation job; bundle paths are written relative to `manifest_dir`.
nlohmann::json generation_manifest(const PipelineConfig& cfg, const std::map<LatentFamily, fs::path>& bundles,
                                   const fs::path& manifest_dir, const std::string& label);

/// Default location of the shipped VDVAE layer table.
fs::path default_vdvae_layers();

}  // namespace braindec::pipeline
