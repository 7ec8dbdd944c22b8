#include "braindec/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "braindec/dataset.hpp"
#include "braindec/errors.hpp"
#include "braindec/npy.hpp"

namespace braindec::pipeline {
namespace {

const fs::path& require_file(const fs::path& p, const std::string& role) {
  if (p.empty()) throw ConfigError("paths." + role + " is not set");
  if (!fs::exists(p)) throw PathError(role + " file '" + p.string() + "' does not exist");
  return p;
}

const fs::path& require_dir(const fs::path& p, const std::string& role) {
  if (p.empty()) throw ConfigError("paths." + role + " is not set");
  if (!fs::is_directory(p)) throw PathError(role + " directory '" + p.string() + "' does not exist");
  return p;
}

/// Loads trials, averages repetitions when ids are given, then applies the general mask.
Tensor load_betas(const fs::path& betas, const fs::path& ids, const fs::path& mask, const std::string& role) {
  Tensor x = npy::read(require_file(betas, role));
  if (x.rank() != 2) throw ConsistencyError(role + " must be rank-2 (trials x voxels), got " + shape_string(x.shape()));
  if (!ids.empty()) {
    const auto image_ids = read_ids(require_file(ids, role + "_ids"));
    if (image_ids.size() != x.dim(0)) {
      throw ConsistencyError(role + " has " + std::to_string(x.dim(0)) + " trials but " +
                             std::to_string(image_ids.size()) + " image ids");
    }
    x = average_repetitions(x, image_ids).betas;
  }
  if (!mask.empty()) x = apply_mask(x, read_mask(require_file(mask, "general_mask"), "general", x.dim(1)));
  return x;
}

std::pair<std::size_t, std::size_t> rows_and_width(const Shape& shape, const fs::path& path) {
  if (shape.size() < 2) {
    throw ConsistencyError("latent file '" + path.string() + "' must be at least rank-2, got " + shape_string(shape));
  }
  std::size_t width = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) width *= shape[i];
  return {shape[0], width};
}

LatentLayout layout_for(const PipelineConfig& cfg, LatentFamily family, std::size_t width) {
  switch (family) {
    case LatentFamily::vdvae:
      if (width == kVdvaeFlatLen) {
        const fs::path table = cfg.paths.vdvae_layers.empty() ? default_vdvae_layers() : cfg.paths.vdvae_layers;
        return LatentLayout::vdvae(load_vdvae_layer_table(table));
      }
      break;
    case LatentFamily::clip_vision:
      if (width == kClipVisionTokens * kClipDim) return LatentLayout::clip_vision();
      break;
    case LatentFamily::clip_text:
      if (width == kClipTextTokens * kClipDim) return LatentLayout::clip_text();
      break;
  }
  spdlog::warn("{} targets have width {}, not the canonical layout; using a single-block layout",
               family_name(family), width);
  return LatentLayout::custom(family, width);
}

std::string bundle_name(LatentFamily family) { return "predicted_" + std::string(family_name(family)) + ".npy"; }

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw PathError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

double training_norm(const fs::path& dir) {
  const auto j = read_json(dir / "family.json");
  try {
    return j.at("train_mean_row_norm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("malformed '" + (dir / "family.json").string() + "': " + e.what());
  }
}

double mean_row_norm_of(const Tensor& y) {
  const std::size_t n = y.dim(0);
  const std::size_t d = y.numel() / std::max<std::size_t>(n, 1);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = y.as_double(r * d + j);
      s += v * v;
    }
    total += std::sqrt(s);
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::string slug(const std::string& name) {
  std::string out;
  for (unsigned char c : name) out += std::isalnum(c) || c == '-' ? static_cast<char>(c) : '_';
  return out;
}

std::string indexed(std::size_t i, const std::string& name) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << i << '_' << name;
  return s.str();
}

}  // namespace

nlohmann::json generation_manifest(const PipelineConfig& cfg, const std::map<LatentFamily, fs::path>& bundles,
                                   const fs::path& manifest_dir, const std::string& label) {
  const auto guidance = effective_guidance(cfg);
  const schedule::DiffusionSchedule sched(cfg.schedule);
  auto rel = [&](const fs::path& p) { return p.lexically_relative(manifest_dir).generic_string(); };

  nlohmann::json b = nlohmann::json::object();
  for (const auto& [family, path] : bundles) b[std::string(family_name(family))] = rel(path);

  nlohmann::json init = {{"mode", "random"}};
  if (cfg.use_vdvae_init) {
    const auto it = bundles.find(LatentFamily::vdvae);
    if (it == bundles.end()) throw ConfigError("VDVAE initialization requested but no VDVAE bundle was produced");
    init = {{"mode", "vdvae"}, {"bundle", rel(it->second)}, {"upsample", "bilinear"}};
  }
  return {
      {"manifest_version", kManifestVersion},
      {"job", "generate"},
      {"label", label},
      {"subject", cfg.subject},
      {"seed", cfg.seed},
      {"config_hash", config_hash(cfg)},
      {"bundles", b},
      {"init", init},
      {"guidance", guidance.to_json()},
      {"steps", schedule::steps_from_strength(sched.total_steps(), guidance.strength)},
      {"schedule", sched.to_json()},
      {"ablation",
       {{"use_vdvae_init", cfg.use_vdvae_init},
        {"use_clip_text", cfg.use_clip_text},
        {"use_clip_vision", cfg.use_clip_vision}}},
      {"output_dir", "images"},
  };
}

TrainResult cmd_train(const PipelineConfig& cfg) {
  cfg.ridge.validate();
  if (cfg.paths.models_dir.empty()) throw ConfigError("paths.models_dir is not set");
  std::vector<std::pair<LatentFamily, fs::path>> targets;
  for (auto family : cfg.families) {
    const auto it = cfg.paths.latents.find(family);
    if (it == cfg.paths.latents.end()) {
      throw ConfigError("no training latents configured for '" + std::string(family_name(family)) + "'");
    }
    targets.emplace_back(family, require_file(it->second, "latents." + std::string(family_name(family))));
  }

  const Tensor x = load_betas(cfg.paths.fmri_train, cfg.paths.fmri_train_ids, cfg.paths.general_mask, "fmri_train");
  // Every shape is checked before the first (expensive) fit.
  for (const auto& [family, path] : targets) {
    const auto [rows, width] = rows_and_width(npy::read_info(path).shape, path);
    if (rows != x.dim(0)) {
      throw ConsistencyError(std::string(family_name(family)) + " latents have " + std::to_string(rows) +
                             " rows, training fMRI has " + std::to_string(x.dim(0)) + " samples");
    }
    if (width == 0) throw ConsistencyError(std::string(family_name(family)) + " latents have zero width");
  }

  const ridge::Matrix xm = ridge::to_matrix(x);
  TrainResult result;
  for (const auto& [family, path] : targets) {
    Tensor y = npy::read(path);
    const auto [rows, width] = rows_and_width(y.shape(), path);
    y.reshape({rows, width});
    spdlog::info("fitting {} ({} x {} -> {})", family_name(family), xm.rows(), xm.cols(), width);
    const ridge::RidgeModel model = ridge::fit(xm, ridge::Targets(y), cfg.ridge);
    const fs::path dir = model_dir(cfg, family);
    ridge::save_model(model, dir);
    const LatentLayout layout = layout_for(cfg, family, width);
    write_json({{"format", "braindec.family_model"},
                {"version", 1},
                {"family", family_name(family)},
                {"subject", cfg.subject},
                {"flat_len", width},
                {"canonical", layout.canonical()},
                {"train_mean_row_norm", mean_row_norm_of(y)},
                {"lambda", model.lambda},
                {"config_hash", config_hash(cfg)}},
               dir / "family.json");
    result.model_dirs[family] = dir;
  }
  return result;
}

PredictResult cmd_predict(const PipelineConfig& cfg) {
  effective_guidance(cfg);
  const auto families = generation_families(cfg);
  std::vector<std::pair<LatentFamily, ridge::RidgeModel>> models;
  for (auto family : families) {
    const fs::path dir = model_dir(cfg, family);
    if (!fs::exists(dir / "model.json")) {
      throw PathError("no trained " + std::string(family_name(family)) + " model at '" + dir.string() + "'");
    }
    models.emplace_back(family, ridge::load_model(dir));
  }

  const Tensor x = load_betas(cfg.paths.fmri_test, cfg.paths.fmri_test_ids, cfg.paths.general_mask, "fmri_test");
  const ridge::Matrix xm = ridge::to_matrix(x);
  fs::create_directories(cfg.output_dir);
  PredictResult result;
  for (const auto& [family, model] : models) {
    if (model.n_features() != x.dim(1)) {
      throw ConsistencyError(std::string(family_name(family)) + " model expects " +
                             std::to_string(model.n_features()) + " voxels, test fMRI has " +
                             std::to_string(x.dim(1)));
    }
    LatentBundle bundle(layout_for(cfg, family, model.n_targets()), ridge::predict_f32(model, xm));
    const fs::path out = cfg.output_dir / bundle_name(family);
    write_bundle(bundle, out,
                 {{"subject", cfg.subject},
                  {"source", "ridge prediction from test fMRI"},
                  {"lambda", model.lambda},
                  {"config_hash", config_hash(cfg)}});
    result.bundles[family] = out;
  }
  result.manifest = cfg.output_dir / "generate_manifest.json";
  write_json(generation_manifest(cfg, result.bundles, cfg.output_dir, cfg.subject), result.manifest);
  return result;
}

PredictResult cmd_predict_average(const PipelineConfig& cfg, const std::vector<fs::path>& prediction_dirs) {
  effective_guidance(cfg);
  if (prediction_dirs.size() < 2) throw ArgumentError("averaging needs at least two prediction directories");
  fs::create_directories(cfg.output_dir);
  PredictResult result;
  for (auto family : generation_families(cfg)) {
    std::vector<LatentBundle> bundles;
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& dir : prediction_dirs) {
      const fs::path p = dir / bundle_name(family);
      if (!fs::exists(p)) throw PathError("missing bundle '" + p.string() + "'");
      bundles.push_back(read_bundle(p));
      sources.push_back(p.string());
    }
    const fs::path out = cfg.output_dir / bundle_name(family);
    write_bundle(average_subjects(bundles), out,
                 {{"source", "mean of per-subject predictions"}, {"averaged_from", sources}});
    result.bundles[family] = out;
  }
  result.manifest = cfg.output_dir / "generate_manifest.json";
  write_json(generation_manifest(cfg, result.bundles, cfg.output_dir, "average"), result.manifest);
  return result;
}

EvaluateResult cmd_evaluate(const PipelineConfig& cfg) {
  const auto features = read_path_manifest(require_file(cfg.paths.features, "features"));
  EvaluateResult res;
  res.report = metrics::build_report(require_dir(cfg.paths.recon_dir, "recon_dir"),
                                     require_dir(cfg.paths.gt_dir, "gt_dir"), features);
  fs::create_directories(cfg.output_dir);
  res.report_json = cfg.output_dir / "report.json";
  res.per_sample_csv = cfg.output_dir / "per_sample.csv";
  metrics::write_report_json(res.report, res.report_json);
  metrics::write_per_sample_csv(res.report, res.per_sample_csv);
  return res;
}

RoiSynthResult cmd_roi_synth(const PipelineConfig& cfg, const std::vector<std::string>& rois, bool eccentricity) {
  effective_guidance(cfg);
  const auto catalog = roisynth::RoiCatalog::load(require_file(cfg.paths.catalog, "catalog"));
  const RoiMask general = catalog.general();

  struct Region {
    std::string label;
    std::string dir;
    RoiMask mask;
  };
  std::vector<Region> regions;
  if (eccentricity) {
    std::size_t i = 0;
    for (auto& band : roisynth::eccentricity_bands(catalog)) {
      regions.push_back({band.label, indexed(i, "ecc" + std::to_string(i)), std::move(band.mask)});
      ++i;
    }
  } else {
    const auto& names = rois.empty() ? roisynth::kDefaultRois : rois;
    for (std::size_t i = 0; i < names.size(); ++i) {
      regions.push_back({names[i], indexed(i, slug(names[i])), catalog.resolve(names[i])});
    }
  }

  struct Loaded {
    LatentFamily family;
    ridge::RidgeModel model;
    double target_norm;
  };
  std::vector<Loaded> models;
  for (auto family : generation_families(cfg)) {
    const fs::path dir = model_dir(cfg, family);
    if (!fs::exists(dir / "model.json")) {
      throw PathError("no trained " + std::string(family_name(family)) + " model at '" + dir.string() + "'");
    }
    Loaded l{family, ridge::load_model(dir), training_norm(dir)};
    if (l.model.n_features() != general.size()) {
      throw ConsistencyError(std::string(family_name(family)) + " model expects " +
                             std::to_string(l.model.n_features()) + " voxels, general mask '" + general.name() +
                             "' has " + std::to_string(general.size()));
    }
    models.push_back(std::move(l));
  }

  const fs::path root = cfg.output_dir / "roi_synth";
  RoiSynthResult result;
  for (const auto& region : regions) {
    const fs::path dir = root / region.dir;
    fs::create_directories(dir);
    Tensor pattern = roisynth::synth_pattern(region.mask, general);
    const auto values = pattern.values<float>();
    std::size_t support = 0;
    for (float v : values) support += v != 0.0f;
    pattern.reshape({1, general.size()});
    const fs::path pattern_path = dir / "pattern.npy";
    npy::write(pattern, pattern_path);

    const ridge::Matrix xm = ridge::to_matrix(pattern);
    std::map<LatentFamily, fs::path> bundles;
    for (const auto& l : models) {
      const LatentBundle raw(layout_for(cfg, l.family, l.model.n_targets()), ridge::predict_f32(l.model, xm));
      const fs::path out = dir / bundle_name(l.family);
      write_bundle(renormalize_rows(raw, l.target_norm), out,
                   {{"subject", cfg.subject},
                    {"roi", region.label},
                    {"support", support},
                    {"source", "ridge prediction from synthetic ROI pattern"},
                    {"renormalized_to", l.target_norm},
                    {"config_hash", config_hash(cfg)}});
      bundles[l.family] = out;
    }
    auto manifest = generation_manifest(cfg, bundles, dir, region.label);
    manifest["roi"] = {{"name", region.label}, {"support", support}, {"pattern", "pattern.npy"},
                       {"kind", eccentricity ? "eccentricity_band" : "roi"}};
    const fs::path manifest_path = dir / "generate_manifest.json";
    write_json(manifest, manifest_path);

    result.regions.push_back(region.label);
    result.patterns.push_back(pattern_path);
    result.manifests.push_back(manifest_path);
    result.support.push_back(support);
  }
  return result;
}

WeightAnalysisResult cmd_analyze_weights(const std::vector<PipelineConfig>& subjects,
                                         const std::vector<std::string>& rois, const fs::path& output_dir) {
  if (subjects.empty()) throw ArgumentError("analyze-weights needs at least one subject config");
  const auto& names = rois.empty() ? roisynth::kDefaultRois : rois;
  WeightAnalysisResult result;
  // (roi, family) -> value per subject, in first-seen order
  std::vector<std::pair<std::string, LatentFamily>> keys;
  std::vector<std::map<std::pair<std::string, LatentFamily>, double>> per_subject;

  for (const auto& cfg : subjects) {
    const auto catalog = roisynth::RoiCatalog::load(require_file(cfg.paths.catalog, "catalog"));
    for (const auto& n : names) catalog.resolve(n);
    std::map<LatentFamily, ridge::RidgeModel> models;
    for (auto family : {LatentFamily::vdvae, LatentFamily::clip_vision, LatentFamily::clip_text}) {
      const fs::path dir = model_dir(cfg, family);
      if (!fs::exists(dir / "model.json")) {
        if (family == LatentFamily::vdvae) throw PathError("no VDVAE baseline model at '" + dir.string() + "'");
        continue;
      }
      models.emplace(family, ridge::load_model(dir));
    }
    if (models.size() < 2) throw PathError("subject '" + cfg.subject + "' has no CLIP model to compare against");
    std::map<LatentFamily, const ridge::RidgeModel*> ptrs;
    for (const auto& [f, m] : models) ptrs[f] = &m;
    ridge::L1Options l1;
    l1.budget_bytes = cfg.ridge.memory_budget_bytes;
    l1.target_chunk = cfg.ridge.target_chunk;
    auto& values = per_subject.emplace_back();
    for (const auto& d : roisynth::weight_percentile_analysis(ptrs, catalog, names, l1)) {
      result.rows.emplace_back(cfg.subject, d.roi, d.family, d.difference);
      const auto key = std::make_pair(d.roi, d.family);
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
      values[key] = d.difference;
    }
  }

  fs::create_directories(output_dir);
  result.csv = output_dir / "weight_analysis.csv";
  std::ofstream out(result.csv);
  if (!out) throw PathError("cannot write '" + result.csv.string() + "'");
  out << std::setprecision(17) << "subject,roi,family,difference\n";
  for (const auto& [subject, roi, family, diff] : result.rows) {
    out << subject << ',' << roi << ',' << family_name(family) << ',' << diff << '\n';
  }
  if (subjects.size() >= 2) {
    std::vector<std::pair<std::string, LatentFamily>> shared;
    for (const auto& key : keys) {
      const bool everywhere =
          std::all_of(per_subject.begin(), per_subject.end(), [&](const auto& m) { return m.count(key) > 0; });
      if (everywhere) shared.push_back(key);
      else spdlog::warn("{} / {} missing for some subjects; left out of the summary", key.first, family_name(key.second));
    }
    std::vector<std::vector<double>> matrix;
    for (const auto& m : per_subject) {
      auto& row = matrix.emplace_back();
      for (const auto& key : shared) row.push_back(m.at(key));
    }
    if (!shared.empty()) {
      const auto summary = roisynth::sem_across_subjects(matrix);
      for (std::size_t j = 0; j < shared.size(); ++j) {
        out << "mean," << shared[j].first << ',' << family_name(shared[j].second) << ',' << summary.mean[j] << '\n';
      }
      for (std::size_t j = 0; j < shared.size(); ++j) {
        out << "sem," << shared[j].first << ',' << family_name(shared[j].second) << ',' << summary.sem[j] << '\n';
      }
    }
  }
  return result;
}

}  // namespace braindec::pipeline
