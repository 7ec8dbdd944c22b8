#include "braindec/app.hpp"

#include <optional>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "braindec/errors.hpp"
#include "braindec/pipeline.hpp"

namespace braindec {
namespace {

using pipeline::PipelineConfig;

struct Common {
  std::string config;
  std::optional<std::string> subject;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> models;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "TOML pipeline config")->check(CLI::ExistingFile);
    cmd->add_option("--subject", subject, "Subject label");
    cmd->add_option("-o,--output", output, "Output directory");
    cmd->add_option("--seed", seed, "Seed for every randomized step");
    cmd->add_option("--models", models, "Model root directory");
  }

  PipelineConfig load() const {
    PipelineConfig cfg = config.empty() ? PipelineConfig{} : pipeline::load_config(config);
    if (subject) cfg.subject = *subject;
    if (output) cfg.output_dir = *output;
    if (seed) {
      cfg.seed = *seed;
      cfg.ridge.seed = *seed;
    }
    if (models) cfg.paths.models_dir = *models;
    return cfg;
  }
};

struct Ablation {
  bool no_vdvae = false;
  bool no_clip_text = false;
  bool no_clip_vision = false;
  std::optional<double> strength;
  std::optional<double> w_vision;

  void attach(CLI::App* cmd) {
    cmd->add_flag("--no-vdvae", no_vdvae, "Random initialization instead of the VDVAE initial guess");
    cmd->add_flag("--no-clip-text", no_clip_text, "Drop CLIP-Text guidance");
    cmd->add_flag("--no-clip-vision", no_clip_vision, "Drop CLIP-Vision guidance");
    cmd->add_option("--strength", strength, "Image-to-image strength in [0, 1]");
    cmd->add_option("--w-vision", w_vision, "CLIP-Vision guidance weight (text weight is 1 - w)");
  }

  void apply(PipelineConfig& cfg) const {
    if (no_vdvae) cfg.use_vdvae_init = false;
    if (no_clip_text) cfg.use_clip_text = false;
    if (no_clip_vision) cfg.use_clip_vision = false;
    if (strength) cfg.guidance.strength = *strength;
    if (w_vision) {
      cfg.guidance.w_vision = *w_vision;
      cfg.guidance.w_text = 1.0 - *w_vision;
    }
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"braindec: fMRI-to-latent decoding toolkit"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  Common train_opts;
  std::vector<std::string> train_families;
  std::vector<double> train_lambdas;
  auto* train = app.add_subcommand("train", "Fit one ridge model per latent family");
  train_opts.attach(train);
  train->add_option("--family", train_families, "Restrict to these families (vdvae, clip-vision, clip-text)");
  train->add_option("--lambda", train_lambdas, "Ridge penalty grid (overrides the config)");

  Common predict_opts;
  Ablation predict_abl;
  std::vector<std::string> average_dirs;
  auto* predict = app.add_subcommand("predict", "Predict test latents and emit a generation manifest");
  predict_opts.attach(predict);
  predict_abl.attach(predict);
  predict->add_option("--average-subjects", average_dirs, "Average bundles from these prediction directories");

  Common eval_opts;
  std::optional<std::string> recon_dir, gt_dir, features;
  auto* evaluate = app.add_subcommand("evaluate", "Compute the metric battery for reconstructions");
  eval_opts.attach(evaluate);
  evaluate->add_option("--recon", recon_dir, "Directory of reconstructed PNGs");
  evaluate->add_option("--gt", gt_dir, "Directory of ground-truth PNGs");
  evaluate->add_option("--features", features, "JSON manifest of extractor feature files");

  Common synth_opts;
  Ablation synth_abl;
  std::vector<std::string> synth_rois;
  bool eccentricity = false;
  auto* synth = app.add_subcommand("roi-synth", "Predict latents from synthetic ROI activation patterns");
  synth_opts.attach(synth);
  synth_abl.attach(synth);
  synth->add_option("--roi", synth_rois, "ROI names (default: the eight standard regions)");
  synth->add_flag("--eccentricity", eccentricity, "Use the five eccentricity bands instead of --roi");

  std::vector<std::string> weight_configs;
  std::vector<std::string> weight_rois;
  std::string weight_output = "out";
  auto* weights = app.add_subcommand("analyze-weights", "Regression-weight percentile analysis per ROI");
  weights->add_option("-c,--config", weight_configs, "One TOML config per subject")->required()->check(CLI::ExistingFile);
  weights->add_option("--roi", weight_rois, "ROI names (default: the eight standard regions)");
  weights->add_option("-o,--output", weight_output, "Output directory");

  Common sched_opts;
  std::optional<int> sched_steps;
  auto* sched = app.add_subcommand("schedule", "Print the forward-noising table as CSV");
  sched_opts.attach(sched);
  sched->add_option("--steps", sched_steps, "Number of sampled steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train) {
      auto cfg = train_opts.load();
      if (!train_families.empty()) {
        cfg.families.clear();
        for (const auto& f : train_families) cfg.families.push_back(parse_family(f));
      }
      if (!train_lambdas.empty()) cfg.ridge.lambda_grid = train_lambdas;
      const auto res = pipeline::cmd_train(cfg);
      for (const auto& [family, dir] : res.model_dirs) out << family_name(family) << '\t' << dir.string() << '\n';
    } else if (*predict) {
      auto cfg = predict_opts.load();
      predict_abl.apply(cfg);
      std::vector<std::filesystem::path> dirs(average_dirs.begin(), average_dirs.end());
      const auto res = dirs.empty() ? pipeline::cmd_predict(cfg) : pipeline::cmd_predict_average(cfg, dirs);
      out << res.manifest.string() << '\n';
    } else if (*evaluate) {
      auto cfg = eval_opts.load();
      if (recon_dir) cfg.paths.recon_dir = *recon_dir;
      if (gt_dir) cfg.paths.gt_dir = *gt_dir;
      if (features) cfg.paths.features = *features;
      const auto res = pipeline::cmd_evaluate(cfg);
      out << res.report_json.string() << '\n';
    } else if (*synth) {
      auto cfg = synth_opts.load();
      synth_abl.apply(cfg);
      const auto res = pipeline::cmd_roi_synth(cfg, synth_rois, eccentricity);
      for (std::size_t i = 0; i < res.manifests.size(); ++i) {
        out << res.regions[i] << '\t' << res.support[i] << '\t' << res.manifests[i].string() << '\n';
      }
    } else if (*weights) {
      std::vector<PipelineConfig> cfgs;
      for (const auto& c : weight_configs) cfgs.push_back(pipeline::load_config(c));
      const auto res = pipeline::cmd_analyze_weights(cfgs, weight_rois, weight_output);
      out << res.csv.string() << '\n';
    } else if (*sched) {
      auto cfg = sched_opts.load();
      if (sched_steps) cfg.schedule.total_steps = *sched_steps;
      out << schedule::DiffusionSchedule(cfg.schedule).to_csv();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kExitCapacity;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace braindec
