#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "toml.hpp"

#include "braindec/errors.hpp"
#include "braindec/pipeline.hpp"

namespace braindec::pipeline {
namespace {

void reject_unknown(const toml::table& t, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : t) {
    if (!known.count(std::string(key.str()))) {
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }
}

template <typename T>
T get(const toml::table& t, std::string_view key, T fallback, const std::string& where) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (node->is_boolean()) return *node->value<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (node->is_integer()) {
      const auto v = *node->value<std::int64_t>();
      if (v < 0 && std::is_unsigned_v<T>) throw ConfigError(where + "." + std::string(key) + " must be non-negative");
      return static_cast<T>(v);
    }
  } else {
    if (node->is_string()) return T(*node->value<std::string>());
  }
  throw ConfigError(where + "." + std::string(key) + " has the wrong type");
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

ridge::FormChoice parse_form(const std::string& s) {
  if (s == "auto") return ridge::FormChoice::automatic;
  if (s == "primal") return ridge::FormChoice::primal;
  if (s == "dual") return ridge::FormChoice::dual;
  throw ConfigError("ridge.form must be auto, primal or dual (got '" + s + "')");
}

std::string form_string(ridge::FormChoice f) {
  switch (f) {
    case ridge::FormChoice::primal: return "primal";
    case ridge::FormChoice::dual: return "dual";
    default: return "auto";
  }
}

void read_paths(const toml::table& t, const fs::path& base, Paths& paths) {
  reject_unknown(t,
                 {"fmri_train", "fmri_train_ids", "fmri_test", "fmri_test_ids", "general_mask", "latents", "models_dir",
                  "catalog", "recon_dir", "gt_dir", "features", "vdvae_layers"},
                 "[paths]");
  auto p = [&](std::string_view key, fs::path& out) {
    out = resolve(base, get<std::string>(t, key, out.string(), "paths"));
  };
  p("fmri_train", paths.fmri_train);
  p("fmri_train_ids", paths.fmri_train_ids);
  p("fmri_test", paths.fmri_test);
  p("fmri_test_ids", paths.fmri_test_ids);
  p("general_mask", paths.general_mask);
  p("models_dir", paths.models_dir);
  p("catalog", paths.catalog);
  p("recon_dir", paths.recon_dir);
  p("gt_dir", paths.gt_dir);
  p("features", paths.features);
  p("vdvae_layers", paths.vdvae_layers);
  if (const auto* lat = t.get_as<toml::table>("latents")) {
    for (const auto& [key, node] : *lat) {
      LatentFamily family;
      try {
        family = parse_family(key.str());
      } catch (const Error&) {
        throw ConfigError("unknown latent family '" + std::string(key.str()) + "' in [paths.latents]");
      }
      if (!node.is_string()) throw ConfigError("paths.latents." + std::string(key.str()) + " must be a string");
      paths.latents[family] = resolve(base, *node.value<std::string>());
    }
  }
}

}  // namespace

PipelineConfig parse_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  reject_unknown(root, {"subject", "output_dir", "seed", "families", "paths", "ridge", "guidance", "schedule", "ablation"},
                 "config");

  PipelineConfig cfg;
  cfg.subject = get<std::string>(root, "subject", cfg.subject, "config");
  cfg.output_dir = resolve(base_dir, get<std::string>(root, "output_dir", cfg.output_dir.string(), "config"));
  cfg.seed = get<std::uint64_t>(root, "seed", cfg.seed, "config");
  cfg.ridge.seed = cfg.seed;

  if (const auto* fam = root.get("families")) {
    const auto* arr = fam->as_array();
    if (!arr || arr->empty()) throw ConfigError("families must be a non-empty array of family names");
    cfg.families.clear();
    for (const auto& node : *arr) {
      if (!node.is_string()) throw ConfigError("families must contain strings");
      try {
        cfg.families.push_back(parse_family(*node.value<std::string>()));
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
  }

  if (const auto* t = root.get_as<toml::table>("paths")) read_paths(*t, base_dir, cfg.paths);

  if (const auto* t = root.get_as<toml::table>("ridge")) {
    reject_unknown(*t,
                   {"lambda_grid", "holdout_fraction", "seed", "standardize_y", "target_chunk", "form",
                    "memory_budget_gb", "std_floor"},
                   "[ridge]");
    if (const auto* grid = t->get("lambda_grid")) {
      const auto* arr = grid->as_array();
      if (!arr) throw ConfigError("ridge.lambda_grid must be an array");
      cfg.ridge.lambda_grid.clear();
      for (const auto& v : *arr) {
        const auto d = v.value<double>();
        if (!d) throw ConfigError("ridge.lambda_grid must contain numbers");
        cfg.ridge.lambda_grid.push_back(*d);
      }
    }
    cfg.ridge.holdout_fraction = get<double>(*t, "holdout_fraction", cfg.ridge.holdout_fraction, "ridge");
    cfg.ridge.seed = get<std::uint64_t>(*t, "seed", cfg.ridge.seed, "ridge");
    cfg.ridge.standardize_y = get<bool>(*t, "standardize_y", cfg.ridge.standardize_y, "ridge");
    cfg.ridge.target_chunk = get<std::size_t>(*t, "target_chunk", cfg.ridge.target_chunk, "ridge");
    cfg.ridge.form = parse_form(get<std::string>(*t, "form", form_string(cfg.ridge.form), "ridge"));
    const double gb = get<double>(*t, "memory_budget_gb",
                                  static_cast<double>(cfg.ridge.memory_budget_bytes) / double(1ULL << 30), "ridge");
    if (!(gb > 0.0)) throw ConfigError("ridge.memory_budget_gb must be positive");
    cfg.ridge.memory_budget_bytes = static_cast<std::size_t>(gb * double(1ULL << 30));
    cfg.ridge.std_floor = get<double>(*t, "std_floor", cfg.ridge.std_floor, "ridge");
  }

  if (const auto* t = root.get_as<toml::table>("guidance")) {
    reject_unknown(*t, {"w_vision", "w_text", "strength"}, "[guidance]");
    cfg.guidance.w_vision = get<double>(*t, "w_vision", cfg.guidance.w_vision, "guidance");
    cfg.guidance.w_text = get<double>(*t, "w_text", cfg.guidance.w_text, "guidance");
    cfg.guidance.strength = get<double>(*t, "strength", cfg.guidance.strength, "guidance");
  }

  if (const auto* t = root.get_as<toml::table>("schedule")) {
    reject_unknown(*t, {"total_steps", "training_timesteps", "beta_start", "beta_end", "label"}, "[schedule]");
    cfg.schedule.total_steps = get<int>(*t, "total_steps", cfg.schedule.total_steps, "schedule");
    cfg.schedule.training_timesteps = get<int>(*t, "training_timesteps", cfg.schedule.training_timesteps, "schedule");
    cfg.schedule.beta_start = get<double>(*t, "beta_start", cfg.schedule.beta_start, "schedule");
    cfg.schedule.beta_end = get<double>(*t, "beta_end", cfg.schedule.beta_end, "schedule");
    cfg.schedule.label = get<std::string>(*t, "label", cfg.schedule.label, "schedule");
  }

  if (const auto* t = root.get_as<toml::table>("ablation")) {
    reject_unknown(*t, {"use_vdvae_init", "use_clip_text", "use_clip_vision"}, "[ablation]");
    cfg.use_vdvae_init = get<bool>(*t, "use_vdvae_init", cfg.use_vdvae_init, "ablation");
    cfg.use_clip_text = get<bool>(*t, "use_clip_text", cfg.use_clip_text, "ablation");
    cfg.use_clip_vision = get<bool>(*t, "use_clip_vision", cfg.use_clip_vision, "ablation");
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json latents = nlohmann::json::object();
  for (const auto& [family, p] : cfg.paths.latents) latents[std::string(family_name(family))] = p.string();
  nlohmann::json families = nlohmann::json::array();
  for (auto f : cfg.families) families.push_back(std::string(family_name(f)));
  const auto& r = cfg.ridge;
  return {
      {"subject", cfg.subject},
      {"output_dir", cfg.output_dir.string()},
      {"seed", cfg.seed},
      {"families", families},
      {"paths",
       {{"fmri_train", cfg.paths.fmri_train.string()},
        {"fmri_train_ids", cfg.paths.fmri_train_ids.string()},
        {"fmri_test", cfg.paths.fmri_test.string()},
        {"fmri_test_ids", cfg.paths.fmri_test_ids.string()},
        {"general_mask", cfg.paths.general_mask.string()},
        {"latents", latents},
        {"models_dir", cfg.paths.models_dir.string()},
        {"catalog", cfg.paths.catalog.string()},
        {"recon_dir", cfg.paths.recon_dir.string()},
        {"gt_dir", cfg.paths.gt_dir.string()},
        {"features", cfg.paths.features.string()},
        {"vdvae_layers", cfg.paths.vdvae_layers.string()}}},
      {"ridge",
       {{"lambda_grid", r.lambda_grid},
        {"holdout_fraction", r.holdout_fraction},
        {"seed", r.seed},
        {"standardize_y", r.standardize_y},
        {"target_chunk", r.target_chunk},
        {"form", form_string(r.form)},
        {"memory_budget_bytes", r.memory_budget_bytes},
        {"std_floor", r.std_floor}}},
      {"guidance", cfg.guidance.to_json()},
      {"schedule",
       {{"total_steps", cfg.schedule.total_steps},
        {"training_timesteps", cfg.schedule.training_timesteps},
        {"beta_start", cfg.schedule.beta_start},
        {"beta_end", cfg.schedule.beta_end},
        {"label", cfg.schedule.label}}},
      {"ablation",
       {{"use_vdvae_init", cfg.use_vdvae_init},
        {"use_clip_text", cfg.use_clip_text},
        {"use_clip_vision", cfg.use_clip_vision}}},
  };
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

schedule::GuidanceConfig effective_guidance(const PipelineConfig& cfg) {
  if (!cfg.use_clip_text && !cfg.use_clip_vision) {
    throw ConfigError("both CLIP-Text and CLIP-Vision guidance are disabled; at least one modality is required");
  }
  schedule::GuidanceConfig g = cfg.guidance;
  if (!cfg.use_clip_text) {
    g.w_vision = 1.0;
    g.w_text = 0.0;
  } else if (!cfg.use_clip_vision) {
    g.w_vision = 0.0;
    g.w_text = 1.0;
  }
  g.validate();
  return g;
}

std::vector<LatentFamily> generation_families(const PipelineConfig& cfg) {
  std::vector<LatentFamily> out;
  if (cfg.use_vdvae_init) out.push_back(LatentFamily::vdvae);
  if (cfg.use_clip_vision) out.push_back(LatentFamily::clip_vision);
  if (cfg.use_clip_text) out.push_back(LatentFamily::clip_text);
  return out;
}

fs::path model_dir(const PipelineConfig& cfg, LatentFamily family) {
  return cfg.paths.models_dir / cfg.subject / std::string(family_name(family));
}

fs::path default_vdvae_layers() { return fs::path(BRAINDEC_DATA_DIR) / "vdvae_layers_v1.json"; }

}  // namespace braindec::pipeline
