#include "braindec/latents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "braindec/npy.hpp"

namespace braindec {

std::string_view family_name(LatentFamily family) noexcept {
  switch (family) {
    case LatentFamily::vdvae: return "vdvae";
    case LatentFamily::clip_vision: return "clip-vision";
    case LatentFamily::clip_text: return "clip-text";
  }
  return "?";
}

LatentFamily parse_family(std::string_view name) {
  if (name == "vdvae") return LatentFamily::vdvae;
  if (name == "clip-vision" || name == "clip_v" || name == "clip-v") return LatentFamily::clip_vision;
  if (name == "clip-text" || name == "clip_t" || name == "clip-t") return LatentFamily::clip_text;
  throw LookupError("unknown latent family '" + std::string(name) + "' (expected vdvae, clip-vision, clip-text)");
}

LatentLayout LatentLayout::vdvae(std::vector<std::size_t> layer_lengths) {
  if (layer_lengths.size() != kVdvaeLayers) {
    throw LayoutError("VDVAE layer table has " + std::to_string(layer_lengths.size()) + " entries, expected " +
                      std::to_string(kVdvaeLayers));
  }
  const std::size_t total = std::accumulate(layer_lengths.begin(), layer_lengths.end(), std::size_t{0});
  if (total != kVdvaeFlatLen) {
    throw LayoutError("VDVAE layer table sums to " + std::to_string(total) + ", expected " +
                      std::to_string(kVdvaeFlatLen));
  }
  LatentLayout l;
  l.family_ = LatentFamily::vdvae;
  l.shape_ = {kVdvaeFlatLen};
  l.flat_len_ = kVdvaeFlatLen;
  l.canonical_ = true;
  l.blocks_ = std::move(layer_lengths);
  return l;
}


LatentLayout LatentLayout::clip_vision() {
  LatentLayout l;
  l.family_ = LatentFamily::clip_vision;
  l.shape_ = {kClipVisionTokens, kClipDim};
  l.flat_len_ = kClipVisionTokens * kClipDim;
  l.canonical_ = true;
  l.blocks_.assign(kClipVisionTokens, kClipDim);
  return l;
}

LatentLayout LatentLayout::clip_text() {
  LatentLayout l;
  l.family_ = LatentFamily::clip_text;
  l.shape_ = {kClipTextTokens, kClipDim};
  l.flat_len_ = kClipTextTokens * kClipDim;
  l.canonical_ = true;
  l.blocks_.assign(kClipTextTokens, kClipDim);
  return l;
}

LatentLayout LatentLayout::custom(LatentFamily family, std::size_t flat_len) {
  LatentLayout l;
  l.family_ = family;
  l.shape_ = {flat_len};
  l.flat_len_ = flat_len;
  l.canonical_ = false;
  l.blocks_ = {flat_len};
  return l;
}

std::vector<std::size_t> LatentLayout::block_offsets() const {
  std::vector<std::size_t> off(blocks_.size());
  std::exclusive_scan(blocks_.begin(), blocks_.end(), off.begin(), std::size_t{0});
  return off;
}

std::string LatentLayout::block_label(std::size_t block) const {
  if (!canonical_) return "values";
  switch (family_) {
    case LatentFamily::vdvae: return "layer" + std::to_string(block);
    case LatentFamily::clip_vision: return block == 0 ? "class" : "patch" + std::to_string(block - 1);
    case LatentFamily::clip_text: return "token" + std::to_string(block);
  }
  return {};
}

std::vector<std::size_t> load_vdvae_layer_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open VDVAE layer table '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != 1) throw LayoutError("unsupported layer table version in '" + path.string() + "'");
    std::vector<std::size_t> lengths;
    for (const auto& layer : j.at("layers")) lengths.push_back(layer.at("length").get<std::size_t>());
    return lengths;
  } catch (const nlohmann::json::exception& e) {
    throw LayoutError("malformed VDVAE layer table '" + path.string() + "': " + e.what());
  }
}

LatentBundle::LatentBundle(LatentLayout layout, Tensor values) : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.rank() != 2 || values_.dtype() != DType::f32) {
    throw ArgumentError("latent bundle values must be a rank-2 f32 tensor, got " +
                        std::string(dtype_name(values_.dtype())) + " " + shape_string(values_.shape()));
  }
  if (values_.dim(1) != layout_.flat_len()) {
    throw LayoutError("bundle has " + std::to_string(values_.dim(1)) + " columns, " +
                      std::string(family_name(layout_.family())) + " layout needs " +
                      std::to_string(layout_.flat_len()));
  }
}

std::span<const float> LatentBundle::row(std::size_t sample) const {
  if (sample >= n_samples()) {
    throw ArgumentError("sample " + std::to_string(sample) + " out of range for " + std::to_string(n_samples()) +
                        " rows");
  }
  return values_.values<float>().subspan(sample * layout_.flat_len(), layout_.flat_len());
}

std::vector<LatentBlock> unpack(const LatentBundle& bundle, std::size_t sample) {
  const auto row = bundle.row(sample);
  const auto& lengths = bundle.layout().block_lengths();
  std::vector<LatentBlock> blocks;
  blocks.reserve(lengths.size());
  std::size_t off = 0;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    blocks.push_back({bundle.layout().block_label(b), row.subspan(off, lengths[b])});
    off += lengths[b];
  }
  return blocks;
}

std::vector<float> pack(std::span<const LatentBlock> blocks) {
  std::vector<float> out;
  for (const auto& b : blocks) out.insert(out.end(), b.values.begin(), b.values.end());
  return out;
}

LatentBundle average_subjects(std::span<const LatentBundle> bundles) {
  if (bundles.empty()) throw ArgumentError("average_subjects needs at least one bundle");
  const auto& first = bundles.front();
  for (std::size_t k = 1; k < bundles.size(); ++k) {
    if (!(bundles[k].layout() == first.layout()) || bundles[k].n_samples() != first.n_samples()) {
      throw ArgumentError("bundle " + std::to_string(k) + " does not match the layout/sample count of bundle 0");
    }
  }
  const std::size_t n = first.values().numel();
  std::vector<std::span<const float>> views;
  for (const auto& b : bundles) views.push_back(b.values().values<float>());
  // Sorted per-element summation keeps the result independent of bundle order.
  std::vector<double> acc(n, 0.0);
  std::vector<double> vals(bundles.size());
  const double k = static_cast<double>(bundles.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < views.size(); ++b) vals[b] = views[b][i];
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (double v : vals) s += v;
    acc[i] = s / k;
  }
  return LatentBundle(first.layout(), Tensor::from_doubles(DType::f32, first.values().shape(), acc));
}

namespace {

double row_norm(std::span<const float> v, std::size_t d, std::size_t r) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double x = v[r * d + j];
    s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace

double mean_row_norm(const LatentBundle& bundle) {
  if (bundle.n_samples() == 0) throw DegenerateInputError("bundle has no rows");
  const std::size_t d = bundle.layout().flat_len();
  const auto v = bundle.values().values<float>();
  double total = 0.0;
  for (std::size_t r = 0; r < bundle.n_samples(); ++r) total += row_norm(v, d, r);
  return total / static_cast<double>(bundle.n_samples());
}

LatentBundle renormalize_rows(const LatentBundle& pred, double target_norm) {
  if (!(target_norm > 0.0) || !std::isfinite(target_norm)) {
    throw ArgumentError("renormalization target must be positive and finite");
  }
  const std::size_t d = pred.layout().flat_len();
  const auto pv = pred.values().values<float>();
  std::vector<double> out(pv.size());
  for (std::size_t r = 0; r < pred.n_samples(); ++r) {
    const double norm = row_norm(pv, d, r);
    if (norm == 0.0) throw DegenerateInputError("predicted row " + std::to_string(r) + " has zero norm");
    const double scale = target_norm / norm;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = pv[r * d + j] * scale;
  }
  return LatentBundle(pred.layout(), Tensor::from_doubles(DType::f32, pred.values().shape(), out));
}

LatentBundle renormalize_to_training(const LatentBundle& pred, const LatentBundle& train) {
  if (!(pred.layout() == train.layout())) throw ArgumentError("prediction and training bundles differ in layout");
  if (train.n_samples() == 0) throw DegenerateInputError("training bundle has no rows");
  return renormalize_rows(pred, mean_row_norm(train));
}

std::filesystem::path sidecar_path(const std::filesystem::path& npy_path) {
  auto p = npy_path;
  return p.replace_extension(".json");
}

void write_bundle(const LatentBundle& bundle, const std::filesystem::path& npy_path,
                  const nlohmann::json& provenance) {
  npy::write(bundle.values(), npy_path);
  const auto& layout = bundle.layout();
  nlohmann::json j = {
      {"format", "braindec.latent_bundle"},
      {"version", 1},
      {"family", family_name(layout.family())},
      {"shape", layout.shape()},
      {"flat_len", layout.flat_len()},
      {"canonical", layout.canonical()},
      {"n_samples", bundle.n_samples()},
      {"provenance", provenance},
  };
  if (layout.family() == LatentFamily::vdvae && layout.canonical()) {
    j["layer_table"] = layout.block_lengths();
    j["layer_table_version"] = 1;
  }
  std::ofstream out(sidecar_path(npy_path));
  if (!out) throw PathError("cannot write bundle sidecar for '" + npy_path.string() + "'");
  out << j.dump(2) << '\n';
}

LatentBundle read_bundle(const std::filesystem::path& npy_path) {
  const auto side = sidecar_path(npy_path);
  std::ifstream in(side);
  if (!in) throw PathError("missing bundle sidecar '" + side.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("bundle sidecar '" + side.string() + "' is not valid JSON: " + e.what());
  }
  const LatentFamily family = parse_family(j.at("family").get<std::string>());
  Tensor values = npy::read(npy_path);
  if (values.rank() != 2) throw LayoutError("bundle '" + npy_path.string() + "' must be rank-2");
  const bool canonical = j.value("canonical", true);
  LatentLayout layout = LatentLayout::custom(family, values.dim(1));
  if (canonical) {
    switch (family) {
      case LatentFamily::vdvae:
        layout = LatentLayout::vdvae(j.at("layer_table").get<std::vector<std::size_t>>());
        break;
      case LatentFamily::clip_vision: layout = LatentLayout::clip_vision(); break;
      case LatentFamily::clip_text: layout = LatentLayout::clip_text(); break;
    }
  }
  if (values.dtype() != DType::f32) {
    values = Tensor::from_doubles(DType::f32, values.shape(), values.to_doubles());
  }
  return LatentBundle(std::move(layout), std::move(values));
}

}  // namespace braindec
