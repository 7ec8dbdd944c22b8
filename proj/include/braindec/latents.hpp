#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "braindec/tensor.hpp"

namespace braindec {

enum class LatentFamily { vdvae, clip_vision, clip_text };

/// "vdvae", "clip-vision", "clip-text".
std::string_view family_name(LatentFamily family) noexcept;
LatentFamily parse_family(std::string_view name);

inline constexpr std::size_t kVdvaeLayers = 31;
inline constexpr std::size_t kVdvaeFlatLen = 91168;
inline constexpr std::size_t kClipDim = 768;
inline constexpr std::size_t kClipVisionTokens = 257;
inline constexpr std::size_t kClipTextTokens = 77;

/// Shape of one latent family and its block decomposition. VDVAE blocks are the
/// per-layer latent groups; CLIP blocks are the 768-d token embeddings.
class LatentLayout {
 public:
  /// Requires exactly 31 layer lengths summing to 91168; throws LayoutError otherwise.
  static LatentLayout vdvae(std::vector<std::size_t> layer_lengths);
  static LatentLayout clip_vision();
  static LatentLayout clip_text();
  /// Non-canonical width, for fixtures and experiments. A single block.
  static LatentLayout custom(LatentFamily family, std::size_t flat_len);

  LatentFamily family() const noexcept { return family_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t flat_len() const noexcept { return flat_len_; }
  bool canonical() const noexcept { return canonical_; }
  const std::vector<std::size_t>& block_lengths() const noexcept { return blocks_; }
  std::vector<std::size_t> block_offsets() const;
  std::string block_label(std::size_t block) const;

  friend bool operator==(const LatentLayout&, const LatentLayout&) = default;

 private:
  LatentFamily family_ = LatentFamily::vdvae;
  Shape shape_;
  std::size_t flat_len_ = 0;
  bool canonical_ = false;
  std::vector<std::size_t> blocks_;
};

/// Loads the versioned VDVAE layer-length table (data/vdvae_layers_v1.json).
std::vector<std::size_t> load_vdvae_layer_table(const std::filesystem::path& path);

/// n_samples x flat_len f32 matrix tagged with its layout.
class LatentBundle {
 public:
  LatentBundle(LatentLayout layout, Tensor values);

  const LatentLayout& layout() const noexcept { return layout_; }
  const Tensor& values() const noexcept { return values_; }
  std::size_t n_samples() const noexcept { return values_.dim(0); }
  std::span<const float> row(std::size_t sample) const;

 private:
  LatentLayout layout_;
  Tensor values_;
};

struct LatentBlock {
  std::string label;
  std::span<const float> values;
};

/// Splits one sample into its layout blocks; the blocks tile the row exactly.
std::vector<LatentBlock> unpack(const LatentBundle& bundle, std::size_t sample);
std::vector<float> pack(std::span<const LatentBlock> blocks);

/// Elementwise mean of bundles sharing a layout and sample count.
LatentBundle average_subjects(std::span<const LatentBundle> bundles);

/// Rescales every predicted row to the mean l2 norm of the training rows.
LatentBundle renormalize_to_training(const LatentBundle& pred, const LatentBundle& train);
/// Mean l2 norm over rows.
double mean_row_norm(const LatentBundle& bundle);
/// Rescales every row to `target_norm`; a zero row throws DegenerateInputError.
LatentBundle renormalize_rows(const LatentBundle& pred, double target_norm);

/// Writes `<path>` (values) and `<path minus .npy>.json` (family, layout, provenance).
void write_bundle(const LatentBundle& bundle, const std::filesystem::path& npy_path,
                  const nlohmann::json& provenance = nlohmann::json::object());
LatentBundle read_bundle(const std::filesystem::path& npy_path);
std::filesystem::path sidecar_path(const std::filesystem::path& npy_path);

}  // namespace braindec
