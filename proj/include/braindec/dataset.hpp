#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "braindec/tensor.hpp"

namespace braindec {

/// Trial-averaged, mask-applied beta weights for one subject
/// (n_samples x n_voxels). Rows align with `image_ids`.
struct FmriDataset {
  std::string subject_id;
  Tensor betas;
  std::vector<std::int64_t> image_ids;

  std::size_t n_samples() const { return betas.rows(); }
  std::size_t voxel_count() const { return betas.cols(); }
};

/// Sorted, unique voxel indices into a voxel universe of size `universe_size`.
class RoiMask {
 public:
  RoiMask() = default;
  /// Throws ArgumentError unless indices are strictly increasing and < universe_size.
  RoiMask(std::string name, std::vector<std::int64_t> indices, std::size_t universe_size);

  /// Builds a mask from an unsorted index list (sorted and de-duplicated first).
  static RoiMask from_unsorted(std::string name, std::vector<std::int64_t> indices, std::size_t universe_size);
  static RoiMask full(std::string name, std::size_t universe_size);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::int64_t>& indices() const noexcept { return indices_; }
  std::size_t universe_size() const noexcept { return universe_size_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool contains(std::int64_t voxel) const;

 private:
  std::string name_;
  std::vector<std::int64_t> indices_;
  std::size_t universe_size_ = 0;
};

/// Collapses repeated presentations: one row per distinct image id, holding the
/// mean of its trials, in first-occurrence order. Accumulates in double and
/// stores back in the input dtype.
FmriDataset average_repetitions(const Tensor& trials, const std::vector<std::int64_t>& image_ids,
                                std::string subject_id = {});

/// Gathers `pattern` at mask indices. Rank-1 input of length universe_size, or
/// rank-2 (rows x universe_size) gathered per row.
Tensor apply_mask(const Tensor& pattern, const RoiMask& mask);

/// Reads an index mask stored as an integer NPY vector.
RoiMask read_mask(const std::filesystem::path& path, std::string name, std::size_t universe_size);

/// Image ids may be stored as i32 or i64 NPY vectors.
std::vector<std::int64_t> read_ids(const std::filesystem::path& path);

using PathManifest = std::map<std::string, std::filesystem::path>;

/// Flat JSON object mapping role names ("fmri", "latents", "mask", ...) to paths.
/// Relative paths are resolved against the manifest's directory.
PathManifest read_path_manifest(const std::filesystem::path& path);
void write_path_manifest(const PathManifest& manifest, const std::filesystem::path& path);

}  // namespace braindec
