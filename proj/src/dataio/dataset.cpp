#include "braindec/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

#include "braindec/npy.hpp"

namespace braindec {

RoiMask::RoiMask(std::string name, std::vector<std::int64_t> indices, std::size_t universe_size)
    : name_(std::move(name)), indices_(std::move(indices)), universe_size_(universe_size) {
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] < 0 || static_cast<std::size_t>(indices_[k]) >= universe_size_) {
      throw ArgumentError("mask '" + name_ + "': index " + std::to_string(indices_[k]) +
                          " outside universe of size " + std::to_string(universe_size_));
    }
    if (k > 0 && indices_[k] <= indices_[k - 1]) {
      throw ArgumentError("mask '" + name_ + "': indices must be strictly increasing (position " +
                          std::to_string(k) + ")");
    }
  }
}

RoiMask RoiMask::from_unsorted(std::string name, std::vector<std::int64_t> indices, std::size_t universe_size) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return RoiMask(std::move(name), std::move(indices), universe_size);
}

RoiMask RoiMask::full(std::string name, std::size_t universe_size) {
  std::vector<std::int64_t> idx(universe_size);
  for (std::size_t i = 0; i < universe_size; ++i) idx[i] = static_cast<std::int64_t>(i);
  return RoiMask(std::move(name), std::move(idx), universe_size);
}

bool RoiMask::contains(std::int64_t voxel) const {
  return std::binary_search(indices_.begin(), indices_.end(), voxel);
}

FmriDataset average_repetitions(const Tensor& trials, const std::vector<std::int64_t>& image_ids,
                                std::string subject_id) {
  if (trials.rank() != 2) throw ArgumentError("trials must be rank-2, got " + shape_string(trials.shape()));
  const std::size_t n = trials.dim(0);
  const std::size_t p = trials.dim(1);
  if (image_ids.size() != n) {
    throw ArgumentError("image_ids has " + std::to_string(image_ids.size()) + " entries for " +
                        std::to_string(n) + " trials");
  }

  std::unordered_map<std::int64_t, std::size_t> group_of;
  std::vector<std::int64_t> unique_ids;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = group_of.try_emplace(image_ids[i], unique_ids.size());
    if (inserted) {
      unique_ids.push_back(image_ids[i]);
      counts.push_back(0);
    }
    group[i] = it->second;
    ++counts[it->second];
  }

  std::vector<std::vector<std::size_t>> members(unique_ids.size());
  for (std::size_t i = 0; i < n; ++i) members[group[i]].push_back(i);

  // Summing each group's values in sorted order makes the mean independent of trial order.
  std::vector<double> sums(unique_ids.size() * p, 0.0);
  std::vector<double> vals;
  for (std::size_t g = 0; g < unique_ids.size(); ++g) {
    const double c = static_cast<double>(counts[g]);
    for (std::size_t j = 0; j < p; ++j) {
      vals.clear();
      for (std::size_t i : members[g]) vals.push_back(trials.as_double(i * p + j));
      std::sort(vals.begin(), vals.end());
      double s = 0.0;
      for (double v : vals) s += v;
      sums[g * p + j] = s / c;
    }
  }
  return FmriDataset{std::move(subject_id), Tensor::from_doubles(trials.dtype(), {unique_ids.size(), p}, sums),
                     std::move(unique_ids)};
}

Tensor apply_mask(const Tensor& pattern, const RoiMask& mask) {
  if (pattern.rank() != 1 && pattern.rank() != 2) {
    throw ArgumentError("pattern must be rank-1 or rank-2, got " + shape_string(pattern.shape()));
  }
  const std::size_t width = pattern.shape().back();
  if (width != mask.universe_size()) {
    throw ArgumentError("pattern length " + std::to_string(width) + " does not match mask '" + mask.name() +
                        "' universe of " + std::to_string(mask.universe_size()));
  }
  const std::size_t rows = pattern.rank() == 2 ? pattern.dim(0) : 1;
  const std::size_t es = dtype_size(pattern.dtype());
  Shape out_shape = pattern.rank() == 2 ? Shape{rows, mask.size()} : Shape{mask.size()};
  Tensor out(pattern.dtype(), out_shape);
  auto src = pattern.bytes();
  auto dst = out.bytes();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < mask.size(); ++k) {
      const auto j = static_cast<std::size_t>(mask.indices()[k]);
      std::memcpy(dst.data() + (r * mask.size() + k) * es, src.data() + (r * width + j) * es, es);
    }
  }
  return out;
}

std::vector<std::int64_t> read_ids(const std::filesystem::path& path) {
  Tensor t = npy::read(path);
  if (t.rank() != 1) throw ConsistencyError("id file '" + path.string() + "' must be rank-1");
  std::vector<std::int64_t> ids(t.numel());
  if (t.dtype() == DType::i64) {
    auto v = t.values<std::int64_t>();
    std::copy(v.begin(), v.end(), ids.begin());
  } else if (t.dtype() == DType::i32) {
    auto v = t.values<std::int32_t>();
    std::copy(v.begin(), v.end(), ids.begin());
  } else {
    throw ConsistencyError("id file '" + path.string() + "' must hold integers, found " +
                           std::string(dtype_name(t.dtype())));
  }
  return ids;
}

RoiMask read_mask(const std::filesystem::path& path, std::string name, std::size_t universe_size) {
  return RoiMask::from_unsorted(std::move(name), read_ids(path), universe_size);
}

PathManifest read_path_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConsistencyError("manifest '" + path.string() + "' must be a JSON object");
  PathManifest out;
  const auto base = path.parent_path();
  for (const auto& [role, value] : j.items()) {
    if (!value.is_string()) throw ConsistencyError("manifest role '" + role + "' must map to a path string");
    std::filesystem::path p = value.get<std::string>();
    out[role] = p.is_absolute() ? p : base / p;
  }
  return out;
}

void write_path_manifest(const PathManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [role, p] : manifest) j[role] = p.string();
  std::ofstream out(path);
  if (!out) throw PathError("cannot write manifest '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace braindec
