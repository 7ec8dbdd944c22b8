#include "braindec/roisynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "json.hpp"

namespace braindec::roisynth {

RoiCatalog::RoiCatalog(std::size_t universe_size, std::string general_name)
    : universe_size_(universe_size), general_(std::move(general_name)) {}

void RoiCatalog::add_mask(RoiMask mask) {
  if (mask.universe_size() != universe_size_) {
    throw ConsistencyError("mask '" + mask.name() + "' has universe " + std::to_string(mask.universe_size()) +
                           ", catalog universe is " + std::to_string(universe_size_));
  }
  masks_.insert_or_assign(mask.name(), std::move(mask));
}

void RoiCatalog::add_composition(std::string name, std::vector<std::string> members) {
  if (members.empty()) throw ConsistencyError("composition '" + name + "' has no members");
  compositions_.insert_or_assign(std::move(name), std::move(members));
}

void RoiCatalog::set_eccentricity_bands(std::vector<std::string> names) {
  if (!names.empty() && names.size() != kEccentricityLabels.size()) {
    throw ConsistencyError("expected " + std::to_string(kEccentricityLabels.size()) + " eccentricity bands, got " +
                           std::to_string(names.size()));
  }
  bands_ = std::move(names);
}

bool RoiCatalog::contains(const std::string& name) const {
  return masks_.count(name) > 0 || compositions_.count(name) > 0;
}

std::vector<std::string> RoiCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : masks_) out.push_back(n);
  for (const auto& [n, _] : compositions_) out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

RoiMask RoiCatalog::resolve(const std::string& name) const { return resolve_impl(name, 0); }

RoiMask RoiCatalog::resolve_impl(const std::string& name, int depth) const {
  if (depth > 32) throw ConsistencyError("composition cycle involving '" + name + "'");
  if (auto it = masks_.find(name); it != masks_.end()) return it->second;
  auto it = compositions_.find(name);
  if (it == compositions_.end()) {
    std::string avail;
    for (const auto& n : names()) avail += (avail.empty() ? "" : ", ") + n;
    throw LookupError("unknown ROI '" + name + "'; available: " + avail);
  }
  std::vector<std::int64_t> all;
  for (const auto& member : it->second) {
    const RoiMask m = resolve_impl(member, depth + 1);
    all.insert(all.end(), m.indices().begin(), m.indices().end());
  }
  return RoiMask::from_unsorted(name, std::move(all), universe_size_);
}

RoiCatalog RoiCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open ROI catalog '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("ROI catalog '" + path.string() + "' is not valid JSON: " + e.what());
  }
  const auto base = path.parent_path();
  try {
    RoiCatalog cat(j.at("universe_size").get<std::size_t>(), j.at("general").get<std::string>());
    for (const auto& [name, file] : j.at("masks").items()) {
      std::filesystem::path p = file.get<std::string>();
      cat.add_mask(read_mask(p.is_absolute() ? p : base / p, name, cat.universe_size()));
    }
    if (j.contains("compositions")) {
      for (const auto& [name, members] : j.at("compositions").items()) {
        cat.add_composition(name, members.get<std::vector<std::string>>());
      }
    }
    if (j.contains("eccentricity_bands")) {
      cat.set_eccentricity_bands(j.at("eccentricity_bands").get<std::vector<std::string>>());
    }
    cat.general();  // the general mask must resolve
    return cat;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError("malformed ROI catalog '" + path.string() + "': " + e.what());
  }
}

std::vector<EccentricityBand> eccentricity_bands(const RoiCatalog& catalog) {
  const auto& names = catalog.eccentricity_band_names();
  if (names.empty()) throw LookupError("catalog defines no eccentricity bands");
  std::vector<EccentricityBand> out;
  std::vector<std::uint8_t> seen(catalog.universe_size(), 0);
  for (std::size_t b = 0; b < names.size(); ++b) {
    RoiMask m = catalog.resolve(names[b]);
    for (auto v : m.indices()) {
      if (seen[static_cast<std::size_t>(v)]++) {
        throw ConsistencyError("eccentricity band '" + names[b] + "' overlaps an earlier band at voxel " +
                               std::to_string(v));
      }
    }
    out.push_back({std::string(kEccentricityLabels[b]), std::move(m)});
  }
  return out;
}

RoiMask union_rois(const RoiCatalog& catalog, const std::vector<std::string>& names) {
  if (names.empty()) throw ArgumentError("union_rois needs at least one name");
  if (names.size() == 1) return catalog.resolve(names.front());
  std::vector<std::int64_t> all;
  std::string label;
  for (const auto& n : names) {
    const RoiMask m = catalog.resolve(n);
    all.insert(all.end(), m.indices().begin(), m.indices().end());
    label += (label.empty() ? "" : "+") + n;
  }
  return RoiMask::from_unsorted(label, std::move(all), catalog.universe_size());
}

std::vector<std::size_t> positions_in(const RoiMask& roi, const RoiMask& general) {
  if (roi.universe_size() != general.universe_size()) {
    throw ArgumentError("ROI '" + roi.name() + "' and '" + general.name() + "' use different voxel universes");
  }
  std::vector<std::size_t> pos;
  const auto& g = general.indices();
  const auto& r = roi.indices();
  std::size_t gi = 0;
  for (auto v : r) {
    while (gi < g.size() && g[gi] < v) ++gi;
    if (gi < g.size() && g[gi] == v) pos.push_back(gi);
  }
  return pos;
}

Tensor synth_pattern(const RoiMask& roi, const RoiMask& general) {
  const auto pos = positions_in(roi, general);
  std::vector<float> pattern(general.size(), 0.0f);
  for (auto k : pos) pattern[k] = 1.0f;
  if (pos.empty()) {
    spdlog::warn("ROI '{}' does not intersect '{}'; synthetic pattern is all zeros", roi.name(), general.name());
  }
  return Tensor::from<float>({general.size()}, pattern);
}

std::vector<double> percentile_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> pct(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 share their mean
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) pct[order[k]] = 100.0 * rank / static_cast<double>(n);
    i = j + 1;
  }
  return pct;
}

std::vector<RoiDifference> weight_percentile_analysis(const std::map<LatentFamily, std::vector<double>>& l1_norms,
                                                      const RoiCatalog& catalog, const std::vector<std::string>& rois,
                                                      LatentFamily baseline) {
  const auto base_it = l1_norms.find(baseline);
  if (base_it == l1_norms.end()) {
    throw ArgumentError("no weights for baseline family '" + std::string(family_name(baseline)) + "'");
  }
  const RoiMask general = catalog.general();
  for (const auto& [family, v] : l1_norms) {
    if (v.size() != general.size()) {
      throw ConsistencyError(std::string(family_name(family)) + " weights cover " + std::to_string(v.size()) +
                             " voxels, general mask '" + general.name() + "' has " + std::to_string(general.size()));
    }
  }
  std::map<LatentFamily, std::vector<double>> pct;
  for (const auto& [family, v] : l1_norms) pct[family] = percentile_ranks(v);

  auto mean_over = [](const std::vector<double>& p, const std::vector<std::size_t>& pos) {
    double s = 0.0;
    for (auto k : pos) s += p[k];
    return s / static_cast<double>(pos.size());
  };

  std::vector<RoiDifference> out;
  for (const auto& name : rois) {
    const auto pos = positions_in(catalog.resolve(name), general);
    if (pos.empty()) {
      spdlog::warn("ROI '{}' has no voxels inside '{}'; skipped", name, general.name());
      continue;
    }
    const double base = mean_over(pct.at(baseline), pos);
    for (const auto& [family, p] : pct) {
      if (family == baseline) continue;
      const double m = mean_over(p, pos);
      out.push_back({name, family, (m - base) / base, m, base, pos.size()});
    }
  }
  return out;
}

std::vector<RoiDifference> weight_percentile_analysis(const std::map<LatentFamily, const ridge::RidgeModel*>& models,
                                                      const RoiCatalog& catalog, const std::vector<std::string>& rois,
                                                      const ridge::L1Options& l1) {
  std::map<LatentFamily, std::vector<double>> norms;
  std::size_t p = 0;
  for (const auto& [family, model] : models) {
    if (p != 0 && model->n_features() != p) {
      throw ConsistencyError("models were trained on different voxel counts");
    }
    p = model->n_features();
    norms[family] = ridge::weight_l1_per_voxel(*model, l1);
  }
  return weight_percentile_analysis(norms, catalog, rois);
}

SemSummary sem_across_subjects(const std::vector<std::vector<double>>& values) {
  const std::size_t k = values.size();
  if (k < 2) throw ArgumentError("standard error needs at least 2 subjects, got " + std::to_string(k));
  const std::size_t r = values.front().size();
  for (const auto& row : values) {
    if (row.size() != r) throw ArgumentError("subjects report different ROI counts");
  }
  SemSummary s;
  s.mean.assign(r, 0.0);
  s.sem.assign(r, 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    double m = 0.0;
    for (const auto& row : values) m += row[j];
    m /= static_cast<double>(k);
    double ss = 0.0;
    for (const auto& row : values) ss += (row[j] - m) * (row[j] - m);
    s.mean[j] = m;
    s.sem[j] = std::sqrt(ss / static_cast<double>(k - 1)) / std::sqrt(static_cast<double>(k));
  }
  return s;
}

}  // namespace braindec::roisynth
