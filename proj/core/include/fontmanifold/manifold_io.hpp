#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fontmanifold/manifold.hpp"

namespace fm::manifold {

/// Runs t-SNE over the latents of `samples` and stores the coordinates in
/// place (sample order is preserved).
TsneResult embed(std::vector<EmbeddedSample>& samples, const TsneConfig& config = {});

std::string embedding_to_jsonl(std::span<const EmbeddedSample> samples);
std::vector<EmbeddedSample> embedding_from_jsonl(const std::string& text);

/// Raw density dump: width u32 LE, height u32 LE, x_min, x_max, y_min, y_max
/// as f64 LE (40-byte header), then width*height f64 LE, row 0 at y_max.
std::vector<std::uint8_t> heatmap_to_f64(const HeatmapGrid& grid);
/// The bandwidth is not stored and comes back as zero.
HeatmapGrid heatmap_from_f64(std::span<const std::uint8_t> bytes);

inline constexpr std::size_t kHeatmapHeaderBytes = 40;

nlohmann::ordered_json tsne_config_json(const TsneConfig& config);

/// Bundle layout:
///   embedding.jsonl          one EmbeddedSample per line
///   manifold.json            bundle manifest (t-SNE config, bounds, per-view info)
///   heatmap_<slug>.png/.f64  one pair per label view that has samples
void write_embedding_bundle(const std::filesystem::path& dir,
                            std::span<const EmbeddedSample> samples, const TsneConfig& config,
                            const TsneResult& result);

/// Builds every label view with kde_heatmap and writes the heatmap files,
/// recording bounds and bandwidths in manifold.json. Views that cannot be
/// estimated are listed with their error instead. Returns the grids built.
std::map<LabelFilter, HeatmapGrid> write_heatmaps(const std::filesystem::path& dir,
                                                  int side = kHeatmapSide);

struct ManifoldBundle {
  std::vector<EmbeddedSample> samples;
  nlohmann::ordered_json manifest;
  std::map<LabelFilter, HeatmapGrid> heatmaps;
  std::map<LabelFilter, std::vector<std::uint8_t>> heatmap_png;
};

/// Loads embedding.jsonl, manifold.json and whichever heatmaps exist.
ManifoldBundle load_bundle(const std::filesystem::path& dir);

}  // namespace fm::manifold
