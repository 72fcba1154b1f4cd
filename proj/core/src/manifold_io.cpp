#include "fontmanifold/manifold_io.hpp"

#include <bit>
#include <cstring>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/png_io.hpp"

namespace fm::manifold {

using nlohmann::ordered_json;

TsneResult embed(std::vector<EmbeddedSample>& samples, const TsneConfig& config) {
  std::vector<double> points;
  points.reserve(samples.size() * vae::kLatentDim);
  for (const auto& s : samples) points.insert(points.end(), s.latent.begin(), s.latent.end());
  TsneResult result = tsne(points, vae::kLatentDim, config);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].coords = result.coords[i];
  return result;
}

std::string embedding_to_jsonl(std::span<const EmbeddedSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    ordered_json line;
    line["sample_id"] = s.sample_id;
    line["coords"] = {s.coords[0], s.coords[1]};
    line["label"] = to_string(s.label);
    line["latent"] = s.latent;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<EmbeddedSample> embedding_from_jsonl(const std::string& text) {
  std::vector<EmbeddedSample> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EmbeddedSample s;
      s.sample_id = j.at("sample_id").get<std::string>();
      const auto coords = j.at("coords").get<std::vector<double>>();
      const auto latent = j.at("latent").get<std::vector<double>>();
      const auto label = parse_label(j.at("label").get<std::string>());
      if (coords.size() != 2 || latent.size() != vae::kLatentDim || !label) {
        throw Error(Errc::Parse, "bad coords, latent or label");
      }
      s.coords = {coords[0], coords[1]};
      std::copy(latent.begin(), latent.end(), s.latent.begin());
      s.label = *label;
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Parse, "embedding line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(Errc::Parse, "embedding line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> bytes, std::size_t at) {
  return std::bit_cast<double>(get_le(bytes, at, 8));
}

std::filesystem::path manifest_path(const std::filesystem::path& dir) {
  return dir / "manifold.json";
}

ordered_json bounds_json(const Bounds& b) {
  return {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}};
}

std::string heatmap_stem(LabelFilter f) { return "heatmap_" + std::string(slug(f)); }

}  // namespace

std::vector<std::uint8_t> heatmap_to_f64(const HeatmapGrid& grid) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeatmapHeaderBytes + grid.density.size() * 8);
  put_u32(out, static_cast<std::uint32_t>(grid.width));
  put_u32(out, static_cast<std::uint32_t>(grid.height));
  put_f64(out, grid.bounds.x_min);
  put_f64(out, grid.bounds.x_max);
  put_f64(out, grid.bounds.y_min);
  put_f64(out, grid.bounds.y_max);
  for (double d : grid.density) put_f64(out, d);
  return out;
}

HeatmapGrid heatmap_from_f64(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeatmapHeaderBytes) throw Error(Errc::Format, "heatmap file too short");
  HeatmapGrid grid;
  const auto w = get_le(bytes, 0, 4);
  const auto h = get_le(bytes, 4, 4);
  if (w == 0 || h == 0 || bytes.size() != kHeatmapHeaderBytes + w * h * 8) {
    throw Error(Errc::Format, "heatmap size does not match its header");
  }
  grid.width = static_cast<int>(w);
  grid.height = static_cast<int>(h);
  grid.bounds = {get_f64(bytes, 8), get_f64(bytes, 16), get_f64(bytes, 24), get_f64(bytes, 32)};
  grid.density.resize(w * h);
  for (std::size_t i = 0; i < grid.density.size(); ++i) {
    grid.density[i] = get_f64(bytes, kHeatmapHeaderBytes + i * 8);
  }
  return grid;
}

ordered_json tsne_config_json(const TsneConfig& c) {
  return {{"perplexity", c.perplexity},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"early_exaggeration", c.early_exaggeration},
          {"exaggeration_iterations", c.exaggeration_iterations},
          {"initial_momentum", c.initial_momentum},
          {"final_momentum", c.final_momentum},
          {"momentum_switch", c.momentum_switch},
          {"init_std", c.init_std},
          {"min_gain", c.min_gain},
          {"calibration_tolerance", c.calibration_tolerance},
          {"seed", c.seed}};
}

void write_embedding_bundle(const std::filesystem::path& dir,
                            std::span<const EmbeddedSample> samples, const TsneConfig& config,
                            const TsneResult& result) {
  io::ensure_directory(dir);
  io::write_text(dir / "embedding.jsonl", embedding_to_jsonl(samples));
  ordered_json manifest;
  manifest["sample_count"] = samples.size();
  manifest["tsne"] = tsne_config_json(config);
  manifest["effective_perplexity"] = result.affinities.target_perplexity;
  ordered_json trace = ordered_json::array();
  for (const auto& o : result.objective) trace.push_back({o.iteration, o.kl});
  manifest["objective"] = std::move(trace);
  io::write_text(manifest_path(dir), manifest.dump(2) + "\n");
}

std::map<LabelFilter, HeatmapGrid> write_heatmaps(const std::filesystem::path& dir, int side) {
  const auto samples = embedding_from_jsonl(io::read_text(dir / "embedding.jsonl"));
  ordered_json manifest = ordered_json::parse(io::read_text(manifest_path(dir)));
  manifest["bounds"] = bounds_json(shared_bounds(samples));
  manifest["heatmap_side"] = side;
  ordered_json views = ordered_json::object();
  std::map<LabelFilter, HeatmapGrid> grids;
  for (LabelFilter f : kAllFilters) {
    const std::string stem = heatmap_stem(f);
    std::size_t count = 0;
    for (const auto& s : samples) count += matches(f, s.label) ? 1 : 0;
    ordered_json view;
    view["count"] = count;
    try {
      HeatmapGrid grid = kde_heatmap(samples, f, side, side);
      io::write_bytes(dir / (stem + ".png"), png::encode_rgb(side, side, colorize(grid)));
      io::write_bytes(dir / (stem + ".f64"), heatmap_to_f64(grid));
      view["bandwidth"] = {grid.bandwidth.h_x, grid.bandwidth.h_y};
      view["png"] = stem + ".png";
      view["f64"] = stem + ".f64";
      grids.emplace(f, std::move(grid));
    } catch (const Error& e) {
      std::filesystem::remove(dir / (stem + ".png"));
      std::filesystem::remove(dir / (stem + ".f64"));
      view["error"] = std::string(errc_name(e.code())) + ": " + e.what();
    }
    views[std::string(slug(f))] = std::move(view);
  }
  manifest["heatmaps"] = std::move(views);
  io::write_text(manifest_path(dir), manifest.dump(2) + "\n");
  return grids;
}

ManifoldBundle load_bundle(const std::filesystem::path& dir) {
  ManifoldBundle bundle;
  bundle.samples = embedding_from_jsonl(io::read_text(dir / "embedding.jsonl"));
  try {
    bundle.manifest = ordered_json::parse(io::read_text(manifest_path(dir)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("manifold.json: ") + e.what());
  }
  for (LabelFilter f : kAllFilters) {
    const auto stem = heatmap_stem(f);
    if (!std::filesystem::exists(dir / (stem + ".f64"))) continue;
    HeatmapGrid grid = heatmap_from_f64(io::read_bytes(dir / (stem + ".f64")));
    const std::string key(slug(f));
    const auto views = bundle.manifest.find("heatmaps");
    if (views != bundle.manifest.end() && views->contains(key) &&
        (*views)[key].contains("bandwidth")) {
      const auto& bw = (*views)[key]["bandwidth"];
      grid.bandwidth = {bw[0].get<double>(), bw[1].get<double>()};
    }
    bundle.heatmaps.emplace(f, std::move(grid));
    if (std::filesystem::exists(dir / (stem + ".png"))) {
      bundle.heatmap_png.emplace(f, io::read_bytes(dir / (stem + ".png")));
    }
  }
  return bundle;
}

}  // namespace fm::manifold
