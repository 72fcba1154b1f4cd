#include "fontmanifold/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/png_io.hpp"
#include "fontmanifold/truetype.hpp"

namespace fm::ingest {

namespace fs = std::filesystem;

RawBitmap crop_to_ink(const RawBitmap& raw) {
  if (raw.empty()) throw Error(Errc::EmptyGlyph, "crop_to_ink: empty bitmap");
  int x0 = raw.width, y0 = raw.height, x1 = -1, y1 = -1;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      if (raw.at(x, y) <= kInkThreshold) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw Error(Errc::EmptyGlyph, "crop_to_ink: no ink pixels");
  RawBitmap out(x1 - x0 + 1, y1 - y0 + 1);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(x, y) = raw.at(x0 + x, y0 + y);
  }
  return out;
}

RawBitmap pad_to_square(const RawBitmap& raw) {
  if (raw.empty()) throw Error(Errc::Dimension, "pad_to_square: empty bitmap");
  const int side = std::max(raw.width, raw.height);
  const int missing_cols = side - raw.width;
  const int missing_rows = side - raw.height;
  // Alternation starting bottom/right: the far side receives the extra line
  // when the count is odd.
  const int left = missing_cols / 2;
  const int top = missing_rows / 2;
  RawBitmap out(side, side, 255);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) out.at(left + x, top + y) = raw.at(x, y);
  }
  return out;
}

RawBitmap resize_bilinear(const RawBitmap& square, int target) {
  if (square.empty() || square.width != square.height) {
    throw Error(Errc::Dimension, "resize_bilinear: input must be square");
  }
  if (target < 1) throw Error(Errc::Dimension, "resize_bilinear: target must be positive");
  const int src = square.width;
  const double ratio = static_cast<double>(src) / target;

  struct Tap {
    int i0, i1;
    double frac;
  };
  std::vector<Tap> taps(static_cast<std::size_t>(target));
  for (int d = 0; d < target; ++d) {
    const double s = std::clamp((d + 0.5) * ratio - 0.5, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    taps[static_cast<std::size_t>(d)] = {i0, std::min(i0 + 1, src - 1), s - i0};
  }

  RawBitmap out(target, target);
  for (int y = 0; y < target; ++y) {
    const Tap ty = taps[static_cast<std::size_t>(y)];
    for (int x = 0; x < target; ++x) {
      const Tap tx = taps[static_cast<std::size_t>(x)];
      const double top = square.at(tx.i0, ty.i0) * (1 - tx.frac) + square.at(tx.i1, ty.i0) * tx.frac;
      const double bot = square.at(tx.i0, ty.i1) * (1 - tx.frac) + square.at(tx.i1, ty.i1) * tx.frac;
      const double v = top * (1 - ty.frac) + bot * ty.frac;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

GlyphBitmap to_training_bitmap(const RawBitmap& raw28) {
  if (raw28.width != GlyphBitmap::kSide || raw28.height != GlyphBitmap::kSide) {
    throw Error(Errc::Dimension, "to_training_bitmap: expected 28x28, got " +
                                     std::to_string(raw28.width) + "x" + std::to_string(raw28.height));
  }
  std::vector<double> values(GlyphBitmap::kPixels);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = (255.0 - raw28.pixels[i]) / 255.0;
  return GlyphBitmap(values);
}

RawBitmap from_training_bitmap(const GlyphBitmap& glyph) {
  RawBitmap out(GlyphBitmap::kSide, GlyphBitmap::kSide);
  for (std::size_t i = 0; i < GlyphBitmap::kPixels; ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 - 255.0 * glyph[i]));
  }
  return out;
}

RawBitmap cleanse(const RawBitmap& raw) {
  return resize_bilinear(pad_to_square(crop_to_ink(raw)), GlyphBitmap::kSide);
}

RawBitmap glyph_28(std::span<const std::uint8_t> font_bytes, char32_t codepoint) {
  return cleanse(ttf::rasterize_glyph(font_bytes, codepoint, kCanvas));
}

std::size_t DatasetManifest::ok_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) {
    return e.status == EntryStatus::Ok;
  }));
}

namespace {

bool is_font_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".ttf" || ext == ".otf" || ext == ".ttc";
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? static_cast<char>(c) : '_');
  }
  return out.empty() ? "font" : out;
}

nlohmann::ordered_json entry_to_json(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["font_id"] = e.font_id;
  j["source_file"] = e.source_file;
  j["status"] = e.status == EntryStatus::Ok ? "ok" : "skipped";
  j["reason"] = e.reason ? nlohmann::ordered_json(*e.reason) : nlohmann::ordered_json(nullptr);
  j["bitmap_path"] = e.bitmap_path.empty() ? nlohmann::ordered_json(nullptr)
                                           : nlohmann::ordered_json(e.bitmap_path);
  return j;
}

}  // namespace

DatasetManifest ingest_corpus(const fs::path& font_dir, const fs::path& out_dir,
                              const IngestOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(font_dir, ec)) {
    throw Error(Errc::Io, "font directory not readable: " + font_dir.string());
  }
  std::vector<fs::path> files;
  for (fs::recursive_directory_iterator it(font_dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && is_font_file(it->path())) files.push_back(it->path());
  }
  if (ec) throw Error(Errc::Io, "cannot list " + font_dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  io::ensure_directory(out_dir / "bitmaps");

  // Stable ids: file stem, disambiguated in sorted path order.
  std::set<std::string> used;
  DatasetManifest manifest;
  for (const auto& file : files) {
    const std::string stem = sanitize(file.stem().string());
    std::string id = stem;
    for (int n = 2; used.count(id); ++n) id = stem + "_" + std::to_string(n);
    used.insert(id);

    ManifestEntry entry;
    entry.font_id = id;
    entry.source_file = file.lexically_relative(font_dir).generic_string();
    try {
      const auto bytes = io::read_bytes(file);
      const RawBitmap raw28 = cleanse(ttf::rasterize_glyph(bytes, options.codepoint, options.canvas));
      entry.bitmap_path = "bitmaps/" + id + ".png";
      io::write_bytes(out_dir / entry.bitmap_path, png::encode_gray(raw28));
      entry.status = EntryStatus::Ok;
    } catch (const Error& err) {
      entry.status = EntryStatus::Skipped;
      entry.reason = std::string(errc_name(err.code())) + ": " + err.what();
      entry.bitmap_path.clear();
    }
    manifest.entries.push_back(std::move(entry));
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const auto& a, const auto& b) { return a.font_id < b.font_id; });

  io::write_text(out_dir / "manifest.jsonl", manifest_to_jsonl(manifest));
  return manifest;
}

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

DatasetManifest manifest_from_jsonl(const std::string& text) {
  DatasetManifest manifest;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.font_id = j.at("font_id").get<std::string>();
      e.source_file = j.at("source_file").get<std::string>();
      const auto status = j.at("status").get<std::string>();
      if (status != "ok" && status != "skipped") throw Error(Errc::Format, "bad status " + status);
      e.status = status == "ok" ? EntryStatus::Ok : EntryStatus::Skipped;
      if (j.contains("reason") && !j["reason"].is_null()) e.reason = j["reason"].get<std::string>();
      if (j.contains("bitmap_path") && !j["bitmap_path"].is_null()) {
        e.bitmap_path = j["bitmap_path"].get<std::string>();
      }
      manifest.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::Format, "manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return manifest;
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
  return manifest_from_jsonl(io::read_text(dataset_dir / "manifest.jsonl"));
}

std::vector<CorpusGlyph> load_corpus(const fs::path& dataset_dir, const DatasetManifest& manifest) {
  std::vector<CorpusGlyph> corpus;
  for (const auto& e : manifest.entries) {
    if (e.status != EntryStatus::Ok) continue;
    const RawBitmap raw = png::decode_gray(io::read_bytes(dataset_dir / e.bitmap_path));
    corpus.push_back({e.font_id, to_training_bitmap(raw)});
  }
  return corpus;
}

}  // namespace fm::ingest
