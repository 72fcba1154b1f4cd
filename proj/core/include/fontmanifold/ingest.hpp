#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fontmanifold/image.hpp"

namespace fm::ingest {

/// Intensities at or below this value count as ink.
inline constexpr std::uint8_t kInkThreshold = 250;
inline constexpr int kCanvas = 256;

/// Tight bounding box of ink pixels. Throws Errc::EmptyGlyph when there is
/// no ink.
RawBitmap crop_to_ink(const RawBitmap& raw);

/// Pads the shorter side with white lines, alternating bottom/right first
/// and then top/left, until the image is square.
RawBitmap pad_to_square(const RawBitmap& raw);

/// Bilinear resize of a square image with pixel-centre alignment and edge
/// clamping; results are rounded half-up.
RawBitmap resize_bilinear(const RawBitmap& square, int target);

/// v -> (255 - v) / 255. Throws Errc::Dimension unless 28x28.
GlyphBitmap to_training_bitmap(const RawBitmap& raw28);

/// Inverse of to_training_bitmap: g -> round(255 - 255 g).
RawBitmap from_training_bitmap(const GlyphBitmap& glyph);

/// crop -> pad -> resize to 28.
RawBitmap cleanse(const RawBitmap& raw);

/// Rasterize + cleanse one codepoint of a font file image.
RawBitmap glyph_28(std::span<const std::uint8_t> font_bytes, char32_t codepoint);

enum class EntryStatus { Ok, Skipped };

struct ManifestEntry {
  std::string font_id;
  std::string source_file;  // relative to the font directory
  EntryStatus status = EntryStatus::Ok;
  std::optional<std::string> reason;
  std::string bitmap_path;  // relative to the dataset directory; empty when skipped

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // sorted by font_id

  std::size_t ok_count() const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct IngestOptions {
  char32_t codepoint = U'A';
  int canvas = kCanvas;
};

/// Runs the cleansing pipeline on every .ttf/.otf/.ttc below `font_dir`,
/// writing out_dir/bitmaps/<font_id>.png and out_dir/manifest.jsonl.
/// Files that fail are recorded as skipped with the reason.
DatasetManifest ingest_corpus(const std::filesystem::path& font_dir,
                              const std::filesystem::path& out_dir,
                              const IngestOptions& options = {});

std::string manifest_to_jsonl(const DatasetManifest& manifest);
DatasetManifest manifest_from_jsonl(const std::string& text);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

struct CorpusGlyph {
  std::string font_id;
  GlyphBitmap bitmap;
};

/// Loads the training bitmaps of every ok entry, in manifest order.
std::vector<CorpusGlyph> load_corpus(const std::filesystem::path& dataset_dir,
                                     const DatasetManifest& manifest);

}  // namespace fm::ingest
