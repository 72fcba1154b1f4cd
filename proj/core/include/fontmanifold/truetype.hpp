#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fontmanifold/image.hpp"

namespace fm::ttf {

/// Point of a quadratic TrueType contour in font units (y up).
struct OutlinePoint {
  double x = 0.0;
  double y = 0.0;
  bool on_curve = true;
};

using Contour = std::vector<OutlinePoint>;

struct Outline {
  std::vector<Contour> contours;
  int units_per_em = 1000;

  bool empty() const noexcept { return contours.empty(); }
};

/// Read-only view of the glyph-outline tables of a TrueType font
/// (`glyf`/`loca`/`cmap`/`head`/`maxp`). For a collection, the first face is
/// used. CFF-flavoured OpenType files are rejected with Errc::Parse.
class Font {
 public:
  static Font parse(std::span<const std::uint8_t> bytes);

  int units_per_em() const noexcept { return units_per_em_; }
  int glyph_count() const noexcept { return num_glyphs_; }

  /// Glyph index mapped to `codepoint`, or 0 when the cmap has no entry.
  std::uint32_t glyph_index(char32_t codepoint) const;

  /// Outline for `codepoint`. Throws Errc::MissingGlyph when unmapped.
  Outline outline(char32_t codepoint) const;

 private:
  Font() = default;

  void load_glyph(std::uint32_t glyph, Outline& out, const double (&xform)[6], int depth) const;

  std::vector<std::uint8_t> data_;
  std::size_t glyf_offset_ = 0, glyf_length_ = 0;
  std::size_t loca_offset_ = 0, loca_length_ = 0;
  std::size_t cmap_subtable_ = 0;
  int cmap_format_ = 0;
  int units_per_em_ = 0;
  int num_glyphs_ = 0;
  bool long_loca_ = false;
};

/// Fills the outline with the non-zero winding rule at `pixels_per_em`,
/// centred on a canvas x canvas white raster. Coverage is computed on 16
/// sub-scanlines per pixel row with exact horizontal span coverage.
RawBitmap rasterize_outline(const Outline& outline, int canvas, double pixels_per_em);

inline constexpr double kDefaultPixelsPerEm = 200.0;

/// Parses `font_bytes`, looks up `codepoint`, and renders it black on
/// white. Errors: Parse, MissingGlyph, EmptyGlyph (no ink rendered),
/// InvalidArgument (canvas < 64).
RawBitmap rasterize_glyph(std::span<const std::uint8_t> font_bytes, char32_t codepoint,
                          int canvas = 256, double pixels_per_em = kDefaultPixelsPerEm);

}  // namespace fm::ttf
