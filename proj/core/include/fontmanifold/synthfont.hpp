#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fontmanifold/rng.hpp"
#include "fontmanifold/truetype.hpp"

namespace fm::synth {

/// Parameters of a procedurally drawn stroke font.
struct Style {
  double weight = 90.0;      // stroke width, font units (em = 1000)
  double slant = 0.0;        // horizontal shear per unit height
  double width = 1.0;        // horizontal stretch
  double crossbar = 0.35;    // crossbar height of 'A', fraction of cap height
  double contrast = 1.0;     // thick/thin ratio of diagonal strokes
  double serif = 0.0;        // serif length, font units (0 = sans)
  double bend = 0.0;         // stroke curvature, fraction of stroke length
};

Style random_style(Rng& rng);

/// Outline of one capital letter A-Z drawn with `style`, in font units.
std::vector<ttf::Contour> letter_outline(char letter, const Style& style);

/// Serializes a minimal TrueType file (head, hhea, maxp, cmap format 4,
/// hmtx, loca, glyf, post) mapping each codepoint to its outline.
std::vector<std::uint8_t> build_font(const std::map<char32_t, std::vector<ttf::Contour>>& glyphs,
                                     int units_per_em = 1000);

/// Font with the given letters (default: A-Z) in `style`.
std::vector<std::uint8_t> build_style_font(const Style& style,
                                           const std::string& letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ");

/// Writes `count` seeded synthetic fonts as synth_NNNN.ttf under `dir`.
/// Returns the written paths in order.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, int count,
                                                std::uint64_t seed);

}  // namespace fm::synth
