#include "fontmanifold/synthfont.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"

namespace fm::synth {

namespace {

constexpr double kCapHeight = 700.0;
constexpr double kSideBearing = 60.0;

using Polyline = std::vector<std::array<double, 2>>;

// Letter skeletons in a unit box (x roughly 0..0.9, y 0..1 cap height).
std::vector<Polyline> skeleton(char letter, const Style& style) {
  switch (letter) {
    case 'A': {
      const double yb = style.crossbar;
      const double xl = 0.4 * yb, xr = 0.8 - 0.4 * yb;
      return {{{0, 0}, {0.4, 1}}, {{0.4, 1}, {0.8, 0}}, {{xl, yb}, {xr, yb}}};
    }
    case 'B':
      return {{{0, 0}, {0, 1}, {0.5, 1}, {0.65, 0.85}, {0.65, 0.65}, {0.5, 0.5}, {0, 0.5}},
              {{0.5, 0.5}, {0.7, 0.35}, {0.7, 0.15}, {0.55, 0}, {0, 0}}};
    case 'C':
      return {{{0.7, 0.85}, {0.5, 1}, {0.2, 1}, {0, 0.75}, {0, 0.25}, {0.2, 0}, {0.5, 0}, {0.7, 0.15}}};
    case 'D':
      return {{{0, 0}, {0, 1}, {0.45, 1}, {0.7, 0.75}, {0.7, 0.25}, {0.45, 0}, {0, 0}}};
    case 'E':
      return {{{0.7, 1}, {0, 1}, {0, 0}, {0.7, 0}}, {{0, 0.5}, {0.55, 0.5}}};
    case 'F':
      return {{{0.7, 1}, {0, 1}, {0, 0}}, {{0, 0.5}, {0.55, 0.5}}};
    case 'G':
      return {{{0.7, 0.85}, {0.5, 1}, {0.2, 1}, {0, 0.75}, {0, 0.25}, {0.2, 0}, {0.5, 0},
               {0.7, 0.2}, {0.7, 0.45}, {0.4, 0.45}}};
    case 'H':
      return {{{0, 0}, {0, 1}}, {{0.7, 0}, {0.7, 1}}, {{0, 0.5}, {0.7, 0.5}}};
    case 'I':
      return {{{0.35, 0}, {0.35, 1}}, {{0.1, 1}, {0.6, 1}}, {{0.1, 0}, {0.6, 0}}};
    case 'J':
      return {{{0.7, 1}, {0.7, 0.2}, {0.5, 0}, {0.2, 0}, {0, 0.2}}};
    case 'K':
      return {{{0, 0}, {0, 1}}, {{0.7, 1}, {0, 0.4}}, {{0.25, 0.6}, {0.7, 0}}};
    case 'L':
      return {{{0, 1}, {0, 0}, {0.65, 0}}};
    case 'M':
      return {{{0, 0}, {0, 1}, {0.4, 0.4}, {0.8, 1}, {0.8, 0}}};
    case 'N':
      return {{{0, 0}, {0, 1}, {0.7, 0}, {0.7, 1}}};
    case 'O':
      return {{{0.2, 0}, {0, 0.25}, {0, 0.75}, {0.2, 1}, {0.5, 1}, {0.7, 0.75}, {0.7, 0.25},
               {0.5, 0}, {0.2, 0}}};
    case 'P':
      return {{{0, 0}, {0, 1}, {0.5, 1}, {0.7, 0.85}, {0.7, 0.65}, {0.5, 0.5}, {0, 0.5}}};
    case 'Q':
      return {{{0.2, 0}, {0, 0.25}, {0, 0.75}, {0.2, 1}, {0.5, 1}, {0.7, 0.75}, {0.7, 0.25},
               {0.5, 0}, {0.2, 0}},
              {{0.45, 0.25}, {0.8, -0.05}}};
    case 'R':
      return {{{0, 0}, {0, 1}, {0.5, 1}, {0.7, 0.85}, {0.7, 0.65}, {0.5, 0.5}, {0, 0.5}},
              {{0.35, 0.5}, {0.7, 0}}};
    case 'S':
      return {{{0.7, 0.85}, {0.5, 1}, {0.2, 1}, {0, 0.8}, {0.1, 0.6}, {0.6, 0.4}, {0.7, 0.2},
               {0.5, 0}, {0.2, 0}, {0, 0.15}}};
    case 'T':
      return {{{0, 1}, {0.8, 1}}, {{0.4, 1}, {0.4, 0}}};
    case 'U':
      return {{{0, 1}, {0, 0.25}, {0.2, 0}, {0.5, 0}, {0.7, 0.25}, {0.7, 1}}};
    case 'V':
      return {{{0, 1}, {0.4, 0}, {0.8, 1}}};
    case 'W':
      return {{{0, 1}, {0.2, 0}, {0.45, 0.6}, {0.7, 0}, {0.9, 1}}};
    case 'X':
      return {{{0, 1}, {0.7, 0}}, {{0, 0}, {0.7, 1}}};
    case 'Y':
      return {{{0, 1}, {0.4, 0.5}, {0.8, 1}}, {{0.4, 0.5}, {0.4, 0}}};
    case 'Z':
      return {{{0, 1}, {0.7, 1}, {0, 0}, {0.7, 0}}};
    default:
      throw Error(Errc::InvalidArgument, std::string("no synthetic design for letter '") + letter + "'");
  }
}

// Rectangle (or bent band) around segment a->b, clockwise in y-up space.
ttf::Contour stroke_contour(double ax, double ay, double bx, double by, double width, double bend) {
  const double dx = bx - ax, dy = by - ay;
  const double len = std::hypot(dx, dy);
  if (len == 0) return {};
  const double ux = dx / len, uy = dy / len;
  const double nx = -uy, ny = ux;
  const double h = width / 2;
  // Extend by half a width so joints between consecutive segments overlap.
  const double sx = ax - ux * h, sy = ay - uy * h;
  const double ex = bx + ux * h, ey = by + uy * h;
  ttf::Contour c;
  if (bend == 0.0) {
    c = {{sx + nx * h, sy + ny * h, true}, {ex + nx * h, ey + ny * h, true},
         {ex - nx * h, ey - ny * h, true}, {sx - nx * h, sy - ny * h, true}};
  } else {
    const double off = bend * len;
    const double mx = (sx + ex) / 2 + nx * off, my = (sy + ey) / 2 + ny * off;
    c = {{sx + nx * h, sy + ny * h, true}, {mx + nx * h, my + ny * h, false},
         {ex + nx * h, ey + ny * h, true}, {ex - nx * h, ey - ny * h, true},
         {mx - nx * h, my - ny * h, false}, {sx - nx * h, sy - ny * h, true}};
  }
  return c;
}

struct ByteWriter {
  std::vector<std::uint8_t> out;
  void u8(unsigned v) { out.push_back(static_cast<std::uint8_t>(v)); }
  void u16(unsigned v) {
    u8(v >> 8 & 0xFF);
    u8(v & 0xFF);
  }
  void i16(int v) { u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v))); }
  void u32(std::uint32_t v) {
    u16(v >> 16);
    u16(v & 0xFFFF);
  }
  void pad4() {
    while (out.size() % 4) u8(0);
  }
  void put_u32(std::size_t at, std::uint32_t v) {
    out[at] = static_cast<std::uint8_t>(v >> 24);
    out[at + 1] = static_cast<std::uint8_t>(v >> 16);
    out[at + 2] = static_cast<std::uint8_t>(v >> 8);
    out[at + 3] = static_cast<std::uint8_t>(v);
  }
};

std::uint32_t checksum(const std::vector<std::uint8_t>& bytes, std::size_t begin, std::size_t len) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < len; i += 4) {
    std::uint32_t word = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      word <<= 8;
      if (i + k < len) word |= bytes[begin + i + k];
    }
    sum += word;
  }
  return sum;
}

int floor_log2(unsigned v) {
  int r = 0;
  while (v >>= 1) ++r;
  return r;
}

}  // namespace

Style random_style(Rng& rng) {
  Style s;
  const double u = rng.uniform();
  s.weight = 30.0 + 170.0 * u * std::sqrt(u);
  s.slant = rng.uniform() < 0.5 ? 0.0 : 0.3 * rng.uniform();
  s.width = 0.75 + 0.55 * rng.uniform();
  s.crossbar = 0.25 + 0.25 * rng.uniform();
  s.contrast = rng.uniform() < 0.5 ? 1.0 : 1.0 + 2.0 * rng.uniform();
  s.serif = rng.uniform() < 0.5 ? 0.0 : 40.0 + 110.0 * rng.uniform();
  s.bend = rng.uniform() < 0.6 ? 0.0 : -0.12 + 0.24 * rng.uniform();
  return s;
}

std::vector<ttf::Contour> letter_outline(char letter, const Style& style) {
  const auto strokes = skeleton(letter, style);
  const double sx = kCapHeight * style.width;
  std::vector<ttf::Contour> contours;
  auto place = [&](double u, double v) {
    return std::array<double, 2>{kSideBearing + u * sx, v * kCapHeight};
  };

  for (std::size_t s = 0; s < strokes.size(); ++s) {
    const auto& line = strokes[s];
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      const auto a = place(line[i][0], line[i][1]);
      const auto b = place(line[i + 1][0], line[i + 1][1]);
      double w = style.weight;
      // Contrast thins strokes rising left-to-right and thickens falling ones.
      const double ddx = b[0] - a[0], ddy = b[1] - a[1];
      if (ddx != 0 && ddy != 0) {
        w *= (ddx * ddy > 0) ? 1.0 / std::sqrt(style.contrast) : std::sqrt(style.contrast);
      }
      auto c = stroke_contour(a[0], a[1], b[0], b[1], w, style.bend);
      if (!c.empty()) contours.push_back(std::move(c));
    }
  }

  if (style.serif > 0) {
    // Foot serifs on every skeleton end point that touches the baseline.
    for (const auto& line : strokes) {
      for (const auto* end : {&line.front(), &line.back()}) {
        if ((*end)[1] != 0.0) continue;
        const auto p = place((*end)[0], 0.0);
        const double half = style.serif / 2 + style.weight / 2;
        const double w = std::max(20.0, style.weight * 0.45);
        auto c = stroke_contour(p[0] - half, w / 2, p[0] + half, w / 2, w, 0.0);
        contours.push_back(std::move(c));
      }
    }
  }

  for (auto& c : contours) {
    for (auto& p : c) {
      p.x = std::round(p.x + style.slant * p.y);
      p.y = std::round(p.y);
    }
  }
  return contours;
}

std::vector<std::uint8_t> build_font(const std::map<char32_t, std::vector<ttf::Contour>>& glyphs,
                                     int units_per_em) {
  if (glyphs.empty()) throw Error(Errc::InvalidArgument, "build_font: no glyphs");
  const auto num_glyphs = static_cast<unsigned>(glyphs.size() + 1);  // + .notdef

  // glyf + loca
  ByteWriter glyf;
  std::vector<std::uint32_t> loca{0, 0};  // empty .notdef
  std::vector<std::pair<int, int>> metrics{{units_per_em / 2, 0}};
  int fx0 = 0, fy0 = 0, fx1 = 0, fy1 = 0;
  unsigned max_points = 0, max_contours = 0;
  bool first_box = true;
  for (const auto& [cp, contours] : glyphs) {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -(1 << 30), y1 = -(1 << 30);
    unsigned points = 0;
    for (const auto& c : contours) {
      for (const auto& p : c) {
        x0 = std::min(x0, static_cast<int>(p.x));
        y0 = std::min(y0, static_cast<int>(p.y));
        x1 = std::max(x1, static_cast<int>(p.x));
        y1 = std::max(y1, static_cast<int>(p.y));
      }
      points += static_cast<unsigned>(c.size());
    }
    max_points = std::max(max_points, points);
    max_contours = std::max(max_contours, static_cast<unsigned>(contours.size()));
    if (!contours.empty()) {
      if (first_box) {
        fx0 = x0, fy0 = y0, fx1 = x1, fy1 = y1;
        first_box = false;
      }
      fx0 = std::min(fx0, x0), fy0 = std::min(fy0, y0);
      fx1 = std::max(fx1, x1), fy1 = std::max(fy1, y1);
      glyf.i16(static_cast<int>(contours.size()));
      glyf.i16(x0), glyf.i16(y0), glyf.i16(x1), glyf.i16(y1);
      unsigned end = 0;
      for (const auto& c : contours) {
        end += static_cast<unsigned>(c.size());
        glyf.u16(end - 1);
      }
      glyf.u16(0);  // no instructions
      for (const auto& c : contours) {
        for (const auto& p : c) glyf.u8(p.on_curve ? 0x01 : 0x00);
      }
      int prev = 0;
      for (const auto& c : contours) {
        for (const auto& p : c) {
          glyf.i16(static_cast<int>(p.x) - prev);
          prev = static_cast<int>(p.x);
        }
      }
      prev = 0;
      for (const auto& c : contours) {
        for (const auto& p : c) {
          glyf.i16(static_cast<int>(p.y) - prev);
          prev = static_cast<int>(p.y);
        }
      }
      glyf.pad4();
    }
    loca.push_back(static_cast<std::uint32_t>(glyf.out.size()));
    metrics.emplace_back(contours.empty() ? units_per_em / 2 : x1 + static_cast<int>(kSideBearing),
                         contours.empty() ? 0 : x0);
  }

  std::map<std::string, std::vector<std::uint8_t>> tables;
  tables["glyf"] = glyf.out;
  {
    ByteWriter w;
    for (auto v : loca) w.u32(v);
    tables["loca"] = w.out;
  }
  {
    ByteWriter w;
    w.u32(0x00010000);
    w.u32(0x00010000);
    w.u32(0);  // checkSumAdjustment, patched below
    w.u32(0x5F0F3CF5);
    w.u16(0x000B);
    w.u16(static_cast<unsigned>(units_per_em));
    for (int i = 0; i < 4; ++i) w.u32(0);  // created, modified
    w.i16(fx0), w.i16(fy0), w.i16(fx1), w.i16(fy1);
    w.u16(0);   // macStyle
    w.u16(8);   // lowestRecPPEM
    w.i16(2);   // fontDirectionHint
    w.i16(1);   // indexToLocFormat: long
    w.i16(0);
    tables["head"] = w.out;
  }
  int advance_max = 0;
  for (const auto& m : metrics) advance_max = std::max(advance_max, m.first);
  {
    ByteWriter w;
    w.u32(0x00010000);
    w.i16(static_cast<int>(units_per_em * 0.8));
    w.i16(-static_cast<int>(units_per_em * 0.2));
    w.i16(0);
    w.u16(static_cast<unsigned>(advance_max));
    w.i16(fx0), w.i16(0), w.i16(fx1);
    w.i16(1), w.i16(0), w.i16(0);
    for (int i = 0; i < 4; ++i) w.i16(0);
    w.i16(0);
    w.u16(num_glyphs);
    tables["hhea"] = w.out;
  }
  {
    ByteWriter w;
    for (const auto& [adv, lsb] : metrics) {
      w.u16(static_cast<unsigned>(adv));
      w.i16(lsb);
    }
    tables["hmtx"] = w.out;
  }
  {
    ByteWriter w;
    w.u32(0x00010000);
    w.u16(num_glyphs);
    w.u16(max_points);
    w.u16(max_contours);
    w.u16(0), w.u16(0);
    w.u16(2);
    for (int i = 0; i < 8; ++i) w.u16(0);
    tables["maxp"] = w.out;
  }
  {
    ByteWriter w;
    w.u32(0x00030000);
    w.u32(0);
    w.i16(-100), w.i16(50);
    for (int i = 0; i < 5; ++i) w.u32(0);
    tables["post"] = w.out;
  }
  {
    // cmap format 4: one segment per codepoint plus the 0xFFFF sentinel.
    std::vector<std::pair<unsigned, unsigned>> map;  // code, glyph
    unsigned gid = 1;
    for (const auto& [cp, contours] : glyphs) {
      if (cp > 0xFFFE) throw Error(Errc::InvalidArgument, "build_font: codepoint outside BMP");
      map.emplace_back(static_cast<unsigned>(cp), gid++);
    }
    const unsigned seg_count = static_cast<unsigned>(map.size()) + 1;
    const unsigned search = 2u << floor_log2(seg_count);
    ByteWriter w;
    w.u16(0);
    w.u16(1);
    w.u16(3), w.u16(1), w.u32(12);
    w.u16(4);
    w.u16(16 + 8 * seg_count);
    w.u16(0);
    w.u16(seg_count * 2);
    w.u16(search);
    w.u16(static_cast<unsigned>(floor_log2(seg_count)));
    w.u16(seg_count * 2 - search);
    for (const auto& [code, g] : map) w.u16(code);
    w.u16(0xFFFF);
    w.u16(0);
    for (const auto& [code, g] : map) w.u16(code);
    w.u16(0xFFFF);
    for (const auto& [code, g] : map) w.u16((g - code) & 0xFFFF);
    w.u16(1);
    for (unsigned i = 0; i < seg_count; ++i) w.u16(0);
    tables["cmap"] = w.out;
  }

  const auto num_tables = static_cast<unsigned>(tables.size());
  const unsigned search = 16u << floor_log2(num_tables);
  ByteWriter font;
  font.u32(0x00010000);
  font.u16(num_tables);
  font.u16(search);
  font.u16(static_cast<unsigned>(floor_log2(num_tables)));
  font.u16(num_tables * 16 - search);
  std::size_t offset = 12 + 16 * num_tables;
  std::size_t head_offset = 0;
  for (const auto& [name, data] : tables) {
    for (char ch : name) font.u8(static_cast<unsigned char>(ch));
    font.u32(checksum(data, 0, data.size()));
    font.u32(static_cast<std::uint32_t>(offset));
    font.u32(static_cast<std::uint32_t>(data.size()));
    if (name == "head") head_offset = offset;
    offset += (data.size() + 3) / 4 * 4;
  }
  for (const auto& [name, data] : tables) {
    font.out.insert(font.out.end(), data.begin(), data.end());
    font.pad4();
  }
  const std::uint32_t total = checksum(font.out, 0, font.out.size());
  font.put_u32(head_offset + 8, 0xB1B0AFBAu - total);
  return font.out;
}

std::vector<std::uint8_t> build_style_font(const Style& style, const std::string& letters) {
  std::map<char32_t, std::vector<ttf::Contour>> glyphs;
  for (char c : letters) glyphs[static_cast<char32_t>(c)] = letter_outline(c, style);
  return build_font(glyphs);
}

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, int count,
                                                std::uint64_t seed) {
  io::ensure_directory(dir);
  Rng rng(seed);
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    const Style style = random_style(rng);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04d.ttf", i);
    const auto path = dir / name;
    io::write_bytes(path, build_style_font(style));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace fm::synth
