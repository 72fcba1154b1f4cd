#include "fontmanifold/truetype.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#include "fontmanifold/error.hpp"

namespace fm::ttf {

namespace {

constexpr int kMaxCompositeDepth = 8;

[[noreturn]] void fail(const std::string& what) { throw Error(Errc::Parse, "font: " + what); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(std::size_t at) const {
    need(at, 1);
    return bytes_[at];
  }
  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(bytes_[at] << 8 | bytes_[at + 1]);
  }
  std::int16_t i16(std::size_t at) const { return static_cast<std::int16_t>(u16(at)); }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return static_cast<std::uint32_t>(bytes_[at]) << 24 | static_cast<std::uint32_t>(bytes_[at + 1]) << 16 |
           static_cast<std::uint32_t>(bytes_[at + 2]) << 8 | bytes_[at + 3];
  }
  // F2Dot14 fixed point.
  double f2dot14(std::size_t at) const { return i16(at) / 16384.0; }

  void need(std::size_t at, std::size_t n) const {
    if (at > bytes_.size() || n > bytes_.size() - at) fail("read past end of data");
  }

 private:
  std::span<const std::uint8_t> bytes_;
};

constexpr std::uint32_t tag(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) << 24 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3]));
}

struct TableRef {
  std::size_t offset = 0;
  std::size_t length = 0;
  bool present = false;
};

}  // namespace

Font Font::parse(std::span<const std::uint8_t> bytes) {
  Font font;
  font.data_.assign(bytes.begin(), bytes.end());
  const Reader r(font.data_);
  if (font.data_.size() < 12) fail("file too small for an offset table");

  std::size_t base = 0;
  std::uint32_t version = r.u32(0);
  if (version == tag("ttcf")) {
    if (r.u32(8) == 0) fail("empty font collection");
    base = r.u32(12);
    version = r.u32(base);
  }
  if (version != 0x00010000u && version != tag("true") && version != tag("OTTO")) {
    fail("unrecognised sfnt version");
  }

  const std::uint16_t num_tables = r.u16(base + 4);
  TableRef head, maxp, cmap, loca, glyf, cff;
  for (std::uint16_t i = 0; i < num_tables; ++i) {
    const std::size_t rec = base + 12 + 16u * i;
    const std::uint32_t t = r.u32(rec);
    TableRef ref{r.u32(rec + 8), r.u32(rec + 12), true};
    r.need(ref.offset, ref.length);
    if (t == tag("head")) head = ref;
    else if (t == tag("maxp")) maxp = ref;
    else if (t == tag("cmap")) cmap = ref;
    else if (t == tag("loca")) loca = ref;
    else if (t == tag("glyf")) glyf = ref;
    else if (t == tag("CFF ") || t == tag("CFF2")) cff = ref;
  }
  if (!glyf.present && cff.present) fail("CFF outlines are not supported");
  if (!head.present || !maxp.present || !cmap.present || !loca.present || !glyf.present) {
    fail("missing required table (head, maxp, cmap, loca, glyf)");
  }

  font.units_per_em_ = r.u16(head.offset + 18);
  if (font.units_per_em_ < 16) fail("implausible unitsPerEm");
  font.long_loca_ = r.i16(head.offset + 50) != 0;
  font.num_glyphs_ = r.u16(maxp.offset + 4);
  font.glyf_offset_ = glyf.offset;
  font.glyf_length_ = glyf.length;
  font.loca_offset_ = loca.offset;
  font.loca_length_ = loca.length;

  // Pick the best Unicode cmap subtable: full-repertoire format 12 first,
  // then BMP format 4, then anything else we can read.
  const std::uint16_t num_subtables = r.u16(cmap.offset + 2);
  int best_rank = -1;
  for (std::uint16_t i = 0; i < num_subtables; ++i) {
    const std::size_t rec = cmap.offset + 4 + 8u * i;
    const std::uint16_t platform = r.u16(rec);
    const std::uint16_t encoding = r.u16(rec + 2);
    const std::size_t sub = cmap.offset + r.u32(rec + 4);
    const int format = r.u16(sub);
    const bool unicode = platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
    const bool symbol = platform == 3 && encoding == 0;
    if (!unicode && !symbol) continue;
    int rank = -1;
    if (format == 12) rank = 4;
    else if (format == 4) rank = 3;
    else if (format == 6) rank = 2;
    else if (format == 0) rank = 1;
    if (symbol && rank > 0) rank = 0;
    if (rank > best_rank) {
      best_rank = rank;
      font.cmap_subtable_ = sub;
      font.cmap_format_ = format;
    }
  }
  if (best_rank < 0) fail("no supported Unicode cmap subtable");
  return font;
}

std::uint32_t Font::glyph_index(char32_t codepoint) const {
  const Reader r(data_);
  const std::size_t sub = cmap_subtable_;
  const auto cp = static_cast<std::uint32_t>(codepoint);
  switch (cmap_format_) {
    case 0:
      return cp < 256 ? r.u8(sub + 6 + cp) : 0;
    case 6: {
      const std::uint32_t first = r.u16(sub + 6);
      const std::uint32_t count = r.u16(sub + 8);
      if (cp < first || cp >= first + count) return 0;
      return r.u16(sub + 10 + 2 * (cp - first));
    }
    case 4: {
      if (cp > 0xFFFF) return 0;
      const std::size_t seg_count = r.u16(sub + 6) / 2u;
      const std::size_t ends = sub + 14;
      const std::size_t starts = ends + 2 * seg_count + 2;
      const std::size_t deltas = starts + 2 * seg_count;
      const std::size_t range_offsets = deltas + 2 * seg_count;
      for (std::size_t i = 0; i < seg_count; ++i) {
        if (cp > r.u16(ends + 2 * i)) continue;
        const std::uint32_t start = r.u16(starts + 2 * i);
        if (cp < start) return 0;
        const std::uint16_t delta = r.u16(deltas + 2 * i);
        const std::uint16_t range_offset = r.u16(range_offsets + 2 * i);
        if (range_offset == 0) return static_cast<std::uint16_t>(cp + delta);
        const std::size_t at = range_offsets + 2 * i + range_offset + 2 * (cp - start);
        const std::uint16_t g = r.u16(at);
        return g == 0 ? 0 : static_cast<std::uint16_t>(g + delta);
      }
      return 0;
    }
    case 12: {
      const std::uint32_t groups = r.u32(sub + 12);
      std::uint32_t lo = 0, hi = groups;
      while (lo < hi) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        const std::size_t g = sub + 16 + 12u * mid;
        const std::uint32_t start = r.u32(g);
        const std::uint32_t end = r.u32(g + 4);
        if (cp < start) hi = mid;
        else if (cp > end) lo = mid + 1;
        else return r.u32(g + 8) + (cp - start);
      }
      return 0;
    }
    default:
      return 0;
  }
}

Outline Font::outline(char32_t codepoint) const {
  const std::uint32_t glyph = glyph_index(codepoint);
  if (glyph == 0) {
    throw Error(Errc::MissingGlyph, "font has no glyph for U+" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(codepoint));
      return std::string(buf);
    }());
  }
  Outline out;
  out.units_per_em = units_per_em_;
  const double identity[6] = {1, 0, 0, 1, 0, 0};
  load_glyph(glyph, out, identity, 0);
  return out;
}

void Font::load_glyph(std::uint32_t glyph, Outline& out, const double (&xform)[6],
                      int depth) const {
  if (depth > kMaxCompositeDepth) fail("composite glyph nesting too deep");
  if (glyph >= static_cast<std::uint32_t>(num_glyphs_)) fail("glyph index out of range");
  const Reader r(data_);

  std::size_t start = 0, end = 0;
  if ((glyph + 2u) * (long_loca_ ? 4u : 2u) > loca_length_) fail("loca table too short");
  if (long_loca_) {
    start = r.u32(loca_offset_ + 4u * glyph);
    end = r.u32(loca_offset_ + 4u * (glyph + 1));
  } else {
    start = 2u * r.u16(loca_offset_ + 2u * glyph);
    end = 2u * r.u16(loca_offset_ + 2u * (glyph + 1));
  }
  if (end <= start) return;  // no outline (e.g. space)
  if (end > glyf_length_) fail("glyph data outside glyf table");
  const std::size_t g = glyf_offset_ + start;

  auto apply = [&](double x, double y) {
    return std::pair{xform[0] * x + xform[2] * y + xform[4], xform[1] * x + xform[3] * y + xform[5]};
  };

  const int num_contours = r.i16(g);
  if (num_contours >= 0) {
    std::vector<std::uint16_t> end_points(static_cast<std::size_t>(num_contours));
    for (int c = 0; c < num_contours; ++c) end_points[c] = r.u16(g + 10 + 2u * c);
    if (num_contours == 0) return;
    const std::size_t num_points = static_cast<std::size_t>(end_points.back()) + 1;
    const std::size_t instr_len = r.u16(g + 10 + 2u * num_contours);
    std::size_t p = g + 12 + 2u * num_contours + instr_len;

    std::vector<std::uint8_t> flags;
    flags.reserve(num_points);
    while (flags.size() < num_points) {
      const std::uint8_t f = r.u8(p++);
      flags.push_back(f);
      if (f & 0x08) {
        const std::uint8_t repeat = r.u8(p++);
        for (int k = 0; k < repeat && flags.size() < num_points; ++k) flags.push_back(f);
      }
    }
    std::vector<double> xs(num_points), ys(num_points);
    int acc = 0;
    for (std::size_t i = 0; i < num_points; ++i) {
      const std::uint8_t f = flags[i];
      if (f & 0x02) {
        const int dx = r.u8(p++);
        acc += (f & 0x10) ? dx : -dx;
      } else if (!(f & 0x10)) {
        acc += r.i16(p);
        p += 2;
      }
      xs[i] = acc;
    }
    acc = 0;
    for (std::size_t i = 0; i < num_points; ++i) {
      const std::uint8_t f = flags[i];
      if (f & 0x04) {
        const int dy = r.u8(p++);
        acc += (f & 0x20) ? dy : -dy;
      } else if (!(f & 0x20)) {
        acc += r.i16(p);
        p += 2;
      }
      ys[i] = acc;
    }

    std::size_t first = 0;
    for (int c = 0; c < num_contours; ++c) {
      const std::size_t last = end_points[c];
      if (last < first || last >= num_points) fail("bad contour end point");
      Contour contour;
      contour.reserve(last - first + 1);
      for (std::size_t i = first; i <= last; ++i) {
        const auto [x, y] = apply(xs[i], ys[i]);
        contour.push_back({x, y, (flags[i] & 0x01) != 0});
      }
      if (contour.size() >= 2) out.contours.push_back(std::move(contour));
      first = last + 1;
    }
    return;
  }

  // Composite glyph.
  constexpr std::uint16_t kArgsAreWords = 0x0001, kArgsAreXY = 0x0002, kHaveScale = 0x0008,
                          kMoreComponents = 0x0020, kHaveXYScale = 0x0040, kHave2x2 = 0x0080;
  std::size_t p = g + 10;
  for (;;) {
    const std::uint16_t flags = r.u16(p);
    const std::uint16_t component = r.u16(p + 2);
    p += 4;
    double dx = 0, dy = 0;
    if (flags & kArgsAreWords) {
      dx = r.i16(p);
      dy = r.i16(p + 2);
      p += 4;
    } else {
      dx = static_cast<std::int8_t>(r.u8(p));
      dy = static_cast<std::int8_t>(r.u8(p + 1));
      p += 2;
    }
    // Point-matched placement is rare in practice; it is treated as no offset.
    if (!(flags & kArgsAreXY)) dx = dy = 0;
    double a = 1, b = 0, c = 0, d = 1;
    if (flags & kHaveScale) {
      a = d = r.f2dot14(p);
      p += 2;
    } else if (flags & kHaveXYScale) {
      a = r.f2dot14(p);
      d = r.f2dot14(p + 2);
      p += 4;
    } else if (flags & kHave2x2) {
      a = r.f2dot14(p);
      b = r.f2dot14(p + 2);
      c = r.f2dot14(p + 4);
      d = r.f2dot14(p + 6);
      p += 8;
    }
    // parent o child
    const double child[6] = {a, b, c, d, dx, dy};
    const double composed[6] = {
        xform[0] * child[0] + xform[2] * child[1], xform[1] * child[0] + xform[3] * child[1],
        xform[0] * child[2] + xform[2] * child[3], xform[1] * child[2] + xform[3] * child[3],
        xform[0] * child[4] + xform[2] * child[5] + xform[4],
        xform[1] * child[4] + xform[3] * child[5] + xform[5]};
    load_glyph(component, out, composed, depth + 1);
    if (!(flags & kMoreComponents)) break;
  }
}

// -- rasterizer ---------------------------------------------------------------

namespace {

struct Edge {
  double x0, y0, x1, y1;
  int winding;  // +1 when the edge runs downward in pixel space
};

constexpr int kSubScanlines = 16;
constexpr double kFlatness = 0.05;  // pixels

void emit_line(std::vector<Edge>& edges, double x0, double y0, double x1, double y1) {
  if (y0 == y1) return;
  if (y0 < y1) edges.push_back({x0, y0, x1, y1, 1});
  else edges.push_back({x1, y1, x0, y0, -1});
}

void emit_quad(std::vector<Edge>& edges, double x0, double y0, double cx, double cy, double x1,
               double y1) {
  const double ddx = x0 - 2 * cx + x1, ddy = y0 - 2 * cy + y1;
  const double dev = std::sqrt(ddx * ddx + ddy * ddy) / 4.0;
  const int n = std::clamp(static_cast<int>(std::ceil(std::sqrt(dev / kFlatness))), 1, 64);
  double px = x0, py = y0;
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double u = 1 - t;
    const double qx = u * u * x0 + 2 * u * t * cx + t * t * x1;
    const double qy = u * u * y0 + 2 * u * t * cy + t * t * y1;
    emit_line(edges, px, py, qx, qy);
    px = qx;
    py = qy;
  }
}

// Converts one quadratic contour (already in pixel space) to line edges.
void flatten_contour(std::vector<Edge>& edges, const std::vector<OutlinePoint>& pts) {
  const std::size_t n = pts.size();
  // Start from an on-curve point; if none exists use the midpoint of the
  // first two off-curve points.
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (pts[i].on_curve) {
      start = i;
      break;
    }
  }
  OutlinePoint origin;
  if (start == n) {
    origin = {(pts[0].x + pts[1].x) / 2, (pts[0].y + pts[1].y) / 2, true};
    start = 1;
  } else {
    origin = pts[start];
    start = start + 1;
  }

  OutlinePoint current = origin;
  const OutlinePoint* control = nullptr;
  OutlinePoint pending_control;
  for (std::size_t k = 0; k < n; ++k) {
    const OutlinePoint& p = pts[(start + k) % n];
    if (p.on_curve) {
      if (control) emit_quad(edges, current.x, current.y, control->x, control->y, p.x, p.y);
      else emit_line(edges, current.x, current.y, p.x, p.y);
      current = p;
      control = nullptr;
    } else {
      if (control) {
        const OutlinePoint mid{(control->x + p.x) / 2, (control->y + p.y) / 2, true};
        emit_quad(edges, current.x, current.y, control->x, control->y, mid.x, mid.y);
        current = mid;
      }
      pending_control = p;
      control = &pending_control;
    }
  }
  if (control) emit_quad(edges, current.x, current.y, control->x, control->y, origin.x, origin.y);
  else emit_line(edges, current.x, current.y, origin.x, origin.y);
}

void add_span(std::vector<double>& row, double xa, double xb, double weight) {
  const double width = static_cast<double>(row.size());
  xa = std::clamp(xa, 0.0, width);
  xb = std::clamp(xb, 0.0, width);
  if (xb <= xa) return;
  const auto ia = static_cast<std::size_t>(xa);
  const auto ib = static_cast<std::size_t>(xb);
  if (ia == ib) {
    row[ia] += (xb - xa) * weight;
    return;
  }
  row[ia] += (static_cast<double>(ia + 1) - xa) * weight;
  for (std::size_t i = ia + 1; i < ib; ++i) row[i] += weight;
  if (ib < row.size()) row[ib] += (xb - static_cast<double>(ib)) * weight;
}

}  // namespace

RawBitmap rasterize_outline(const Outline& outline, int canvas, double pixels_per_em) {
  if (canvas < 1) throw Error(Errc::InvalidArgument, "canvas must be positive");
  RawBitmap bitmap(canvas, canvas, 255);
  if (outline.empty()) return bitmap;

  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& c : outline.contours) {
    for (const auto& p : c) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const double s = pixels_per_em / outline.units_per_em;
  const double cx = (min_x + max_x) / 2, cy = (min_y + max_y) / 2;
  const double half = canvas / 2.0;

  std::vector<Edge> edges;
  for (const auto& c : outline.contours) {
    std::vector<OutlinePoint> px;
    px.reserve(c.size());
    for (const auto& p : c) px.push_back({(p.x - cx) * s + half, half - (p.y - cy) * s, p.on_curve});
    flatten_contour(edges, px);
  }

  std::vector<double> coverage(static_cast<std::size_t>(canvas));
  std::vector<std::pair<double, int>> crossings;
  const double weight = 1.0 / kSubScanlines;
  for (int y = 0; y < canvas; ++y) {
    std::fill(coverage.begin(), coverage.end(), 0.0);
    for (int k = 0; k < kSubScanlines; ++k) {
      const double sy = y + (k + 0.5) / kSubScanlines;
      crossings.clear();
      for (const Edge& e : edges) {
        if (sy < e.y0 || sy >= e.y1) continue;
        const double t = (sy - e.y0) / (e.y1 - e.y0);
        crossings.emplace_back(e.x0 + t * (e.x1 - e.x0), e.winding);
      }
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      int winding = 0;
      for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
        winding += crossings[i].second;
        if (winding != 0) add_span(coverage, crossings[i].first, crossings[i + 1].first, weight);
      }
    }
    for (int x = 0; x < canvas; ++x) {
      const double cov = std::clamp(coverage[static_cast<std::size_t>(x)], 0.0, 1.0);
      bitmap.at(x, y) = static_cast<std::uint8_t>(255 - std::lround(cov * 255.0));
    }
  }
  return bitmap;
}

RawBitmap rasterize_glyph(std::span<const std::uint8_t> font_bytes, char32_t codepoint,
                          int canvas, double pixels_per_em) {
  if (canvas < 64) throw Error(Errc::InvalidArgument, "canvas must be at least 64 pixels");
  const Font font = Font::parse(font_bytes);
  const Outline outline = font.outline(codepoint);
  if (outline.empty()) throw Error(Errc::EmptyGlyph, "glyph has no contours");
  RawBitmap bitmap = rasterize_outline(outline, canvas, pixels_per_em);
  const bool inked = std::any_of(bitmap.pixels.begin(), bitmap.pixels.end(),
                                 [](std::uint8_t v) { return v < 255; });
  if (!inked) throw Error(Errc::EmptyGlyph, "glyph renders no ink");
  return bitmap;
}

}  // namespace fm::ttf
