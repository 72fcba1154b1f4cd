#include "fontmanifold/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "fontmanifold/error.hpp"
#include "fontmanifold/numerics.hpp"

namespace fm::metrics {

using nlohmann::ordered_json;

double SsimStats::value() const noexcept {
  const double num = (2 * mu_x * mu_y + kC1) * (2 * sigma_xy + kC2);
  const double den = (mu_x * mu_x + mu_y * mu_y + kC1) * (var_x + var_y + kC2);
  return num / den;
}

SsimStats ssim_stats(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size()) {
    throw Error(Errc::Dimension, "SSIM needs two images of the same non-zero size");
  }
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i] * 255.0;
    sb += b[i] * 255.0;
  }
  SsimStats s;
  s.mu_x = sa / n;
  s.mu_y = sb / n;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dx = a[i] * 255.0 - s.mu_x;
    const double dy = b[i] * 255.0 - s.mu_y;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  s.var_x = vx / n;
  s.var_y = vy / n;
  s.sigma_x = std::sqrt(s.var_x);
  s.sigma_y = std::sqrt(s.var_y);
  s.sigma_xy = cxy / n;
  return s;
}

double ssim(std::span<const double> a, std::span<const double> b) {
  return ssim_stats(a, b).value();
}

double ssim(const GlyphBitmap& a, const GlyphBitmap& b) { return ssim(a.values(), b.values()); }

Match match_closest_font(const GlyphBitmap& query, std::span<const ingest::CorpusGlyph> corpus) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "corpus has no usable fonts");
  const ingest::CorpusGlyph* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& entry : corpus) {
    const double score = ssim(query, entry.bitmap);
    if (score > best_score || (score == best_score && entry.font_id < best->font_id)) {
      best = &entry;
      best_score = score;
    }
  }
  return {best->font_id, best_score};
}

AlphabetStrip render_alphabet(std::span<const std::uint8_t> font_bytes, std::string_view letters) {
  if (letters.empty()) throw Error(Errc::InvalidArgument, "no letters to render");
  constexpr int side = GlyphBitmap::kSide;
  AlphabetStrip strip;
  strip.image = RawBitmap(side * static_cast<int>(letters.size()), side);
  for (std::size_t i = 0; i < letters.size(); ++i) {
    const char letter = letters[i];
    try {
      const RawBitmap cell = ingest::glyph_28(font_bytes, static_cast<unsigned char>(letter));
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) strip.image.at(static_cast<int>(i) * side + x, y) = cell.at(x, y);
      }
    } catch (const Error& e) {
      strip.warnings.push_back(std::string(1, letter) + " (cell " + std::to_string(i + 1) +
                               "): " + std::string(errc_name(e.code())) + ": " + e.what());
    }
  }
  return strip;
}

TTest two_sample_ttest(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 2 || ys.size() < 2) {
    throw Error(Errc::DegenerateData, "t-test needs at least two values per group");
  }
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());
  TTest r;
  r.df = static_cast<int>(xs.size() + ys.size() - 2);
  const double mx = numerics::mean(xs);
  const double my = numerics::mean(ys);
  const double pooled = ((nx - 1) * numerics::sample_variance(xs) + (ny - 1) * numerics::sample_variance(ys)) /
                        static_cast<double>(r.df);
  if (pooled == 0.0) {
    if (mx == my) throw Error(Errc::DegenerateData, "both groups are constant and equal");
    r.t = mx > my ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (mx - my) / std::sqrt(pooled * (1.0 / nx + 1.0 / ny));
  r.p = numerics::student_t_two_tailed_p(r.t, r.df);
  return r;
}

std::string_view to_string(Interface interface) noexcept {
  return interface == Interface::Manifold ? "manifold" : "grid";
}

std::optional<Interface> parse_interface(std::string_view text) noexcept {
  const auto same = [&](std::string_view word) {
    return std::equal(text.begin(), text.end(), word.begin(), word.end(),
                      [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) == b; });
  };
  if (same("manifold")) return Interface::Manifold;
  if (same("grid")) return Interface::Grid;
  return std::nullopt;
}

ordered_json to_json(const ComparisonRecord& r) {
  return {{"participant_id", r.participant_id},
          {"interface", to_string(r.interface)},
          {"task_id", r.task_id},
          {"target_id", r.target_id},
          {"selected", r.selected},
          {"ssim", r.ssim},
          {"elapsed_ms", r.elapsed_ms}};
}

ComparisonRecord record_from_json(const nlohmann::json& j) {
  try {
    ComparisonRecord r;
    r.participant_id = j.at("participant_id").get<std::string>();
    const auto iface = parse_interface(j.at("interface").get<std::string>());
    if (!iface) throw Error(Errc::Parse, "unknown interface");
    r.interface = *iface;
    r.task_id = j.at("task_id").get<std::string>();
    r.target_id = j.at("target_id").get<std::string>();
    r.selected = j.at("selected").get<std::string>();
    r.ssim = j.at("ssim").get<double>();
    r.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
    if (r.elapsed_ms < 0) throw Error(Errc::Parse, "elapsed_ms must be >= 0");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("comparison record: ") + e.what());
  }
}

std::vector<ComparisonRecord> records_from_jsonl(const std::string& text) {
  std::vector<ComparisonRecord> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Parse, std::string("comparison record: ") + e.what());
    }
  }
  return out;
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptyDataset, "nothing to summarize");
  std::sort(values.begin(), values.end());
  Summary s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = numerics::quantile_sorted(values, 0.25);
  s.median = numerics::quantile_sorted(values, 0.5);
  s.q3 = numerics::quantile_sorted(values, 0.75);
  s.mean = numerics::mean(values);
  return s;
}

ComparisonReport analyze_comparison(std::span<const ComparisonRecord> records) {
  std::vector<double> ssim_by[2], time_by[2];
  for (const auto& r : records) {
    const int k = r.interface == Interface::Manifold ? 0 : 1;
    ssim_by[k].push_back(std::clamp(r.ssim, 0.0, 1.0));
    time_by[k].push_back(static_cast<double>(r.elapsed_ms));
  }
  for (int k = 0; k < 2; ++k) {
    if (time_by[k].empty()) {
      throw Error(Errc::MissingInterface,
                  std::string("no records for interface ") +
                      std::string(to_string(k == 0 ? Interface::Manifold : Interface::Grid)));
    }
  }
  ComparisonReport report;
  InterfaceSummary* out[2] = {&report.manifold, &report.grid};
  for (int k = 0; k < 2; ++k) {
    out[k]->count = time_by[k].size();
    out[k]->ssim = summarize(ssim_by[k]);
    out[k]->time_ms = summarize(time_by[k]);
  }
  report.ratio = report.grid.time_ms.mean / report.manifold.time_ms.mean;
  try {
    report.ttest = two_sample_ttest(time_by[1], time_by[0]);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateData) throw;
  }
  return report;
}

namespace {

ordered_json summary_json(const Summary& s) {
  return {{"min", s.min}, {"q1", s.q1}, {"median", s.median},
          {"q3", s.q3},   {"max", s.max}, {"mean", s.mean}};
}

ordered_json interface_json(const InterfaceSummary& s) {
  return {{"count", s.count}, {"ssim", summary_json(s.ssim)}, {"time_ms", summary_json(s.time_ms)}};
}

}  // namespace

ordered_json to_json(const ComparisonReport& report) {
  ordered_json j;
  j["manifold"] = interface_json(report.manifold);
  j["grid"] = interface_json(report.grid);
  j["ratio"] = report.ratio;
  if (report.ttest) {
    j["ttest"] = {{"t", report.ttest->t}, {"df", report.ttest->df}, {"p", report.ttest->p}};
  } else {
    j["ttest"] = "insufficient";
  }
  return j;
}

}  // namespace fm::metrics
