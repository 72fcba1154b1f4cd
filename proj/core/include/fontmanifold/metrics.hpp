#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fontmanifold/image.hpp"
#include "fontmanifold/ingest.hpp"

namespace fm::metrics {

// -- SSIM -----------------------------------------------------------------------

/// Global image statistics on the 0-255 scale with population moments.
struct SsimStats {
  static constexpr double kC1 = 6.5;
  static constexpr double kC2 = 58.5;

  double mu_x = 0, mu_y = 0;
  double sigma_x = 0, sigma_y = 0;
  double sigma_xy = 0;
  double var_x = 0, var_y = 0;  // sigma squared, kept unrounded

  /// ((2 mu_x mu_y + C1)(2 sigma_xy + C2)) /
  /// ((mu_x^2 + mu_y^2 + C1)(var_x + var_y + C2))
  double value() const noexcept;
};

/// `a` and `b` hold intensities in [0, 1]; each is scaled by 255 first.
/// Throws Errc::Dimension if the lengths differ or are zero.
SsimStats ssim_stats(std::span<const double> a, std::span<const double> b);

double ssim(std::span<const double> a, std::span<const double> b);
double ssim(const GlyphBitmap& a, const GlyphBitmap& b);

// -- matching -------------------------------------------------------------------

struct Match {
  std::string font_id;
  double ssim = 0.0;
};

/// Corpus entry with the highest SSIM against `query`; ties go to the
/// lexicographically smallest font_id. Throws Errc::EmptyCorpus.
Match match_closest_font(const GlyphBitmap& query, std::span<const ingest::CorpusGlyph> corpus);

struct AlphabetStrip {
  RawBitmap image;                    // (28 * letters) x 28, white cells where a letter failed
  std::vector<std::string> warnings;  // one per failed letter
};

inline constexpr std::string_view kCapitals = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// Runs each letter through rasterize -> crop -> pad -> resize and lays the
/// 28x28 cells out left to right.
AlphabetStrip render_alphabet(std::span<const std::uint8_t> font_bytes,
                              std::string_view letters = kCapitals);

// -- comparison statistics ----------------------------------------------------------

struct TTest {
  double t = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Pooled-variance unpaired Student's t with a two-tailed p.
/// Throws Errc::DegenerateData when either side has fewer than two values or
/// the pooled variance and the mean difference are both zero.
TTest two_sample_ttest(std::span<const double> xs, std::span<const double> ys);

enum class Interface { Manifold, Grid };

std::string_view to_string(Interface interface) noexcept;
std::optional<Interface> parse_interface(std::string_view text) noexcept;

struct ComparisonRecord {
  std::string participant_id;
  Interface interface = Interface::Manifold;
  std::string task_id;
  std::string target_id;
  std::string selected;  // z:<comma list> or font:<id>
  double ssim = 0.0;
  std::int64_t elapsed_ms = 0;

  friend bool operator==(const ComparisonRecord&, const ComparisonRecord&) = default;
};

nlohmann::ordered_json to_json(const ComparisonRecord& record);
/// Throws Errc::Parse.
ComparisonRecord record_from_json(const nlohmann::json& j);

std::vector<ComparisonRecord> records_from_jsonl(const std::string& text);

struct Summary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Five-number summary plus mean. Throws Errc::EmptyDataset.
Summary summarize(std::vector<double> values);

struct InterfaceSummary {
  std::size_t count = 0;
  Summary ssim;     // scores clamped to [0, 1]
  Summary time_ms;
};

struct ComparisonReport {
  InterfaceSummary manifold;
  InterfaceSummary grid;
  double ratio = 0.0;           // mean grid time / mean manifold time
  std::optional<TTest> ttest;   // empty when the test is not computable
};

/// Throws Errc::MissingInterface unless both interfaces have records.
ComparisonReport analyze_comparison(std::span<const ComparisonRecord> records);

/// {"manifold": {...}, "grid": {...}, "ratio": r, "ttest": {...} | "insufficient"}
nlohmann::ordered_json to_json(const ComparisonReport& report);

}  // namespace fm::metrics
