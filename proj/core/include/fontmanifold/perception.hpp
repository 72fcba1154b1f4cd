#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace fm {

/// The three perception styles collected in the labeling study.
enum class PerceptionLabel { Pop, Formal, Casual };

/// Selection of samples for heatmaps and control-point lookup.
enum class LabelFilter { All, Pop, Formal, Casual };

/// "POP", "Formal", "Casual".
std::string_view to_string(PerceptionLabel label) noexcept;

/// "all", "pop", "formal", "casual" (used in file names and URLs).
std::string_view slug(LabelFilter filter) noexcept;

/// Case-insensitive.
std::optional<PerceptionLabel> parse_label(std::string_view text) noexcept;
std::optional<LabelFilter> parse_filter(std::string_view text) noexcept;

bool matches(LabelFilter filter, PerceptionLabel label) noexcept;

inline constexpr LabelFilter kAllFilters[] = {LabelFilter::All, LabelFilter::Pop,
                                              LabelFilter::Formal, LabelFilter::Casual};

}  // namespace fm
