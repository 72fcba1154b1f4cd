#include "fontmanifold/perception.hpp"

#include <algorithm>
#include <cctype>

namespace fm {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(PerceptionLabel label) noexcept {
  switch (label) {
    case PerceptionLabel::Pop: return "POP";
    case PerceptionLabel::Formal: return "Formal";
    case PerceptionLabel::Casual: return "Casual";
  }
  return "POP";
}

std::string_view slug(LabelFilter filter) noexcept {
  switch (filter) {
    case LabelFilter::All: return "all";
    case LabelFilter::Pop: return "pop";
    case LabelFilter::Formal: return "formal";
    case LabelFilter::Casual: return "casual";
  }
  return "all";
}

std::optional<PerceptionLabel> parse_label(std::string_view text) noexcept {
  const std::string t = lower(text);
  if (t == "pop") return PerceptionLabel::Pop;
  if (t == "formal") return PerceptionLabel::Formal;
  if (t == "casual") return PerceptionLabel::Casual;
  return std::nullopt;
}

std::optional<LabelFilter> parse_filter(std::string_view text) noexcept {
  const std::string t = lower(text);
  if (t == "all") return LabelFilter::All;
  if (t == "pop") return LabelFilter::Pop;
  if (t == "formal") return LabelFilter::Formal;
  if (t == "casual") return LabelFilter::Casual;
  return std::nullopt;
}

bool matches(LabelFilter filter, PerceptionLabel label) noexcept {
  switch (filter) {
    case LabelFilter::All: return true;
    case LabelFilter::Pop: return label == PerceptionLabel::Pop;
    case LabelFilter::Formal: return label == PerceptionLabel::Formal;
    case LabelFilter::Casual: return label == PerceptionLabel::Casual;
  }
  return false;
}

}  // namespace fm
