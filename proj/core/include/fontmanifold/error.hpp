#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fm {

enum class Errc {
  InvalidArgument,
  Io,
  Parse,
  MissingGlyph,
  EmptyGlyph,
  Dimension,
  Shape,
  Graph,
  Domain,
  Range,
  EmptyDataset,
  Calibration,
  TooFewPoints,
  DegenerateData,
  EmptySelection,
  EmptyCorpus,
  MissingInterface,
  UnknownSession,
  UnknownTask,
  AlreadyAnswered,
  CorpusTooSmall,
  ExhaustedSampling,
  Format,
};

std::string_view errc_name(Errc code) noexcept;

/// Domain error carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fm
