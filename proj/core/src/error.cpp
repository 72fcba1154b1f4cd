#include "fontmanifold/error.hpp"

namespace fm {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "IoError";
    case Errc::Parse: return "ParseError";
    case Errc::MissingGlyph: return "MissingGlyph";
    case Errc::EmptyGlyph: return "EmptyGlyph";
    case Errc::Dimension: return "DimensionError";
    case Errc::Shape: return "ShapeError";
    case Errc::Graph: return "GraphError";
    case Errc::Domain: return "DomainError";
    case Errc::Range: return "RangeError";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::Calibration: return "CalibrationError";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::MissingInterface: return "MissingInterface";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::AlreadyAnswered: return "AlreadyAnswered";
    case Errc::CorpusTooSmall: return "CorpusTooSmall";
    case Errc::ExhaustedSampling: return "ExhaustedSampling";
    case Errc::Format: return "FormatError";
  }
  return "Unknown";
}

}  // namespace fm
