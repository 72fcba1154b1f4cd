#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Pipeline driver. Subcommands: ingest, synth-fonts, train, decode, sample,
/// synth-labels, manifold, heatmap, match, analyze, serve.
/// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fm::cli
