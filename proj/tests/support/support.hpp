#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fontmanifold/autodiff.hpp"
#include "fontmanifold/image.hpp"
#include "fontmanifold/ingest.hpp"
#include "fontmanifold/rng.hpp"

namespace fm::test {

/// Empty directory private to this process, under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Installed DejaVu TrueType files, sorted; empty when none are present.
std::vector<std::filesystem::path> system_fonts();

struct DeskData {
  std::filesystem::path fonts;
  std::filesystem::path dataset;
  ingest::DatasetManifest manifest;
  std::vector<ingest::CorpusGlyph> corpus;
  std::vector<GlyphBitmap> images;
};

/// `count` seeded synthetic fonts run through ingest; built once per process.
const DeskData& desk_data(int count = 200);

/// Parameters trained on desk_data(200) for `epochs` epochs, seed 7; cached.
const ad::ParameterSet& desk_model(int epochs = 10);

/// Random image with values in [0, 1].
GlyphBitmap random_glyph(Rng& rng);

/// Tensor of the given shape with uniform values in [lo, hi).
Tensor random_tensor(Rng& rng, const Shape& shape, double lo = -1.0, double hi = 1.0);

/// Mean reconstruction SSIM: decode(encode(x).mu) against x.
double mean_reconstruction_ssim(const ad::ParameterSet& params, std::span<const GlyphBitmap> images);

}  // namespace fm::test

namespace fm::test {

using VarMap = std::map<std::string, ad::Var>;
/// Builds a scalar loss from the parameters recorded on `tape`.
using LossBuilder = std::function<ad::Var(ad::Tape&, const VarMap&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor) between reverse-mode and
/// central-difference gradients. At most `per_tensor` coordinates of each
/// tensor are probed (chosen with `pick`), all of them when 0.
GradCheck check_gradients(const LossBuilder& build, const ad::ParameterSet& params, double eps,
                          double floor, std::size_t per_tensor = 0, Rng* pick = nullptr);

struct PrimitiveCase {
  std::string name;
  ad::ParameterSet params;
  LossBuilder build;
};

/// One randomly shaped instance of every taped primitive, each projected to
/// a scalar through a fixed random weighting. Relu inputs keep |v| > 1e-3.
std::vector<PrimitiveCase> random_primitive_cases(Rng& rng);

}  // namespace fm::test

namespace fm::test {

/// Central-difference check of the mean VAE loss over a 2-image batch with
/// fixed noise, probing `per_tensor` random coordinates of every tensor.
GradCheck vae_gradient_check(std::uint64_t seed, std::size_t per_tensor);

}  // namespace fm::test
