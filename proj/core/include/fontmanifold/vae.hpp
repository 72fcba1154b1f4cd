#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "fontmanifold/autodiff.hpp"
#include "fontmanifold/image.hpp"
#include "fontmanifold/rng.hpp"

namespace fm::vae {

inline constexpr int kLatentDim = 5;
inline constexpr int kSliderSteps = 100;  // slider positions 0..99

using LatentVector = std::array<double, kLatentDim>;

struct SliderVector {
  std::array<int, kLatentDim> k{};

  friend auto operator<=>(const SliderVector&, const SliderVector&) = default;
};

/// Throws Errc::Range if any coordinate is outside 0..99.
void validate(const SliderVector& sliders);

/// Convolutional encoder/decoder layer table. Every entry is a 3x3 conv
/// (pad 1) or a dense layer; see init_params for the exact tensors.
///
///   encoder  1x28x28 -conv s2-> 16x14x14 -conv s2-> 32x7x7 -conv-> 32x7x7
///            -conv-> 32x7x7 -flatten-> 1568 -dense-> mu(5), logvar(5)
///   decoder  5 -dense-> 1568 -> 32x7x7 -up-> 32x14x14 -conv-> 16x14x14
///            -up-> 16x28x28 -conv-> 1x28x28 (sigmoid)
struct ConvSpec {
  const char* name;
  int in_channels;
  int out_channels;
  int stride;
};
inline constexpr std::array<ConvSpec, 4> kEncoderConvs = {{
    {"enc_conv1", 1, 16, 2},
    {"enc_conv2", 16, 32, 2},
    {"enc_conv3", 32, 32, 1},
    {"enc_conv4", 32, 32, 1},
}};
inline constexpr std::array<ConvSpec, 2> kDecoderConvs = {{
    {"dec_conv1", 32, 16, 1},
    {"dec_conv2", 16, 1, 1},
}};
inline constexpr int kFlatChannels = 32;
inline constexpr int kFlatSide = 7;
inline constexpr int kFlatten = kFlatChannels * kFlatSide * kFlatSide;  // 1568

/// He-uniform weights, zero biases, drawn in a fixed layer order.
ad::ParameterSet init_params(Rng& rng);

/// All-zero parameters with the correct shapes.
ad::ParameterSet zero_params();

/// Throws Errc::Shape if any tensor is missing or has the wrong shape.
void validate(const ad::ParameterSet& params);

struct Encoding {
  LatentVector mu{};
  LatentVector logvar{};
};

Encoding encode(const ad::ParameterSet& params, const GlyphBitmap& bitmap);
GlyphBitmap decode(const ad::ParameterSet& params, const LatentVector& z);

/// z = mu + exp(logvar / 2) * noise.
LatentVector reparameterize(const LatentVector& mu, const LatentVector& logvar,
                            const LatentVector& noise);

double kl_divergence(const LatentVector& mu, const LatentVector& logvar);
double reconstruction_loss(const GlyphBitmap& output, const GlyphBitmap& target);

/// Taped forward pass of the training objective for one image.
struct TapedLoss {
  ad::Var mu, logvar, z, output, reconstruction, kl, total;
};
TapedLoss build_loss(ad::Tape& tape, const ad::ParameterSet& params, const GlyphBitmap& target,
                     const LatentVector& noise);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_reconstruction = 0.0;
  double mean_kl = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  ad::ParameterSet params;
  std::vector<EpochLog> log;
};

/// Adam on batch-mean (BCE + KL) with a seeded per-epoch shuffle.
/// Throws Errc::EmptyDataset with fewer than two images.
TrainResult train(const std::vector<GlyphBitmap>& images, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// z_d = Phi^-1(0.05 + 0.90 * k_d / 99).
LatentVector slider_to_latent(const SliderVector& sliders);

/// Five independent uniform draws from 0..99.
SliderVector random_sliders(Rng& rng);

struct GeneratedGlyph {
  SliderVector sliders;
  LatentVector latent{};
  GlyphBitmap bitmap;
};

inline constexpr int kGeneratedCorpusSize = 1592;

/// Decodes `count` distinct random slider positions, in draw order.
std::vector<GeneratedGlyph> sample_generated_corpus(const ad::ParameterSet& params,
                                                    int count = kGeneratedCorpusSize,
                                                    std::uint64_t seed = 7);

}  // namespace fm::vae
