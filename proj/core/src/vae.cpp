#include "fontmanifold/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "fontmanifold/adam.hpp"
#include "fontmanifold/error.hpp"
#include "fontmanifold/numerics.hpp"

namespace fm::vae {

namespace {

using ad::Var;

const std::string kKernel = ".kernel";
const std::string kBias = ".bias";
const std::string kWeight = ".weight";

struct DenseSpec {
  const char* name;
  int inputs;
  int outputs;
};
constexpr std::array<DenseSpec, 3> kDense = {{
    {"enc_mu", kFlatten, kLatentDim},
    {"enc_logvar", kFlatten, kLatentDim},
    {"dec_dense", kLatentDim, kFlatten},
}};

std::map<std::string, Shape> expected_shapes() {
  std::map<std::string, Shape> shapes;
  auto conv = [&](const ConvSpec& c) {
    shapes[std::string(c.name) + kKernel] = {static_cast<std::size_t>(c.out_channels),
                                              static_cast<std::size_t>(c.in_channels), 3, 3};
    shapes[std::string(c.name) + kBias] = {static_cast<std::size_t>(c.out_channels)};
  };
  for (const auto& c : kEncoderConvs) conv(c);
  for (const auto& c : kDecoderConvs) conv(c);
  for (const auto& d : kDense) {
    shapes[std::string(d.name) + kWeight] = {static_cast<std::size_t>(d.outputs),
                                              static_cast<std::size_t>(d.inputs)};
    shapes[std::string(d.name) + kBias] = {static_cast<std::size_t>(d.outputs)};
  }
  return shapes;
}

Tensor he_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return t;
}

// Parameters bound onto a tape, either as trainable leaves or constants.
class Bound {
 public:
  Bound(ad::Tape& tape, const ad::ParameterSet& params, bool trainable) {
    for (const auto& [name, value] : params) {
      vars_[name] = trainable ? tape.parameter(name, value) : tape.constant(value);
    }
  }
  Var operator()(const std::string& name) const {
    const auto it = vars_.find(name);
    if (it == vars_.end()) throw Error(Errc::Shape, "missing parameter " + name);
    return it->second;
  }

 private:
  std::map<std::string, Var> vars_;
};

Var conv_layer(const Bound& p, Var x, const ConvSpec& c) {
  return ad::conv2d(x, p(std::string(c.name) + kKernel), p(std::string(c.name) + kBias), c.stride);
}

Var dense_layer(const Bound& p, Var x, const char* name) {
  return ad::dense(x, p(std::string(name) + kWeight), p(std::string(name) + kBias));
}

std::pair<Var, Var> encoder(ad::Tape& tape, const Bound& p, const GlyphBitmap& bitmap) {
  Var x = tape.constant(Tensor(Shape{1, 28, 28}, std::vector<double>(bitmap.values().begin(),
                                                                       bitmap.values().end())));
  for (const auto& c : kEncoderConvs) x = ad::relu(conv_layer(p, x, c));
  x = ad::reshape(x, Shape{kFlatten});
  return {dense_layer(p, x, "enc_mu"), dense_layer(p, x, "enc_logvar")};
}

Var decoder(const Bound& p, Var z) {
  Var h = ad::relu(dense_layer(p, z, "dec_dense"));
  h = ad::reshape(h, Shape{kFlatChannels, kFlatSide, kFlatSide});
  h = ad::upsample2x(h);
  h = ad::relu(conv_layer(p, h, kDecoderConvs[0]));
  h = ad::upsample2x(h);
  return ad::sigmoid(conv_layer(p, h, kDecoderConvs[1]));
}

Tensor latent_tensor(const LatentVector& v) {
  return Tensor(Shape{kLatentDim}, std::vector<double>(v.begin(), v.end()));
}

LatentVector to_latent(const Tensor& t) {
  LatentVector v{};
  std::copy(t.values().begin(), t.values().end(), v.begin());
  return v;
}

}  // namespace

void validate(const SliderVector& sliders) {
  for (int k : sliders.k) {
    if (k < 0 || k >= kSliderSteps) {
      throw Error(Errc::Range, "slider out of range: " + std::to_string(k) + " not in 0..99");
    }
  }
}

ad::ParameterSet init_params(Rng& rng) {
  ad::ParameterSet params;
  auto conv = [&](const ConvSpec& c) {
    params[std::string(c.name) + kKernel] =
        he_uniform(rng, {static_cast<std::size_t>(c.out_channels), static_cast<std::size_t>(c.in_channels), 3, 3},
                   static_cast<std::size_t>(c.in_channels) * 9);
    params[std::string(c.name) + kBias] = Tensor(Shape{static_cast<std::size_t>(c.out_channels)});
  };
  for (const auto& c : kEncoderConvs) conv(c);
  for (const auto& d : kDense) {
    Tensor w = he_uniform(rng, {static_cast<std::size_t>(d.outputs), static_cast<std::size_t>(d.inputs)},
                          static_cast<std::size_t>(d.inputs));
    // Small log-variance head so training starts near unit posterior width.
    if (std::string(d.name) == "enc_logvar") {
      for (double& v : w.values()) v *= 0.1;
    }
    params[std::string(d.name) + kWeight] = std::move(w);
    params[std::string(d.name) + kBias] = Tensor(Shape{static_cast<std::size_t>(d.outputs)});
  }
  for (const auto& c : kDecoderConvs) conv(c);
  return params;
}

ad::ParameterSet zero_params() {
  ad::ParameterSet params;
  for (const auto& [name, shape] : expected_shapes()) params[name] = Tensor(shape, 0.0);
  return params;
}

void validate(const ad::ParameterSet& params) {
  const auto shapes = expected_shapes();
  for (const auto& [name, shape] : shapes) {
    const auto it = params.find(name);
    if (it == params.end()) throw Error(Errc::Shape, "missing parameter " + name);
    if (it->second.shape() != shape) {
      throw Error(Errc::Shape, "parameter " + name + " has shape " + shape_string(it->second.shape()) +
                                   ", expected " + shape_string(shape));
    }
    if (!it->second.all_finite()) throw Error(Errc::Domain, "parameter " + name + " is not finite");
  }
  if (params.size() != shapes.size()) throw Error(Errc::Shape, "unexpected extra parameters");
}

Encoding encode(const ad::ParameterSet& params, const GlyphBitmap& bitmap) {
  ad::Tape tape;
  const Bound p(tape, params, false);
  const auto [mu, logvar] = encoder(tape, p, bitmap);
  return {to_latent(tape.value(mu)), to_latent(tape.value(logvar))};
}

GlyphBitmap decode(const ad::ParameterSet& params, const LatentVector& z) {
  for (double v : z) {
    if (!std::isfinite(v)) throw Error(Errc::Domain, "decode: latent vector is not finite");
  }
  ad::Tape tape;
  const Bound p(tape, params, false);
  const Var out = decoder(p, tape.constant(latent_tensor(z)));
  const Tensor& t = tape.value(out);
  // Saturated sigmoid rounds to exactly 0 or 1 in double; keep the open range.
  constexpr double kLo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  std::vector<double> values(t.values().begin(), t.values().end());
  for (double& v : values) v = std::clamp(v, kLo, hi);
  return GlyphBitmap(values);
}

LatentVector reparameterize(const LatentVector& mu, const LatentVector& logvar,
                            const LatentVector& noise) {
  LatentVector z{};
  for (int d = 0; d < kLatentDim; ++d) z[d] = mu[d] + std::exp(0.5 * logvar[d]) * noise[d];
  return z;
}

double kl_divergence(const LatentVector& mu, const LatentVector& logvar) {
  double acc = 0.0;
  for (int d = 0; d < kLatentDim; ++d) {
    acc += -0.5 * (1.0 + logvar[d] - mu[d] * mu[d] - std::exp(logvar[d]));
  }
  return acc;
}

double reconstruction_loss(const GlyphBitmap& output, const GlyphBitmap& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < GlyphBitmap::kPixels; ++i) {
    const double p = std::clamp(output[i], ad::kBceClamp, 1.0 - ad::kBceClamp);
    const double t = target[i];
    acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return acc;
}

TapedLoss build_loss(ad::Tape& tape, const ad::ParameterSet& params, const GlyphBitmap& target,
                     const LatentVector& noise) {
  const Bound p(tape, params, true);
  const auto [mu, logvar] = encoder(tape, p, target);
  const Var eps = tape.constant(latent_tensor(noise));
  const Var z = ad::reparameterize(mu, logvar, eps);
  const Var output = decoder(p, z);
  const Var target_var = tape.constant(
      Tensor(Shape{1, 28, 28}, std::vector<double>(target.values().begin(), target.values().end())));
  const Var recon = ad::bce_loss(output, target_var);
  const Var kl = ad::kl_divergence(mu, logvar);
  return {mu, logvar, z, output, recon, kl, ad::add(recon, kl)};
}

TrainResult train(const std::vector<GlyphBitmap>& images, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (images.size() < 2) throw Error(Errc::EmptyDataset, "training needs at least two images");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0)) {
    throw Error(Errc::InvalidArgument, "invalid training configuration");
  }

  Rng rng(config.seed);
  TrainResult result;
  result.params = init_params(rng);
  ad::AdamState adam;
  ad::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    double sum_loss = 0.0, sum_recon = 0.0, sum_kl = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      ad::Gradients batch_grads;
      for (std::size_t k = start; k < end; ++k) {
        LatentVector noise{};
        for (double& v : noise) v = rng.normal();
        ad::Tape tape;
        const TapedLoss loss = build_loss(tape, result.params, images[order[k]], noise);
        sum_loss += tape.value(loss.total)[0];
        sum_recon += tape.value(loss.reconstruction)[0];
        sum_kl += tape.value(loss.kl)[0];
        const ad::Gradients g = ad::backward(tape, loss.total);
        for (const auto& [name, grad] : g) {
          auto [it, inserted] = batch_grads.try_emplace(name, grad.shape(), 0.0);
          for (std::size_t i = 0; i < grad.size(); ++i) it->second[i] += grad[i] * inv;
        }
      }
      ad::adam_step(result.params, batch_grads, adam, adam_config);
    }
    const double n = static_cast<double>(order.size());
    EpochLog entry{epoch, sum_loss / n, sum_recon / n, sum_kl / n};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

LatentVector slider_to_latent(const SliderVector& sliders) {
  validate(sliders);
  LatentVector z{};
  // The upper half mirrors the lower half so that z(k) = -z(99 - k) holds
  // exactly and z(99) does not overshoot by the rounding of 0.05 + 0.9.
  constexpr int top = kSliderSteps - 1;
  for (int d = 0; d < kLatentDim; ++d) {
    const int k = sliders.k[d];
    const int low = std::min(k, top - k);
    const double p = 0.05 + 0.90 * static_cast<double>(low) / top;
    const double v = numerics::gaussian_ppf(p);
    z[d] = 2 * k > top ? -v : v;
  }
  return z;
}

SliderVector random_sliders(Rng& rng) {
  SliderVector s;
  for (int& k : s.k) k = static_cast<int>(rng.uniform_int(kSliderSteps));
  return s;
}

std::vector<GeneratedGlyph> sample_generated_corpus(const ad::ParameterSet& params, int count,
                                                    std::uint64_t seed) {
  if (count < 0) throw Error(Errc::InvalidArgument, "sample count must be non-negative");
  Rng rng(seed);
  std::set<SliderVector> seen;
  std::vector<GeneratedGlyph> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  while (corpus.size() < static_cast<std::size_t>(count)) {
    const SliderVector s = random_sliders(rng);
    if (!seen.insert(s).second) continue;
    const LatentVector z = slider_to_latent(s);
    corpus.push_back({s, z, decode(params, z)});
  }
  return corpus;
}

}  // namespace fm::vae
