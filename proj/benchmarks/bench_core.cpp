#include <benchmark/benchmark.h>

#include <vector>

#include "fontmanifold/autodiff.hpp"
#include "fontmanifold/manifold.hpp"
#include "fontmanifold/metrics.hpp"
#include "fontmanifold/vae.hpp"

using namespace fm;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = 2 * rng.uniform() - 1;
  return t;
}

GlyphBitmap random_glyph(Rng& rng) {
  std::vector<double> v(GlyphBitmap::kPixels);
  for (double& x : v) x = rng.uniform();
  return GlyphBitmap(v);
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor(rng, {c, 14, 14});
  const Tensor k = random_tensor(rng, {c, c, 3, 3});
  const Tensor b = random_tensor(rng, {c});
  for (auto _ : state) {
    ad::Tape tape;
    const auto y = ad::conv2d(tape.constant(x), tape.parameter("k", k), tape.parameter("b", b), 1);
    benchmark::DoNotOptimize(ad::backward(tape, ad::sum(y)));
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(32);

void BM_Decode(benchmark::State& state) {
  Rng rng(2);
  const auto params = vae::init_params(rng);
  const vae::LatentVector z{0.1, -0.4, 1.2, 0.0, -1.0};
  for (auto _ : state) benchmark::DoNotOptimize(vae::decode(params, z));
}
BENCHMARK(BM_Decode);

void BM_TrainStep(benchmark::State& state) {
  Rng rng(3);
  const auto params = vae::init_params(rng);
  const GlyphBitmap x = random_glyph(rng);
  const vae::LatentVector noise{0.3, 0.1, -0.2, 0.5, 0.0};
  for (auto _ : state) {
    ad::Tape tape;
    const auto loss = vae::build_loss(tape, params, x, noise);
    benchmark::DoNotOptimize(ad::backward(tape, loss.total));
  }
}
BENCHMARK(BM_TrainStep);

void BM_Ssim(benchmark::State& state) {
  Rng rng(4);
  const GlyphBitmap a = random_glyph(rng), b = random_glyph(rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_Tsne(benchmark::State& state) {
  Rng rng(5);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> pts(n * 5);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = rng.normal() + 4.0 * static_cast<double>(i / 5 % 3);
  for (auto _ : state) benchmark::DoNotOptimize(manifold::tsne(pts, 5));
}
BENCHMARK(BM_Tsne)->Arg(90)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_KdeHeatmap(benchmark::State& state) {
  Rng rng(6);
  std::vector<manifold::EmbeddedSample> s(static_cast<std::size_t>(state.range(0)));
  for (auto& e : s) e.coords = {rng.normal(), rng.normal()};
  for (auto _ : state) benchmark::DoNotOptimize(manifold::kde_heatmap(s, LabelFilter::All));
}
BENCHMARK(BM_KdeHeatmap)->Arg(300)->Arg(900)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
