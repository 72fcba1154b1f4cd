#include <gtest/gtest.h>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/manifold_io.hpp"
#include "fontmanifold/png_io.hpp"
#include "support.hpp"

using namespace fm;
using namespace fm::manifold;

namespace {

std::vector<EmbeddedSample> labelled_samples(std::size_t per_label, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EmbeddedSample> s;
  const PerceptionLabel ls[] = {PerceptionLabel::Pop, PerceptionLabel::Formal, PerceptionLabel::Casual};
  for (std::size_t i = 0; i < 3 * per_label; ++i) {
    EmbeddedSample e;
    e.sample_id = "s" + std::to_string(i);
    e.label = ls[i % 3];
    for (int d = 0; d < 5; ++d) e.latent[d] = (static_cast<int>(i % 3) == d ? 3.0 : 0.0) + rng.normal() * 0.3;
    s.push_back(e);
  }
  return s;
}

}  // namespace

TEST(ManifoldIo, EmbeddingJsonlRoundTrip) {
  auto s = labelled_samples(5, 1);
  s[0].coords = {0.1 + 0.2, -1e-300};
  const auto back = embedding_from_jsonl(embedding_to_jsonl(s));
  EXPECT_EQ(back, s);
  EXPECT_THROW(embedding_from_jsonl("{\"sample_id\": 3}\n"), Error);
}

TEST(ManifoldIo, HeatmapF64RoundTrip) {
  HeatmapGrid g;
  g.width = 3;
  g.height = 2;
  g.bounds = {-1.5, 2.25, -3, 0.125};
  g.density = {0, 1e-300, 0.5, 1, 2, 3.75};
  const auto bytes = heatmap_to_f64(g);
  ASSERT_EQ(bytes.size(), kHeatmapHeaderBytes + 6 * 8);
  EXPECT_EQ(bytes[0], 3);
  EXPECT_EQ(bytes[4], 2);
  const HeatmapGrid back = heatmap_from_f64(bytes);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.bounds, g.bounds);
  EXPECT_EQ(back.density, g.density);
  std::vector<std::uint8_t> short_bytes(bytes.begin(), bytes.end() - 1);
  EXPECT_THROW(heatmap_from_f64(short_bytes), Error);
}

TEST(ManifoldIo, BundleWriteLoadAndDeterminism) {
  auto run = [](const std::string& name) {
    auto s = labelled_samples(12, 2);
    const TsneResult r = embed(s);
    const auto dir = test::scratch_dir(name);
    write_embedding_bundle(dir, s, TsneConfig{}, r);
    const auto grids = write_heatmaps(dir, 32);
    EXPECT_EQ(grids.size(), 4u);
    return dir;
  };
  const auto a = run("bundle-a"), b = run("bundle-b");
  for (const char* f : {"embedding.jsonl", "manifold.json", "heatmap_all.png", "heatmap_pop.f64", "heatmap_casual.png"}) {
    EXPECT_EQ(io::read_bytes(a / f), io::read_bytes(b / f)) << f;
  }
  const ManifoldBundle bundle = load_bundle(a);
  EXPECT_EQ(bundle.samples.size(), 36u);
  EXPECT_EQ(bundle.heatmaps.size(), 4u);
  EXPECT_EQ(bundle.manifest["sample_count"], 36);
  EXPECT_EQ(bundle.manifest["heatmaps"]["formal"]["count"], 12);
  const RawBitmap png = png::decode_gray(bundle.heatmap_png.at(LabelFilter::All));
  EXPECT_EQ(png.width, 32);
  EXPECT_EQ(bundle.heatmaps.at(LabelFilter::Pop).bounds, bundle.heatmaps.at(LabelFilter::All).bounds);
}

TEST(ManifoldIo, MissingBundleIsIoError) {
  EXPECT_THROW(load_bundle(test::scratch_dir("bundle-missing")), Error);
}
