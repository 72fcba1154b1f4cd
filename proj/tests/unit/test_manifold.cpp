#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fontmanifold/error.hpp"
#include "fontmanifold/manifold.hpp"
#include "support.hpp"

using namespace fm;
using namespace fm::manifold;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

double entropy_bits(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log2(v);
  return h;
}

std::vector<double> clusters(Rng& rng, std::size_t per, std::vector<int>& label) {
  std::vector<double> pts;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      for (int d = 0; d < 5; ++d) pts.push_back((d == c ? 5.0 : 0.0) + 0.05 * rng.normal());
      label.push_back(c);
    }
  }
  return pts;
}

EmbeddedSample at(double x, double y, PerceptionLabel l = PerceptionLabel::Pop, double z0 = 0) {
  EmbeddedSample s;
  s.coords = {x, y};
  s.label = l;
  s.latent = {z0, 0, 0, 0, 0};
  return s;
}

}  // namespace

TEST(Calibrate, Symmetric) {
  const std::vector<double> d{1.0, 1.0};
  const Calibration c = perplexity_calibrate(d, 2.0);
  EXPECT_NEAR(c.probabilities[0], 0.5, 1e-12);
  EXPECT_NEAR(c.probabilities[1], 0.5, 1e-12);
}

TEST(Calibrate, EntropyOracleAndNormalization) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(10);
    for (double& v : d) v = 10 * rng.uniform();
    const Calibration c = perplexity_calibrate(d, 5.0);
    double s = 0;
    for (double p : c.probabilities) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(std::exp2(entropy_bits(c.probabilities)), 5.0, 1e-4);
    // The distribution is the Gaussian with the reported precision.
    const double dmin = *std::min_element(d.begin(), d.end());
    double z = 0;
    for (double v : d) z += std::exp(-c.beta * (v - dmin));
    for (std::size_t i = 0; i < d.size(); ++i)
      EXPECT_NEAR(c.probabilities[i], std::exp(-c.beta * (d[i] - dmin)) / z, 1e-12);
  }
}

TEST(Calibrate, Errors) {
  EXPECT_EQ(code_of([] { perplexity_calibrate(std::vector<double>{0, 0, 0}, 2.0); }), Errc::Calibration);
  EXPECT_EQ(code_of([] { perplexity_calibrate(std::vector<double>{1, 2, 3}, 5.0); }), Errc::Calibration);
  EXPECT_EQ(code_of([] { perplexity_calibrate(std::vector<double>{1}, 2.0); }), Errc::Calibration);
}

TEST(Tsne, EffectivePerplexity) {
  EXPECT_EQ(effective_perplexity(30, 1000), 30);
  EXPECT_EQ(effective_perplexity(30, 12), 3);
  EXPECT_EQ(effective_perplexity(30, 91), 30);
  EXPECT_EQ(effective_perplexity(30, 90), 29);
}

TEST(Tsne, JointAffinitiesProperties) {
  Rng rng(2);
  std::vector<int> label;
  const auto pts = clusters(rng, 10, label);
  const Affinities a = joint_affinities(pts, 5, 8.0);
  double s = 0;
  for (std::size_t i = 0; i < a.n; ++i) {
    EXPECT_EQ(a.joint[i * a.n + i], 0.0);
    EXPECT_NEAR(a.row_perplexity[i], 8.0, 1e-4);
    for (std::size_t j = 0; j < a.n; ++j) {
      EXPECT_EQ(a.joint[i * a.n + j], a.joint[j * a.n + i]);
      s += a.joint[i * a.n + j];
    }
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Tsne, SeparatesClustersDeterministically) {
  Rng rng(3);
  std::vector<int> label;
  const auto pts = clusters(rng, 30, label);
  const TsneResult a = tsne(pts, 5);
  const TsneResult b = tsne(pts, 5);
  EXPECT_EQ(a.coords, b.coords);
  double intra = 0, inter = 0;
  int ni = 0, ne = 0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    for (std::size_t j = i + 1; j < a.coords.size(); ++j) {
      const double d = std::hypot(a.coords[i][0] - a.coords[j][0], a.coords[i][1] - a.coords[j][1]);
      if (label[i] == label[j]) {
        intra += d;
        ++ni;
      } else {
        inter += d;
        ++ne;
      }
    }
  }
  EXPECT_LT(intra / ni, inter / ne);
  // Objective at the end is no worse than just after exaggeration.
  double at300 = -1;
  for (const auto& o : a.objective)
    if (o.iteration == 300) at300 = o.kl;
  ASSERT_GE(at300, 0);
  EXPECT_EQ(a.objective.back().iteration, 1000);
  EXPECT_LE(a.objective.back().kl, at300 + 1e-6);
  EXPECT_NEAR(a.objective.back().kl, tsne_objective(a.affinities, a.coords), 1e-12);
  TsneConfig other;
  other.seed = 8;
  EXPECT_NE(tsne(pts, 5, other).coords, a.coords);
}

TEST(Tsne, Errors) {
  const std::vector<double> eleven(11 * 5, 1.0);
  EXPECT_EQ(code_of([&] { tsne(eleven, 5); }), Errc::TooFewPoints);
  const std::vector<double> same(12 * 5, 1.0);
  EXPECT_EQ(code_of([&] { tsne(same, 5); }), Errc::Calibration);
}

TEST(Kde, SilvermanValueAndHomogeneity) {
  std::vector<Point2> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({i % 2 ? 2.0 : -2.0, i % 4 < 2 ? 1.0 : -1.0});
  const Bandwidth h = silverman_bandwidth(pts);
  EXPECT_NEAR(h.h_x, 2 * std::pow(100.0, -1.0 / 6), 1e-12);
  EXPECT_NEAR(h.h_x, 0.92832, 1e-5);
  for (auto& p : pts) p = {3 * p[0], 3 * p[1]};
  const Bandwidth h3 = silverman_bandwidth(pts);
  EXPECT_NEAR(h3.h_x, 3 * h.h_x, 1e-12);
  EXPECT_NEAR(h3.h_y, 3 * h.h_y, 1e-12);
  EXPECT_EQ(code_of([] { silverman_bandwidth(std::vector<Point2>{{1, 1}}); }), Errc::DegenerateData);
  EXPECT_EQ(code_of([] { silverman_bandwidth(std::vector<Point2>{{1, 1}, {1, 2}}); }), Errc::DegenerateData);
}

TEST(Kde, IntegratesToOneAndPeaksAtCentroid) {
  Rng rng(4);
  std::vector<EmbeddedSample> s;
  for (int i = 0; i < 200; ++i) s.push_back(at(3 + rng.normal(), -2 + 0.5 * rng.normal()));
  const HeatmapGrid g = kde_heatmap(s, LabelFilter::All, 256, 256);
  double integral = 0, best = -1;
  int bc = 0, br = 0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      integral += g.at(c, r) * g.cell_area();
      if (g.at(c, r) > best) {
        best = g.at(c, r);
        bc = c;
        br = r;
      }
    }
  }
  EXPECT_GE(integral, 0.95);
  EXPECT_LE(integral, 1.02);
  double cx = 0, cy = 0;
  for (const auto& e : s) {
    cx += e.coords[0] / 200;
    cy += e.coords[1] / 200;
  }
  const Point2 peak = g.cell_center(bc, br);
  const double cw = (g.bounds.x_max - g.bounds.x_min) / g.width, ch = (g.bounds.y_max - g.bounds.y_min) / g.height;
  // Sampling noise can move the mode slightly off the centroid.
  EXPECT_LT(std::fabs(peak[0] - cx), 0.5);
  EXPECT_LT(std::fabs(peak[1] - cy), 0.3);
  EXPECT_GT(cw, 0);
  EXPECT_GT(ch, 0);
}

TEST(Kde, SymmetricClustersGiveEqualPeaks) {
  std::vector<EmbeddedSample> s;
  const double offs[] = {-0.3, 0.0, 0.3};
  for (double dx : offs)
    for (double dy : offs) {
      s.push_back(at(-10 + dx, dy));
      s.push_back(at(10 + dx, dy));
    }
  const HeatmapGrid g = kde_heatmap(s, LabelFilter::All, 64, 64);
  double left = 0, right = 0;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) (c < 32 ? left : right) = std::max(c < 32 ? left : right, g.at(c, r));
  EXPECT_NEAR(left, right, 1e-9 * left);
}

TEST(Kde, RowZeroIsTop) {
  std::vector<EmbeddedSample> s{at(0, 0), at(1, 5), at(2, 1), at(0.5, 0.2)};
  const HeatmapGrid g = kde_heatmap(s, LabelFilter::All, 8, 8);
  EXPECT_GT(g.cell_center(0, 0)[1], g.cell_center(0, 7)[1]);
  EXPECT_NEAR(g.cell_center(0, 0)[1], g.bounds.y_max - (g.bounds.y_max - g.bounds.y_min) / 16, 1e-12);
}

TEST(Kde, SinglePointUsesFallbackAndPeaksThere) {
  std::vector<EmbeddedSample> s{at(0, 0), at(4, 4, PerceptionLabel::Formal), at(1, 3)};
  EXPECT_EQ(code_of([&] { kde_heatmap(s, LabelFilter::Formal, 32, 32); }), Errc::DegenerateData);
  const HeatmapGrid g = kde_heatmap(s, LabelFilter::Formal, 64, 64, Bandwidth{0.5, 0.5});
  int bc = 0, br = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      if (g.at(c, r) > g.at(bc, br)) {
        bc = c;
        br = r;
      }
  const Point2 p = g.cell_center(bc, br);
  const double cell = (g.bounds.x_max - g.bounds.x_min) / 64;
  EXPECT_LE(std::fabs(p[0] - 4), cell);
  EXPECT_LE(std::fabs(p[1] - 4), cell);
}

TEST(Kde, SharedBoundsAcrossFilters) {
  Rng rng(6);
  std::vector<EmbeddedSample> s;
  const PerceptionLabel ls[] = {PerceptionLabel::Pop, PerceptionLabel::Formal, PerceptionLabel::Casual};
  for (int i = 0; i < 60; ++i) s.push_back(at(rng.normal() + 3 * (i % 3), rng.normal(), ls[i % 3]));
  const Bounds b = kde_heatmap(s, LabelFilter::All, 16, 16).bounds;
  for (LabelFilter f : kAllFilters) EXPECT_EQ(kde_heatmap(s, f, 16, 16).bounds, b);
  EXPECT_EQ(shared_bounds(s), b);
  for (const auto& e : s) {
    EXPECT_GT(e.coords[0], b.x_min);
    EXPECT_LT(e.coords[0], b.x_max);
  }
  EXPECT_EQ(code_of([] { kde_heatmap(std::vector<EmbeddedSample>{}, LabelFilter::All); }), Errc::EmptySelection);
  std::vector<EmbeddedSample> pops(s.begin(), s.begin() + 1);
  EXPECT_EQ(code_of([&] { kde_heatmap(pops, LabelFilter::Casual, 8, 8, Bandwidth{1, 1}); }), Errc::EmptySelection);
}

TEST(Kde, ColorizeRamp) {
  HeatmapGrid g;
  g.width = 3;
  g.height = 1;
  g.density = {0.0, 0.5, 1.0};
  const auto rgb = colorize(g);
  ASSERT_EQ(rgb.size(), 9u);
  EXPECT_EQ(rgb[0], 0);
  EXPECT_EQ(rgb[2], 255);  // blue
  EXPECT_EQ(rgb[4], 255);  // green
  EXPECT_EQ(rgb[6], 255);  // red
  EXPECT_EQ(rgb[8], 0);
}

TEST(Locate, Examples) {
  std::vector<EmbeddedSample> s{at(0, 0, PerceptionLabel::Pop, 1.0), at(2, 0, PerceptionLabel::Pop, 3.0),
                                at(10, 10, PerceptionLabel::Casual, 7.0)};
  EXPECT_EQ(locate_latent({2, 0}, s, LabelFilter::All)[0], 3.0);
  EXPECT_EQ(locate_latent({0.1, 0}, s, LabelFilter::All, 1)[0], 1.0);
  EXPECT_NEAR(locate_latent({1, 0}, s, LabelFilter::Pop, 2)[0], 2.0, 1e-12);
  EXPECT_EQ(locate_latent({0, 0}, s, LabelFilter::Casual)[0], 7.0);
  EXPECT_EQ(code_of([&] { locate_latent({0, 0}, s, LabelFilter::Formal); }), Errc::EmptySelection);
  // Interpolated latents stay inside the hull of the neighbours.
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double v = locate_latent({rng.uniform() * 12 - 1, rng.uniform() * 12 - 1}, s, LabelFilter::All)[0];
    EXPECT_GE(v, 1.0);
    EXPECT_LE(v, 7.0);
  }
}
