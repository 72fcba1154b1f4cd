#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fontmanifold/perception.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::manifold {

using Point2 = std::array<double, 2>;

struct EmbeddedSample {
  std::string sample_id;
  Point2 coords{};
  PerceptionLabel label = PerceptionLabel::Pop;
  vae::LatentVector latent{};

  friend bool operator==(const EmbeddedSample&, const EmbeddedSample&) = default;
};

// -- t-SNE ------------------------------------------------------------------

struct Calibration {
  std::vector<double> probabilities;
  double beta = 1.0;
  double entropy_bits = 0.0;
  int iterations = 0;

  double perplexity() const;
};

/// Binary search on the Gaussian precision beta so that the row entropy
/// matches log2(target_perplexity) within `tolerance` bits (at most 64
/// halvings). p_i is proportional to exp(-beta * d_i).
///
/// Throws Errc::Calibration when the target is unreachable: every distance
/// is equal (entropy fixed at log2 n) or the target exceeds n neighbours.
Calibration perplexity_calibrate(std::span<const double> sq_distances, double target_perplexity,
                                 double tolerance = 1e-5);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double init_std = 1e-4;
  double min_gain = 0.01;
  /// Entropy tolerance used for every row; tight enough that the achieved
  /// perplexity is within 1e-4 of target.
  double calibration_tolerance = 1e-9;
  std::uint64_t seed = 7;
};

inline constexpr std::size_t kMinTsnePoints = 12;

/// Perplexity actually used for N points: min(configured, floor((N-1)/3)).
double effective_perplexity(double configured, std::size_t n);

struct Affinities {
  std::size_t n = 0;
  std::vector<double> joint;           // n x n, symmetric, sums to 1
  std::vector<double> row_perplexity;  // achieved conditional perplexity per row
  double target_perplexity = 0.0;
};

/// Symmetrized input affinities p_ij = (p_j|i + p_i|j) / (2n).
Affinities joint_affinities(std::span<const double> points, std::size_t dim, double perplexity,
                            double tolerance = 1e-9);

struct ObjectiveSample {
  int iteration = 0;
  double kl = 0.0;
};

struct TsneResult {
  std::vector<Point2> coords;
  Affinities affinities;
  std::vector<ObjectiveSample> objective;  // every 10th iteration and the last
};

/// Exact O(N^2) t-SNE. `points` is row-major N x dim.
/// Errors: TooFewPoints (N < 12), Calibration.
TsneResult tsne(std::span<const double> points, std::size_t dim, const TsneConfig& config = {});

/// KL(P || Q) of an embedding against joint affinities.
double tsne_objective(const Affinities& affinities, std::span<const Point2> coords);

// -- KDE heatmaps -------------------------------------------------------------

struct Bounds {
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Bandwidth {
  double h_x = 0;
  double h_y = 0;
};

/// Rule-of-thumb bandwidth for 2-D data: sigma * N^(-1/6), population sigma.
/// Throws Errc::DegenerateData for N < 2 or an axis without variance.
Bandwidth silverman_bandwidth(std::span<const Point2> coords);

/// One rectangle shared by every label view: the bounding box of all
/// samples padded by three times the widest bandwidth of any label subset.
/// `fallback` pads when no subset has a computable bandwidth.
Bounds shared_bounds(std::span<const EmbeddedSample> samples,
                     std::optional<Bandwidth> fallback = std::nullopt);

/// Density on a grid whose row 0 is the top (y_max) edge.
struct HeatmapGrid {
  int width = 0;
  int height = 0;
  Bounds bounds;
  Bandwidth bandwidth;
  std::vector<double> density;  // row-major

  double at(int col, int row) const { return density[static_cast<std::size_t>(row) * width + col]; }
  Point2 cell_center(int col, int row) const;
  double cell_area() const;
};

inline constexpr int kHeatmapSide = 256;

/// Gaussian product-kernel KDE of the filtered samples over shared_bounds.
/// `fallback` replaces the rule-of-thumb bandwidth when the filtered subset
/// has fewer than two points or an axis without variance.
/// Errors: EmptySelection, DegenerateData.
HeatmapGrid kde_heatmap(std::span<const EmbeddedSample> samples, LabelFilter filter,
                        int width = kHeatmapSide, int height = kHeatmapSide,
                        std::optional<Bandwidth> fallback = std::nullopt);

/// 5-stop blue-cyan-green-yellow-red ramp over density / max density;
/// returns RGB bytes row-major.
std::vector<std::uint8_t> colorize(const HeatmapGrid& grid);

/// Control point -> latent vector. Returns the latent of a sample hit
/// exactly, otherwise the inverse-distance weighted mean of the k nearest
/// filtered samples. Throws Errc::EmptySelection.
vae::LatentVector locate_latent(const Point2& click, std::span<const EmbeddedSample> samples,
                                LabelFilter filter, int k = 5);

}  // namespace fm::manifold
