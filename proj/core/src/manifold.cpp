#include "fontmanifold/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fontmanifold/error.hpp"

namespace fm::manifold {

// -- perplexity calibration ----------------------------------------------------

double Calibration::perplexity() const { return std::exp2(entropy_bits); }

namespace {

// Normalized p_i = exp(-beta (d_i - d_min)) / Z and entropy in bits.
double row_distribution(std::span<const double> d, double d_min, double beta, std::vector<double>& p) {
  double z = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    p[i] = std::exp(-beta * (d[i] - d_min));
    z += p[i];
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    p[i] /= z;
    weighted += p[i] * (d[i] - d_min);
  }
  return (std::log(z) + beta * weighted) / std::numbers::ln2;
}

}  // namespace

Calibration perplexity_calibrate(std::span<const double> sq_distances, double target_perplexity,
                                 double tolerance) {
  if (sq_distances.size() < 2) throw Error(Errc::Calibration, "need at least two distances");
  if (!(target_perplexity >= 2.0)) throw Error(Errc::Calibration, "target perplexity must be >= 2");
  for (double d : sq_distances) {
    if (!std::isfinite(d) || d < 0) throw Error(Errc::Calibration, "distances must be finite and >= 0");
  }
  const double target_h = std::log2(target_perplexity);
  const double max_h = std::log2(static_cast<double>(sq_distances.size()));
  const auto [lo_it, hi_it] = std::minmax_element(sq_distances.begin(), sq_distances.end());
  const double d_min = *lo_it;

  Calibration cal;
  cal.probabilities.resize(sq_distances.size());
  if (*hi_it == d_min) {
    // Entropy is log2(n) for every beta.
    if (std::fabs(max_h - target_h) >= tolerance) {
      throw Error(Errc::Calibration, "all distances equal; perplexity fixed at n");
    }
    cal.entropy_bits = row_distribution(sq_distances, d_min, 1.0, cal.probabilities);
    return cal;
  }
  if (target_h > max_h + tolerance) {
    throw Error(Errc::Calibration, "target perplexity exceeds the number of neighbours");
  }

  double beta = 1.0;
  double beta_lo = 0.0;
  double beta_hi = std::numeric_limits<double>::infinity();
  double best_gap = std::numeric_limits<double>::infinity();
  std::vector<double> p(sq_distances.size());
  for (int iter = 1; iter <= 64; ++iter) {
    const double h = row_distribution(sq_distances, d_min, beta, p);
    const double gap = h - target_h;
    if (std::fabs(gap) < best_gap) {
      best_gap = std::fabs(gap);
      cal.beta = beta;
      cal.entropy_bits = h;
      cal.iterations = iter;
      cal.probabilities = p;
    }
    if (std::fabs(gap) < tolerance) break;
    if (gap > 0) {  // too flat: sharpen
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
    } else {
      beta_hi = beta;
      beta = 0.5 * (beta + beta_lo);
    }
  }
  return cal;
}

double effective_perplexity(double configured, std::size_t n) {
  const double cap = std::floor(static_cast<double>(n - 1) / 3.0);
  return std::min(configured, cap);
}

Affinities joint_affinities(std::span<const double> points, std::size_t dim, double perplexity,
                            double tolerance) {
  if (dim == 0 || points.size() % dim != 0) throw Error(Errc::Shape, "points must be N x dim");
  const std::size_t n = points.size() / dim;
  for (double v : points) {
    if (!std::isfinite(v)) throw Error(Errc::Domain, "t-SNE input is not finite");
  }
  Affinities aff;
  aff.n = n;
  aff.target_perplexity = perplexity;
  aff.row_perplexity.resize(n);
  std::vector<double> conditional(n * n, 0.0);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = points[i * dim + c] - points[j * dim + c];
        d += diff * diff;
      }
      row[k++] = d;
    }
    const Calibration cal = perplexity_calibrate(row, perplexity, tolerance);
    aff.row_perplexity[i] = cal.perplexity();
    k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) conditional[i * n + j] = cal.probabilities[k++];
    }
  }
  aff.joint.assign(n * n, 0.0);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      aff.joint[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / norm;
    }
  }
  return aff;
}

double tsne_objective(const Affinities& affinities, std::span<const Point2> coords) {
  const std::size_t n = affinities.n;
  double z = 0.0;
  std::vector<double> num(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = coords[i][0] - coords[j][0], dy = coords[i][1] - coords[j][1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = q;
      z += 2.0 * q;
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = affinities.joint[i * n + j];
      if (i == j || p <= 0.0) continue;
      const double q = std::max(num[i * n + j] / z, 1e-300);
      kl += p * std::log(p / q);
    }
  }
  return kl;
}

TsneResult tsne(std::span<const double> points, std::size_t dim, const TsneConfig& config) {
  if (dim == 0 || points.size() % dim != 0) throw Error(Errc::Shape, "points must be N x dim");
  const std::size_t n = points.size() / dim;
  if (n < kMinTsnePoints) {
    throw Error(Errc::TooFewPoints, "t-SNE needs at least 12 points, got " + std::to_string(n));
  }
  if (config.iterations < 250 || !(config.perplexity >= 2.0)) {
    throw Error(Errc::InvalidArgument, "t-SNE needs perplexity >= 2 and >= 250 iterations");
  }

  TsneResult result;
  result.affinities = joint_affinities(points, dim, effective_perplexity(config.perplexity, n),
                                       config.calibration_tolerance);
  const std::vector<double>& p = result.affinities.joint;

  Rng rng(config.seed);
  std::vector<Point2> y(n);
  for (auto& pt : y) {
    pt[0] = rng.normal() * config.init_std;
    pt[1] = rng.normal() * config.init_std;
  }
  std::vector<Point2> velocity(n, Point2{0, 0});
  std::vector<Point2> gains(n, Point2{1, 1});
  std::vector<Point2> grad(n);
  std::vector<double> num(n * n);

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const bool early = iter <= config.exaggeration_iterations;
    const double exaggeration = early ? config.early_exaggeration : 1.0;
    const double momentum =
        iter <= config.momentum_switch ? config.initial_momentum : config.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num[i * n + i] = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = q;
        z += 2.0 * q;
      }
    }
    // dC/dy_i = 4 sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = num[i * n + j];
        const double coeff = (exaggeration * p[i * n + j] - w / z) * w;
        gx += coeff * (y[i][0] - y[j][0]);
        gy += coeff * (y[i][1] - y[j][1]);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 2; ++c) {
        double& g = gains[i][c];
        const bool same_sign = (grad[i][c] > 0) == (velocity[i][c] > 0);
        g = same_sign ? g * 0.8 : g + 0.2;
        g = std::max(g, config.min_gain);
        velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * g * grad[i][c];
        y[i][c] += velocity[i][c];
      }
    }
    Point2 mean{0, 0};
    for (const auto& pt : y) {
      mean[0] += pt[0];
      mean[1] += pt[1];
    }
    mean[0] /= static_cast<double>(n);
    mean[1] /= static_cast<double>(n);
    for (auto& pt : y) {
      pt[0] -= mean[0];
      pt[1] -= mean[1];
    }
    if (iter % 10 == 0 || iter == config.iterations) {
      result.objective.push_back({iter, tsne_objective(result.affinities, y)});
    }
  }
  for (const auto& pt : y) {
    if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) {
      throw Error(Errc::Domain, "t-SNE diverged to non-finite coordinates");
    }
  }
  result.coords = std::move(y);
  return result;
}

// -- KDE ------------------------------------------------------------------------

Bandwidth silverman_bandwidth(std::span<const Point2> coords) {
  const std::size_t n = coords.size();
  if (n < 2) throw Error(Errc::DegenerateData, "bandwidth needs at least two samples");
  double mx = 0, my = 0;
  for (const auto& c : coords) {
    mx += c[0];
    my += c[1];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0, vy = 0;
  for (const auto& c : coords) {
    vx += (c[0] - mx) * (c[0] - mx);
    vy += (c[1] - my) * (c[1] - my);
  }
  vx /= static_cast<double>(n);
  vy /= static_cast<double>(n);
  if (!(vx > 0) || !(vy > 0)) throw Error(Errc::DegenerateData, "zero variance along an axis");
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  return {std::sqrt(vx) * factor, std::sqrt(vy) * factor};
}

namespace {

std::vector<Point2> filtered_coords(std::span<const EmbeddedSample> samples, LabelFilter filter) {
  std::vector<Point2> out;
  for (const auto& s : samples) {
    if (matches(filter, s.label)) out.push_back(s.coords);
  }
  return out;
}

}  // namespace

Bounds shared_bounds(std::span<const EmbeddedSample> samples, std::optional<Bandwidth> fallback) {
  if (samples.empty()) throw Error(Errc::EmptySelection, "no samples");
  Bounds b{samples[0].coords[0], samples[0].coords[0], samples[0].coords[1], samples[0].coords[1]};
  for (const auto& s : samples) {
    b.x_min = std::min(b.x_min, s.coords[0]);
    b.x_max = std::max(b.x_max, s.coords[0]);
    b.y_min = std::min(b.y_min, s.coords[1]);
    b.y_max = std::max(b.y_max, s.coords[1]);
  }
  double widest = 0.0;
  for (LabelFilter f : kAllFilters) {
    const auto coords = filtered_coords(samples, f);
    try {
      const Bandwidth h = silverman_bandwidth(coords);
      widest = std::max({widest, h.h_x, h.h_y});
    } catch (const Error&) {
      // Subsets without a bandwidth contribute no padding.
    }
  }
  if (widest == 0.0 && fallback) widest = std::max(fallback->h_x, fallback->h_y);
  if (!(widest > 0.0)) throw Error(Errc::DegenerateData, "cannot derive a bandwidth from the samples");
  b.x_min -= 3 * widest;
  b.x_max += 3 * widest;
  b.y_min -= 3 * widest;
  b.y_max += 3 * widest;
  return b;
}

Point2 HeatmapGrid::cell_center(int col, int row) const {
  const double cw = (bounds.x_max - bounds.x_min) / width;
  const double ch = (bounds.y_max - bounds.y_min) / height;
  return {bounds.x_min + (col + 0.5) * cw, bounds.y_max - (row + 0.5) * ch};
}

double HeatmapGrid::cell_area() const {
  return (bounds.x_max - bounds.x_min) / width * (bounds.y_max - bounds.y_min) / height;
}

HeatmapGrid kde_heatmap(std::span<const EmbeddedSample> samples, LabelFilter filter, int width,
                        int height, std::optional<Bandwidth> fallback) {
  if (width < 1 || height < 1) throw Error(Errc::InvalidArgument, "heatmap extents must be positive");
  const auto coords = filtered_coords(samples, filter);
  if (coords.empty()) {
    throw Error(Errc::EmptySelection, "no samples for filter " + std::string(slug(filter)));
  }
  HeatmapGrid grid;
  grid.width = width;
  grid.height = height;
  try {
    grid.bandwidth = silverman_bandwidth(coords);
  } catch (const Error&) {
    if (!fallback) throw;
    grid.bandwidth = *fallback;
  }
  if (!(grid.bandwidth.h_x > 0) || !(grid.bandwidth.h_y > 0)) {
    throw Error(Errc::DegenerateData, "bandwidth must be positive");
  }
  grid.bounds = shared_bounds(samples, fallback);
  grid.density.assign(static_cast<std::size_t>(width) * height, 0.0);

  const double hx = grid.bandwidth.h_x, hy = grid.bandwidth.h_y;
  const double norm = 1.0 / (2.0 * std::numbers::pi * hx * hy * static_cast<double>(coords.size()));
  std::vector<double> ex(static_cast<std::size_t>(width)), ey(static_cast<std::size_t>(height));
  for (const auto& c : coords) {
    for (int i = 0; i < width; ++i) {
      const double u = (grid.cell_center(i, 0)[0] - c[0]) / hx;
      ex[static_cast<std::size_t>(i)] = std::exp(-0.5 * u * u);
    }
    for (int j = 0; j < height; ++j) {
      const double v = (grid.cell_center(0, j)[1] - c[1]) / hy;
      ey[static_cast<std::size_t>(j)] = std::exp(-0.5 * v * v) * norm;
    }
    for (int j = 0; j < height; ++j) {
      const double wy = ey[static_cast<std::size_t>(j)];
      if (wy == 0.0) continue;
      double* row = grid.density.data() + static_cast<std::size_t>(j) * width;
      for (int i = 0; i < width; ++i) row[i] += wy * ex[static_cast<std::size_t>(i)];
    }
  }
  return grid;
}

std::vector<std::uint8_t> colorize(const HeatmapGrid& grid) {
  static constexpr std::array<std::array<double, 3>, 5> kStops = {{
      {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}}};
  const double peak = *std::max_element(grid.density.begin(), grid.density.end());
  std::vector<std::uint8_t> rgb(grid.density.size() * 3);
  for (std::size_t i = 0; i < grid.density.size(); ++i) {
    const double t = peak > 0 ? std::clamp(grid.density[i] / peak, 0.0, 1.0) : 0.0;
    const double pos = t * 4.0;
    const auto seg = std::min<std::size_t>(3, static_cast<std::size_t>(pos));
    const double f = pos - static_cast<double>(seg);
    for (int c = 0; c < 3; ++c) {
      const double v = kStops[seg][c] + (kStops[seg + 1][c] - kStops[seg][c]) * f;
      rgb[i * 3 + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return rgb;
}

vae::LatentVector locate_latent(const Point2& click, std::span<const EmbeddedSample> samples,
                                LabelFilter filter, int k) {
  if (!std::isfinite(click[0]) || !std::isfinite(click[1])) {
    throw Error(Errc::InvalidArgument, "control point is not finite");
  }
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  std::vector<std::pair<double, std::size_t>> near;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!matches(filter, samples[i].label)) continue;
    near.emplace_back(std::hypot(samples[i].coords[0] - click[0], samples[i].coords[1] - click[1]), i);
  }
  if (near.empty()) {
    throw Error(Errc::EmptySelection, "no samples for filter " + std::string(slug(filter)));
  }
  const std::size_t take = std::min(near.size(), static_cast<std::size_t>(k));
  std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(take), near.end());
  if (near.front().first < 1e-12) return samples[near.front().second].latent;

  vae::LatentVector z{};
  double total = 0.0;
  for (std::size_t r = 0; r < take; ++r) {
    const double w = 1.0 / (near[r].first + 1e-9);
    total += w;
    const auto& latent = samples[near[r].second].latent;
    for (int d = 0; d < vae::kLatentDim; ++d) z[d] += w * latent[d];
  }
  for (double& v : z) v /= total;
  return z;
}

}  // namespace fm::manifold
