// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fontmanifold/checkpoint.hpp"
#include "fontmanifold/error.hpp"
#include "fontmanifold/ingest.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/manifold.hpp"
#include "fontmanifold/manifold_io.hpp"
#include "fontmanifold/metrics.hpp"
#include "fontmanifold/numerics.hpp"
#include "fontmanifold/study.hpp"
#include "fontmanifold/synthfont.hpp"
#include "fontmanifold/vae.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace fm;

namespace {

// Tolerances and budgets.
constexpr int kShapesPerPrimitive = 50;
constexpr double kPrimitiveGradTol = 1e-6;
constexpr double kVaeGradTol = 1e-5;
constexpr std::size_t kVaeGradCoordsPerTensor = 8;
constexpr double kGradFdStep = 1e-5;
constexpr double kGradFloor = 1e-3;
constexpr double kAutodiffBudgetS = 60;

constexpr int kDeskFonts = 200;
constexpr int kDeskEpochs = 10;
constexpr std::uint64_t kDeskSeed = 7;
constexpr double kMinSsimGain = 0.2;
constexpr double kDeskBudgetS = 600;

constexpr double kZ95 = 1.6448536269514722;
constexpr double kSliderEndpointTol = 1e-6;
constexpr double kSliderSymmetryTol = 1e-9;

constexpr int kPpfGridPoints = 1000;
constexpr double kPpfRoundTripTol = 1e-9;
constexpr double kTTailT = 3.6742;
constexpr int kTTailDf = 4;
constexpr double kTTailExpected = 0.0213;
constexpr double kTTailTol = 1e-3;

constexpr double kPerplexityTol = 1e-4;
constexpr double kJointSumTol = 1e-9;
constexpr double kTsneBudgetS = 60;

constexpr double kRiemannLo = 0.95;
constexpr double kRiemannHi = 1.02;
constexpr double kSilvermanExpected = 0.92832;
constexpr double kSilvermanTol = 1e-5;

constexpr int kSsimPairs = 1000;
constexpr double kSsimOracleTol = 1e-12;
constexpr double kSsimExtremeExpected = 9.995e-5;
constexpr double kSsimExtremeTol = 1e-8;

constexpr int kMatchQueries = 20;

// Endpoints of the latent box are themselves rounded ppf values.
constexpr double kLatentBoundSlack = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// -- 1 ------------------------------------------------------------------------

Outcome autodiff() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::map<std::string, double> worst;
  for (int round = 0; round < kShapesPerPrimitive; ++round) {
    for (const auto& c : test::random_primitive_cases(rng)) {
      const auto r = test::check_gradients(c.build, c.params, kGradFdStep, kGradFloor);
      worst[c.name] = std::max(worst[c.name], r.max_rel_error);
    }
  }
  double prim = 0;
  std::string prim_name;
  for (const auto& [name, err] : worst) {
    if (err >= prim) {
      prim = err;
      prim_name = name;
    }
  }
  const auto vae = test::vae_gradient_check(12, kVaeGradCoordsPerTensor);
  const double secs = seconds_since(t0);
  const bool ok = prim < kPrimitiveGradTol && vae.max_rel_error < kVaeGradTol && secs < kAutodiffBudgetS;
  std::ostringstream d;
  d << worst.size() << " primitives x " << kShapesPerPrimitive << " shapes, worst " << fmt("%.2e", prim) << " ("
    << prim_name << "); VAE loss " << fmt("%.2e", vae.max_rel_error) << " over " << vae.coordinates
    << " coordinates; " << fmt("%.1f", secs) << " s";
  return {ok, d.str()};
}

// -- 2 ------------------------------------------------------------------------

struct DeskRun {
  vae::TrainResult result;
  double seconds = 0;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    vae::TrainConfig cfg;
    cfg.epochs = kDeskEpochs;
    cfg.seed = kDeskSeed;
    DeskRun r{vae::train(test::desk_data(kDeskFonts).images, cfg), 0};
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome desk_training() {
  const auto& data = test::desk_data(kDeskFonts);
  const auto& run = desk_run();
  Rng init_rng(kDeskSeed);
  const auto untrained = vae::init_params(init_rng);
  const double base = test::mean_reconstruction_ssim(untrained, data.images);
  const double trained = test::mean_reconstruction_ssim(run.result.params, data.images);
  const double first = run.result.log.front().mean_loss, last = run.result.log.back().mean_loss;
  const bool ok = static_cast<int>(run.result.log.size()) == kDeskEpochs && last < first &&
                  trained - base >= kMinSsimGain && run.seconds < kDeskBudgetS;
  std::ostringstream d;
  d << data.images.size() << " bitmaps, loss " << fmt("%.1f", first) << " -> " << fmt("%.1f", last) << ", SSIM "
    << fmt("%.3f", base) << " -> " << fmt("%.3f", trained) << " (gain " << fmt("%.3f", trained - base) << "), "
    << fmt("%.1f", run.seconds) << " s";
  return {ok, d.str()};
}

// -- 3 ------------------------------------------------------------------------

Outcome slider_map() {
  const auto z = [](int k) { return vae::slider_to_latent({{k, k, k, k, k}}); };
  const double lo = z(0)[0], hi = z(99)[0];
  double asym = 0;
  for (int k = 0; k < vae::kSliderSteps; ++k) {
    const auto a = z(k), b = z(99 - k);
    for (int d = 0; d < vae::kLatentDim; ++d) asym = std::max(asym, std::fabs(a[d] + b[d]));
  }
  const bool ok = std::fabs(lo + kZ95) < kSliderEndpointTol && std::fabs(hi - kZ95) < kSliderEndpointTol &&
                  asym < kSliderSymmetryTol;
  return {ok, "z(0) = " + fmt("%.9f", lo) + ", z(99) = " + fmt("%.9f", hi) + ", max |z(k)+z(99-k)| = " +
                  fmt("%.1e", asym)};
}

// -- 4 ------------------------------------------------------------------------

// Student-t density integrated with composite Simpson from |t| outwards,
// after substituting u = 1/x on the tail to make the range finite.
double t_tail_oracle(double t, int df) {
  const double v = df;
  const double c = std::exp(std::lgamma((v + 1) / 2) - std::lgamma(v / 2)) / std::sqrt(v * M_PI);
  const auto pdf = [&](double x) { return c * std::pow(1 + x * x / v, -(v + 1) / 2); };
  const auto g = [&](double u) { return u == 0 ? 0.0 : pdf(1 / u) / (u * u); };
  const int n = 200000;
  const double a = 0, b = 1 / std::fabs(t), h = (b - a) / n;
  double s = g(a) + g(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * g(a + i * h);
  return 2 * s * h / 3;
}

Outcome ppf_and_t_tail() {
  double worst = 0;
  for (int i = 0; i < kPpfGridPoints; ++i) {
    const double p = 0.0005 + 0.999 * i / (kPpfGridPoints - 1);
    worst = std::max(worst, std::fabs(numerics::gaussian_cdf(numerics::gaussian_ppf(p)) - p));
  }
  const double p = numerics::student_t_two_tailed_p(kTTailT, kTTailDf);
  const double oracle = t_tail_oracle(kTTailT, kTTailDf);
  const bool ok = worst < kPpfRoundTripTol && std::fabs(p - oracle) < kTTailTol &&
                  std::fabs(p - kTTailExpected) < kTTailTol;
  return {ok, "round-trip max error " + fmt("%.1e", worst) + " on " + std::to_string(kPpfGridPoints) +
                  " points; p(3.6742, df 4) = " + fmt("%.6f", p) + ", oracle " + fmt("%.6f", oracle)};
}

// -- 5 ------------------------------------------------------------------------

Outcome tsne_clusters() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(31);
  std::vector<double> pts;
  std::vector<int> label;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 30; ++i) {
      for (int d = 0; d < 5; ++d) pts.push_back((d == c ? 5.0 : 0.0) + 0.05 * rng.normal());
      label.push_back(c);
    }
  }
  const manifold::TsneConfig cfg;
  const auto a = manifold::tsne(pts, 5, cfg);
  const auto b = manifold::tsne(pts, 5, cfg);
  const auto& P = a.affinities;
  double perp_err = 0, sum = 0, asym = 0;
  for (std::size_t i = 0; i < P.n; ++i) {
    perp_err = std::max(perp_err, std::fabs(P.row_perplexity[i] - P.target_perplexity));
    for (std::size_t j = 0; j < P.n; ++j) {
      sum += P.joint[i * P.n + j];
      asym = std::max(asym, std::fabs(P.joint[i * P.n + j] - P.joint[j * P.n + i]));
    }
  }
  double intra = 0, inter = 0;
  int ni = 0, ne = 0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    for (std::size_t j = i + 1; j < a.coords.size(); ++j) {
      const double dist = std::hypot(a.coords[i][0] - a.coords[j][0], a.coords[i][1] - a.coords[j][1]);
      (label[i] == label[j] ? intra : inter) += dist;
      ++(label[i] == label[j] ? ni : ne);
    }
  }
  intra /= ni;
  inter /= ne;
  const bool same = a.coords == b.coords;
  const double secs = seconds_since(t0);
  const bool ok = perp_err < kPerplexityTol && asym == 0 && std::fabs(sum - 1) < kJointSumTol && intra < inter &&
                  same && secs < kTsneBudgetS;
  std::ostringstream d;
  d << "perplexity " << P.target_perplexity << " max error " << fmt("%.1e", perp_err) << ", sum P - 1 = "
    << fmt("%.1e", sum - 1) << ", intra " << fmt("%.2f", intra) << " < inter " << fmt("%.2f", inter) << ", "
    << (same ? "identical reruns" : "reruns differ") << ", " << fmt("%.1f", secs) << " s";
  return {ok, d.str()};
}

// -- 6 ------------------------------------------------------------------------

Outcome kde() {
  Rng rng(41);
  std::vector<manifold::EmbeddedSample> s;
  const PerceptionLabel labels[] = {PerceptionLabel::Pop, PerceptionLabel::Formal, PerceptionLabel::Casual};
  for (int i = 0; i < 300; ++i) {
    manifold::EmbeddedSample e;
    e.label = labels[i % 3];
    e.coords = {8.0 * (i % 3) + 2 * rng.normal(), 3.0 * (i % 3) + rng.normal()};
    s.push_back(e);
  }
  double lo = 1e9, hi = -1e9;
  for (LabelFilter f : kAllFilters) {
    const auto g = manifold::kde_heatmap(s, f);
    double integral = 0;
    for (double v : g.density) integral += v * g.cell_area();
    lo = std::min(lo, integral);
    hi = std::max(hi, integral);
  }

  // A lone sample carries no spread of its own; it takes the fallback
  // bandwidth and must peak on itself.
  std::vector<manifold::EmbeddedSample> lone = s;
  manifold::EmbeddedSample single;
  single.label = PerceptionLabel::Formal;
  single.coords = {3.3, -1.7};
  for (auto& e : lone)
    if (e.label == PerceptionLabel::Formal) e.label = PerceptionLabel::Pop;
  lone.push_back(single);
  const auto g = manifold::kde_heatmap(lone, LabelFilter::Formal, manifold::kHeatmapSide, manifold::kHeatmapSide,
                                       manifold::Bandwidth{0.5, 0.5});
  const auto peak = std::max_element(g.density.begin(), g.density.end()) - g.density.begin();
  const auto c = g.cell_center(static_cast<int>(peak % g.width), static_cast<int>(peak / g.width));
  const double cw = (g.bounds.x_max - g.bounds.x_min) / g.width, ch = (g.bounds.y_max - g.bounds.y_min) / g.height;
  const bool peak_ok = std::fabs(c[0] - single.coords[0]) <= cw && std::fabs(c[1] - single.coords[1]) <= ch;

  std::vector<manifold::Point2> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({i % 2 ? 2.0 : -2.0, static_cast<double>(i)});
  const double h = manifold::silverman_bandwidth(pts).h_x;

  const bool ok = lo >= kRiemannLo && hi <= kRiemannHi && peak_ok && std::fabs(h - kSilvermanExpected) < kSilvermanTol;
  return {ok, "integrals in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "], single-point peak " +
                  (peak_ok ? "on sample" : "off sample") + ", h(N=100, sigma=2) = " + fmt("%.6f", h)};
}

// -- 7 ------------------------------------------------------------------------

double ssim_oracle(const GlyphBitmap& a, const GlyphBitmap& b) {
  long double sa = 0, sb = 0;
  for (std::size_t i = 0; i < GlyphBitmap::kPixels; ++i) {
    sa += 255.0L * a[i];
    sb += 255.0L * b[i];
  }
  const long double n = GlyphBitmap::kPixels, ma = sa / n, mb = sb / n;
  long double va = 0, vb = 0, cab = 0;
  for (std::size_t i = 0; i < GlyphBitmap::kPixels; ++i) {
    const long double da = 255.0L * a[i] - ma, db = 255.0L * b[i] - mb;
    va += da * da;
    vb += db * db;
    cab += da * db;
  }
  va /= n;
  vb /= n;
  cab /= n;
  return static_cast<double>(((2 * ma * mb + 6.5L) * (2 * cab + 58.5L)) /
                             ((ma * ma + mb * mb + 6.5L) * (va + vb + 58.5L)));
}

Outcome ssim_oracle_check() {
  Rng rng(51);
  double worst = 0;
  bool self = true;
  for (int i = 0; i < kSsimPairs; ++i) {
    const auto a = test::random_glyph(rng), b = test::random_glyph(rng);
    worst = std::max(worst, std::fabs(metrics::ssim(a, b) - ssim_oracle(a, b)));
    self = self && metrics::ssim(a, a) == 1.0;
  }
  const GlyphBitmap black(std::vector<double>(GlyphBitmap::kPixels, 1.0));
  const double extreme = metrics::ssim(GlyphBitmap(), black);
  const bool ok = worst < kSsimOracleTol && self && std::fabs(extreme - kSsimExtremeExpected) < kSsimExtremeTol;
  return {ok, "max |ssim - oracle| = " + fmt("%.1e", worst) + " on " + std::to_string(kSsimPairs) + " pairs, " +
                  (self ? "ssim(x,x) = 1" : "ssim(x,x) != 1") + ", all-0 vs all-255 = " + fmt("%.6e", extreme)};
}

// -- 8 ------------------------------------------------------------------------

Outcome alphabet_matching() {
  const auto& data = test::desk_data(kDeskFonts);
  const std::size_t n = data.corpus.size();
  int hits = 0;
  std::string misses;
  for (int q = 0; q < kMatchQueries; ++q) {
    const auto& query = data.corpus[static_cast<std::size_t>(q) * n / kMatchQueries];
    const auto m = metrics::match_closest_font(query.bitmap, data.corpus);
    if (m.font_id == query.font_id && m.ssim == 1.0) {
      ++hits;
    } else {
      misses += " " + query.font_id + "->" + m.font_id;
    }
  }
  // The matched fonts must also render their full A-Z strip.
  const auto& first = data.manifest.entries.front();
  const auto strip = metrics::render_alphabet(io::read_bytes(data.fonts / first.source_file));
  const bool ok = hits == kMatchQueries && strip.warnings.empty() && strip.image.width == 26 * 28;
  return {ok, std::to_string(hits) + "/" + std::to_string(kMatchQueries) + " queries matched their own font with ssim 1" +
                  misses + "; A-Z strip " + std::to_string(strip.image.width) + "x" +
                  std::to_string(strip.image.height) + " with " + std::to_string(strip.warnings.size()) + " warnings"};
}

// -- 9 ------------------------------------------------------------------------

std::vector<fs::path> pipeline(const fs::path& root) {
  const fs::path fonts = root / "fonts", ds = root / "dataset", bundle = root / "manifold";
  synth::write_corpus(fonts, kDeskFonts, kDeskSeed);
  const auto manifest = ingest::ingest_corpus(fonts, ds);
  std::vector<GlyphBitmap> images;
  for (const auto& g : ingest::load_corpus(ds, manifest)) images.push_back(g.bitmap);
  vae::TrainConfig cfg;
  cfg.epochs = kDeskEpochs;
  cfg.seed = kDeskSeed;
  vae::Checkpoint ck;
  ck.params = vae::train(images, cfg).params;
  ck.epochs_completed = cfg.epochs;
  vae::save_checkpoint(root / "model.pfmc", ck);
  const auto labels = study::synthesize_labels(ck.params, 30, kDeskSeed);
  std::vector<manifold::EmbeddedSample> samples;
  for (const auto& l : labels) samples.push_back({l.sample_id, {}, l.label, l.latent});
  const manifold::TsneConfig tcfg;
  const auto result = manifold::embed(samples, tcfg);
  manifold::write_embedding_bundle(bundle, samples, tcfg, result);
  manifold::write_heatmaps(bundle);
  std::vector<fs::path> files{"dataset/manifest.jsonl", "model.pfmc"};
  for (const auto& e : manifest.entries)
    if (!e.bitmap_path.empty()) files.push_back(fs::path("dataset") / e.bitmap_path);
  for (const auto& e : fs::directory_iterator(bundle)) files.push_back(fs::path("manifold") / e.path().filename());
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  const fs::path a = test::scratch_dir("accept-run-a"), b = test::scratch_dir("accept-run-b");
  const auto fa = pipeline(a), fb = pipeline(b);
  std::size_t same = 0, heatmaps = 0;
  std::string diff;
  for (const auto& f : fa) {
    if (f.filename().string().starts_with("heatmap_")) ++heatmaps;
    if (fs::exists(b / f) && io::read_bytes(a / f) == io::read_bytes(b / f)) {
      ++same;
    } else {
      diff += " " + f.string();
    }
  }
  const bool ok = fa == fb && same == fa.size() && heatmaps > 0;
  return {ok, std::to_string(same) + "/" + std::to_string(fa.size()) +
                  " files byte-identical (manifest, bitmaps, checkpoint, embedding, " + std::to_string(heatmaps) +
                  " heatmap files)" + diff};
}

// -- 10 -----------------------------------------------------------------------

Outcome checkpoint_round_trip() {
  vae::Checkpoint ck;
  ck.params = desk_run().result.params;
  ck.epochs_completed = kDeskEpochs;
  const fs::path path = test::scratch_dir("accept-ckpt") / "model.pfmc";
  vae::save_checkpoint(path, ck);
  const auto back = vae::load_checkpoint(path);
  Rng rng(61);
  int identical = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    vae::LatentVector z;
    for (double& v : z) v = 2 * rng.normal();
    if (vae::decode(back.params, z) == vae::decode(ck.params, z)) ++identical;
  }
  const bool ok = back == ck && identical == trials;
  return {ok, std::to_string(identical) + "/" + std::to_string(trials) + " decodes bit-identical after save/load"};
}

// -- 11 -----------------------------------------------------------------------

Outcome generated_corpus() {
  const auto corpus = vae::sample_generated_corpus(desk_run().result.params);
  std::set<vae::SliderVector> unique;
  const double lo = numerics::gaussian_ppf(0.05), hi = numerics::gaussian_ppf(0.95);
  double excursion = 0;
  for (const auto& g : corpus) {
    unique.insert(g.sliders);
    for (double v : g.latent) excursion = std::max({excursion, lo - v, v - hi});
  }
  const bool inside = excursion <= kLatentBoundSlack;
  const bool ok = corpus.size() == static_cast<std::size_t>(vae::kGeneratedCorpusSize) &&
                  unique.size() == corpus.size() && inside;
  return {ok, std::to_string(corpus.size()) + " entries, " + std::to_string(unique.size()) + " unique, latents " +
                  (inside ? "inside" : "outside") + " [" + fmt("%.7f", lo) + ", " + fmt("%.7f", hi) +
                  "] (max excursion " + fmt("%.1e", excursion) + ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"autodiff-gradients", autodiff},
      {"vae-desk-training", desk_training},
      {"slider-map", slider_map},
      {"ppf-and-t-tail", ppf_and_t_tail},
      {"tsne-clusters", tsne_clusters},
      {"kde-heatmaps", kde},
      {"ssim-oracle", ssim_oracle_check},
      {"alphabet-matching", alphabet_matching},
      {"end-to-end-determinism", determinism},
      {"checkpoint-round-trip", checkpoint_round_trip},
      {"generated-corpus", generated_corpus},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const Error& e) {
      o = {false, std::string("threw ") + std::string(errc_name(e.code())) + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
