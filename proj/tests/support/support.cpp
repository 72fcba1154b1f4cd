#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unistd.h>

#include "fontmanifold/metrics.hpp"
#include "fontmanifold/synthfont.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::test {

namespace fs = std::filesystem;

namespace {

fs::path process_root() { return fs::temp_directory_path() / ("fm-test-" + std::to_string(::getpid())); }

struct RemoveOnExit {
  ~RemoveOnExit() {
    std::error_code ec;
    fs::remove_all(process_root(), ec);
  }
} remove_on_exit;

}  // namespace

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = process_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<fs::path> system_fonts() {
  std::vector<fs::path> out;
  const fs::path dir = "/usr/share/fonts/truetype/dejavu";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".ttf") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const DeskData& desk_data(int count) {
  static std::map<int, DeskData> cache;
  auto it = cache.find(count);
  if (it != cache.end()) return it->second;
  DeskData d;
  const fs::path root = scratch_dir("desk-" + std::to_string(count));
  d.fonts = root / "fonts";
  d.dataset = root / "dataset";
  synth::write_corpus(d.fonts, count, 7);
  d.manifest = ingest::ingest_corpus(d.fonts, d.dataset);
  d.corpus = ingest::load_corpus(d.dataset, d.manifest);
  for (const auto& g : d.corpus) d.images.push_back(g.bitmap);
  return cache.emplace(count, std::move(d)).first->second;
}

const ad::ParameterSet& desk_model(int epochs) {
  static std::map<int, ad::ParameterSet> cache;
  auto it = cache.find(epochs);
  if (it != cache.end()) return it->second;
  vae::TrainConfig config;
  config.epochs = epochs;
  auto result = vae::train(desk_data(200).images, config);
  return cache.emplace(epochs, std::move(result.params)).first->second;
}

GlyphBitmap random_glyph(Rng& rng) {
  std::vector<double> v(GlyphBitmap::kPixels);
  for (double& x : v) x = rng.uniform();
  return GlyphBitmap(v);
}

Tensor random_tensor(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

double mean_reconstruction_ssim(const ad::ParameterSet& params, std::span<const GlyphBitmap> images) {
  double total = 0.0;
  for (const auto& img : images) {
    total += metrics::ssim(vae::decode(params, vae::encode(params, img).mu), img);
  }
  return total / static_cast<double>(images.size());
}

}  // namespace fm::test

namespace fm::test {

namespace {

double eval_loss(const LossBuilder& build, const ad::ParameterSet& params) {
  ad::Tape tape;
  VarMap vars;
  for (const auto& [name, value] : params) vars.emplace(name, tape.parameter(name, value));
  return tape.value(build(tape, vars))[0];
}

}  // namespace

GradCheck check_gradients(const LossBuilder& build, const ad::ParameterSet& params, double eps,
                          double floor, std::size_t per_tensor, Rng* pick) {
  ad::Tape tape;
  VarMap vars;
  for (const auto& [name, value] : params) vars.emplace(name, tape.parameter(name, value));
  const ad::Gradients grads = ad::backward(tape, build(tape, vars));

  GradCheck result;
  ad::ParameterSet probe = params;
  for (const auto& [name, value] : params) {
    std::vector<std::size_t> coords;
    if (per_tensor == 0 || per_tensor >= value.size() || pick == nullptr) {
      for (std::size_t i = 0; i < value.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t k = 0; k < per_tensor; ++k) coords.push_back(pick->uniform_int(value.size()));
    }
    const auto g = grads.find(name);
    for (std::size_t i : coords) {
      const double analytic = g == grads.end() ? 0.0 : g->second[i];
      Tensor& t = probe.at(name);
      const double saved = t[i];
      t[i] = saved + eps;
      const double up = eval_loss(build, probe);
      t[i] = saved - eps;
      const double down = eval_loss(build, probe);
      t[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::fabs(analytic - numeric) / denom);
      ++result.coordinates;
    }
  }
  return result;
}

std::vector<PrimitiveCase> random_primitive_cases(Rng& rng) {
  using ad::Var;
  const auto extent = [&](std::size_t lo, std::size_t hi) { return lo + rng.uniform_int(hi - lo + 1); };
  const auto away_from_kink = [](Tensor t) {
    for (double& v : t.values()) {
      if (std::fabs(v) < 1e-3) v = v < 0 ? -1e-3 - std::fabs(v) : 1e-3 + v;
    }
    return t;
  };
  // sum(x * w) with a constant random w.
  const auto project = [](ad::Tape& tape, Var x, const Tensor& w) { return ad::sum(ad::mul(x, tape.constant(w))); };

  std::vector<PrimitiveCase> cases;
  for (int stride : {1, 2}) {
    const std::size_t ci = extent(1, 3), co = extent(1, 3), h = extent(1, 6), w = extent(1, 6);
    const std::size_t ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
    const Tensor proj = random_tensor(rng, {co, ho, wo});
    cases.push_back({"conv2d_s" + std::to_string(stride),
                     {{"x", random_tensor(rng, {ci, h, w})},
                      {"k", random_tensor(rng, {co, ci, 3, 3})},
                      {"b", random_tensor(rng, {co})}},
                     [=](ad::Tape& t, const VarMap& v) {
                       return project(t, ad::conv2d(v.at("x"), v.at("k"), v.at("b"), stride), proj);
                     }});
  }
  {
    const std::size_t n = extent(1, 8), m = extent(1, 8);
    const Tensor proj = random_tensor(rng, {m});
    cases.push_back({"dense",
                     {{"x", random_tensor(rng, {n})}, {"w", random_tensor(rng, {m, n})}, {"b", random_tensor(rng, {m})}},
                     [=](ad::Tape& t, const VarMap& v) {
                       return project(t, ad::dense(v.at("x"), v.at("w"), v.at("b")), proj);
                     }});
  }
  {
    const Shape s{extent(1, 4), extent(1, 5)};
    const Tensor proj = random_tensor(rng, s);
    cases.push_back({"relu", {{"x", away_from_kink(random_tensor(rng, s))}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::relu(v.at("x")), proj); }});
  }
  {
    const Shape s{extent(1, 4), extent(1, 5)};
    const Tensor proj = random_tensor(rng, s);
    cases.push_back({"sigmoid", {{"x", random_tensor(rng, s, -4, 4)}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::sigmoid(v.at("x")), proj); }});
  }
  {
    const std::size_t c = extent(1, 3), h = extent(1, 4), w = extent(1, 4);
    const Tensor proj = random_tensor(rng, {c, 2 * h, 2 * w});
    cases.push_back({"upsample2x", {{"x", random_tensor(rng, {c, h, w})}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::upsample2x(v.at("x")), proj); }});
  }
  {
    const std::size_t a = extent(1, 4), b = extent(1, 4);
    const Tensor proj = random_tensor(rng, {b * a});
    cases.push_back({"reshape", {{"x", random_tensor(rng, {a, b})}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::reshape(v.at("x"), {a * b}), proj); }});
  }
  {
    const Shape s{extent(1, 6)};
    const Tensor proj = random_tensor(rng, s);
    cases.push_back({"add", {{"a", random_tensor(rng, s)}, {"b", random_tensor(rng, s)}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::add(v.at("a"), v.at("b")), proj); }});
    cases.push_back({"mul", {{"a", random_tensor(rng, s)}, {"b", random_tensor(rng, s)}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::mul(v.at("a"), v.at("b")), proj); }});
    const double factor = -2 + 4 * rng.uniform();
    cases.push_back({"scale", {{"x", random_tensor(rng, s)}},
                     [=](ad::Tape& t, const VarMap& v) { return project(t, ad::scale(v.at("x"), factor), proj); }});
    cases.push_back({"sum", {{"x", random_tensor(rng, s)}},
                     [=](ad::Tape&, const VarMap& v) { return ad::sum(v.at("x")); }});
  }
  {
    const Shape s{extent(1, 6)};
    const Tensor noise = random_tensor(rng, s, -2, 2);
    const Tensor proj = random_tensor(rng, s);
    cases.push_back({"reparameterize", {{"mu", random_tensor(rng, s)}, {"logvar", random_tensor(rng, s)}},
                     [=](ad::Tape& t, const VarMap& v) {
                       return project(t, ad::reparameterize(v.at("mu"), v.at("logvar"), t.constant(noise)), proj);
                     }});
    cases.push_back({"kl_divergence", {{"mu", random_tensor(rng, s)}, {"logvar", random_tensor(rng, s)}},
                     [=](ad::Tape&, const VarMap& v) { return ad::kl_divergence(v.at("mu"), v.at("logvar")); }});
  }
  {
    const Shape s{extent(1, 4), extent(1, 4)};
    const Tensor target = random_tensor(rng, s, 0, 1);
    cases.push_back({"bce_loss", {{"p", random_tensor(rng, s, 0.05, 0.95)}},
                     [=](ad::Tape& t, const VarMap& v) { return ad::bce_loss(v.at("p"), t.constant(target)); }});
  }
  return cases;
}

}  // namespace fm::test

namespace fm::test {

GradCheck vae_gradient_check(std::uint64_t seed, std::size_t per_tensor) {
  Rng rng(seed);
  const ad::ParameterSet params = vae::init_params(rng);
  const GlyphBitmap x0 = random_glyph(rng), x1 = random_glyph(rng);
  vae::LatentVector n0, n1;
  for (int d = 0; d < vae::kLatentDim; ++d) {
    n0[d] = rng.normal();
    n1[d] = rng.normal();
  }
  const LossBuilder build = [&](ad::Tape& tape, const VarMap& vars) {
    ad::ParameterSet current;
    for (const auto& [name, var] : vars) current.emplace(name, tape.value(var));
    const auto a = vae::build_loss(tape, current, x0, n0);
    const auto b = vae::build_loss(tape, current, x1, n1);
    return ad::scale(ad::add(a.total, b.total), 0.5);
  };
  return check_gradients(build, params, 1e-5, 1e-3, per_tensor, &rng);
}

}  // namespace fm::test
