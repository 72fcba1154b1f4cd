#include "fontmanifold_cli/cli.hpp"

#include <cstdlib>
#include <functional>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fontmanifold/checkpoint.hpp"
#include "fontmanifold/error.hpp"
#include "fontmanifold/ingest.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/manifold_io.hpp"
#include "fontmanifold/metrics.hpp"
#include "fontmanifold/png_io.hpp"
#include "fontmanifold/service.hpp"
#include "fontmanifold/study.hpp"
#include "fontmanifold/synthfont.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string utf8(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

/// Accepts a single ASCII character or U+XXXX.
char32_t parse_codepoint(const std::string& text) {
  if (text.size() == 1) return static_cast<unsigned char>(text[0]);
  if (text.size() > 2 && (text[0] == 'U' || text[0] == 'u') && text[1] == '+') {
    return static_cast<char32_t>(std::stoul(text.substr(2), nullptr, 16));
  }
  throw Error(Errc::InvalidArgument, "codepoint must be one character or U+XXXX");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "not a number: '" + item + "'");
    }
  }
  return out;
}

vae::LatentVector latent_from_flags(const std::string& sliders, const std::string& z) {
  if (sliders.empty() == z.empty()) throw Error(Errc::InvalidArgument, "give exactly one of --sliders or --z");
  const auto values = parse_list(sliders.empty() ? z : sliders);
  if (values.size() != vae::kLatentDim) throw Error(Errc::InvalidArgument, "expected 5 comma-separated values");
  vae::LatentVector out{};
  if (!sliders.empty()) {
    vae::SliderVector s;
    for (int d = 0; d < vae::kLatentDim; ++d) {
      if (values[d] != std::floor(values[d])) throw Error(Errc::InvalidArgument, "sliders must be integers");
      if (values[d] < 0 || values[d] > 99) throw Error(Errc::Range, "slider out of range: " + std::to_string(values[d]));
      s.k[d] = static_cast<int>(values[d]);
    }
    return vae::slider_to_latent(s);
  }
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

void write_config(const fs::path& path, const ordered_json& config) {
  io::write_text(path, config.dump(2) + "\n");
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p += suffix;
  return p;
}

GlyphBitmap glyph_from_png(const fs::path& path) {
  const RawBitmap raw = png::decode_gray(io::read_bytes(path));
  if (raw.width == GlyphBitmap::kSide && raw.height == GlyphBitmap::kSide) {
    return ingest::to_training_bitmap(raw);
  }
  return ingest::to_training_bitmap(ingest::cleanse(raw));
}

struct Flags {
  std::uint64_t seed = 7;

  // ingest / synth-fonts
  std::string fonts, out, codepoint = "A";
  int canvas = ingest::kCanvas;
  int count = 200;

  // train
  std::string dataset, log;
  int epochs = 50, batch = 64, limit = 0;
  double lr = 1e-3;

  // decode / sample / match
  std::string model, sliders, z, image, alphabet;
  int scale = 1;
  int sample_count = vae::kGeneratedCorpusSize;

  // synth-labels
  int per_label = 100;
  study::LabelThresholds thresholds;

  // manifold / heatmap
  std::string labels, manifold;
  manifold::TsneConfig tsne;
  int side = manifold::kHeatmapSide;

  // analyze
  std::string records;

  // serve
  std::string host = "127.0.0.1", data_dir = "study-data";
  int port = 0;
  service::ServiceOptions serve;
};

int cmd_ingest(const Flags& f, std::ostream& out, std::ostream& err) {
  ingest::IngestOptions opt;
  opt.codepoint = parse_codepoint(f.codepoint);
  opt.canvas = f.canvas;
  const auto manifest = ingest::ingest_corpus(f.fonts, f.out, opt);
  write_config(fs::path(f.out) / "config.json",
               {{"command", "ingest"}, {"fonts", fs::absolute(f.fonts).lexically_normal().generic_string()},
                {"codepoint", utf8(opt.codepoint)}, {"canvas", opt.canvas}});
  const auto ok = manifest.ok_count();
  if (manifest.entries.empty()) err << "warning: no font files found in " << f.fonts << "\n";
  for (const auto& e : manifest.entries) {
    if (e.status == ingest::EntryStatus::Skipped) err << "skipped " << e.font_id << ": " << *e.reason << "\n";
  }
  out << ok << " ok, " << manifest.entries.size() - ok << " skipped\n";
  return kExitOk;
}

int cmd_synth_fonts(const Flags& f, std::ostream& out, std::ostream&) {
  const auto files = synth::write_corpus(f.out, f.count, f.seed);
  write_config(fs::path(f.out) / "synth-config.json",
               {{"command", "synth-fonts"}, {"count", f.count}, {"seed", f.seed}});
  out << files.size() << " fonts written to " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto manifest = ingest::read_manifest(f.dataset);
  auto corpus = ingest::load_corpus(f.dataset, manifest);
  if (f.limit > 0 && corpus.size() > static_cast<std::size_t>(f.limit)) corpus.resize(static_cast<std::size_t>(f.limit));
  std::vector<GlyphBitmap> images;
  images.reserve(corpus.size());
  for (auto& g : corpus) images.push_back(g.bitmap);

  vae::TrainConfig config{f.epochs, f.batch, f.lr, f.seed};
  const fs::path model_path = f.out;
  const fs::path log_path = f.log.empty() ? sibling(model_path, ".log.jsonl") : fs::path(f.log);
  std::string log_text;
  const auto result = vae::train(images, config, [&](const vae::EpochLog& e) {
    ordered_json line{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_recon", e.mean_reconstruction},
                      {"mean_kl", e.mean_kl}};
    log_text += line.dump() + "\n";
    err << "epoch " << e.epoch << "/" << config.epochs << " loss " << e.mean_loss << "\n";
  });
  vae::Checkpoint ckpt;
  ckpt.seed = config.seed;
  ckpt.epochs_completed = config.epochs;
  ckpt.batch_size = config.batch_size;
  ckpt.learning_rate = config.learning_rate;
  ckpt.params = result.params;
  vae::save_checkpoint(model_path, ckpt);
  io::write_text(log_path, log_text);
  write_config(sibling(model_path, ".config.json"),
               {{"command", "train"}, {"dataset", f.dataset}, {"images", images.size()}, {"epochs", config.epochs},
                {"batch_size", config.batch_size}, {"learning_rate", config.learning_rate}, {"seed", config.seed},
                {"log", log_path.generic_string()}});
  out << "trained on " << images.size() << " images, final loss " << result.log.back().mean_loss << "\n";
  return kExitOk;
}

int cmd_decode(const Flags& f, std::ostream& out, std::ostream&) {
  const auto params = vae::load_checkpoint(f.model).params;
  const auto z = latent_from_flags(f.sliders, f.z);
  io::write_bytes(f.out, service::render_png(vae::decode(params, z), f.scale));
  out << ordered_json{{"z", z}, {"out", f.out}}.dump() << "\n";
  return kExitOk;
}

int cmd_sample(const Flags& f, std::ostream& out, std::ostream&) {
  const auto params = vae::load_checkpoint(f.model).params;
  const auto corpus = vae::sample_generated_corpus(params, f.sample_count, f.seed);
  const fs::path dir = f.out;
  io::ensure_directory(dir / "images");
  std::string lines;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "gen-%04zu", i);
    const std::string image = std::string("images/") + id + ".png";
    io::write_bytes(dir / image, service::render_png(corpus[i].bitmap, f.scale));
    lines += ordered_json{{"id", id}, {"sliders", corpus[i].sliders.k}, {"latent", corpus[i].latent}, {"image", image}}
                 .dump() +
             "\n";
  }
  io::write_text(dir / "generated.jsonl", lines);
  write_config(dir / "config.json",
               {{"command", "sample"}, {"model", f.model}, {"count", f.sample_count}, {"seed", f.seed}});
  out << corpus.size() << " images written to " << f.out << "\n";
  return kExitOk;
}

int cmd_synth_labels(const Flags& f, std::ostream& out, std::ostream&) {
  const auto params = vae::load_checkpoint(f.model).params;
  const auto samples = study::synthesize_labels(params, f.per_label, f.seed, f.thresholds);
  io::write_text(f.out, study::labels_to_jsonl(samples));
  const auto& t = f.thresholds;
  write_config(sibling(f.out, ".config.json"),
               {{"command", "synth-labels"}, {"model", f.model}, {"per_label", f.per_label}, {"seed", f.seed},
                {"pop_min_ink", t.pop_min_ink}, {"formal_max_ink", t.formal_max_ink},
                {"formal_max_slant_px", t.formal_max_slant_px}, {"max_draws", t.max_draws}});
  out << samples.size() << " labeled samples written to " << f.out << "\n";
  return kExitOk;
}

int cmd_manifold(const Flags& f, std::ostream& out, std::ostream&) {
  const auto labeled = study::labels_from_jsonl(io::read_text(f.labels));
  std::vector<manifold::EmbeddedSample> samples;
  samples.reserve(labeled.size());
  for (const auto& s : labeled) samples.push_back({s.sample_id, {0, 0}, s.label, s.latent});
  manifold::TsneConfig config = f.tsne;
  config.seed = f.seed;
  const auto result = manifold::embed(samples, config);
  manifold::write_embedding_bundle(f.out, samples, config, result);
  out << samples.size() << " samples embedded, final KL " << result.objective.back().kl << "\n";
  return kExitOk;
}

int cmd_heatmap(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto grids = manifold::write_heatmaps(f.manifold, f.side);
  for (LabelFilter filter : kAllFilters) {
    if (grids.contains(filter)) {
      out << "heatmap_" << slug(filter) << " written\n";
    } else {
      err << "warning: no heatmap for " << slug(filter) << "\n";
    }
  }
  return kExitOk;
}

int cmd_match(const Flags& f, std::ostream& out, std::ostream& err) {
  GlyphBitmap query;
  if (!f.image.empty()) {
    query = glyph_from_png(f.image);
  } else {
    if (f.model.empty()) throw Error(Errc::InvalidArgument, "give --image or --model with --sliders/--z");
    query = vae::decode(vae::load_checkpoint(f.model).params, latent_from_flags(f.sliders, f.z));
  }
  const auto manifest = ingest::read_manifest(f.dataset);
  const auto corpus = ingest::load_corpus(f.dataset, manifest);
  const auto match = metrics::match_closest_font(query, corpus);
  ordered_json result{{"font_id", match.font_id}, {"ssim", match.ssim}};
  if (!f.alphabet.empty()) {
    fs::path fonts = f.fonts;
    if (fonts.empty()) {
      const auto cfg = nlohmann::json::parse(io::read_text(fs::path(f.dataset) / "config.json"));
      fonts = cfg.at("fonts").get<std::string>();
    }
    const auto it = std::find_if(manifest.entries.begin(), manifest.entries.end(),
                                 [&](const auto& e) { return e.font_id == match.font_id; });
    const auto strip = metrics::render_alphabet(io::read_bytes(fonts / it->source_file));
    io::write_bytes(f.alphabet, png::encode_gray(strip.image));
    for (const auto& w : strip.warnings) err << "warning: " << w << "\n";
    result["alphabet"] = f.alphabet;
    result["missing_letters"] = strip.warnings.size();
  }
  out << result.dump() << "\n";
  return kExitOk;
}

int cmd_analyze(const Flags& f, std::ostream& out, std::ostream&) {
  const auto records = metrics::records_from_jsonl(io::read_text(f.records));
  const auto report = metrics::to_json(metrics::analyze_comparison(records)).dump(2) + "\n";
  if (!f.out.empty()) io::write_text(f.out, report);
  out << report;
  return kExitOk;
}

int cmd_serve(const Flags& f, std::ostream&, std::ostream& err) {
  service::ServiceConfig config;
  config.host = f.host;
  config.port = f.port;
  if (config.port == 0) {
    const char* env = std::getenv("FM_PORT");
    config.port = env ? std::atoi(env) : 8080;
  }
  config.model = f.model;
  config.manifold = f.manifold;
  config.data_dir = f.data_dir;
  config.options = f.serve;
  config.options.seed = f.seed;
  auto svc = service::Service::load(config);
  const int port = svc->bind(config.host, config.port);
  if (port <= 0) throw Error(Errc::Io, "cannot bind " + config.host);
  err << "listening on http://" << config.host << ":" << port << "\n";
  svc->serve();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perceptual font manifold pipeline", "fontmanifold"};
  app.require_subcommand(1);
  Flags f;
  std::function<int(const Flags&, std::ostream&, std::ostream&)> action;
  const auto add = [&](const char* name, const char* help, auto fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&action, fn] { action = fn; });
    return sub;
  };
  const auto seed = [&](CLI::App* sub) { sub->add_option("--seed", f.seed, "Random seed")->capture_default_str(); };

  auto* ingest = add("ingest", "Rasterize and cleanse one glyph from every font file", cmd_ingest);
  ingest->add_option("--fonts", f.fonts, "Directory of .ttf/.otf/.ttc files")->required();
  ingest->add_option("--out", f.out, "Dataset output directory")->required();
  ingest->add_option("--codepoint", f.codepoint, "Character or U+XXXX")->capture_default_str();
  ingest->add_option("--canvas", f.canvas, "Raster canvas side in pixels")->capture_default_str();

  auto* synth = add("synth-fonts", "Write a corpus of generated A-Z TrueType fonts", cmd_synth_fonts);
  synth->add_option("--out", f.out, "Output directory")->required();
  synth->add_option("--count", f.count, "Number of fonts")->capture_default_str();
  seed(synth);

  auto* train = add("train", "Train the VAE on an ingested dataset", cmd_train);
  train->add_option("--dataset", f.dataset, "Dataset directory from ingest")->required();
  train->add_option("--out", f.out, "Checkpoint path")->required();
  train->add_option("--epochs", f.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch", f.batch, "Batch size")->capture_default_str();
  train->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--limit", f.limit, "Use only the first N bitmaps (0 = all)")->capture_default_str();
  train->add_option("--log", f.log, "Loss log path (default <out>.log.jsonl)");
  seed(train);

  auto* decode = add("decode", "Decode sliders or a latent vector to PNG", cmd_decode);
  decode->add_option("--model", f.model, "Checkpoint")->required();
  decode->add_option("--sliders", f.sliders, "Five slider positions 0-99, comma separated");
  decode->add_option("--z", f.z, "Five latent values, comma separated");
  decode->add_option("--out", f.out, "PNG path")->required();
  decode->add_option("--scale", f.scale, "Nearest-neighbour upscale 1-32")->capture_default_str();

  auto* sample = add("sample", "Decode the generated corpus", cmd_sample);
  sample->add_option("--model", f.model, "Checkpoint")->required();
  sample->add_option("--out", f.out, "Output directory")->required();
  sample->add_option("--count", f.sample_count, "Distinct slider positions")->capture_default_str();
  sample->add_option("--scale", f.scale, "PNG upscale 1-32")->capture_default_str();
  seed(sample);

  auto* labels = add("synth-labels", "Generate perception labels from decoded-image statistics", cmd_synth_labels);
  labels->add_option("--model", f.model, "Checkpoint")->required();
  labels->add_option("--out", f.out, "labels.jsonl path")->required();
  labels->add_option("--per-label", f.per_label, "Samples per label")->capture_default_str();
  labels->add_option("--pop-min-ink", f.thresholds.pop_min_ink, "POP ink ratio floor")->capture_default_str();
  labels->add_option("--formal-max-ink", f.thresholds.formal_max_ink, "Formal ink ratio ceiling")->capture_default_str();
  labels->add_option("--formal-max-slant", f.thresholds.formal_max_slant_px, "Formal slant limit (px)")
      ->capture_default_str();
  labels->add_option("--max-draws", f.thresholds.max_draws, "Give up after this many draws")->capture_default_str();
  seed(labels);

  auto* mani = add("manifold", "Embed labeled latents with t-SNE", cmd_manifold);
  mani->add_option("--labels", f.labels, "labels.jsonl")->required();
  mani->add_option("--out", f.out, "Bundle directory")->required();
  mani->add_option("--perplexity", f.tsne.perplexity, "Target perplexity")->capture_default_str();
  mani->add_option("--iterations", f.tsne.iterations, "Gradient steps")->capture_default_str();
  mani->add_option("--learning-rate", f.tsne.learning_rate, "Step size")->capture_default_str();
  seed(mani);

  auto* heat = add("heatmap", "Write KDE heatmaps into a manifold bundle", cmd_heatmap);
  heat->add_option("--manifold", f.manifold, "Bundle directory")->required();
  heat->add_option("--side", f.side, "Grid side in cells")->capture_default_str();

  auto* match = add("match", "Find the corpus font closest to a glyph by SSIM", cmd_match);
  match->add_option("--dataset", f.dataset, "Dataset directory from ingest")->required();
  match->add_option("--model", f.model, "Checkpoint (with --sliders or --z)");
  match->add_option("--sliders", f.sliders, "Five slider positions");
  match->add_option("--z", f.z, "Five latent values");
  match->add_option("--image", f.image, "Query PNG instead of a decoded glyph");
  match->add_option("--alphabet", f.alphabet, "Write the matched font's A-Z strip here");
  match->add_option("--fonts", f.fonts, "Font directory (default: from the dataset config)");

  auto* analyze = add("analyze", "Summarize comparison-study records", cmd_analyze);
  analyze->add_option("--records", f.records, "records.jsonl")->required();
  analyze->add_option("--out", f.out, "Report path");

  auto* serve = add("serve", "Run the HTTP service", cmd_serve);
  serve->add_option("--model", f.model, "Checkpoint")->required();
  serve->add_option("--manifold", f.manifold, "Bundle directory");
  serve->add_option("--data-dir", f.data_dir, "Study log directory")->capture_default_str();
  serve->add_option("--port", f.port, "Port (default $FM_PORT or 8080)");
  serve->add_option("--host", f.host, "Bind address")->capture_default_str();
  serve->add_option("--png-scale", f.serve.png_scale, "Served PNG upscale")->capture_default_str();
  serve->add_option("--grid-size", f.serve.grid_size, "Generated corpus size")->capture_default_str();
  serve->add_option("--tasks", f.serve.task_count, "Target count")->capture_default_str();
  seed(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  try {
    return action(f, out, err);
  } catch (const Error& e) {
    err << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"fontmanifold"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace fm::cli
