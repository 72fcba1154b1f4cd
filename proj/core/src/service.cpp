#include "fontmanifold/service.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <regex>
#include <unordered_map>

#include <httplib.h>

#include "fontmanifold/checkpoint.hpp"
#include "fontmanifold/error.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::service {

using nlohmann::json;
using nlohmann::ordered_json;

png::Bytes render_png(const GlyphBitmap& bitmap, int scale) {
  if (scale < 1 || scale > kMaxPngScale) {
    throw Error(Errc::InvalidArgument, "scale must be in 1..32");
  }
  constexpr int side = GlyphBitmap::kSide;
  RawBitmap raw(side * scale, side * scale);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const double v = bitmap.at(x / scale, y / scale);
      raw.at(x, y) = static_cast<std::uint8_t>(std::lround((1.0 - v) * 255.0));
    }
  }
  return png::encode_gray(raw);
}

std::string content_hash(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct HttpError {
  int status;
  std::string message;
};

int status_for(Errc code) {
  switch (code) {
    case Errc::UnknownSession:
    case Errc::UnknownTask:
    case Errc::EmptySelection:
      return 404;
    case Errc::AlreadyAnswered:
    case Errc::MissingInterface:
      return 409;
    case Errc::Range:
    case Errc::InvalidArgument:
    case Errc::Parse:
    case Errc::Domain:
    case Errc::Dimension:
    case Errc::Format:
      return 400;
    default:
      return 500;
  }
}

Response json_response(int status, const ordered_json& body) { return {status, "application/json", body.dump()}; }

Response error_response(int status, const std::string& message, std::string_view code = {}) {
  ordered_json body{{"error", message}};
  if (!code.empty()) body["code"] = code;
  return json_response(status, body);
}

std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    double v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw HttpError{400, std::string("malformed ") + what};
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

vae::SliderVector sliders_from(const std::vector<double>& values) {
  if (values.size() != vae::kLatentDim) throw HttpError{400, "sliders must have 5 values"};
  vae::SliderVector s;
  for (int d = 0; d < vae::kLatentDim; ++d) {
    if (values[d] != std::floor(values[d])) throw HttpError{400, "sliders must be integers"};
    if (values[d] < 0 || values[d] >= vae::kSliderSteps) {
      throw Error(Errc::Range, "slider out of range: " + std::to_string(static_cast<long long>(values[d])));
    }
    s.k[d] = static_cast<int>(values[d]);
  }
  return s;
}

vae::LatentVector latent_from(const std::vector<double>& values) {
  if (values.size() != vae::kLatentDim) throw HttpError{400, "z must have 5 values"};
  vae::LatentVector z{};
  std::copy(values.begin(), values.end(), z.begin());
  return z;
}

json parse_body(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return j;
  } catch (const json::exception&) {
    throw HttpError{400, "request body is not valid JSON"};
  }
}

template <typename T>
T body_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw HttpError{400, std::string("missing field ") + key};
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, std::string("bad field ") + key};
  }
}

LabelFilter filter_from(const std::map<std::string, std::string>& query) {
  const auto it = query.find("label");
  if (it == query.end()) return LabelFilter::All;
  const auto f = parse_filter(it->second);
  if (!f) throw HttpError{400, "unknown label " + it->second};
  return *f;
}

int int_param(const std::map<std::string, std::string>& query, const char* key, int fallback, int lo,
              int hi) {
  const auto it = query.find(key);
  if (it == query.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || v < lo || v > hi) {
    throw HttpError{400, std::string("bad ") + key};
  }
  return v;
}

}  // namespace

struct Service::Impl {
  ad::ParameterSet params;
  std::optional<manifold::ManifoldBundle> bundle;
  ServiceOptions options;
  study::StudyStore store;
  std::vector<vae::GeneratedGlyph> corpus;
  std::vector<std::string> corpus_urls;

  std::mutex cache_mutex;
  std::unordered_map<std::string, std::shared_ptr<const png::Bytes>> images;

  httplib::Server server;

  Impl(ad::ParameterSet p, std::optional<manifold::ManifoldBundle> b, std::filesystem::path dir,
       ServiceOptions o, study::Clock clock)
      : params(std::move(p)), bundle(std::move(b)), options(o), store(std::move(dir), std::move(clock)) {
    vae::validate(params);
    render_png(GlyphBitmap{}, options.png_scale);  // validates the scale up front
    corpus = vae::sample_generated_corpus(params, options.grid_size, options.seed);
    corpus_urls.reserve(corpus.size());
    for (const auto& g : corpus) corpus_urls.push_back(cache_image(g.bitmap));
    if (options.task_count > 0 && store.templates().empty()) {
      store.install_tasks(study::create_tasks(corpus, options.task_count, options.seed));
    }
  }

  std::string cache_image(const GlyphBitmap& bitmap) {
    auto bytes = std::make_shared<const png::Bytes>(render_png(bitmap, options.png_scale));
    const std::string hash = content_hash(*bytes);
    std::lock_guard lock(cache_mutex);
    images.try_emplace(hash, std::move(bytes));
    return "/api/image/" + hash;
  }

  Response png_response(const GlyphBitmap& bitmap) {
    return {200, "image/png", [&] {
              const auto bytes = render_png(bitmap, options.png_scale);
              return std::string(bytes.begin(), bytes.end());
            }()};
  }

  const manifold::ManifoldBundle& require_bundle() const {
    if (!bundle) throw HttpError{404, "no manifold loaded"};
    return *bundle;
  }

  std::size_t corpus_index(const std::string& id) const {
    unsigned idx = 0;
    if (id.size() == 8 && id.starts_with("gen-") &&
        std::from_chars(id.data() + 4, id.data() + 8, idx).ec == std::errc() && idx < corpus.size()) {
      return idx;
    }
    throw HttpError{404, "unknown generated font " + id};
  }

  static std::string corpus_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "gen-%04zu", i);
    return buf;
  }

  // -- handlers ------------------------------------------------------------------

  Response decode(const Request& r) {
    vae::LatentVector z{};
    if (const auto it = r.query.find("sliders"); it != r.query.end()) {
      z = vae::slider_to_latent(sliders_from(parse_number_list(it->second, "sliders")));
    } else if (const auto zt = r.query.find("z"); zt != r.query.end()) {
      z = latent_from(parse_number_list(zt->second, "z"));
    } else {
      throw HttpError{400, "expected sliders= or z="};
    }
    return png_response(vae::decode(params, z));
  }

  Response manifold_view(const Request& r) {
    const auto& b = require_bundle();
    const LabelFilter f = filter_from(r.query);
    ordered_json points = ordered_json::array();
    for (const auto& s : b.samples) {
      if (!matches(f, s.label)) continue;
      points.push_back({{"x", s.coords[0]}, {"y", s.coords[1]}, {"label", to_string(s.label)}, {"id", s.sample_id}});
    }
    ordered_json body;
    body["points"] = std::move(points);
    body["heatmap"] = b.heatmap_png.contains(f) ? json("/api/heatmap?label=" + std::string(slug(f))) : json(nullptr);
    if (b.manifest.contains("bounds")) {
      body["bounds"] = b.manifest["bounds"];
    } else {
      body["bounds"] = nullptr;
    }
    return json_response(200, body);
  }

  Response heatmap(const Request& r) {
    const auto& b = require_bundle();
    const LabelFilter f = filter_from(r.query);
    const auto it = b.heatmap_png.find(f);
    if (it == b.heatmap_png.end()) {
      throw Error(Errc::EmptySelection, "no heatmap for label " + std::string(slug(f)));
    }
    return {200, "image/png", std::string(it->second.begin(), it->second.end())};
  }

  Response locate(const Request& r) {
    const auto& b = require_bundle();
    const json body = parse_body(r.body);
    const double x = body_field<double>(body, "x");
    const double y = body_field<double>(body, "y");
    LabelFilter f = LabelFilter::All;
    if (body.contains("label")) {
      const auto parsed = parse_filter(body_field<std::string>(body, "label"));
      if (!parsed) throw HttpError{400, "unknown label"};
      f = *parsed;
    }
    const auto z = manifold::locate_latent({x, y}, b.samples, f);
    ordered_json out;
    out["z"] = z;
    out["image"] = cache_image(vae::decode(params, z));
    return json_response(200, out);
  }

  Response image(const std::string& hash) {
    std::shared_ptr<const png::Bytes> bytes;
    {
      std::lock_guard lock(cache_mutex);
      const auto it = images.find(hash);
      if (it != images.end()) bytes = it->second;
    }
    if (!bytes) throw HttpError{404, "unknown image"};
    return {200, "image/png", std::string(bytes->begin(), bytes->end())};
  }

  Response create_session(const Request& r) {
    std::string participant;
    if (!r.body.empty()) {
      const json body = parse_body(r.body);
      if (body.contains("participant")) participant = body_field<std::string>(body, "participant");
    }
    return json_response(200, study::to_json(store.create_session(participant)));
  }

  Response submit_label(const Request& r) {
    const json body = parse_body(r.body);
    const auto session_id = body_field<std::string>(body, "session_id");
    const auto sliders = sliders_from(body_field<std::vector<double>>(body, "sliders"));
    const auto label = parse_label(body_field<std::string>(body, "label"));
    if (!label) throw HttpError{400, "label must be POP, Formal or Casual"};
    return json_response(200, study::to_json(store.record_label(session_id, sliders, *label)));
  }

  Response next_task(const Request& r) {
    const auto iface_it = r.query.find("interface");
    const auto part_it = r.query.find("participant");
    if (iface_it == r.query.end() || part_it == r.query.end() || part_it->second.empty()) {
      throw HttpError{400, "interface and participant are required"};
    }
    const auto iface = metrics::parse_interface(iface_it->second);
    if (!iface) throw HttpError{400, "interface must be manifold or grid"};
    const auto task = store.next_task(part_it->second, *iface);
    if (!task) throw HttpError{404, "no tasks remaining"};
    ordered_json out = study::to_json(*task);
    out["target_image"] = cache_image(vae::decode(params, task->target_latent));
    return json_response(200, out);
  }

  Response answer(const std::string& task_id, const Request& r) {
    const json body = parse_body(r.body);
    const auto sel_it = body.find("selected");
    if (sel_it == body.end() || !sel_it->is_object()) throw HttpError{400, "missing field selected"};
    const auto elapsed = body_field<std::int64_t>(body, "elapsed_ms");
    const study::TargetTask task = store.task(task_id);
    GlyphBitmap selected_bitmap;
    std::string selected;
    if (sel_it->contains("z")) {
      const auto z = latent_from(body_field<std::vector<double>>(*sel_it, "z"));
      for (double v : z) {
        if (!std::isfinite(v)) throw HttpError{400, "z must be finite"};
      }
      selected_bitmap = vae::decode(params, z);
      selected = "z:";
      for (int d = 0; d < vae::kLatentDim; ++d) selected += (d ? "," : "") + json(z[d]).dump();
    } else if (sel_it->contains("font_id")) {
      const auto id = body_field<std::string>(*sel_it, "font_id");
      selected_bitmap = corpus[corpus_index(id)].bitmap;
      selected = "font:" + id;
    } else {
      throw HttpError{400, "selected needs z or font_id"};
    }
    const auto target_bitmap = vae::decode(params, task.target_latent);
    const auto record = store.answer_task(task_id, selected, selected_bitmap, target_bitmap, elapsed);
    return json_response(200, metrics::to_json(record));
  }

  Response grid(const Request& r) {
    const int total = static_cast<int>(corpus.size());
    const int offset = int_param(r.query, "offset", 0, 0, total);
    const int limit = int_param(r.query, "limit", 100, 1, 500);
    ordered_json items = ordered_json::array();
    for (int i = offset; i < std::min(total, offset + limit); ++i) {
      items.push_back({{"id", corpus_id(static_cast<std::size_t>(i))},
                       {"image", corpus_urls[static_cast<std::size_t>(i)]},
                       {"sliders", corpus[static_cast<std::size_t>(i)].sliders.k}});
    }
    return json_response(200, {{"total", total}, {"offset", offset}, {"items", std::move(items)}});
  }

  Response report() {
    const auto records = store.records();
    try {
      return json_response(200, metrics::to_json(metrics::analyze_comparison(records)));
    } catch (const Error& e) {
      if (e.code() == Errc::MissingInterface) throw HttpError{409, "insufficient data"};
      throw;
    }
  }

  Response dispatch(const Request& r) {
    static const std::regex answer_route("^/api/tasks/([^/]+)/answer$");
    static const std::regex image_route("^/api/image/([0-9a-f]{16})$");
    const bool get = r.method == "GET";
    const bool post = r.method == "POST";
    std::smatch m;
    if (get && r.path == "/api/decode") return decode(r);
    if (get && r.path == "/api/manifold") return manifold_view(r);
    if (get && r.path == "/api/heatmap") return heatmap(r);
    if (post && r.path == "/api/locate") return locate(r);
    if (get && std::regex_match(r.path, m, image_route)) return image(m[1].str());
    if (post && r.path == "/api/sessions") return create_session(r);
    if (post && r.path == "/api/labels") return submit_label(r);
    if (get && r.path == "/api/tasks/next") return next_task(r);
    if (post && std::regex_match(r.path, m, answer_route)) return answer(m[1].str(), r);
    if (get && r.path == "/api/grid") return grid(r);
    if (get && r.path == "/api/report") return report();
    return error_response(404, "no route for " + r.method + " " + r.path);
  }
};

Service::Service(ad::ParameterSet params, std::optional<manifold::ManifoldBundle> bundle,
                 std::filesystem::path data_dir, ServiceOptions options, study::Clock clock)
    : impl_(std::make_unique<Impl>(std::move(params), std::move(bundle), std::move(data_dir), options,
                                   std::move(clock))) {}

Service::~Service() = default;

std::unique_ptr<Service> Service::load(const ServiceConfig& config) {
  auto checkpoint = vae::load_checkpoint(config.model);
  std::optional<manifold::ManifoldBundle> bundle;
  if (!config.manifold.empty()) bundle = manifold::load_bundle(config.manifold);
  return std::make_unique<Service>(std::move(checkpoint.params), std::move(bundle), config.data_dir,
                                   config.options);
}

Response Service::handle(const Request& request) {
  try {
    return impl_->dispatch(request);
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what(), errc_name(e.code()));
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

int Service::bind(const std::string& host, int port) {
  const auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    const Response out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type.c_str());
  };
  impl_->server.Get(".*", adapt);
  impl_->server.Post(".*", adapt);
  if (port == 0) return impl_->server.bind_to_any_port(host.c_str());
  if (!impl_->server.bind_to_port(host.c_str(), port)) {
    throw Error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::serve() {
  if (!impl_->server.listen_after_bind()) throw Error(Errc::Io, "server stopped with an error");
}

void Service::stop() { impl_->server.stop(); }

study::StudyStore& Service::store() { return impl_->store; }

}  // namespace fm::service
