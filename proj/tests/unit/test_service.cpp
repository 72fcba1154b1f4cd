#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/manifold_io.hpp"
#include "fontmanifold/png_io.hpp"
#include "fontmanifold/service.hpp"
#include "fontmanifold/vae.hpp"
#include "support.hpp"

using namespace fm;
using namespace fm::service;
using nlohmann::json;

namespace {

// Bundle with POP and Formal samples only, so the Casual view is empty.
manifold::ManifoldBundle small_bundle(const std::filesystem::path& dir) {
  Rng rng(3);
  std::vector<manifold::EmbeddedSample> s;
  for (int i = 0; i < 30; ++i) {
    manifold::EmbeddedSample e;
    e.sample_id = "s" + std::to_string(i);
    e.label = i % 2 ? PerceptionLabel::Formal : PerceptionLabel::Pop;
    for (int d = 0; d < 5; ++d) e.latent[d] = (i % 2 ? 1.0 : -1.0) + 0.3 * rng.normal();
    s.push_back(e);
  }
  const auto r = manifold::embed(s);
  manifold::write_embedding_bundle(dir, s, {}, r);
  manifold::write_heatmaps(dir, 32);
  return manifold::load_bundle(dir);
}

const ad::ParameterSet& model() {
  static const ad::ParameterSet p = [] {
    Rng rng(4);
    return vae::init_params(rng);
  }();
  return p;
}

struct Fixture : ::testing::Test {
  std::filesystem::path data;
  std::unique_ptr<Service> svc;

  void SetUp() override {
    static int n = 0;
    const auto root = test::scratch_dir("service-" + std::to_string(n++));
    data = root / "data";
    ServiceOptions opt;
    opt.grid_size = 40;
    opt.task_count = 3;
    opt.png_scale = 2;
    svc = std::make_unique<Service>(model(), small_bundle(root / "bundle"), data, opt);
  }

  Response get(const std::string& path, std::map<std::string, std::string> q = {}) {
    return svc->handle({"GET", path, std::move(q), ""});
  }
  Response post(const std::string& path, const json& body) { return svc->handle({"POST", path, {}, body.dump()}); }
  static json parse(const Response& r) { return json::parse(r.body); }
};

std::string logs_hash(const std::filesystem::path& dir) {
  std::string all;
  for (const char* f : {"sessions.jsonl", "labels.jsonl", "tasks.jsonl", "records.jsonl"}) {
    if (std::filesystem::exists(dir / f)) all += io::read_text(dir / f) + "|";
  }
  return content_hash(std::vector<std::uint8_t>(all.begin(), all.end()));
}

}  // namespace

TEST(RenderPng, ScaleAndInversion) {
  Rng rng(1);
  const GlyphBitmap g = test::random_glyph(rng);
  const RawBitmap one = png::decode_gray(render_png(g, 1));
  ASSERT_EQ(one.width, 28);
  for (int i = 0; i < 784; ++i) EXPECT_EQ(one.pixels[i], std::lround((1 - g[i]) * 255));
  const RawBitmap eight = png::decode_gray(render_png(g, 8));
  ASSERT_EQ(eight.width, 224);
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x) ASSERT_EQ(eight.at(x, y), one.at(x / 8, y / 8));
  const RawBitmap white = png::decode_gray(render_png(GlyphBitmap(), 1));
  for (auto p : white.pixels) EXPECT_EQ(p, 255);
  EXPECT_THROW(render_png(g, 0), Error);
  EXPECT_THROW(render_png(g, 33), Error);
}

TEST(ContentHash, Fnv1a) {
  EXPECT_EQ(content_hash({}), "cbf29ce484222325");
  const std::string a = "a";
  EXPECT_EQ(content_hash(std::vector<std::uint8_t>(a.begin(), a.end())), "af63dc4c8601ec8c");
}

TEST_F(Fixture, DecodeDeterministicAndErrors) {
  const auto a = get("/api/decode", {{"sliders", "50,50,50,50,50"}});
  const auto b = get("/api/decode", {{"sliders", "50,50,50,50,50"}});
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.content_type, "image/png");
  EXPECT_EQ(a.body, b.body);

  const auto lo = get("/api/decode", {{"sliders", "0,0,0,0,0"}});
  const auto expected = render_png(vae::decode(model(), vae::slider_to_latent({{0, 0, 0, 0, 0}})), 2);
  EXPECT_EQ(lo.body, std::string(expected.begin(), expected.end()));
  const auto zlo = get("/api/decode", {{"z", "-1.6448536269514722,-1.6448536269514722,-1.6448536269514722,"
                                               "-1.6448536269514722,-1.6448536269514722"}});
  EXPECT_EQ(zlo.body, lo.body);

  const auto bad = get("/api/decode", {{"sliders", "100,0,0,0,0"}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_NE(parse(bad)["error"].get<std::string>().find("slider out of range"), std::string::npos);
  EXPECT_EQ(get("/api/decode", {{"sliders", "1,2,3"}}).status, 400);
  EXPECT_EQ(get("/api/decode", {{"sliders", "a,b,c,d,e"}}).status, 400);
  EXPECT_EQ(get("/api/decode").status, 400);
  EXPECT_EQ(get("/api/nowhere").status, 404);
}

TEST_F(Fixture, ManifoldHeatmapAndLocate) {
  const auto m = get("/api/manifold", {{"label", "pop"}});
  ASSERT_EQ(m.status, 200);
  const json body = parse(m);
  EXPECT_EQ(body["points"].size(), 15u);
  EXPECT_EQ(body["heatmap"], "/api/heatmap?label=pop");
  EXPECT_TRUE(body["bounds"].is_object());
  EXPECT_EQ(parse(get("/api/manifold"))["points"].size(), 30u);

  EXPECT_EQ(get("/api/heatmap", {{"label", "all"}}).content_type, "image/png");
  EXPECT_EQ(get("/api/heatmap", {{"label", "casual"}}).status, 404);
  EXPECT_EQ(get("/api/manifold", {{"label", "fancy"}}).status, 400);

  const json p0 = body["points"][0];
  const json click{{"x", p0["x"]}, {"y", p0["y"]}, {"label", "pop"}};
  const auto a = post("/api/locate", click), b = post("/api/locate", click);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  const json la = parse(a);
  // The zero-distance branch echoes the sample's latent.
  const auto bundle = manifold::load_bundle(data.parent_path() / "bundle");
  const auto it = std::find_if(bundle.samples.begin(), bundle.samples.end(),
                               [&](const auto& s) { return s.sample_id == p0["id"]; });
  ASSERT_NE(it, bundle.samples.end());
  EXPECT_EQ(la["z"].get<std::vector<double>>(), std::vector<double>(it->latent.begin(), it->latent.end()));
  const auto img = get(la["image"].get<std::string>());
  EXPECT_EQ(img.status, 200);
  const auto want = render_png(vae::decode(model(), it->latent), 2);
  EXPECT_EQ(img.body, std::string(want.begin(), want.end()));
  EXPECT_EQ(la["image"], "/api/image/" + content_hash(want));
  EXPECT_EQ(post("/api/locate", json{{"x", 0}, {"y", 0}, {"label", "casual"}}).status, 404);
  EXPECT_EQ(get("/api/image/0000000000000000").status, 404);
}

TEST_F(Fixture, SessionsAndLabels) {
  const auto s = post("/api/sessions", json{{"participant", "p1"}});
  ASSERT_EQ(s.status, 200);
  const std::string sid = parse(s)["session_id"];
  const auto ok = post("/api/labels", json{{"session_id", sid}, {"sliders", {1, 2, 3, 4, 5}}, {"label", "POP"}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(svc->store().labels().size(), 1u);
  const std::string before = logs_hash(data);
  const auto bad = post("/api/labels", json{{"session_id", sid}, {"sliders", {1, 2, 100, 4, 5}}, {"label", "POP"}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(parse(bad)["code"], "RangeError");
  EXPECT_EQ(post("/api/labels", json{{"session_id", "session-999999"}, {"sliders", {1, 2, 3, 4, 5}}, {"label", "POP"}}).status, 404);
  EXPECT_EQ(post("/api/labels", json{{"session_id", sid}, {"sliders", {1, 2, 3, 4, 5}}, {"label", "odd"}}).status, 400);
  EXPECT_EQ(svc->handle({"POST", "/api/labels", {}, "{not json"}).status, 400);
  EXPECT_EQ(logs_hash(data), before);
  EXPECT_EQ(svc->store().labels().size(), 1u);
}

TEST_F(Fixture, TasksAnswersAndReport) {
  EXPECT_EQ(get("/api/report").status, 409);
  EXPECT_EQ(parse(get("/api/report"))["error"], "insufficient data");
  EXPECT_EQ(get("/api/tasks/next", {{"interface", "grid"}}).status, 400);

  for (const char* iface : {"manifold", "grid"}) {
    int answered = 0;
    while (true) {
      const auto t = get("/api/tasks/next", {{"interface", iface}, {"participant", "p1"}});
      if (t.status == 404) {
        EXPECT_EQ(parse(t)["error"], "no tasks remaining");
        break;
      }
      ASSERT_EQ(t.status, 200);
      const json task = parse(t);
      EXPECT_EQ(get(task["target_image"].get<std::string>()).status, 200);
      const std::string path = "/api/tasks/" + task["task_id"].get<std::string>() + "/answer";
      json selected = std::string(iface) == "grid" ? json{{"font_id", task["target_id"]}}
                                                   : json{{"z", task["target_latent"]}};
      const auto r = post(path, json{{"selected", selected}, {"elapsed_ms", 1000 + 500 * answered}});
      ASSERT_EQ(r.status, 200) << r.body;
      EXPECT_EQ(parse(r)["ssim"], 1.0);
      const auto again = post(path, json{{"selected", selected}, {"elapsed_ms", 10}});
      EXPECT_EQ(again.status, 409);
      ++answered;
    }
    EXPECT_EQ(answered, 3);
  }
  const auto t = get("/api/tasks/next", {{"interface", "grid"}, {"participant", "p2"}});
  const std::string path = "/api/tasks/" + parse(t)["task_id"].get<std::string>() + "/answer";
  EXPECT_EQ(post(path, json{{"selected", {{"font_id", "gen-9999"}}}, {"elapsed_ms", 5}}).status, 404);
  EXPECT_EQ(post(path, json{{"selected", {{"z", {0, 0, 0, 0, 0}}}}, {"elapsed_ms", 0}}).status, 400);
  EXPECT_EQ(post("/api/tasks/task-999999/answer", json{{"selected", {{"z", {0, 0, 0, 0, 0}}}}, {"elapsed_ms", 5}}).status, 404);

  const auto rep = get("/api/report");
  ASSERT_EQ(rep.status, 200);
  const json report = parse(rep);
  EXPECT_EQ(report["manifold"]["count"], 3);
  EXPECT_EQ(report["grid"]["count"], 3);
  EXPECT_NEAR(report["ratio"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(svc->store().records().size(), 6u);
}

TEST_F(Fixture, GridPaging) {
  const json page = parse(get("/api/grid", {{"offset", "35"}, {"limit", "10"}}));
  EXPECT_EQ(page["total"], 40);
  ASSERT_EQ(page["items"].size(), 5u);
  EXPECT_EQ(page["items"][0]["id"], "gen-0035");
  const auto img = get(page["items"][0]["image"].get<std::string>());
  EXPECT_EQ(img.status, 200);
  EXPECT_EQ(parse(get("/api/grid"))["items"].size(), 40u);
  EXPECT_EQ(get("/api/grid", {{"limit", "501"}}).status, 400);
  EXPECT_EQ(get("/api/grid", {{"offset", "-1"}}).status, 400);
}

TEST_F(Fixture, ReadOnlyRoutesDoNotTouchLogs) {
  post("/api/sessions", json::object());
  const std::string before = logs_hash(data);
  get("/api/decode", {{"sliders", "1,1,1,1,1"}});
  get("/api/manifold");
  get("/api/heatmap");
  get("/api/grid");
  get("/api/report");
  post("/api/locate", json{{"x", 0.0}, {"y", 0.0}});
  EXPECT_EQ(logs_hash(data), before);
}

TEST_F(Fixture, LiveHttp) {
  const int port = svc->bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([&] { svc->serve(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  const auto png = cli.Get("/api/decode?sliders=50,50,50,50,50");
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(png->body, get("/api/decode", {{"sliders", "50,50,50,50,50"}}).body);
  const auto bad = cli.Get("/api/decode?sliders=100,0,0,0,0");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  const auto sess = cli.Post("/api/sessions", R"({"participant":"web"})", "application/json");
  ASSERT_TRUE(sess);
  EXPECT_EQ(sess->status, 200);
  EXPECT_TRUE(json::parse(sess->body).contains("session_id"));
  svc->stop();
  server.join();
}
