#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "fontmanifold/autodiff.hpp"
#include "fontmanifold/image.hpp"
#include "fontmanifold/manifold_io.hpp"
#include "fontmanifold/png_io.hpp"
#include "fontmanifold/study.hpp"

namespace fm::service {

inline constexpr int kMaxPngScale = 32;

/// 8-bit gray PNG with intensity round((1 - v) * 255), each pixel blown up
/// to a scale x scale block. Throws Errc::InvalidArgument unless
/// 1 <= scale <= 32.
png::Bytes render_png(const GlyphBitmap& bitmap, int scale = 1);

/// FNV-1a 64 of `bytes` as 16 lowercase hex digits.
std::string content_hash(std::span<const std::uint8_t> bytes);

struct Request {
  std::string method;  // GET or POST
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  int png_scale = 4;
  int grid_size = vae::kGeneratedCorpusSize;
  int task_count = 10;
  std::uint64_t seed = 7;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model;
  std::filesystem::path manifold;  // optional bundle directory
  std::filesystem::path data_dir = "study-data";
  ServiceOptions options;
};

/// The HTTP application. Model and manifold are fixed at construction and
/// only the study logs change afterwards. `handle` is the whole request
/// surface and is safe to call from many threads.
class Service {
 public:
  Service(ad::ParameterSet params, std::optional<manifold::ManifoldBundle> bundle,
          std::filesystem::path data_dir, ServiceOptions options = {},
          study::Clock clock = study::system_clock());
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  static std::unique_ptr<Service> load(const ServiceConfig& config);

  Response handle(const Request& request);

  /// Binds the listener; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind.
  void serve();
  void stop();

  study::StudyStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fm::service
