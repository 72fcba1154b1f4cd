#include "fontmanifold/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "fontmanifold/error.hpp"
#include "fontmanifold/io.hpp"
#include "fontmanifold/vae.hpp"

namespace fm::vae {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'M', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = v << 8 | bytes[at + static_cast<std::size_t>(i)];
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f64(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = bits << 8 | bytes[at + static_cast<std::size_t>(i)];
  return std::bit_cast<double>(bits);
}

std::string layer_spec() {
  std::string spec = "enc:";
  for (const auto& c : kEncoderConvs) {
    spec += "conv" + std::to_string(c.out_channels) + "s" + std::to_string(c.stride) + ",";
  }
  spec += "flat" + std::to_string(kFlatten) + ";dec:dense" + std::to_string(kFlatten);
  for (const auto& c : kDecoderConvs) spec += ",up,conv" + std::to_string(c.out_channels);
  return spec + ",sigmoid";
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint) {
  nlohmann::ordered_json header;
  header["hyperparameters"] = {
      {"latent_dim", checkpoint.latent_dim},
      {"layers", layer_spec()},
      {"seed", checkpoint.seed},
      {"epochs_completed", checkpoint.epochs_completed},
      {"batch_size", checkpoint.batch_size},
      {"learning_rate", checkpoint.learning_rate},
  };
  auto& directory = header["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : checkpoint.params) {
    directory.push_back({{"name", name},
                         {"shape", tensor.shape()},
                         {"offset", offset},
                         {"count", tensor.size()}});
    offset += tensor.size() * 8;
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [name, tensor] : checkpoint.params) {
    for (double v : tensor.values()) put_f64(out, v);
  }
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::Format, "not a PFMC checkpoint");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != Checkpoint::kVersion) {
    throw Error(Errc::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + header_len) throw Error(Errc::Format, "truncated checkpoint header");
  const std::size_t payload = 12 + header_len;

  Checkpoint cp;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + static_cast<std::ptrdiff_t>(payload));
    const auto& hp = header.at("hyperparameters");
    cp.latent_dim = hp.at("latent_dim").get<int>();
    cp.seed = hp.at("seed").get<std::uint64_t>();
    cp.epochs_completed = hp.at("epochs_completed").get<int>();
    cp.batch_size = hp.at("batch_size").get<int>();
    cp.learning_rate = hp.at("learning_rate").get<double>();
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (count != shape_size(shape)) throw Error(Errc::Format, "tensor " + name + ": count/shape mismatch");
      if (offset > bytes.size() - payload || count * 8 > bytes.size() - payload - offset) {
        throw Error(Errc::Format, "tensor " + name + ": payload out of range");
      }
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = get_f64(bytes, payload + offset + 8 * i);
      cp.params.emplace(name, Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::Format, std::string("checkpoint header: ") + ex.what());
  }
  if (cp.latent_dim != kLatentDim) {
    throw Error(Errc::Format, "checkpoint latent dimension " + std::to_string(cp.latent_dim) +
                                  " is not supported");
  }
  validate(cp.params);
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_bytes(path, serialize(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(io::read_bytes(path));
}

}  // namespace fm::vae
