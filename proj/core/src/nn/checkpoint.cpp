#include "msr/nn/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>

#include "msr/common.hpp"
#include "msr/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian float32");

namespace msr::nn {

namespace {
constexpr char kMagic[8] = {'M', 'S', 'R', 'C', 'K', 'P', 'T', '\n'};
}

void Checkpoint::add(std::string name, Tensor t, bool trainable) {
  if (has(name))
    throw ConfigError(fmt::format("checkpoint already has tensor '{}'", name));
  tensors.push_back({std::move(name), std::move(t), trainable});
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

const NamedTensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ConfigError(fmt::format("checkpoint has no tensor '{}'", name));
}

NamedTensor& Checkpoint::get(const std::string& name) {
  for (auto& t : tensors)
    if (t.name == name) return t;
  throw ConfigError(fmt::format("checkpoint has no tensor '{}'", name));
}

uint64_t Checkpoint::payload_checksum() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tensors)
    h = fnv1a64(t.tensor.data(), static_cast<size_t>(t.tensor.size()) * sizeof(float), h);
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["format"] = "msr-checkpoint";
  header["format_version"] = Checkpoint::kFormatVersion;
  header["meta"] = ckpt.meta;
  auto& list = header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& t : ckpt.tensors) {
    nlohmann::ordered_json item;
    item["name"] = t.name;
    item["shape"] = t.tensor.shape();
    item["dtype"] = "f32";
    item["trainable"] = t.trainable;
    list.push_back(std::move(item));
  }
  const std::string hdr = header.dump();

  std::string bytes;
  bytes.reserve(16 + hdr.size());
  bytes.append(kMagic, sizeof(kMagic));
  const uint64_t hdr_len = hdr.size();
  bytes.append(reinterpret_cast<const char*>(&hdr_len), 8);
  bytes.append(hdr);
  for (const auto& t : ckpt.tensors)
    bytes.append(reinterpret_cast<const char*>(t.tensor.data()),
                 static_cast<size_t>(t.tensor.size()) * sizeof(float));
  atomic_write_file(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError(fmt::format("{}: not an msr checkpoint (bad magic)", path.string()));
  uint64_t hdr_len = 0;
  std::memcpy(&hdr_len, bytes.data() + 8, 8);
  if (16 + hdr_len > bytes.size())
    throw IoError(fmt::format("{}: truncated checkpoint header", path.string()));

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(16, hdr_len));
  } catch (const std::exception& e) {
    throw IoError(fmt::format("{}: malformed checkpoint header: {}", path.string(), e.what()));
  }
  const int version = header.value("format_version", -1);
  if (header.value("format", "") != "msr-checkpoint" || version != Checkpoint::kFormatVersion)
    throw IoError(fmt::format(
        "{}: unsupported checkpoint format (version {}, reader supports {})",
        path.string(), version, Checkpoint::kFormatVersion));

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::ordered_json::object());
  size_t off = 16 + hdr_len;
  for (const auto& item : header.at("tensors")) {
    const std::string name = item.at("name").get<std::string>();
    const auto shape = item.at("shape").get<std::vector<int64_t>>();
    const std::string dtype = item.value("dtype", "f32");
    if (dtype != "f32")
      throw IoError(fmt::format("{}: tensor '{}' has unsupported dtype {}",
                                path.string(), name, dtype));
    const int64_t count = shape_size(shape);
    const size_t nbytes = static_cast<size_t>(count) * sizeof(float);
    if (off + nbytes > bytes.size())
      throw IoError(fmt::format("{}: truncated payload at tensor '{}'",
                                path.string(), name));
    std::vector<float> data(static_cast<size_t>(count));
    std::memcpy(data.data(), bytes.data() + off, nbytes);
    off += nbytes;
    ckpt.tensors.push_back(
        {name, Tensor(shape, std::move(data)), item.value("trainable", false)});
  }
  if (off != bytes.size())
    throw IoError(fmt::format("{}: {} trailing bytes after payload",
                              path.string(), bytes.size() - off));
  return ckpt;
}

}  // namespace msr::nn
