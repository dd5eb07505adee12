#include "visaw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "visaw/errors.hpp"

namespace visaw {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'S', 'A', 'W', 'C', 'K', 'P'};
constexpr int kFormatVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

const Tensor& LoadedCheckpoint::tensor(const std::string& name) const {
  for (const NamedParam& p : params) {
    if (p.name == name) return p.tensor;
  }
  fail(ErrorKind::Integrity, "checkpoint: no parameter named \"" + name + "\"");
}

void save_checkpoint(const std::string& path, const std::string& module,
                     const ParamList& params, const nlohmann::json& config,
                     unsigned long long seed, const std::vector<std::string>* ids) {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["module"] = module;
  manifest["seed"] = seed;
  manifest["config"] = config;
  nlohmann::json plist = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const NamedParam& p : params) {
    nlohmann::json entry;
    entry["name"] = p.name;
    entry["shape"] = p.tensor.shape();
    entry["offset"] = offset;
    plist.push_back(entry);
    offset += p.tensor.size();
  }
  manifest["params"] = plist;
  if (ids) manifest["ids"] = *ids;

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  std::string mtext = manifest.dump();
  put_u64(blob, mtext.size());
  blob += mtext;
  for (const NamedParam& p : params) {
    for (double v : p.tensor.data()) put_u64(blob, std::bit_cast<std::uint64_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "checkpoint: cannot write " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) fail(ErrorKind::Io, "checkpoint: short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "checkpoint: cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < sizeof(kMagic) + 8 ||
      std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " is not a checkpoint file");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::uint64_t mlen = get_u64(bytes + sizeof(kMagic));
  std::size_t header = sizeof(kMagic) + 8;
  if (blob.size() < header + mlen) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " is truncated");
  }

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(header, mlen));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " has a corrupt manifest: " + e.what());
  }
  if (!manifest.contains("format_version") || !manifest["format_version"].is_number_integer()) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " has no format_version");
  }
  if (manifest["format_version"].get<int>() != kFormatVersion) {
    fail(ErrorKind::Version, "checkpoint: " + path + " has unsupported format_version " +
                                 manifest["format_version"].dump());
  }

  LoadedCheckpoint ckpt;
  ckpt.module = manifest.value("module", std::string());
  ckpt.seed = manifest.value("seed", 0ull);
  if (manifest.contains("config")) ckpt.config = manifest["config"];
  if (manifest.contains("ids")) {
    ckpt.ids = manifest["ids"].get<std::vector<std::string>>();
  }

  if (!manifest.contains("params") || !manifest["params"].is_array()) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " has no parameter table");
  }
  std::size_t payload = header + mlen;
  std::uint64_t total = 0;
  for (const auto& entry : manifest["params"]) {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      offset = entry.at("offset").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Integrity, "checkpoint: " + path + " has a corrupt manifest: " + e.what());
    }
    if (offset != total) {
      fail(ErrorKind::Integrity, "checkpoint: " + path + " has a bad offset for \"" + name + "\"");
    }
    std::size_t n = numel(shape);
    if (blob.size() < payload + (total + n) * 8) {
      fail(ErrorKind::Integrity, "checkpoint: " + path + " is truncated");
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      data[i] = std::bit_cast<double>(get_u64(bytes + payload + (total + i) * 8));
    }
    ckpt.params.push_back({name, Tensor::from_data(shape, std::move(data))});
    total += n;
  }
  if (blob.size() != payload + total * 8) {
    fail(ErrorKind::Integrity, "checkpoint: " + path + " has trailing bytes");
  }
  return ckpt;
}

void load_into(const LoadedCheckpoint& ckpt, ParamList& params) {
  for (NamedParam& dst : params) {
    const Tensor& src = ckpt.tensor(dst.name);
    if (src.shape() != dst.tensor.shape()) {
      fail(ErrorKind::Integrity, "checkpoint: shape mismatch for \"" + dst.name + "\": stored " +
                                     shape_str(src.shape()) + ", expected " +
                                     shape_str(dst.tensor.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.tensor.data().begin());
  }
}

}  // namespace visaw
