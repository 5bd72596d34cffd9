#pragma once

// Checkpoint container: a text header naming each parameter array, followed
// by the raw little-endian payload.
//
//   AUTOCOMP-CHECKPOINT 1
//   meta <key> <value>
//   tensor <name> <f32|f64> <n> <c> <h> <w> <byte offset> <byte length>
//   end
//   <payload>
//
// Offsets are relative to the first payload byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp::nn {

inline constexpr const char* kCheckpointMagic = "AUTOCOMP-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::string dtype;
  std::vector<double> values;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  const std::string& meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint is missing metadata key '" + key + "'");
    return it->second;
  }
};

template <class T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& store,
                     const std::map<std::string, std::string>& meta = {}) {
  std::ostringstream header;
  header << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw DataError("checkpoint metadata must not contain newlines or spaces in keys");
    header << "meta " << k << ' ' << v << '\n';
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    const Shape s = p.value.shape();
    const std::size_t bytes = p.value.numel() * sizeof(T);
    header << "tensor " << p.name << ' ' << dtype_name<T>() << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w
           << ' ' << offset << ' ' << bytes << '\n';
    offset += bytes;
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto d = store[i].value.data();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(T)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw DataError("truncated checkpoint header: " + path.string());
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    return line;
  };

  {
    std::istringstream first(next_line());
    std::string magic;
    int version = 0;
    first >> magic >> version;
    if (magic != kCheckpointMagic) throw DataError("not a checkpoint file: " + path.string());
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }

  struct Entry {
    CheckpointTensor tensor;
    std::size_t offset;
    std::size_t length;
  };
  Checkpoint ckpt;
  std::vector<Entry> entries;
  while (true) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      Entry e;
      ls >> e.tensor.name >> e.tensor.dtype >> e.tensor.shape.n >> e.tensor.shape.c >> e.tensor.shape.h >>
          e.tensor.shape.w >> e.offset >> e.length;
      if (!ls) throw DataError("malformed checkpoint tensor line: " + line);
      entries.push_back(std::move(e));
    } else {
      throw DataError("unknown checkpoint header line: " + line);
    }
  }

  const std::size_t payload = pos;
  for (auto& e : entries) {
    const std::size_t elem = e.tensor.dtype == "f32" ? 4 : e.tensor.dtype == "f64" ? 8 : 0;
    if (elem == 0) throw DataError("unknown checkpoint dtype '" + e.tensor.dtype + "'");
    if (e.length != e.tensor.shape.numel() * elem) throw DataError("checkpoint tensor length mismatch: " + e.tensor.name);
    if (payload + e.offset + e.length > bytes.size()) throw DataError("truncated checkpoint payload: " + e.tensor.name);
    const char* src = bytes.data() + payload + e.offset;
    e.tensor.values.resize(e.tensor.shape.numel());
    for (std::size_t i = 0; i < e.tensor.values.size(); ++i) {
      if (elem == 4) {
        float f;
        std::memcpy(&f, src + i * 4, 4);
        e.tensor.values[i] = f;
      } else {
        double d;
        std::memcpy(&d, src + i * 8, 8);
        e.tensor.values[i] = d;
      }
    }
    ckpt.tensors.push_back(std::move(e.tensor));
  }
  return ckpt;
}

// Copies values into parameters matched by name; every parameter must be present.
template <class T>
void load_parameters(const Checkpoint& ckpt, ParameterStore<T>& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    const CheckpointTensor* t = ckpt.find(p.name);
    if (t == nullptr) throw DataError("checkpoint has no tensor named " + p.name);
    if (!(t->shape == p.value.shape()))
      throw DataError("checkpoint tensor " + p.name + " has shape " + t->shape.str() + ", expected " +
                      p.value.shape().str());
    auto dst = p.value.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(t->values[j]);
  }
}

}  // namespace autocomp::nn
