// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "cvtassd/errors.hpp"

namespace cvtassd {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', 'A'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string str(size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated");
  }
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> encode_checkpoint(const ParamList& params) {
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  put_le<uint32_t>(out, kVersion);
  put_le<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    if (p.name.size() > 0xffff) throw UsageError("parameter name too long: " + p.name);
    put_le<uint16_t>(out, static_cast<uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const Shape& shape = p.tensor.shape();
    put_le<uint8_t>(out, static_cast<uint8_t>(shape.size()));
    for (auto d : shape) put_le<uint32_t>(out, static_cast<uint32_t>(d));
    for (float v : p.tensor.data()) put_le<uint32_t>(out, std::bit_cast<uint32_t>(v));
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw ParseError("checkpoint: bad magic");
  const auto version = r.get<uint32_t>();
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<uint32_t>();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str(r.get<uint16_t>());
    const auto rank = r.get<uint8_t>();
    for (uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.get<uint32_t>());
    const int64_t n = shape_numel(e.shape);
    e.values.resize(static_cast<size_t>(n));
    for (auto& v : e.values) v = std::bit_cast<float>(r.get<uint32_t>());
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void apply_checkpoint(const std::vector<CheckpointEntry>& entries, const ParamList& params) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint missing tensor " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw DataError("checkpoint tensor " + p.name + " has shape " +
                      shape_str(it->second->shape) + ", model expects " +
                      shape_str(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    std::copy(it->second->values.begin(), it->second->values.end(), t.data().begin());
  }
}

void load_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  apply_checkpoint(read_checkpoint(path), params);
}

}  // namespace cvtassd
