#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/autodiff.hpp"
#include "molmeta/errors.hpp"
#include "molmeta/tensor.hpp"

namespace molmeta {

// ANIL adapts only the head group in its inner loop.
enum class LayerGroup : std::uint8_t { kBody = 0, kHead = 1 };

struct NamedTensor {
  std::string name;
  Tensor value;
  LayerGroup group = LayerGroup::kBody;
};

// Ordered, named model parameters with elementwise arithmetic.
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, Tensor value, LayerGroup group) {
    for (const auto& e : entries_)
      if (e.name == name) throw ContractError("duplicate parameter " + name);
    entries_.push_back({std::move(name), std::move(value), group});
  }

  std::size_t size() const { return entries_.size(); }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return i;
    throw ContractError("no parameter named " + std::string(name));
  }
  bool contains(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }
  const Tensor& value(std::string_view name) const { return entries_[index_of(name)].value; }
  Tensor& value(std::string_view name) { return entries_[index_of(name)].value; }

  bool same_structure(const ParamSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (entries_[i].name != other[i].name || entries_[i].group != other[i].group ||
          entries_[i].value.shape() != other[i].value.shape()) {
        return false;
      }
    }
    return true;
  }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& e : entries_) z.add(e.name, Tensor::zeros(e.value.shape()), e.group);
    return z;
  }

  // this += a * x
  ParamSet& axpy(double a, const ParamSet& x) {
    require_same(x);
    for (std::size_t i = 0; i < size(); ++i) {
      auto dst = entries_[i].value.data();
      auto src = x[i].value.data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
    }
    return *this;
  }

  ParamSet& operator+=(const ParamSet& x) { return axpy(1.0, x); }
  ParamSet& operator-=(const ParamSet& x) { return axpy(-1.0, x); }
  ParamSet& operator*=(double a) {
    for (auto& e : entries_)
      for (double& v : e.value.data()) v *= a;
    return *this;
  }

  friend ParamSet operator+(ParamSet a, const ParamSet& b) { return a += b; }
  friend ParamSet operator-(ParamSet a, const ParamSet& b) { return a -= b; }
  friend ParamSet operator*(double s, ParamSet a) { return a *= s; }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.same_structure(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i].value == b[i].value)) return false;
    return true;
  }

  // Flattened values in entry order.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(num_scalars());
    for (const auto& e : entries_) out.insert(out.end(), e.value.values().begin(), e.value.values().end());
    return out;
  }

 private:
  void require_same(const ParamSet& x) const {
    if (!same_structure(x)) throw DimensionError("parameter sets differ in structure");
  }

  std::vector<NamedTensor> entries_;
};

inline double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  if (!a.same_structure(b)) throw DimensionError("parameter sets differ in structure");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i].value, b[i].value));
  return m;
}

// Registers every parameter as a differentiable leaf, in entry order.
inline std::vector<ad::Var> bind(ad::Tape& tape, const ParamSet& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& e : params) vars.push_back(tape.leaf(e.value));
  return vars;
}

// Values of `vars` packaged with the names and groups of `like`.
inline ParamSet unbind(const ParamSet& like, std::span<const ad::Var> vars) {
  if (vars.size() != like.size()) throw DimensionError("unbind: count mismatch");
  ParamSet out;
  for (std::size_t i = 0; i < like.size(); ++i) {
    if (vars[i].shape() != like[i].value.shape()) throw DimensionError("unbind: shape mismatch");
    out.add(like[i].name, vars[i].value(), like[i].group);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file (little-endian):
//   "MOLMETA\0"   8 bytes magic
//   u32           format version (1)
//   u64 + bytes   metadata JSON (model config and provenance)
//   u64           tensor count
//   per tensor: u64 + bytes name, u8 group, u64 rank, u64 dims[rank], f64 values

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json metadata;
  ParamSet params;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw LoadError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out("MOLMETA", 7);
  out.push_back('\0');
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((kCheckpointVersion >> (8 * i)) & 0xff));
  const std::string meta = ck.metadata.dump();
  detail::put_u64(out, meta.size());
  out += meta;
  detail::put_u64(out, ck.params.size());
  for (const auto& e : ck.params) {
    detail::put_u64(out, e.name.size());
    out += e.name;
    out.push_back(static_cast<char>(e.group));
    detail::put_u64(out, e.value.rank());
    for (std::size_t d : e.value.shape()) detail::put_u64(out, d);
    for (double v : e.value.data()) {
      std::uint64_t bitsv;
      std::memcpy(&bitsv, &v, sizeof(bitsv));
      detail::put_u64(out, bitsv);
    }
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.take(8) != std::string_view("MOLMETA\0", 8)) throw LoadError("not a molmeta checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.metadata = nlohmann::json::parse(r.take(r.u64()));
  const std::uint64_t count = r.u64();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name(r.take(r.u64()));
    const std::uint8_t group = r.u8();
    if (group > 1) throw LoadError("bad layer group in checkpoint");
    Shape shape(r.u64());
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
      const std::uint64_t b = r.u64();
      std::memcpy(&v, &b, sizeof(v));
    }
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(values)),
                  static_cast<LayerGroup>(group));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace molmeta
