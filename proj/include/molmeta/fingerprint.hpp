#pragma once

// Morgan / ECFP-style circular fingerprints. ECFP4 corresponds to radius 2.
//
// Identifiers are 64-bit FNV-1a hashes, so bits are stable across runs and
// platforms but are not meant to match RDKit's bit assignment.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "molmeta/errors.hpp"
#include "molmeta/hash.hpp"
#include "molmeta/smiles.hpp"
#include "molmeta/tensor.hpp"

namespace molmeta {

inline constexpr std::size_t kDefaultFingerprintBits = 2048;
inline constexpr int kEcfp4Radius = 2;

struct Fingerprint {
  std::vector<std::uint8_t> bits;  // 0/1 per position
  // Distinct identifiers from every radius, sorted, before folding.
  std::vector<std::uint64_t> identifiers;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

inline std::uint64_t morgan_atom_invariant(const MolGraph& g, std::size_t v) {
  const Atom& a = g.atoms()[v];
  return Fnv1a64()
      .u64(static_cast<std::uint64_t>(a.element))
      .str(a.symbol)
      .u64(g.degree(v))
      .u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(a.charge)))
      .u64(static_cast<std::uint64_t>(a.hydrogens))
      .u64(a.aromatic ? 1 : 0)
      .digest();
}

// Identifiers of each atom at rounds 0..radius; result[r][v].
inline std::vector<std::vector<std::uint64_t>> morgan_rounds(const MolGraph& g, int radius) {
  std::vector<std::vector<std::uint64_t>> rounds;
  std::vector<std::uint64_t> ids(g.num_atoms());
  for (std::size_t v = 0; v < g.num_atoms(); ++v) ids[v] = morgan_atom_invariant(g, v);
  rounds.push_back(ids);
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(ids.size());
    for (std::size_t v = 0; v < g.num_atoms(); ++v) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
      for (std::size_t e : g.incoming(v)) {
        const DirectedEdge& de = g.edges()[e];
        env.emplace_back(static_cast<std::uint64_t>(g.bonds()[de.bond].order), ids[de.source]);
      }
      std::sort(env.begin(), env.end());
      Fnv1a64 h;
      h.u64(static_cast<std::uint64_t>(r)).u64(ids[v]);
      for (const auto& [order, nb] : env) h.u64(order).u64(nb);
      next[v] = h.digest();
    }
    ids = std::move(next);
    rounds.push_back(ids);
  }
  return rounds;
}

inline Fingerprint morgan_fingerprint(const MolGraph& g, int radius = kEcfp4Radius,
                                      std::size_t bits = kDefaultFingerprintBits) {
  if (radius < 0) throw ContractError("fingerprint radius must be >= 0");
  if (bits == 0 || (bits & (bits - 1)) != 0) {
    throw ContractError("fingerprint length must be a power of two");
  }
  Fingerprint fp;
  fp.bits.assign(bits, 0);
  for (const auto& round : morgan_rounds(g, radius))
    fp.identifiers.insert(fp.identifiers.end(), round.begin(), round.end());
  std::sort(fp.identifiers.begin(), fp.identifiers.end());
  fp.identifiers.erase(std::unique(fp.identifiers.begin(), fp.identifiers.end()),
                       fp.identifiers.end());
  for (std::uint64_t id : fp.identifiers) fp.bits[id % bits] = 1;
  return fp;
}

// Bit i lives in byte i/8 at bit position i%8; bytes written in order as
// two lowercase hex digits.
inline std::string fingerprint_to_hex(const Fingerprint& fp) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  const std::size_t nbytes = (fp.bits.size() + 7) / 8;
  out.reserve(2 * nbytes);
  for (std::size_t byte = 0; byte < nbytes; ++byte) {
    unsigned v = 0;
    for (std::size_t b = 0; b < 8 && byte * 8 + b < fp.bits.size(); ++b)
      v |= static_cast<unsigned>(fp.bits[byte * 8 + b]) << b;
    out.push_back(kDigits[v >> 4]);
    out.push_back(kDigits[v & 0xf]);
  }
  return out;
}

inline Fingerprint fingerprint_from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw LoadError("fingerprint hex has odd length");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw LoadError(std::string("invalid hex digit '") + c + "'");
  };
  Fingerprint fp;
  fp.bits.reserve(hex.size() * 4);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const unsigned v = (nibble(hex[i]) << 4) | nibble(hex[i + 1]);
    for (unsigned b = 0; b < 8; ++b) fp.bits.push_back(static_cast<std::uint8_t>((v >> b) & 1u));
  }
  return fp;
}

inline Tensor fingerprint_row(const Fingerprint& fp) {
  std::vector<double> v(fp.bits.begin(), fp.bits.end());
  const std::size_t n = v.size();
  return Tensor::matrix(1, n, std::move(v));
}

// Cached-features file: one "smiles<TAB>hex" line per molecule.
inline void write_fingerprint_cache(const std::string& path,
                                    const std::vector<std::pair<std::string, Fingerprint>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path);
  for (const auto& [smiles, fp] : rows) out << smiles << '\t' << fingerprint_to_hex(fp) << '\n';
}

inline std::vector<std::pair<std::string, Fingerprint>> read_fingerprint_cache(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read " + path);
  std::vector<std::pair<std::string, Fingerprint>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": expected smiles<TAB>hex");
    }
    rows.emplace_back(line.substr(0, tab), fingerprint_from_hex(std::string_view(line).substr(tab + 1)));
  }
  return rows;
}

}  // namespace molmeta
