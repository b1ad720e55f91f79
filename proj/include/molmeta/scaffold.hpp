#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "molmeta/hash.hpp"
#include "molmeta/smiles.hpp"

namespace molmeta {

// Key shared by every molecule without a ring.
inline const std::string kEmptyScaffoldKey = "scaffold:none";

// Ring-and-linker skeleton: atoms that survive repeated deletion of atoms
// with at most one remaining neighbor.
inline std::vector<bool> scaffold_atoms(const MolGraph& g) {
  const std::size_t n = g.num_atoms();
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> degree(n);
  for (std::size_t v = 0; v < n; ++v) degree[v] = g.degree(v);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v] || degree[v] > 1) continue;
      alive[v] = false;
      changed = true;
      for (std::size_t e : g.incoming(v)) {
        const std::size_t k = g.edges()[e].source;
        if (alive[k]) --degree[k];
      }
    }
  }
  return alive;
}

// Canonical scaffold key: three rounds of Weisfeiler-Lehman relabeling over
// scaffold atoms (element, aromaticity) and bonds (order), summarized as the
// sorted multiset of labels from every round.
inline std::string scaffold_key(const MolGraph& g) {
  const std::vector<bool> alive = scaffold_atoms(g);
  std::vector<std::size_t> atoms;
  for (std::size_t v = 0; v < g.num_atoms(); ++v)
    if (alive[v]) atoms.push_back(v);
  if (atoms.empty()) return kEmptyScaffoldKey;

  std::vector<std::uint64_t> label(g.num_atoms(), 0);
  for (std::size_t v : atoms) {
    const Atom& a = g.atoms()[v];
    label[v] = Fnv1a64().str(a.symbol).u64(a.aromatic ? 1 : 0).digest();
  }

  std::vector<std::uint64_t> all;
  for (std::size_t v : atoms) all.push_back(label[v]);

  std::size_t bond_count = 0;
  for (const Bond& b : g.bonds())
    if (alive[b.begin] && alive[b.end]) ++bond_count;

  for (int round = 1; round <= 3; ++round) {
    std::vector<std::uint64_t> next(label);
    for (std::size_t v : atoms) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
      for (std::size_t e : g.incoming(v)) {
        const DirectedEdge& de = g.edges()[e];
        if (!alive[de.source]) continue;
        env.emplace_back(static_cast<std::uint64_t>(g.bonds()[de.bond].order), label[de.source]);
      }
      std::sort(env.begin(), env.end());
      Fnv1a64 h;
      h.u64(static_cast<std::uint64_t>(round)).u64(label[v]).u64(env.size());
      for (const auto& [order, nb] : env) h.u64(order).u64(nb);
      next[v] = h.digest();
    }
    label = std::move(next);
    for (std::size_t v : atoms) all.push_back(label[v]);
  }

  std::sort(all.begin(), all.end());
  Fnv1a64 h;
  h.u64(atoms.size()).u64(bond_count);
  for (std::uint64_t l : all) h.u64(l);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.digest()));
  return std::string("scaffold:") + buf;
}

}  // namespace molmeta
