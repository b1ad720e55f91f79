#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "molmeta/smiles.hpp"
#include "molmeta/tensor.hpp"

namespace molmeta {

// Atom feature layout (one-hot blocks unless noted):
//   element   B C N O F P S Cl Br I other       11
//   degree    0..5 (clamped)                      6
//   charge    -2..+2 (clamped)                    5
//   aromatic  flag                                1
//   H count   0..4 (clamped)                      5
inline constexpr std::size_t kAtomFeatureWidth = 28;
// Bond: order single/double/triple/aromatic one-hot, in-ring flag.
inline constexpr std::size_t kBondFeatureWidth = 5;

using AtomFeatures = std::array<double, kAtomFeatureWidth>;
using BondFeatures = std::array<double, kBondFeatureWidth>;

inline AtomFeatures atom_features(const MolGraph& g, std::size_t v) {
  const Atom& a = g.atoms()[v];
  AtomFeatures f{};
  f[static_cast<std::size_t>(a.element)] = 1.0;
  f[11 + std::min<std::size_t>(g.degree(v), 5)] = 1.0;
  f[17 + static_cast<std::size_t>(std::clamp(a.charge, -2, 2) + 2)] = 1.0;
  f[22] = a.aromatic ? 1.0 : 0.0;
  f[23 + static_cast<std::size_t>(std::clamp(a.hydrogens, 0, 4))] = 1.0;
  return f;
}

inline BondFeatures bond_features(const Bond& b) {
  BondFeatures f{};
  f[static_cast<std::size_t>(b.order)] = 1.0;
  f[4] = b.in_ring ? 1.0 : 0.0;
  return f;
}

// Dense inputs for the directed message-passing encoder.
struct FeaturizedMol {
  std::size_t num_atoms = 0;
  Tensor atom_features;  // |V| x kAtomFeatureWidth
  // Row e is (x_source(e), bond features(e)): |E| x (atom + bond width).
  Tensor edge_features;
  std::vector<std::size_t> edge_source;
  std::vector<std::size_t> edge_target;
  std::vector<std::size_t> edge_reverse;
  // For edge v->w: ids of edges k->v with k != w.
  std::vector<std::vector<std::size_t>> message_sources;
};

inline FeaturizedMol featurize(const MolGraph& g) {
  FeaturizedMol out;
  const std::size_t n = g.num_atoms();
  const std::size_t e = g.edges().size();
  out.num_atoms = n;

  std::vector<double> atoms;
  atoms.reserve(n * kAtomFeatureWidth);
  std::vector<AtomFeatures> per_atom(n);
  for (std::size_t v = 0; v < n; ++v) {
    per_atom[v] = atom_features(g, v);
    atoms.insert(atoms.end(), per_atom[v].begin(), per_atom[v].end());
  }
  out.atom_features = Tensor::matrix(n, kAtomFeatureWidth, std::move(atoms));

  constexpr std::size_t width = kAtomFeatureWidth + kBondFeatureWidth;
  std::vector<double> edges;
  edges.reserve(e * width);
  for (const DirectedEdge& de : g.edges()) {
    const BondFeatures bf = bond_features(g.bonds()[de.bond]);
    edges.insert(edges.end(), per_atom[de.source].begin(), per_atom[de.source].end());
    edges.insert(edges.end(), bf.begin(), bf.end());
    out.edge_source.push_back(de.source);
    out.edge_target.push_back(de.target);
    out.edge_reverse.push_back(de.reverse);
  }
  out.edge_features = Tensor::matrix(e, width, std::move(edges));

  out.message_sources.resize(e);
  for (std::size_t id = 0; id < e; ++id) {
    const DirectedEdge& de = g.edges()[id];
    for (std::size_t in : g.incoming(de.source)) {
      if (in != de.reverse) out.message_sources[id].push_back(in);
    }
  }
  return out;
}

// Several molecules laid out as one disconnected graph.
struct MolBatch {
  std::size_t num_molecules = 0;
  std::size_t num_atoms = 0;
  Tensor atom_features;
  Tensor edge_features;
  std::vector<std::size_t> edge_source;
  std::vector<std::size_t> edge_target;
  std::vector<std::size_t> edge_reverse;
  std::vector<std::size_t> atom_molecule;
};

inline MolBatch collate(std::span<const FeaturizedMol* const> mols) {
  MolBatch b;
  b.num_molecules = mols.size();
  std::vector<double> atoms, edges;
  constexpr std::size_t edge_width = kAtomFeatureWidth + kBondFeatureWidth;
  std::size_t atom_offset = 0, edge_offset = 0;
  for (std::size_t m = 0; m < mols.size(); ++m) {
    const FeaturizedMol& f = *mols[m];
    atoms.insert(atoms.end(), f.atom_features.values().begin(), f.atom_features.values().end());
    edges.insert(edges.end(), f.edge_features.values().begin(), f.edge_features.values().end());
    for (std::size_t i = 0; i < f.edge_source.size(); ++i) {
      b.edge_source.push_back(f.edge_source[i] + atom_offset);
      b.edge_target.push_back(f.edge_target[i] + atom_offset);
      b.edge_reverse.push_back(f.edge_reverse[i] + edge_offset);
    }
    b.atom_molecule.insert(b.atom_molecule.end(), f.num_atoms, m);
    atom_offset += f.num_atoms;
    edge_offset += f.edge_source.size();
  }
  b.num_atoms = atom_offset;
  b.atom_features = Tensor::matrix(atom_offset, kAtomFeatureWidth, std::move(atoms));
  b.edge_features = Tensor::matrix(edge_offset, edge_width, std::move(edges));
  return b;
}

}  // namespace molmeta
