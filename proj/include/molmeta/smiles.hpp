#pragma once

// SMILES subset parser producing a molecular graph with directed-edge
// structure.
//
// Supported: organic-subset atoms (B C N O F P S Cl Br I), aromatic b c n o p s,
// bracket atoms with isotope, H count, charge and atom class, bonds - = # : ,
// branches, ring closures 1-9 and %nn, and the '.' disconnection. Stereo
// markers (/ \ @) are accepted and ignored. Aromaticity is taken as written;
// there is no kekulization or ring perception beyond in-ring bond flags.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "molmeta/errors.hpp"

namespace molmeta {

enum class Element : std::uint8_t { B, C, N, O, F, P, S, Cl, Br, I, Other };

inline constexpr std::size_t kNumElementSlots = 11;

enum class BondOrder : std::uint8_t { kSingle = 0, kDouble = 1, kTriple = 2, kAromatic = 3 };

struct Atom {
  std::string symbol;  // as written, capitalized (e.g. "C" for both C and c)
  Element element = Element::Other;
  int charge = 0;
  int hydrogens = 0;  // implicit (organic subset) or explicit (bracket)
  bool aromatic = false;
  bool bracket = false;
  std::size_t offset = 0;  // position in the source string
};

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::kSingle;
  bool in_ring = false;
};

// Bond b yields edges 2b (begin -> end) and 2b+1 (end -> begin).
struct DirectedEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t bond = 0;
  std::size_t reverse = 0;
};

class MolGraph {
 public:
  MolGraph() = default;
  MolGraph(std::string smiles, std::vector<Atom> atoms, std::vector<Bond> bonds)
      : smiles_(std::move(smiles)), atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
    build_edges();
  }

  const std::string& smiles() const { return smiles_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<DirectedEdge>& edges() const { return edges_; }
  std::size_t num_atoms() const { return atoms_.size(); }
  std::size_t num_bonds() const { return bonds_.size(); }

  // Ids of directed edges k -> v.
  const std::vector<std::size_t>& incoming(std::size_t v) const { return incoming_[v]; }
  std::size_t degree(std::size_t v) const { return incoming_[v].size(); }

 private:
  void build_edges() {
    edges_.clear();
    incoming_.assign(atoms_.size(), {});
    for (std::size_t b = 0; b < bonds_.size(); ++b) {
      const Bond& bond = bonds_[b];
      edges_.push_back({bond.begin, bond.end, b, 2 * b + 1});
      edges_.push_back({bond.end, bond.begin, b, 2 * b});
      incoming_[bond.end].push_back(2 * b);
      incoming_[bond.begin].push_back(2 * b + 1);
    }
  }

  std::string smiles_;
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<DirectedEdge> edges_;
  std::vector<std::vector<std::size_t>> incoming_;
};

namespace detail {

inline std::optional<Element> organic_element(std::string_view sym) {
  static const std::array<std::pair<std::string_view, Element>, 10> kTable{{
      {"B", Element::B}, {"C", Element::C}, {"N", Element::N}, {"O", Element::O},
      {"F", Element::F}, {"P", Element::P}, {"S", Element::S}, {"Cl", Element::Cl},
      {"Br", Element::Br}, {"I", Element::I},
  }};
  for (const auto& [s, e] : kTable)
    if (s == sym) return e;
  return std::nullopt;
}

inline bool is_known_element(std::string_view sym) {
  static const std::array<std::string_view, 118> kSymbols{
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
      "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
      "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
      "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
      "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
      "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
      "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
      "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
  return std::find(kSymbols.begin(), kSymbols.end(), sym) != kSymbols.end();
}

// Standard valences for implicit-hydrogen computation, ascending.
inline std::vector<int> default_valences(Element e) {
  switch (e) {
    case Element::B: return {3};
    case Element::C: return {4};
    case Element::N: return {3, 5};
    case Element::O: return {2};
    case Element::P: return {3, 5};
    case Element::S: return {2, 4, 6};
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I: return {1};
    case Element::Other: return {};
  }
  return {};
}

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolGraph parse() {
    if (text_.empty()) throw ParseError("empty SMILES", 0);
    std::optional<std::size_t> prev;
    std::vector<std::pair<std::size_t, std::size_t>> branches;  // (atom, offset of '(')
    std::optional<char> pending_bond;
    std::size_t pending_offset = 0;

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      const std::size_t here = pos_;
      if (c == '(') {
        if (!prev) throw ParseError("branch without a preceding atom", here);
        branches.emplace_back(*prev, here);
        ++pos_;
      } else if (c == ')') {
        if (branches.empty()) throw ParseError("unmatched ')'", here);
        if (pending_bond) throw ParseError("bond symbol before ')'", pending_offset);
        prev = branches.back().first;
        branches.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (pending_bond) throw ParseError("two consecutive bond symbols", here);
        pending_bond = c;
        pending_offset = here;
        ++pos_;
      } else if (c == '.') {
        if (pending_bond) throw ParseError("bond symbol before '.'", pending_offset);
        prev.reset();
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (!prev) throw ParseError("ring closure without a preceding atom", here);
        const int digit = read_ring_number();
        close_or_open_ring(digit, *prev, pending_bond, here);
        pending_bond.reset();
      } else if (c == '@') {
        ++pos_;  // stereo marker outside brackets; ignored
      } else {
        const std::size_t atom = read_atom();
        if (prev) add_bond(*prev, atom, pending_bond, pending_bond ? pending_offset : here);
        pending_bond.reset();
        prev = atom;
      }
    }
    if (pending_bond) throw ParseError("dangling bond symbol", pending_offset);
    if (!branches.empty()) throw ParseError("unmatched '('", branches.back().second);
    if (!rings_.empty()) throw ParseError("unmatched ring closure digit", rings_.begin()->second.offset);
    if (atoms_.empty()) throw ParseError("no atoms", 0);

    assign_hydrogens();
    mark_ring_bonds();
    return MolGraph(std::string(text_), std::move(atoms_), std::move(bonds_));
  }

 private:
  struct OpenRing {
    std::size_t atom;
    std::optional<char> bond;
    std::size_t offset;
  };

  int read_ring_number() {
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw ParseError("'%' must be followed by two digits", pos_);
      }
      const int n = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      return n;
    }
    return text_[pos_++] - '0';
  }

  void close_or_open_ring(int digit, std::size_t atom, std::optional<char> bond,
                          std::size_t offset) {
    auto it = rings_.find(digit);
    if (it == rings_.end()) {
      rings_.emplace(digit, OpenRing{atom, bond, offset});
      return;
    }
    const OpenRing open = it->second;
    rings_.erase(it);
    if (bond && open.bond && *bond != *open.bond && *bond != '/' && *bond != '\\' &&
        *open.bond != '/' && *open.bond != '\\') {
      throw ParseError("conflicting bond symbols on ring closure", offset);
    }
    add_bond(open.atom, atom, bond ? bond : open.bond, offset);
  }

  std::size_t read_atom() {
    const std::size_t start = pos_;
    if (text_[pos_] == '[') return read_bracket_atom();

    Atom atom;
    atom.offset = start;
    const char c = text_[pos_];
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      atom.symbol = "Cl";
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      atom.symbol = "Br";
      pos_ += 2;
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      atom.symbol = std::string(1, c);
      ++pos_;
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      atom.symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      atom.aromatic = true;
      ++pos_;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      throw ParseError("unknown element '" + std::string(1, c) + "'", start);
    } else {
      throw ParseError("unexpected character '" + std::string(1, c) + "'", start);
    }
    atom.element = *organic_element(atom.symbol);
    atoms_.push_back(std::move(atom));
    organic_.push_back(true);
    return atoms_.size() - 1;
  }

  std::size_t read_bracket_atom() {
    const std::size_t start = pos_;
    ++pos_;  // '['
    auto peek = [&]() -> char { return pos_ < text_.size() ? text_[pos_] : '\0'; };
    auto is_digit = [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; };

    while (is_digit(peek())) ++pos_;  // isotope

    Atom atom;
    atom.offset = start;
    atom.bracket = true;
    const char c = peek();
    if (c == '\0') throw ParseError("unterminated bracket atom", start);
    if (std::islower(static_cast<unsigned char>(c))) {
      // aromatic: b c n o p s, or two-letter se / as
      if ((c == 's' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'e') ||
          (c == 'a' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 's')) {
        atom.symbol = c == 's' ? "Se" : "As";
        pos_ += 2;
      } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
        atom.symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        ++pos_;
      } else {
        throw ParseError("unknown aromatic element '" + std::string(1, c) + "'", pos_);
      }
      atom.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1])) &&
          is_known_element(sym + text_[pos_ + 1])) {
        sym += text_[pos_ + 1];
        ++pos_;
      }
      ++pos_;
      if (!is_known_element(sym)) throw ParseError("unknown element '" + sym + "'", start + 1);
      atom.symbol = sym;
    } else {
      throw ParseError("expected element symbol in bracket atom", pos_);
    }
    atom.element = organic_element(atom.symbol).value_or(Element::Other);

    while (peek() == '@') ++pos_;  // chirality; ignored
    // Extended chirality classes such as @TH1 are outside the subset.

    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (is_digit(peek())) {
        h = 0;
        while (is_digit(peek())) h = h * 10 + (text_[pos_++] - '0');
      }
      atom.hydrogens = h;
    }

    if (peek() == '+' || peek() == '-') {
      const char sign = text_[pos_++];
      int magnitude = 1;
      if (is_digit(peek())) {
        magnitude = 0;
        while (is_digit(peek())) magnitude = magnitude * 10 + (text_[pos_++] - '0');
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }

    if (peek() == ':') {
      ++pos_;
      if (!is_digit(peek())) throw ParseError("atom class needs digits", pos_);
      while (is_digit(peek())) ++pos_;
    }

    if (peek() != ']') throw ParseError("expected ']'", pos_);
    ++pos_;
    atoms_.push_back(std::move(atom));
    organic_.push_back(false);
    return atoms_.size() - 1;
  }

  void add_bond(std::size_t a, std::size_t b, std::optional<char> symbol, std::size_t offset) {
    if (a == b) throw ParseError("bond from an atom to itself", offset);
    for (const Bond& existing : bonds_) {
      if ((existing.begin == a && existing.end == b) || (existing.begin == b && existing.end == a)) {
        throw ParseError("duplicate bond", offset);
      }
    }
    BondOrder order = BondOrder::kSingle;
    if (!symbol || *symbol == '/' || *symbol == '\\') {
      order = (atoms_[a].aromatic && atoms_[b].aromatic) ? BondOrder::kAromatic : BondOrder::kSingle;
    } else if (*symbol == '=') {
      order = BondOrder::kDouble;
    } else if (*symbol == '#') {
      order = BondOrder::kTriple;
    } else if (*symbol == ':') {
      order = BondOrder::kAromatic;
    }
    bonds_.push_back(Bond{a, b, order, false});
  }

  void assign_hydrogens() {
    std::vector<int> bond_sum(atoms_.size(), 0);
    std::vector<int> aromatic_bonds(atoms_.size(), 0);
    for (const Bond& b : bonds_) {
      const int order = b.order == BondOrder::kDouble ? 2 : b.order == BondOrder::kTriple ? 3 : 1;
      bond_sum[b.begin] += order;
      bond_sum[b.end] += order;
      if (b.order == BondOrder::kAromatic) {
        ++aromatic_bonds[b.begin];
        ++aromatic_bonds[b.end];
      }
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!organic_[i]) continue;
      Atom& atom = atoms_[i];
      const std::vector<int> valences = default_valences(atom.element);
      if (atom.aromatic) {
        // One valence unit goes to the aromatic system.
        const int used = bond_sum[i] + (aromatic_bonds[i] > 0 ? 1 : 0);
        if (bond_sum[i] > valences.back()) {
          throw ParseError("valence exceeded for aromatic " + atom.symbol, atom.offset);
        }
        atom.hydrogens = std::max(0, valences.front() - used);
      } else {
        auto it = std::find_if(valences.begin(), valences.end(),
                               [&](int v) { return v >= bond_sum[i]; });
        if (it == valences.end()) {
          throw ParseError("valence exceeded for " + atom.symbol, atom.offset);
        }
        atom.hydrogens = *it - bond_sum[i];
      }
    }
  }

  // A bond is in a ring iff it is not a bridge.
  void mark_ring_bonds() {
    const std::size_t n = atoms_.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    for (std::size_t b = 0; b < bonds_.size(); ++b) {
      adj[bonds_[b].begin].emplace_back(bonds_[b].end, b);
      adj[bonds_[b].end].emplace_back(bonds_[b].begin, b);
    }
    std::vector<int> disc(n, -1), low(n, 0);
    std::vector<bool> bridge(bonds_.size(), false);
    int timer = 0;
    std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t v, std::size_t via) {
      disc[v] = low[v] = timer++;
      for (const auto& [w, b] : adj[v]) {
        if (b == via) continue;
        if (disc[w] >= 0) {
          low[v] = std::min(low[v], disc[w]);
        } else {
          dfs(w, b);
          low[v] = std::min(low[v], low[w]);
          if (low[w] > disc[v]) bridge[b] = true;
        }
      }
    };
    for (std::size_t v = 0; v < n; ++v)
      if (disc[v] < 0) dfs(v, static_cast<std::size_t>(-1));
    for (std::size_t b = 0; b < bonds_.size(); ++b) bonds_[b].in_ring = !bridge[b];
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Atom> atoms_;
  std::vector<bool> organic_;
  std::vector<Bond> bonds_;
  std::map<int, OpenRing> rings_;
};

}  // namespace detail

// Throws ParseError carrying a 0-based character offset.
inline MolGraph parse_smiles(std::string_view text) { return detail::SmilesParser(text).parse(); }

}  // namespace molmeta
