#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mecheval/chem/elements.hpp"

namespace mecheval::chem {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

/// Bond-order contribution to valence; aromatic bonds count as one here and
/// the pi electron is accounted for separately.
inline int valence_contribution(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

enum class Chirality : std::uint8_t { None, CounterClockwise /* @ */, Clockwise /* @@ */ };

/// Stands in for an implicit hydrogen inside a stereo neighbour list.
inline constexpr int kImplicitHydrogen = -1;

struct Atom {
  int element = 6;  // atomic number; 0 = wildcard "*"
  int charge = 0;
  std::optional<int> isotope;
  std::optional<int> explicit_h;  // bracket atoms only
  bool bracket = false;
  bool aromatic = false;
  int implicit_h = 0;  // organic-subset atoms only
  int map_number = 0;  // atom class ":n", 0 when absent
  Chirality chirality = Chirality::None;
  // Neighbour atom indices in the order a SMILES string listed them around
  // this centre (kImplicitHydrogen for a bracket H). Only kept for chiral atoms.
  std::vector<int> stereo_refs;
  std::size_t source_offset = 0;

  int hydrogen_count() const { return bracket ? explicit_h.value_or(0) : implicit_h; }
  bool is_wildcard() const { return element == 0; }
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const { return atom == begin ? end : begin; }
};

/// Cis/trans configuration of a double bond, relative to one chosen
/// substituent on each end.
struct DoubleBondStereo {
  int bond = 0;        // index of the double bond
  int begin_ref = 0;   // substituent of bonds[bond].begin
  int end_ref = 0;     // substituent of bonds[bond].end
  bool cis = false;
};

struct Neighbor {
  int atom;
  int bond;
};

/// Molecular graph. Holds one or more dot-separated components.
class Molecule {
 public:
  int add_atom(Atom atom) {
    atoms_.push_back(std::move(atom));
    adjacency_.emplace_back();
    return static_cast<int>(atoms_.size()) - 1;
  }

  /// Throws std::invalid_argument on self-loops, out-of-range endpoints or a
  /// second bond between the same pair.
  int add_bond(int a, int b, BondOrder order) {
    const int n = atom_count();
    if (a == b || a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("invalid bond endpoints");
    if (bond_between(a, b)) throw std::invalid_argument("duplicate bond");
    bonds_.push_back(Bond{a, b, order});
    const int idx = static_cast<int>(bonds_.size()) - 1;
    adjacency_[static_cast<std::size_t>(a)].push_back({b, idx});
    adjacency_[static_cast<std::size_t>(b)].push_back({a, idx});
    return idx;
  }

  std::optional<int> bond_between(int a, int b) const {
    for (const auto& nb : adjacency_.at(static_cast<std::size_t>(a)))
      if (nb.atom == b) return nb.bond;
    return std::nullopt;
  }

  int atom_count() const { return static_cast<int>(atoms_.size()); }
  int bond_count() const { return static_cast<int>(bonds_.size()); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const Atom& atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }
  Atom& atom(int i) { return atoms_.at(static_cast<std::size_t>(i)); }
  const Bond& bond(int i) const { return bonds_.at(static_cast<std::size_t>(i)); }
  Bond& bond(int i) { return bonds_.at(static_cast<std::size_t>(i)); }
  const std::vector<Neighbor>& neighbors(int i) const {
    return adjacency_.at(static_cast<std::size_t>(i));
  }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  const std::vector<DoubleBondStereo>& double_bond_stereo() const { return db_stereo_; }
  std::vector<DoubleBondStereo>& double_bond_stereo() { return db_stereo_; }

  /// Sum of bond valence contributions (aromatic counted as one).
  int bond_valence(int i) const {
    int sum = 0;
    for (const auto& nb : neighbors(i)) sum += valence_contribution(bond(nb.bond).order);
    return sum;
  }

  int aromatic_bond_count(int i) const {
    int n = 0;
    for (const auto& nb : neighbors(i))
      if (bond(nb.bond).order == BondOrder::Aromatic) ++n;
    return n;
  }

  /// Connected-component label per atom, labels assigned in atom order.
  std::vector<int> component_labels() const {
    std::vector<int> label(atoms_.size(), -1);
    int next = 0;
    std::vector<int> stack;
    for (int s = 0; s < atom_count(); ++s) {
      if (label[static_cast<std::size_t>(s)] != -1) continue;
      label[static_cast<std::size_t>(s)] = next;
      stack.push_back(s);
      while (!stack.empty()) {
        int a = stack.back();
        stack.pop_back();
        for (const auto& nb : neighbors(a)) {
          auto& l = label[static_cast<std::size_t>(nb.atom)];
          if (l == -1) {
            l = next;
            stack.push_back(nb.atom);
          }
        }
      }
      ++next;
    }
    return label;
  }

  int component_count() const {
    int best = -1;
    for (int l : component_labels()) best = std::max(best, l);
    return best + 1;
  }

  int heavy_atom_count() const {
    int n = 0;
    for (const auto& a : atoms_)
      if (a.element != 1) ++n;
    return n;
  }

  /// Recomputes implicit hydrogens of every organic-subset atom from its
  /// current bonds. Bracket atoms keep their written count.
  void assign_implicit_hydrogens(const ValenceTable& table = ValenceTable::builtin()) {
    for (int i = 0; i < atom_count(); ++i) {
      Atom& a = atom(i);
      if (a.bracket) {
        a.implicit_h = 0;
        continue;
      }
      a.implicit_h = default_hydrogens(i, table);
    }
  }

  /// Hydrogen count an unbracketed atom would receive from the standard
  /// valence rules given its current bonds and aromatic flag.
  int default_hydrogens(int i, const ValenceTable& table = ValenceTable::builtin()) const {
    const Atom& a = atom(i);
    if (a.is_wildcard()) return 0;
    if (a.aromatic && (a.element == 8 || a.element == 16 || a.element == 34)) return 0;
    int used = bond_valence(i);
    if (a.aromatic) used += 1;
    auto v = table.fit(a.element, a.charge, used);
    return v ? *v - used : 0;
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<DoubleBondStereo> db_stereo_;
};

}  // namespace mecheval::chem
