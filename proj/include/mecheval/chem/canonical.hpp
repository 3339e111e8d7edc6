#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mecheval/chem/aromaticity.hpp"
#include "mecheval/chem/molecule.hpp"
#include "mecheval/chem/rings.hpp"
#include "mecheval/chem/smiles_parser.hpp"
#include "mecheval/chem/validity.hpp"

namespace mecheval::chem {

class InvalidMoleculeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kekulizes then re-perceives aromaticity, giving one representation per
/// structure regardless of whether the input was written aromatic or Kekulé.
inline Molecule normalize_aromaticity(const Molecule& mol,
                                      const ValenceTable& table = ValenceTable::builtin()) {
  Molecule out = mol;
  if (auto err = kekulize(out, table)) throw InvalidMoleculeError(*err);
  perceive_aromaticity(out);
  return out;
}

/// Splits a molecule into one Molecule per connected component, remapping
/// stereo references.
inline std::vector<Molecule> split_components(const Molecule& mol) {
  const auto labels = mol.component_labels();
  int count = 0;
  for (int l : labels) count = std::max(count, l + 1);
  std::vector<Molecule> parts(static_cast<std::size_t>(count));
  std::vector<int> local(static_cast<std::size_t>(mol.atom_count()), -1);
  for (int i = 0; i < mol.atom_count(); ++i)
    local[static_cast<std::size_t>(i)] =
        parts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].add_atom(mol.atom(i));
  std::vector<int> local_bond(static_cast<std::size_t>(mol.bond_count()), -1);
  for (int b = 0; b < mol.bond_count(); ++b) {
    const Bond& bond = mol.bond(b);
    auto& part = parts[static_cast<std::size_t>(labels[static_cast<std::size_t>(bond.begin)])];
    local_bond[static_cast<std::size_t>(b)] =
        part.add_bond(local[static_cast<std::size_t>(bond.begin)],
                      local[static_cast<std::size_t>(bond.end)], bond.order);
  }
  for (auto& part : parts) {
    for (int i = 0; i < part.atom_count(); ++i)
      for (int& r : part.atom(i).stereo_refs)
        if (r >= 0) r = local[static_cast<std::size_t>(r)];
  }
  for (const auto& st : mol.double_bond_stereo()) {
    const Bond& bond = mol.bond(st.bond);
    auto& part = parts[static_cast<std::size_t>(labels[static_cast<std::size_t>(bond.begin)])];
    part.double_bond_stereo().push_back(DoubleBondStereo{
        local_bond[static_cast<std::size_t>(st.bond)], local[static_cast<std::size_t>(st.begin_ref)],
        local[static_cast<std::size_t>(st.end_ref)], st.cis});
  }
  return parts;
}

namespace detail {

using Ranks = std::vector<int>;

inline int bond_code(BondOrder o) { return static_cast<int>(o); }

// Dense ranks from arbitrary comparable keys.
template <typename Key>
Ranks rank_by(const std::vector<Key>& keys) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
  Ranks r(keys.size(), 0);
  int cls = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && keys[static_cast<std::size_t>(order[i - 1])] < keys[static_cast<std::size_t>(order[i])]) ++cls;
    r[static_cast<std::size_t>(order[i])] = cls;
  }
  return r;
}

inline int class_count(const Ranks& r) {
  int m = -1;
  for (int x : r) m = std::max(m, x);
  return m + 1;
}

inline Ranks initial_ranks(const Molecule& mol, const RingInfo& rings) {
  using Key = std::vector<int>;
  std::vector<Key> keys;
  for (int i = 0; i < mol.atom_count(); ++i) {
    const Atom& a = mol.atom(i);
    keys.push_back({a.element, a.isotope.value_or(-1), a.charge, mol.degree(i), a.hydrogen_count(),
                    a.aromatic ? 1 : 0, rings.atom_in_ring[static_cast<std::size_t>(i)] ? 1 : 0,
                    rings.smallest_ring[static_cast<std::size_t>(i)], a.map_number,
                    a.chirality == Chirality::None ? 0 : 1});
  }
  return rank_by(keys);
}

// Iterated neighbourhood refinement until the partition stops splitting.
inline Ranks refine(const Molecule& mol, Ranks ranks) {
  int classes = class_count(ranks);
  while (true) {
    std::vector<std::vector<int>> keys(ranks.size());
    for (int i = 0; i < mol.atom_count(); ++i) {
      std::vector<int> nb;
      for (const auto& n : mol.neighbors(i))
        nb.push_back(ranks[static_cast<std::size_t>(n.atom)] * 8 + bond_code(mol.bond(n.bond).order));
      std::sort(nb.begin(), nb.end());
      auto& k = keys[static_cast<std::size_t>(i)];
      k.push_back(ranks[static_cast<std::size_t>(i)]);
      k.insert(k.end(), nb.begin(), nb.end());
    }
    Ranks next = rank_by(keys);
    const int c = class_count(next);
    if (c == classes) return ranks;
    ranks = std::move(next);
    classes = c;
  }
}

class SmilesWriter {
 public:
  SmilesWriter(const Molecule& mol, const Ranks& ranks, const ValenceTable& table)
      : mol_(mol), ranks_(ranks), table_(table) {}

  std::string write() {
    const int n = mol_.atom_count();
    if (n == 0) return {};
    visited_.assign(static_cast<std::size_t>(n), false);
    parent_.assign(static_cast<std::size_t>(n), -1);
    parent_bond_.assign(static_cast<std::size_t>(n), -1);
    children_.assign(static_cast<std::size_t>(n), {});
    closures_.assign(static_cast<std::size_t>(n), {});
    order_.clear();
    int root = 0;
    for (int i = 1; i < n; ++i)
      if (ranks_[static_cast<std::size_t>(i)] < ranks_[static_cast<std::size_t>(root)]) root = i;
    build_tree(root);
    assign_bond_directions();
    std::string out;
    std::vector<bool> digits(100, false);
    closure_digit_.assign(static_cast<std::size_t>(mol_.bond_count()), -1);
    emit(root, out, digits);
    return out;
  }

 private:
  std::vector<Neighbor> sorted_neighbors(int a) const {
    auto nbs = mol_.neighbors(a);
    std::sort(nbs.begin(), nbs.end(), [&](const Neighbor& x, const Neighbor& y) {
      return ranks_[static_cast<std::size_t>(x.atom)] < ranks_[static_cast<std::size_t>(y.atom)];
    });
    return nbs;
  }

  void build_tree(int root) {
    struct Frame {
      int atom;
      std::vector<Neighbor> nbs;
      std::size_t next;
    };
    std::vector<Frame> stack;
    visited_[static_cast<std::size_t>(root)] = true;
    order_.push_back(root);
    stack.push_back({root, sorted_neighbors(root), 0});
    std::vector<bool> closure_seen(static_cast<std::size_t>(mol_.bond_count()), false);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next >= f.nbs.size()) {
        stack.pop_back();
        continue;
      }
      const Neighbor nb = f.nbs[f.next++];
      const int a = f.atom;
      if (nb.bond == parent_bond_[static_cast<std::size_t>(a)]) continue;
      if (visited_[static_cast<std::size_t>(nb.atom)]) {
        if (!closure_seen[static_cast<std::size_t>(nb.bond)]) {
          closure_seen[static_cast<std::size_t>(nb.bond)] = true;
          // nb.atom is an ancestor and opens the ring; a closes it.
          closures_[static_cast<std::size_t>(nb.atom)].push_back({a, nb.bond, true});
          closures_[static_cast<std::size_t>(a)].push_back({nb.atom, nb.bond, false});
        }
        continue;
      }
      visited_[static_cast<std::size_t>(nb.atom)] = true;
      parent_[static_cast<std::size_t>(nb.atom)] = a;
      parent_bond_[static_cast<std::size_t>(nb.atom)] = nb.bond;
      children_[static_cast<std::size_t>(a)].push_back(nb);
      order_.push_back(nb.atom);
      stack.push_back({nb.atom, sorted_neighbors(nb.atom), 0});
    }
    // Openers list their rings in the order partners are written later.
    std::vector<int> position(static_cast<std::size_t>(mol_.atom_count()), 0);
    for (std::size_t i = 0; i < order_.size(); ++i) position[static_cast<std::size_t>(order_[i])] = static_cast<int>(i);
    for (auto& list : closures_) {
      std::stable_sort(list.begin(), list.end(), [&](const Closure& x, const Closure& y) {
        if (x.opens != y.opens) return !x.opens;  // closings first
        return position[static_cast<std::size_t>(x.partner)] < position[static_cast<std::size_t>(y.partner)];
      });
    }
  }

  // Written direction of a tree bond: +1 when `sub` is written before `end`.
  int written_from(int end, int sub) const {
    return parent_[static_cast<std::size_t>(end)] == sub ? 1 : -1;
  }
  bool is_tree_bond(int a, int b) const {
    return parent_[static_cast<std::size_t>(a)] == b || parent_[static_cast<std::size_t>(b)] == a;
  }

  void assign_bond_directions() {
    dir_.assign(static_cast<std::size_t>(mol_.bond_count()), 0);
    std::vector<DoubleBondStereo> todo = mol_.double_bond_stereo();
    std::vector<int> position(static_cast<std::size_t>(mol_.atom_count()), 0);
    for (std::size_t i = 0; i < order_.size(); ++i) position[static_cast<std::size_t>(order_[i])] = static_cast<int>(i);
    auto pos = [&](int a) { return position[static_cast<std::size_t>(a)]; };
    // Orient every entry so `begin` is the end written first.
    for (auto& st : todo) {
      const Bond& db = mol_.bond(st.bond);
      if (pos(db.begin) > pos(db.end)) std::swap(st.begin_ref, st.end_ref);
    }
    auto first_end = [&](const DoubleBondStereo& st) {
      const Bond& db = mol_.bond(st.bond);
      return std::min(pos(db.begin), pos(db.end));
    };
    std::sort(todo.begin(), todo.end(),
              [&](const auto& x, const auto& y) { return first_end(x) < first_end(y); });

    // Side sign of substituent `sub` on double-bond end `end` for a char.
    auto sign_of = [&](int end, int sub, char c) { return written_from(end, sub) * (c == '/' ? 1 : -1); };
    auto char_for = [&](int end, int sub, int sign) {
      return sign * written_from(end, sub) > 0 ? '/' : '\\';
    };
    auto candidates = [&](int end, int other) {
      std::vector<Neighbor> out;
      for (const auto& nb : sorted_neighbors(end))
        if (nb.atom != other && is_tree_bond(end, nb.atom) && mol_.bond(nb.bond).order == BondOrder::Single)
          out.push_back(nb);
      return out;
    };
    auto substituents = [&](int end, int other) {
      int c = 0;
      for (const auto& nb : mol_.neighbors(end))
        if (nb.atom != other) ++c;
      return c;
    };

    for (const auto& st : todo) {
      const Bond& db = mol_.bond(st.bond);
      if (db.order != BondOrder::Double || !is_tree_bond(db.begin, db.end)) continue;
      const int e1 = pos(db.begin) < pos(db.end) ? db.begin : db.end;
      const int e2 = db.other(e1);
      const auto left = candidates(e1, e2);
      const auto right = candidates(e2, e1);
      if (left.empty() || right.empty()) continue;

      // Relative cis flag for a (left, right) substituent pair.
      auto relative_cis = [&](int l, int r) -> std::optional<bool> {
        bool cis = st.cis;
        if (l != st.begin_ref) {
          if (substituents(e1, e2) != 2) return std::nullopt;
          cis = !cis;
        }
        if (r != st.end_ref) {
          if (substituents(e2, e1) != 2) return std::nullopt;
          cis = !cis;
        }
        return cis;
      };

      bool done = false;
      for (const auto& l : left) {
        for (const auto& r : right) {
          const auto cis = relative_cis(l.atom, r.atom);
          if (!cis) continue;
          const char have_l = dir_[static_cast<std::size_t>(l.bond)];
          const int sign_l = have_l != 0 ? sign_of(e1, l.atom, have_l) : written_from(e1, l.atom);
          const int need = *cis ? sign_l : -sign_l;
          const char have_r = dir_[static_cast<std::size_t>(r.bond)];
          if (have_r != 0 && sign_of(e2, r.atom, have_r) != need) continue;
          dir_[static_cast<std::size_t>(l.bond)] = char_for(e1, l.atom, sign_l);
          dir_[static_cast<std::size_t>(r.bond)] = char_for(e2, r.atom, need);
          done = true;
          break;
        }
        if (done) break;
      }
      // No consistent pair: conjugated marks conflict and this configuration is dropped.
    }
  }

  std::string bond_symbol(int bond, int from, int to) const {
    const Bond& b = mol_.bond(bond);
    switch (b.order) {
      case BondOrder::Double: return "=";
      case BondOrder::Triple: return "#";
      case BondOrder::Aromatic:
        return mol_.atom(from).aromatic && mol_.atom(to).aromatic ? "" : ":";
      case BondOrder::Single:
        if (dir_.size() > static_cast<std::size_t>(bond) && dir_[static_cast<std::size_t>(bond)] != 0)
          return std::string(1, dir_[static_cast<std::size_t>(bond)]);
        return mol_.atom(from).aromatic && mol_.atom(to).aromatic ? "-" : "";
    }
    return "";
  }

  // Tetrahedral tag for the written neighbour order.
  std::optional<Chirality> output_chirality(int a) const {
    const Atom& atom = mol_.atom(a);
    if (atom.chirality == Chirality::None) return std::nullopt;
    std::vector<int> written;
    if (parent_[static_cast<std::size_t>(a)] >= 0) written.push_back(parent_[static_cast<std::size_t>(a)]);
    if (atom.hydrogen_count() > 0) written.push_back(kImplicitHydrogen);
    for (const auto& c : closures_[static_cast<std::size_t>(a)]) written.push_back(c.partner);
    for (const auto& ch : children_[static_cast<std::size_t>(a)]) written.push_back(ch.atom);
    const auto& ref = atom.stereo_refs;
    if (ref.size() != written.size()) return std::nullopt;
    // Parity of the permutation taking ref to written.
    std::vector<int> perm;
    for (int w : written) {
      auto it = std::find(ref.begin(), ref.end(), w);
      if (it == ref.end()) return std::nullopt;
      perm.push_back(static_cast<int>(it - ref.begin()));
    }
    int swaps = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
      while (perm[i] != static_cast<int>(i)) {
        std::swap(perm[i], perm[static_cast<std::size_t>(perm[i])]);
        ++swaps;
      }
    if (swaps % 2 == 0) return atom.chirality;
    return atom.chirality == Chirality::Clockwise ? Chirality::CounterClockwise : Chirality::Clockwise;
  }

  std::string atom_text(int a) const {
    const Atom& atom = mol_.atom(a);
    const auto chir = output_chirality(a);
    const int h = atom.hydrogen_count();
    const bool organic = in_organic_subset(atom.element);
    const bool plain = organic && atom.charge == 0 && !atom.isotope && atom.map_number == 0 && !chir &&
                       h == mol_.default_hydrogens(a, table_);
    std::string sym(element_symbol(atom.element));
    if (atom.aromatic) {
      for (auto& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    if (plain) return sym;
    std::string out = "[";
    if (atom.isotope) out += std::to_string(*atom.isotope);
    out += sym;
    if (chir) out += *chir == Chirality::Clockwise ? "@@" : "@";
    if (h > 0) {
      out += "H";
      if (h > 1) out += std::to_string(h);
    }
    if (atom.charge != 0) {
      out += atom.charge > 0 ? "+" : "-";
      if (std::abs(atom.charge) > 1) out += std::to_string(std::abs(atom.charge));
    }
    if (atom.map_number != 0) out += ":" + std::to_string(atom.map_number);
    out += "]";
    return out;
  }

  static std::string digit_text(int d) {
    return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
  }

  void emit(int root, std::string& out, std::vector<bool>& digits) {
    struct Item {
      int atom;
      int from;  // -1 for root
      int bond;
      bool branch;
      bool close_branch;  // sentinel
    };
    std::vector<Item> stack{{root, -1, -1, false, false}};
    while (!stack.empty()) {
      Item it = stack.back();
      stack.pop_back();
      if (it.close_branch) {
        out += ')';
        continue;
      }
      if (it.branch) out += '(';
      if (it.from >= 0) out += bond_symbol(it.bond, it.from, it.atom);
      out += atom_text(it.atom);
      std::vector<int> release;
      for (const auto& c : closures_[static_cast<std::size_t>(it.atom)]) {
        if (c.opens) {
          int d = 1;
          while (d < 100 && digits[static_cast<std::size_t>(d)]) ++d;
          if (d >= 100) throw std::runtime_error("too many open rings");
          digits[static_cast<std::size_t>(d)] = true;
          closure_digit_[static_cast<std::size_t>(c.bond)] = d;
          out += bond_symbol(c.bond, it.atom, c.partner);
          out += digit_text(d);
        } else {
          const int d = closure_digit_[static_cast<std::size_t>(c.bond)];
          out += digit_text(d);
          release.push_back(d);
        }
      }
      for (int d : release) digits[static_cast<std::size_t>(d)] = false;
      const auto& kids = children_[static_cast<std::size_t>(it.atom)];
      // Push in reverse: last child continues the chain, others are branches.
      for (std::size_t k = kids.size(); k-- > 0;) {
        const bool branch = k + 1 < kids.size();
        if (branch) stack.push_back({-1, -1, -1, false, true});
        stack.push_back({kids[k].atom, it.atom, kids[k].bond, branch, false});
      }
    }
  }

  struct Closure {
    int partner;
    int bond;
    bool opens;
  };

  const Molecule& mol_;
  const Ranks& ranks_;
  const ValenceTable& table_;
  std::vector<bool> visited_;
  std::vector<int> parent_;
  std::vector<int> parent_bond_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<Closure>> closures_;
  std::vector<int> order_;
  std::vector<char> dir_;
  std::vector<int> closure_digit_;
};

struct CanonSearch {
  const Molecule& mol;
  const ValenceTable& table;
  std::size_t leaf_budget;
  std::size_t leaves = 0;
  std::optional<std::string> best;

  void run(const Ranks& ranks) {
    Ranks r = refine(mol, ranks);
    const int n = static_cast<int>(r.size());
    if (class_count(r) == n) {
      ++leaves;
      std::string s = SmilesWriter(mol, r, table).write();
      if (!best || s < *best) best = std::move(s);
      return;
    }
    // First non-singleton cell in rank order.
    std::vector<int> size(static_cast<std::size_t>(n), 0);
    for (int x : r) ++size[static_cast<std::size_t>(x)];
    int cell = 0;
    while (size[static_cast<std::size_t>(cell)] < 2) ++cell;
    // Equal-ranked terminal atoms on one parent are interchangeable; try one.
    std::vector<int> tried_parent;
    for (int a = 0; a < n; ++a) {
      if (r[static_cast<std::size_t>(a)] != cell) continue;
      if (mol.degree(a) == 1) {
        const int p = mol.neighbors(a).front().atom;
        if (std::find(tried_parent.begin(), tried_parent.end(), p) != tried_parent.end()) continue;
        tried_parent.push_back(p);
      }
      if (leaves >= leaf_budget && best) return;
      std::vector<std::pair<int, int>> keys;
      for (int i = 0; i < n; ++i)
        keys.emplace_back(r[static_cast<std::size_t>(i)], (r[static_cast<std::size_t>(i)] == cell && i != a) ? 1 : 0);
      run(rank_by(keys));
    }
  }
};

}  // namespace detail

/// Canonical atom ranking for a single connected molecule, from invariant
/// refinement with exhaustive tie-breaking (smallest emitted string wins).
inline std::string canonical_component(const Molecule& part,
                                       const ValenceTable& table = ValenceTable::builtin(),
                                       std::size_t leaf_budget = 50000) {
  const RingInfo rings = find_rings(part);
  detail::CanonSearch search{part, table, leaf_budget, 0, std::nullopt};
  search.run(detail::initial_ranks(part, rings));
  return search.best.value_or(std::string{});
}

/// Canonical SMILES: depends only on the labelled graph (atoms, charges,
/// isotopes, H counts, bond orders, stereo marks), not on input atom order.
/// Aromaticity is re-perceived, so Kekulé and aromatic spellings agree.
/// Components are emitted in lexicographic order joined by '.'.
///
/// Throws InvalidMoleculeError when the molecule fails validate_molecule.
inline std::string canonical_smiles(const Molecule& mol,
                                    const ValenceTable& table = ValenceTable::builtin()) {
  const ValidityReport report = validate_molecule(mol, table);
  if (!report.is_valid())
    throw InvalidMoleculeError("canonical form undefined: " + report.failures.front().detail);
  const Molecule norm = normalize_aromaticity(mol, table);
  std::vector<std::string> parts;
  for (const auto& part : split_components(norm)) parts.push_back(canonical_component(part, table));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '.';
    out += parts[i];
  }
  return out;
}

inline std::string canonical_smiles(std::string_view smiles, ParseOptions opts = {},
                                    const ValenceTable& table = ValenceTable::builtin()) {
  return canonical_smiles(parse_smiles(smiles, opts), table);
}

}  // namespace mecheval::chem
