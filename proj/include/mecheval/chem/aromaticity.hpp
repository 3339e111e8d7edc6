#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mecheval/chem/elements.hpp"
#include "mecheval/chem/molecule.hpp"
#include "mecheval/chem/rings.hpp"

namespace mecheval::chem {

/// Whether an aromatic atom still needs one double bond to reach a permitted
/// valence (pyridine n: yes; pyrrole [nH], furan o: no).
inline bool needs_pi_bond(const Molecule& mol, int i, const ValenceTable& table) {
  const Atom& a = mol.atom(i);
  const int used = mol.bond_valence(i) + a.hydrogen_count();
  auto v = table.fit(a.element, a.charge, used);
  return v && *v > used;
}

/// Replaces aromatic bonds with an alternating single/double assignment.
///
/// Atoms that need a pi bond are matched over aromatic bonds; the assignment
/// fails when no perfect matching exists or an aromatic atom is not in a ring.
/// On success aromatic flags are cleared. On failure `mol` is left untouched
/// and a description is returned.
inline std::optional<std::string> kekulize(Molecule& mol,
                                           const ValenceTable& table = ValenceTable::builtin()) {
  const int n = mol.atom_count();
  bool any = false;
  for (const auto& a : mol.atoms()) any = any || a.aromatic;
  for (const auto& b : mol.bonds()) any = any || b.order == BondOrder::Aromatic;
  if (!any) return std::nullopt;

  const RingInfo rings = find_rings(mol);
  std::vector<bool> need(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const Atom& a = mol.atom(i);
    if (!a.aromatic) continue;
    if (!rings.atom_in_ring[static_cast<std::size_t>(i)])
      return "aromatic atom " + std::to_string(i) + " is not in a ring";
    need[static_cast<std::size_t>(i)] = needs_pi_bond(mol, i, table);
  }

  // Candidate edges: aromatic bonds joining two atoms that both need a pi bond.
  std::vector<std::vector<Neighbor>> cand(static_cast<std::size_t>(n));
  for (int b = 0; b < mol.bond_count(); ++b) {
    const Bond& bond = mol.bond(b);
    if (bond.order != BondOrder::Aromatic) continue;
    if (need[static_cast<std::size_t>(bond.begin)] && need[static_cast<std::size_t>(bond.end)]) {
      cand[static_cast<std::size_t>(bond.begin)].push_back({bond.end, b});
      cand[static_cast<std::size_t>(bond.end)].push_back({bond.begin, b});
    }
  }

  std::vector<int> mate(static_cast<std::size_t>(n), -1);
  std::vector<int> chosen;
  auto open_count = [&](int a) {
    int c = 0;
    for (const auto& nb : cand[static_cast<std::size_t>(a)])
      if (mate[static_cast<std::size_t>(nb.atom)] == -1) ++c;
    return c;
  };
  std::size_t steps = 0;
  // Most-constrained-first backtracking; molecules keep this near linear.
  auto solve = [&](auto&& self) -> bool {
    if (++steps > 2'000'000) return false;
    int pick = -1, best = 1 << 30;
    for (int i = 0; i < n; ++i) {
      if (!need[static_cast<std::size_t>(i)] || mate[static_cast<std::size_t>(i)] != -1) continue;
      const int c = open_count(i);
      if (c < best) {
        best = c;
        pick = i;
        if (c == 0) break;
      }
    }
    if (pick == -1) return true;
    if (best == 0) return false;
    for (const auto& nb : cand[static_cast<std::size_t>(pick)]) {
      if (mate[static_cast<std::size_t>(nb.atom)] != -1) continue;
      mate[static_cast<std::size_t>(pick)] = nb.atom;
      mate[static_cast<std::size_t>(nb.atom)] = pick;
      chosen.push_back(nb.bond);
      if (self(self)) return true;
      chosen.pop_back();
      mate[static_cast<std::size_t>(pick)] = -1;
      mate[static_cast<std::size_t>(nb.atom)] = -1;
    }
    return false;
  };
  if (!solve(solve)) return std::string("no alternating single/double assignment for the aromatic system");

  for (int b = 0; b < mol.bond_count(); ++b)
    if (mol.bond(b).order == BondOrder::Aromatic) mol.bond(b).order = BondOrder::Single;
  for (int b : chosen) mol.bond(b).order = BondOrder::Double;
  for (int i = 0; i < n; ++i) mol.atom(i).aromatic = false;
  return std::nullopt;
}

namespace detail {

inline int outer_electrons(int z) {
  switch (z) {
    case 5: return 3;
    case 6: return 4;
    case 7: case 15: case 33: return 5;
    case 8: case 16: case 34: return 6;
    default: return -1;
  }
}

// Pi electrons an atom donates to a ring system, or -1 when it cannot take
// part (sp3 centre, triple bond, exocyclic C=C, unsupported element).
inline int pi_electrons(const Molecule& mol, const RingInfo& rings, int i) {
  const Atom& a = mol.atom(i);
  if (!supports_aromaticity(a.element)) return -1;
  int ring_double = 0, exo_double = 0, exo_hetero = 0;
  for (const auto& nb : mol.neighbors(i)) {
    const BondOrder o = mol.bond(nb.bond).order;
    if (o == BondOrder::Triple) return -1;
    if (o != BondOrder::Double) continue;
    if (rings.bond_in_ring[static_cast<std::size_t>(nb.bond)]) {
      ++ring_double;
    } else {
      ++exo_double;
      const int z = mol.atom(nb.atom).element;
      if (z == 7 || z == 8 || z == 16) ++exo_hetero;
    }
  }
  if (ring_double + exo_double > 1) return -1;
  if (ring_double == 1) return 1;
  if (exo_double == 1) return exo_hetero == 1 ? 0 : -1;
  const int ve = outer_electrons(a.element);
  if (ve < 0) return -1;
  const int bonds = mol.bond_valence(i) + a.hydrogen_count();
  const int lone = ve - a.charge - bonds;
  if (lone >= 2 && bonds <= 3) return 2;
  if (lone == 0 && 2 * bonds < 8) return 0;
  return -1;
}

}  // namespace detail

/// Marks atoms and bonds of Hückel (4n+2) rings as aromatic on a Kekulé
/// structure. Single rings are tested first, then pairs of rings fused
/// through a shared bond.
inline void perceive_aromaticity(Molecule& mol) {
  const RingInfo rings = find_rings(mol);
  const int n = mol.atom_count();
  std::vector<int> pi(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i)
    if (rings.atom_in_ring[static_cast<std::size_t>(i)]) pi[static_cast<std::size_t>(i)] = detail::pi_electrons(mol, rings, i);

  std::set<int> arom_bonds;
  auto test = [&](const std::vector<int>& bonds) {
    std::set<int> atoms;
    for (int b : bonds) {
      atoms.insert(mol.bond(b).begin);
      atoms.insert(mol.bond(b).end);
    }
    int total = 0;
    for (int a : atoms) {
      const int e = pi[static_cast<std::size_t>(a)];
      if (e < 0) return false;
      total += e;
    }
    return total % 4 == 2;
  };
  for (const auto& ring : rings.rings)
    if (test(ring)) arom_bonds.insert(ring.begin(), ring.end());
  for (std::size_t x = 0; x < rings.rings.size(); ++x) {
    for (std::size_t y = x + 1; y < rings.rings.size(); ++y) {
      const auto& rx = rings.rings[x];
      const auto& ry = rings.rings[y];
      std::vector<int> shared;
      std::set_intersection(rx.begin(), rx.end(), ry.begin(), ry.end(), std::back_inserter(shared));
      if (shared.empty()) continue;
      // Union minus the shared bonds is the envelope of the fused pair.
      std::vector<int> env;
      std::set_symmetric_difference(rx.begin(), rx.end(), ry.begin(), ry.end(),
                                    std::back_inserter(env));
      if (test(env)) {
        arom_bonds.insert(rx.begin(), rx.end());
        arom_bonds.insert(ry.begin(), ry.end());
      }
    }
  }
  for (int b : arom_bonds) {
    Bond& bond = mol.bond(b);
    bond.order = BondOrder::Aromatic;
    mol.atom(bond.begin).aromatic = true;
    mol.atom(bond.end).aromatic = true;
  }
}

}  // namespace mecheval::chem
