#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

#include "mecheval/chem/molecule.hpp"

namespace mecheval::chem {

/// Ring perception result. `rings` holds every shortest cycle through every
/// ring bond (deduplicated), which is independent of atom numbering; each
/// ring is a list of bond indices sorted ascending.
struct RingInfo {
  std::vector<std::vector<int>> rings;
  std::vector<bool> atom_in_ring;
  std::vector<bool> bond_in_ring;
  std::vector<int> smallest_ring;  // per atom, 0 when acyclic

  std::vector<int> ring_atoms(const Molecule& mol, std::size_t r) const {
    std::set<int> atoms;
    for (int b : rings[r]) {
      atoms.insert(mol.bond(b).begin);
      atoms.insert(mol.bond(b).end);
    }
    return {atoms.begin(), atoms.end()};
  }
};

namespace detail {

inline std::vector<bool> ring_bonds_by_bridges(const Molecule& mol) {
  const int n = mol.atom_count();
  std::vector<int> disc(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<bool> in_ring(static_cast<std::size_t>(mol.bond_count()), true);
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  for (int s = 0; s < n; ++s) {
    if (disc[static_cast<std::size_t>(s)] != -1) continue;
    std::vector<Frame> stack{{s, -1, 0}};
    disc[static_cast<std::size_t>(s)] = low[static_cast<std::size_t>(s)] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& nbs = mol.neighbors(f.atom);
      if (f.next < nbs.size()) {
        const Neighbor nb = nbs[f.next++];
        if (nb.bond == f.parent_bond) continue;
        auto& d = disc[static_cast<std::size_t>(nb.atom)];
        if (d == -1) {
          d = low[static_cast<std::size_t>(nb.atom)] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          low[static_cast<std::size_t>(f.atom)] =
              std::min(low[static_cast<std::size_t>(f.atom)], d);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int p = stack.back().atom;
          low[static_cast<std::size_t>(p)] =
              std::min(low[static_cast<std::size_t>(p)], low[static_cast<std::size_t>(done.atom)]);
          if (low[static_cast<std::size_t>(done.atom)] > disc[static_cast<std::size_t>(p)])
            in_ring[static_cast<std::size_t>(done.parent_bond)] = false;
        }
      }
    }
  }
  return in_ring;
}

// All shortest paths from `from` to `to` avoiding bond `skip`, as bond lists.
inline void shortest_cycles_through(const Molecule& mol, int skip,
                                    std::set<std::vector<int>>& out,
                                    std::size_t path_cap = 64) {
  const Bond& b = mol.bond(skip);
  const int from = b.begin, to = b.end;
  const int n = mol.atom_count();
  std::vector<int> dist(static_cast<std::size_t>(n), std::numeric_limits<int>::max());
  std::vector<int> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int a = queue[qi];
    if (a == to) break;
    for (const auto& nb : mol.neighbors(a)) {
      if (nb.bond == skip) continue;
      auto& d = dist[static_cast<std::size_t>(nb.atom)];
      if (d == std::numeric_limits<int>::max()) {
        d = dist[static_cast<std::size_t>(a)] + 1;
        queue.push_back(nb.atom);
      }
    }
  }
  if (dist[static_cast<std::size_t>(to)] == std::numeric_limits<int>::max()) return;
  std::vector<int> path{skip};
  std::size_t found = 0;
  auto walk = [&](auto&& self, int atom) -> void {
    if (found >= path_cap) return;
    if (atom == from) {
      std::vector<int> ring = path;
      std::sort(ring.begin(), ring.end());
      out.insert(std::move(ring));
      ++found;
      return;
    }
    const int d = dist[static_cast<std::size_t>(atom)];
    for (const auto& nb : mol.neighbors(atom)) {
      if (nb.bond == skip) continue;
      if (dist[static_cast<std::size_t>(nb.atom)] == d - 1) {
        path.push_back(nb.bond);
        self(self, nb.atom);
        path.pop_back();
      }
    }
  };
  walk(walk, to);
}

}  // namespace detail

inline RingInfo find_rings(const Molecule& mol) {
  RingInfo info;
  info.bond_in_ring = detail::ring_bonds_by_bridges(mol);
  info.atom_in_ring.assign(static_cast<std::size_t>(mol.atom_count()), false);
  info.smallest_ring.assign(static_cast<std::size_t>(mol.atom_count()), 0);
  std::set<std::vector<int>> rings;
  for (int b = 0; b < mol.bond_count(); ++b) {
    if (!info.bond_in_ring[static_cast<std::size_t>(b)]) continue;
    info.atom_in_ring[static_cast<std::size_t>(mol.bond(b).begin)] = true;
    info.atom_in_ring[static_cast<std::size_t>(mol.bond(b).end)] = true;
    detail::shortest_cycles_through(mol, b, rings);
  }
  info.rings.assign(rings.begin(), rings.end());
  std::stable_sort(info.rings.begin(), info.rings.end(),
                   [](const auto& x, const auto& y) { return x.size() < y.size(); });
  for (const auto& ring : info.rings) {
    const int size = static_cast<int>(ring.size());
    for (int bidx : ring) {
      for (int a : {mol.bond(bidx).begin, mol.bond(bidx).end}) {
        int& s = info.smallest_ring[static_cast<std::size_t>(a)];
        if (s == 0 || size < s) s = size;
      }
    }
  }
  return info;
}

}  // namespace mecheval::chem
