#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mecheval/chem/canonical.hpp"

namespace mecheval {

/// Stable 64-bit mixer (splitmix64 finalizer). Fingerprint bits depend only
/// on this function, never on std::hash.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

struct FingerprintParams {
  int radius = 2;
  int nbits = 2048;
};

class BitFingerprint {
 public:
  BitFingerprint(int nbits, int radius) : nbits_(nbits), radius_(radius), words_((static_cast<std::size_t>(nbits) + 63) / 64, 0) {
    if (nbits <= 0 || !std::has_single_bit(static_cast<unsigned>(nbits)))
      throw std::invalid_argument("nbits must be a power of two");
  }

  void set(std::uint64_t feature) {
    const auto bit = feature % static_cast<std::uint64_t>(nbits_);
    words_[bit / 64] |= std::uint64_t{1} << (bit % 64);
  }
  bool test(int bit) const {
    return (words_[static_cast<std::size_t>(bit) / 64] >> (bit % 64)) & 1U;
  }
  int popcount() const {
    int n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }
  int nbits() const { return nbits_; }
  int radius() const { return radius_; }
  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const BitFingerprint&, const BitFingerprint&) = default;

 private:
  int nbits_;
  int radius_;
  std::vector<std::uint64_t> words_;
};

/// Sparse signed counts over buckets 0..dimension-1. Zero counts are never stored.
class CountFingerprint {
 public:
  explicit CountFingerprint(int dimension = 2048) : dimension_(dimension) {
    if (dimension <= 0) throw std::invalid_argument("dimension must be positive");
  }

  void add(std::uint64_t feature, std::int64_t delta) {
    const auto bucket = static_cast<std::uint32_t>(feature % static_cast<std::uint64_t>(dimension_));
    add_bucket(bucket, delta);
  }
  void add_bucket(std::uint32_t bucket, std::int64_t delta) {
    if (bucket >= static_cast<std::uint32_t>(dimension_)) throw std::out_of_range("bucket out of range");
    auto& v = buckets_[bucket];
    v += delta;
    if (v == 0) buckets_.erase(bucket);
  }

  int dimension() const { return dimension_; }
  bool empty() const { return buckets_.empty(); }
  const std::map<std::uint32_t, std::int64_t>& buckets() const { return buckets_; }

  CountFingerprint negated() const {
    CountFingerprint out(dimension_);
    for (auto [b, v] : buckets_) out.buckets_[b] = -v;
    return out;
  }

  friend bool operator==(const CountFingerprint&, const CountFingerprint&) = default;

 private:
  int dimension_;
  std::map<std::uint32_t, std::int64_t> buckets_;
};

namespace detail {

// Circular environment identifiers with duplicate-environment removal: an
// environment covering the same bond set as one already emitted is dropped.
// Input must already be aromaticity-normalized.
inline std::vector<std::uint64_t> circular_features(const chem::Molecule& mol, int radius) {
  const int n = mol.atom_count();
  const int nb = mol.bond_count();
  const chem::RingInfo rings = chem::find_rings(mol);
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const chem::Atom& a = mol.atom(i);
    std::uint64_t h = 0x51ed27f3ULL;
    for (std::int64_t v : {std::int64_t{a.element}, std::int64_t{mol.degree(i)},
                           std::int64_t{a.hydrogen_count()}, std::int64_t{a.charge},
                           std::int64_t{a.isotope.value_or(0)},
                           std::int64_t{rings.atom_in_ring[static_cast<std::size_t>(i)] ? 1 : 0}})
      h = hash_combine(h, static_cast<std::uint64_t>(v));
    ids[static_cast<std::size_t>(i)] = h;
  }
  std::vector<std::uint64_t> features(ids);

  using Env = std::vector<bool>;
  std::vector<Env> env(static_cast<std::size_t>(n), Env(static_cast<std::size_t>(nb), false));
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  std::set<Env> seen{Env(static_cast<std::size_t>(nb), false)};  // isolated atoms never grow
  for (int layer = 1; layer <= radius; ++layer) {
    std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
    std::vector<Env> next_env = env;
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> nbs;
      for (const auto& x : mol.neighbors(i)) {
        nbs.emplace_back(static_cast<std::uint64_t>(mol.bond(x.bond).order), ids[static_cast<std::size_t>(x.atom)]);
        auto& e = next_env[static_cast<std::size_t>(i)];
        e[static_cast<std::size_t>(x.bond)] = true;
        const auto& other = env[static_cast<std::size_t>(x.atom)];
        for (std::size_t b = 0; b < other.size(); ++b)
          if (other[b]) e[b] = true;
      }
      std::sort(nbs.begin(), nbs.end());
      std::uint64_t h = hash_combine(static_cast<std::uint64_t>(layer), ids[static_cast<std::size_t>(i)]);
      for (auto [bo, id] : nbs) h = hash_combine(hash_combine(h, bo), id);
      next[static_cast<std::size_t>(i)] = h;
    }
    // Per bond set keep the smallest identifier; drop sets seen earlier.
    std::map<Env, std::pair<std::uint64_t, std::vector<int>>> round;
    for (int i = 0; i < n; ++i) {
      if (!alive[static_cast<std::size_t>(i)]) continue;
      const Env& e = next_env[static_cast<std::size_t>(i)];
      auto [it, fresh] = round.try_emplace(e, next[static_cast<std::size_t>(i)], std::vector<int>{i});
      if (!fresh) {
        it->second.first = std::min(it->second.first, next[static_cast<std::size_t>(i)]);
        it->second.second.push_back(i);
      }
    }
    for (auto& [e, entry] : round) {
      if (seen.count(e)) {
        for (int i : entry.second) alive[static_cast<std::size_t>(i)] = false;
        continue;
      }
      seen.insert(e);
      features.push_back(entry.first);
      for (int i : entry.second)
        if (next[static_cast<std::size_t>(i)] != entry.first) alive[static_cast<std::size_t>(i)] = false;
    }
    ids = std::move(next);
    env = std::move(next_env);
  }
  return features;
}

inline chem::Molecule prepared(const chem::Molecule& mol) {
  const auto report = chem::validate_molecule(mol);
  if (!report.is_valid())
    throw chem::InvalidMoleculeError("fingerprint of invalid molecule: " + report.failures.front().detail);
  return chem::normalize_aromaticity(mol);
}

}  // namespace detail

/// Distinct circular feature identifiers before folding, sorted.
inline std::vector<std::uint64_t> morgan_features(const chem::Molecule& mol, int radius = 2) {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  auto f = detail::circular_features(detail::prepared(mol), radius);
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

/// Morgan-style bit fingerprint. Kekulé and aromatic spellings of one
/// structure give the same bits.
inline BitFingerprint morgan_fingerprint(const chem::Molecule& mol, int radius = 2, int nbits = 2048) {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  BitFingerprint fp(nbits, radius);
  for (auto f : detail::circular_features(detail::prepared(mol), radius)) fp.set(f);
  return fp;
}

inline BitFingerprint morgan_fingerprint(std::string_view smiles, int radius = 2, int nbits = 2048) {
  return morgan_fingerprint(chem::parse_smiles(smiles), radius, nbits);
}

inline double tanimoto_bits(const BitFingerprint& a, const BitFingerprint& b) {
  if (a.nbits() != b.nbits()) throw std::invalid_argument("fingerprint length mismatch");
  int both = 0, any = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += std::popcount(a.words()[i] & b.words()[i]);
    any += std::popcount(a.words()[i] | b.words()[i]);
  }
  return any == 0 ? 1.0 : static_cast<double>(both) / any;
}

class SimilarityGate {
 public:
  explicit SimilarityGate(double tau = 0.60) : tau_(tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0,1]");
  }
  double tau() const { return tau_; }
  double apply(double t) const { return t >= tau_ ? t : 0.0; }

 private:
  double tau_;
};

/// Gated similarity between a gold and a predicted intermediate. An invalid
/// prediction scores 0; identical canonical forms score 1. Throws when the
/// gold side is invalid.
inline double gated_similarity(std::string_view gold, std::string_view pred, const SimilarityGate& gate = SimilarityGate{},
                               const FingerprintParams& params = {}) {
  const std::string g = chem::canonical_smiles(gold);
  std::string p;
  try {
    if (!chem::is_valid_smiles(pred)) return 0.0;
    p = chem::canonical_smiles(pred);
  } catch (const std::exception&) {
    return 0.0;
  }
  if (g == p) return 1.0;
  return gate.apply(tanimoto_bits(morgan_fingerprint(chem::parse_smiles(g), params.radius, params.nbits),
                                  morgan_fingerprint(chem::parse_smiles(p), params.radius, params.nbits)));
}

/// "r1.r2>>p1.p2" from component lists; each component must parse.
inline std::string reaction_smiles(const std::vector<std::string>& reactants,
                                   const std::vector<std::string>& products) {
  if (reactants.empty()) throw std::invalid_argument("reaction needs at least one reactant");
  if (products.empty()) throw std::invalid_argument("reaction needs at least one product");
  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      chem::parse_smiles(parts[i]);
      if (i) out += '.';
      out += parts[i];
    }
    return out;
  };
  return join(reactants) + ">>" + join(products);
}

struct ReactionSides {
  std::string reactants;
  std::string products;
};

inline ReactionSides split_reaction(std::string_view reaction) {
  const auto pos = reaction.find(">>");
  if (pos == std::string_view::npos || reaction.find('>', pos + 2) != std::string_view::npos ||
      reaction.substr(0, pos).find('>') != std::string_view::npos)
    throw std::invalid_argument("malformed reaction string: expected one '>>'");
  ReactionSides s{std::string(chem::detail::trim(reaction.substr(0, pos))),
                  std::string(chem::detail::trim(reaction.substr(pos + 2)))};
  if (s.reactants.empty() || s.products.empty()) throw std::invalid_argument("malformed reaction string: empty side");
  return s;
}

/// Difference fingerprint: product feature counts minus reactant feature
/// counts, folded into `dimension` buckets.
inline CountFingerprint drfp(std::string_view reaction, int dimension = 2048, int radius = 2) {
  const ReactionSides sides = split_reaction(reaction);
  CountFingerprint fp(dimension);
  for (auto f : detail::circular_features(detail::prepared(chem::parse_smiles(sides.products)), radius)) fp.add(f, 1);
  for (auto f : detail::circular_features(detail::prepared(chem::parse_smiles(sides.reactants)), radius)) fp.add(f, -1);
  return fp;
}

inline double tanimoto_counts(const CountFingerprint& a, const CountFingerprint& b) {
  if (a.dimension() != b.dimension()) throw std::invalid_argument("fingerprint dimension mismatch");
  std::int64_t lo = 0, hi = 0;
  auto ia = a.buckets().begin();
  auto ib = b.buckets().begin();
  while (ia != a.buckets().end() || ib != b.buckets().end()) {
    if (ib == b.buckets().end() || (ia != a.buckets().end() && ia->first < ib->first)) {
      hi += std::llabs(ia->second);
      ++ia;
    } else if (ia == a.buckets().end() || ib->first < ia->first) {
      hi += std::llabs(ib->second);
      ++ib;
    } else {
      lo += std::min(std::llabs(ia->second), std::llabs(ib->second));
      hi += std::max(std::llabs(ia->second), std::llabs(ib->second));
      ++ia;
      ++ib;
    }
  }
  return hi == 0 ? 1.0 : static_cast<double>(lo) / static_cast<double>(hi);
}

}  // namespace mecheval
