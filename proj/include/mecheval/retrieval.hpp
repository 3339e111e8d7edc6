#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mecheval/chem/canonical.hpp"
#include "mecheval/dataset_io.hpp"
#include "mecheval/fingerprint.hpp"

namespace mecheval {

class RetrievalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "reactants>>products" with components joined by '.', as written.
inline std::string reaction_string(const ReactionRecord& r) { return reaction_smiles(r.reactants_smiles, r.products_smiles); }

/// Reaction string with each side canonicalized as a whole, so component
/// order and atom order do not matter.
inline std::string canonical_reaction_string(const ReactionRecord& r) {
  auto side = [](const std::vector<std::string>& parts) {
    std::string joined;
    for (const auto& p : parts) joined += (joined.empty() ? "" : ".") + p;
    return chem::canonical_smiles(joined);
  };
  return side(r.reactants_smiles) + ">>" + side(r.products_smiles);
}

struct IndexEntry {
  std::string reaction_id;
  std::string reaction;
  std::string canonical;
  CountFingerprint fingerprint;
};

struct ReactionIndex {
  static constexpr int kFormatVersion = 1;
  int dimension = 2048;
  int radius = 2;
  std::vector<IndexEntry> entries;
};

struct RetrievalHit {
  std::string reaction_id;
  double similarity = 0.0;
};

/// Throws RetrievalError naming the first record whose reaction string does
/// not parse.
inline ReactionIndex build_index(const std::vector<ReactionRecord>& records, int dimension = 2048, int radius = 2) {
  ReactionIndex idx{dimension, radius, {}};
  for (const auto& r : records) {
    try {
      const std::string rxn = reaction_string(r);
      idx.entries.push_back({r.reaction_id, rxn, canonical_reaction_string(r), drfp(rxn, dimension, radius)});
    } catch (const std::exception& e) {
      throw RetrievalError(r.reaction_id + ": " + e.what());
    }
  }
  return idx;
}

struct RetrievalOptions {
  int k = 3;
  std::set<std::string> exclude_ids;
  // Skip candidates whose canonical reaction equals the query's, besides the
  // query's own id.
  bool exclude_same_reaction = true;
};

/// Count-Tanimoto ranking, highest first, ties by reaction_id.
inline std::vector<RetrievalHit> top_k_similar(const ReactionIndex& index, const ReactionRecord& query,
                                               const RetrievalOptions& opts = {}) {
  if (opts.k < 1) throw std::invalid_argument("k must be at least 1");
  const std::string rxn = reaction_string(query);
  const CountFingerprint q = drfp(rxn, index.dimension, index.radius);
  const std::string canon = opts.exclude_same_reaction ? canonical_reaction_string(query) : std::string{};

  std::vector<RetrievalHit> hits;
  for (const auto& e : index.entries) {
    if (e.reaction_id == query.reaction_id || opts.exclude_ids.count(e.reaction_id)) continue;
    if (opts.exclude_same_reaction && e.canonical == canon) continue;
    hits.push_back({e.reaction_id, tanimoto_counts(q, e.fingerprint)});
  }
  if (hits.empty()) throw RetrievalError("no candidates left after exclusion");
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.reaction_id < b.reaction_id;
  });
  if (static_cast<int>(hits.size()) > opts.k) hits.resize(static_cast<std::size_t>(opts.k));
  return hits;
}

inline nlohmann::json index_to_json(const ReactionIndex& idx) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : idx.entries) {
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& [b, c] : e.fingerprint.buckets()) buckets.push_back({b, c});
    entries.push_back({{"reaction_id", e.reaction_id}, {"reaction", e.reaction}, {"canonical", e.canonical}, {"buckets", buckets}});
  }
  return {{"format_version", ReactionIndex::kFormatVersion},
          {"dimension", idx.dimension},
          {"radius", idx.radius},
          {"entries", entries}};
}

inline ReactionIndex index_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format_version", 0) != ReactionIndex::kFormatVersion)
    throw RetrievalError("unsupported index format");
  ReactionIndex idx;
  try {
    idx.dimension = j.at("dimension").get<int>();
    idx.radius = j.at("radius").get<int>();
    for (const auto& e : j.at("entries")) {
      CountFingerprint fp(idx.dimension);
      for (const auto& bc : e.at("buckets")) fp.add_bucket(bc.at(0).get<std::uint32_t>(), bc.at(1).get<std::int64_t>());
      idx.entries.push_back({e.at("reaction_id").get<std::string>(), e.at("reaction").get<std::string>(),
                             e.at("canonical").get<std::string>(), std::move(fp)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw RetrievalError(std::string("malformed index: ") + e.what());
  }
  return idx;
}

inline void save_index(const ReactionIndex& idx, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << index_to_json(idx).dump() << '\n';
}

inline ReactionIndex load_index(const std::string& path) {
  auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw RetrievalError(path + " is not JSON");
  return index_from_json(j);
}

}  // namespace mecheval
