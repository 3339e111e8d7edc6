#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mecheval/chem/canonical.hpp"
#include "mecheval/chem/validity.hpp"
#include "mecheval/fingerprint.hpp"

namespace mecheval {

// Label carried by predicted steps whose type or subtype is not in the
// taxonomy. Taxonomy names cannot contain '<', so it never equals a gold label.
inline constexpr std::string_view kOutOfVocabulary = "<oov>";

struct GoldStep {
  std::string type;
  std::string subtype;
  std::string canonical_intermediate;
  std::optional<double> weight;
};

struct PredStep {
  std::string type;
  std::string subtype;
  std::string intermediate;
  bool parse_ok = false;
  std::optional<std::string> canonical_intermediate;  // set iff parse_ok
};

/// Canonicalizes the gold intermediate; throws chem::InvalidMoleculeError
/// or chem::ParseError when it is not a valid molecule.
inline GoldStep make_gold_step(std::string type, std::string subtype, std::string_view smiles,
                               std::optional<double> weight) {
  return {std::move(type), std::move(subtype), chem::canonical_smiles(smiles), weight};
}

/// Never throws; an unusable SMILES leaves parse_ok false.
inline PredStep make_pred_step(std::string type, std::string subtype, std::string smiles) {
  PredStep p{std::move(type), std::move(subtype), std::move(smiles), false, std::nullopt};
  try {
    if (chem::is_valid_smiles(p.intermediate)) {
      p.canonical_intermediate = chem::canonical_smiles(p.intermediate);
      p.parse_ok = true;
    }
  } catch (const std::exception&) {
  }
  return p;
}

enum class Tag { match, type_mismatch, skip_gold, skip_pred };

inline std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::match: return "match";
    case Tag::type_mismatch: return "type_mismatch";
    case Tag::skip_gold: return "skip_gold";
    case Tag::skip_pred: return "skip_pred";
  }
  return "skip_pred";
}

inline int rank_of(Tag t) {
  switch (t) {
    case Tag::match: return 3;
    case Tag::type_mismatch: return 2;
    default: return 1;
  }
}

enum class TiePolicy {
  pseudocode,  // (total, partial, rank_sum, penalty)
  prose,       // (total, partial, -mismatches, -gaps)
};

struct AlignConfig {
  double tau = 0.60;
  double epsilon = 1e-6;
  TiePolicy tie_policy = TiePolicy::pseudocode;
  FingerprintParams fingerprint{};
};

struct ScoreKey {
  double total = 0.0;
  double partial = 0.0;
  int rank_sum = 0;
  double penalty = 0.0;
};

struct AlignedAction {
  Tag tag;
  std::optional<int> gold_index;  // 1-based
  std::optional<int> pred_index;  // 1-based
  double s_tot = 0.0;
  double s_par = 0.0;
  double similarity = 0.0;
};

struct AlignmentResult {
  std::vector<AlignedAction> actions;
  ScoreKey key;

  int count(Tag t) const {
    int n = 0;
    for (const auto& a : actions) n += a.tag == t;
    return n;
  }
};

namespace detail {

// Credits are accumulated in integer units of 2^-40 so that sums are exact
// and the DP and the brute-force enumeration compare keys bit for bit.
inline constexpr double kCreditScale = 1099511627776.0;

inline std::int64_t quantize(double x) { return std::llround(x * kCreditScale); }
inline double dequantize(std::int64_t q) { return static_cast<double>(q) / kCreditScale; }

struct PairScore {
  bool same_label = false;
  std::int64_t tot = 0;
  std::int64_t par = 0;
  double similarity = 0.0;
};

struct ScoreTable {
  int n = 0;
  int m = 0;
  std::vector<PairScore> cells;  // n * m, row-major by gold index
  const PairScore& at(int i, int j) const { return cells[static_cast<std::size_t>(i * m + j)]; }
};

inline ScoreTable score_pairs(const std::vector<GoldStep>& gold, const std::vector<PredStep>& pred,
                              const AlignConfig& cfg) {
  if (gold.empty()) throw std::invalid_argument("gold mechanism is empty");
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (!gold[k].weight) throw std::invalid_argument("gold step " + std::to_string(k + 1) + " has no weight");
    if (!(*gold[k].weight >= 0.0)) throw std::invalid_argument("gold step " + std::to_string(k + 1) + " has a negative weight");
  }
  const SimilarityGate gate(cfg.tau);
  const auto& fp = cfg.fingerprint;
  std::vector<std::optional<BitFingerprint>> gfp(gold.size()), pfp(pred.size());
  auto gold_fp = [&](std::size_t i) -> const BitFingerprint& {
    if (!gfp[i]) gfp[i] = morgan_fingerprint(gold[i].canonical_intermediate, fp.radius, fp.nbits);
    return *gfp[i];
  };
  auto pred_fp = [&](std::size_t j) -> const BitFingerprint& {
    if (!pfp[j]) pfp[j] = morgan_fingerprint(*pred[j].canonical_intermediate, fp.radius, fp.nbits);
    return *pfp[j];
  };

  ScoreTable t{static_cast<int>(gold.size()), static_cast<int>(pred.size()), {}};
  t.cells.resize(gold.size() * pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      PairScore& c = t.cells[i * pred.size() + j];
      c.same_label = gold[i].subtype == pred[j].subtype;
      if (!c.same_label || !pred[j].canonical_intermediate) continue;
      const bool exact = *pred[j].canonical_intermediate == gold[i].canonical_intermediate;
      c.similarity = exact ? 1.0 : gate.apply(tanimoto_bits(gold_fp(i), pred_fp(j)));
      const double w = *gold[i].weight;
      c.tot = exact ? quantize(w) : 0;
      c.par = quantize(w * c.similarity);
    }
  }
  return t;
}

// Lexicographic key with the tie components chosen by the policy.
struct ExactKey {
  std::int64_t tot = 0;
  std::int64_t par = 0;
  std::int64_t c3 = 0;
  std::int64_t c4 = 0;
  auto tuple() const { return std::tie(tot, par, c3, c4); }
  bool operator<(const ExactKey& o) const { return tuple() < o.tuple(); }
  bool operator==(const ExactKey& o) const { return tuple() == o.tuple(); }
  ExactKey operator+(const ExactKey& o) const { return {tot + o.tot, par + o.par, c3 + o.c3, c4 + o.c4}; }
};

inline ExactKey step_key(Tag tag, const PairScore* cell, TiePolicy policy) {
  ExactKey k;
  if (tag == Tag::match) {
    k.tot = cell->tot;
    k.par = cell->par;
  }
  if (policy == TiePolicy::pseudocode) {
    k.c3 = rank_of(tag);
    k.c4 = tag == Tag::match ? 0 : -1;
  } else {
    k.c3 = tag == Tag::type_mismatch ? -1 : 0;
    k.c4 = (tag == Tag::skip_gold || tag == Tag::skip_pred) ? -1 : 0;
  }
  return k;
}

inline AlignmentResult finish(const std::vector<std::tuple<Tag, int, int>>& path, const ScoreTable& t,
                              const AlignConfig& cfg) {
  AlignmentResult r;
  std::int64_t tot = 0, par = 0;
  int nonmatch = 0;
  for (const auto& [tag, i, j] : path) {
    AlignedAction a{tag, std::nullopt, std::nullopt, 0.0, 0.0, 0.0};
    if (tag != Tag::skip_pred) a.gold_index = i + 1;
    if (tag != Tag::skip_gold) a.pred_index = j + 1;
    if (tag == Tag::match) {
      const PairScore& c = t.at(i, j);
      a.s_tot = dequantize(c.tot);
      a.s_par = dequantize(c.par);
      a.similarity = c.similarity;
      tot += c.tot;
      par += c.par;
    } else {
      ++nonmatch;
    }
    r.key.rank_sum += rank_of(tag);
    r.actions.push_back(a);
  }
  r.key.total = dequantize(tot);
  r.key.partial = dequantize(par);
  r.key.penalty = -cfg.epsilon * nonmatch;
  return r;
}

}  // namespace detail

/// Global alignment of a predicted mechanism against the gold one. Diagonal
/// moves between steps with equal subtype labels are matches and earn the
/// gold weight (exact intermediate) and weight * sigma (gated similarity);
/// unequal labels give a zero-credit type_mismatch. Among equal keys the
/// traceback prefers match/type_mismatch, then skip_gold, then skip_pred.
inline AlignmentResult align(const std::vector<GoldStep>& gold, const std::vector<PredStep>& pred,
                             const AlignConfig& cfg = {}) {
  using detail::ExactKey;
  const detail::ScoreTable t = detail::score_pairs(gold, pred, cfg);
  const int n = t.n, m = t.m;
  auto idx = [m](int i, int j) { return static_cast<std::size_t>(i * (m + 1) + j); };
  auto diag_tag = [&](int i, int j) { return t.at(i, j).same_label ? Tag::match : Tag::type_mismatch; };
  auto diag_key = [&](int i, int j) { return detail::step_key(diag_tag(i, j), &t.at(i, j), cfg.tie_policy); };
  const ExactKey gap_gold = detail::step_key(Tag::skip_gold, nullptr, cfg.tie_policy);
  const ExactKey gap_pred = detail::step_key(Tag::skip_pred, nullptr, cfg.tie_policy);

  std::vector<ExactKey> dp(static_cast<std::size_t>((n + 1) * (m + 1)));
  for (int i = 1; i <= n; ++i) dp[idx(i, 0)] = dp[idx(i - 1, 0)] + gap_gold;
  for (int j = 1; j <= m; ++j) dp[idx(0, j)] = dp[idx(0, j - 1)] + gap_pred;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      ExactKey best = dp[idx(i - 1, j - 1)] + diag_key(i - 1, j - 1);
      if (ExactKey k = dp[idx(i - 1, j)] + gap_gold; best < k) best = k;
      if (ExactKey k = dp[idx(i, j - 1)] + gap_pred; best < k) best = k;
      dp[idx(i, j)] = best;
    }
  }

  std::vector<std::tuple<Tag, int, int>> path;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    const ExactKey& here = dp[idx(i, j)];
    if (i > 0 && j > 0 && dp[idx(i - 1, j - 1)] + diag_key(i - 1, j - 1) == here) {
      path.emplace_back(diag_tag(i - 1, j - 1), i - 1, j - 1);
      --i, --j;
    } else if (i > 0 && dp[idx(i - 1, j)] + gap_gold == here) {
      path.emplace_back(Tag::skip_gold, i - 1, j);
      --i;
    } else {
      path.emplace_back(Tag::skip_pred, i, j - 1);
      --j;
    }
  }
  std::reverse(path.begin(), path.end());
  return detail::finish(path, t, cfg);
}

/// Scores every monotone alignment explicitly and keeps the lexicographic
/// maximum. Among equal keys it keeps the path whose actions, read from the
/// end, rank first under match/type_mismatch < skip_gold < skip_pred, which
/// is the path the DP traceback reports.
inline AlignmentResult oracle_align(const std::vector<GoldStep>& gold, const std::vector<PredStep>& pred,
                                    const AlignConfig& cfg = {}) {
  using detail::ExactKey;
  if (gold.size() > 8 || pred.size() > 8) throw std::invalid_argument("oracle_align is limited to 8 steps per side");
  const detail::ScoreTable t = detail::score_pairs(gold, pred, cfg);
  using Path = std::vector<std::tuple<Tag, int, int>>;

  auto order = [](Tag tag) { return tag == Tag::skip_gold ? 1 : tag == Tag::skip_pred ? 2 : 0; };
  auto reverse_less = [&](const Path& a, const Path& b) {
    for (auto ia = a.rbegin(), ib = b.rbegin(); ia != a.rend() && ib != b.rend(); ++ia, ++ib) {
      const int oa = order(std::get<0>(*ia)), ob = order(std::get<0>(*ib));
      if (oa != ob) return oa < ob;
    }
    return a.size() < b.size();
  };

  std::optional<std::pair<ExactKey, Path>> best;
  Path cur;
  auto visit = [&](auto&& self, int i, int j) -> void {
    if (i == t.n && j == t.m) {
      ExactKey k;
      for (const auto& [tag, gi, pj] : cur)
        k = k + detail::step_key(tag, tag == Tag::match ? &t.at(gi, pj) : nullptr, cfg.tie_policy);
      if (!best || best->first < k || (best->first == k && reverse_less(cur, best->second))) best.emplace(k, cur);
      return;
    }
    if (i < t.n && j < t.m) {
      cur.emplace_back(t.at(i, j).same_label ? Tag::match : Tag::type_mismatch, i, j);
      self(self, i + 1, j + 1);
      cur.pop_back();
    }
    if (i < t.n) {
      cur.emplace_back(Tag::skip_gold, i, j);
      self(self, i + 1, j);
      cur.pop_back();
    }
    if (j < t.m) {
      cur.emplace_back(Tag::skip_pred, i, j);
      self(self, i, j + 1);
      cur.pop_back();
    }
  };
  visit(visit, 0, 0);
  return detail::finish(best->second, t, cfg);
}

}  // namespace mecheval
