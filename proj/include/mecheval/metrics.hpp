#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mecheval/alignment.hpp"
#include "mecheval/dataset_io.hpp"
#include "mecheval/weights.hpp"

namespace mecheval {

/// Raised when the gold side of an evaluation is unusable (invalid SMILES,
/// partial weights). Prediction-side problems never throw.
class GoldDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalConfig {
  AlignConfig align{};
  WeightConfig weights{};
  const Taxonomy* taxonomy = nullptr;  // built-in when null
};

struct MechanicalTag {
  int step = 0;  // 1-based predicted step; 0 for the output as a whole
  std::string tag;  // invalid_smiles | valence_violation | oov_label | schema_error

  bool operator==(const MechanicalTag&) const = default;
};

struct EvaluationReport {
  std::string reaction_id;
  std::string level;
  std::string dominant_type;
  int n_gold = 0;
  int n_pred = 0;
  double V = 0.0;
  double L = 0.0;
  double S_tot = 0.0;
  double S_part = 0.0;
  AlignmentResult alignment;
  std::vector<MechanicalTag> mechanical_error_tags;
};

/// Fraction of predicted intermediates that parse and validate; 0 for an
/// empty prediction.
inline double validity_score(const std::vector<PredStep>& pred) {
  if (pred.empty()) return 0.0;
  const auto ok = std::count_if(pred.begin(), pred.end(), [](const PredStep& p) { return p.parse_ok; });
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

inline double logic_score(const AlignmentResult& a, int n_gold) {
  const auto covered = std::count_if(a.actions.begin(), a.actions.end(), [](const AlignedAction& x) { return x.gold_index.has_value(); });
  if (n_gold <= 0 || covered != n_gold)
    throw std::invalid_argument("alignment covers " + std::to_string(covered) + " gold steps, expected " + std::to_string(n_gold));
  return static_cast<double>(a.count(Tag::match)) / n_gold;
}

inline std::pair<double, double> omes_scores(const AlignmentResult& a) { return {a.key.total, a.key.partial}; }

/// Gold steps with canonical intermediates. Stored weights are used as given,
/// rescaled by their sum; a mechanism with no stored weights gets generated
/// ones.
inline std::vector<GoldStep> gold_steps(const ReactionRecord& r, const EvalConfig& cfg = {}) {
  const Taxonomy& tax = cfg.taxonomy ? *cfg.taxonomy : Taxonomy::builtin();
  if (r.mechanism.empty()) throw GoldDataError(r.reaction_id + ": gold mechanism is empty");
  const auto weighted = std::count_if(r.mechanism.begin(), r.mechanism.end(),
                                      [](const MechanismStep& s) { return s.step_weight.has_value(); });
  std::vector<double> w;
  if (weighted == 0) {
    std::vector<std::pair<std::string, std::string>> typed;
    for (const auto& s : r.mechanism) typed.emplace_back(s.type, s.subtype);
    try {
      w = compute_step_weights(step_keys(typed), cfg.weights, tax).normalized;
    } catch (const std::invalid_argument& e) {
      throw GoldDataError(r.reaction_id + ": " + e.what());
    }
  } else if (weighted == static_cast<long>(r.mechanism.size())) {
    double sum = 0.0;
    for (const auto& s : r.mechanism) sum += *s.step_weight;
    if (!(sum > 0.0)) throw GoldDataError(r.reaction_id + ": gold step weights sum to zero");
    for (const auto& s : r.mechanism) w.push_back(*s.step_weight / sum);
  } else {
    throw GoldDataError(r.reaction_id + ": step_weight present on only some gold steps");
  }
  // Snap onto the alignment's credit grid so the weights sum to exactly one
  // there; the rounding remainder goes to the heaviest step.
  std::vector<std::int64_t> units;
  std::int64_t used = 0;
  for (double x : w) used += units.emplace_back(detail::quantize(x));
  units[std::max_element(w.begin(), w.end()) - w.begin()] += detail::quantize(1.0) - used;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = detail::dequantize(units[i]);

  std::vector<GoldStep> out;
  for (std::size_t i = 0; i < r.mechanism.size(); ++i) {
    const auto& s = r.mechanism[i];
    const auto report = chem::assess_smiles(s.intermediate_smiles);
    if (!report.is_valid())
      throw GoldDataError(r.reaction_id + " step " + std::to_string(i + 1) + ": invalid gold SMILES '" +
                          s.intermediate_smiles + "'");
    out.push_back(make_gold_step(s.type, s.subtype, s.intermediate_smiles, w[i]));
  }
  return out;
}

inline std::vector<PredStep> pred_steps(const PredictionRecord& p) {
  std::vector<PredStep> out;
  for (const auto& s : p.steps) out.push_back(make_pred_step(s.type, s.subtype, s.intermediate_smiles));
  return out;
}

/// Type of the heaviest gold step, the earliest on ties.
inline std::string dominant_type(const std::vector<GoldStep>& gold) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < gold.size(); ++i)
    if (*gold[i].weight > *gold[best].weight) best = i;
  return gold.empty() ? std::string{} : gold[best].type;
}

namespace detail {

inline std::vector<MechanicalTag> mechanical_tags(const PredictionRecord& p) {
  std::vector<MechanicalTag> tags;
  for (const auto& d : p.extraction_diagnostics) {
    if (d.code != "schema_error" && d.code != "oov_label") continue;
    int step = 0;
    if (d.location.rfind("step ", 0) == 0) step = std::stoi(d.location.substr(5));
    MechanicalTag t{step, d.code};
    if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
  }
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    const auto report = chem::assess_smiles(p.steps[i].intermediate_smiles);
    if (report.is_valid()) continue;
    tags.push_back({static_cast<int>(i + 1), report.has(chem::FailureKind::Valence) ? "valence_violation" : "invalid_smiles"});
  }
  std::stable_sort(tags.begin(), tags.end(), [](const MechanicalTag& a, const MechanicalTag& b) { return a.step < b.step; });
  return tags;
}

}  // namespace detail

inline EvaluationReport evaluate_reaction(const ReactionRecord& gold, const PredictionRecord& pred,
                                          const EvalConfig& cfg = {}) {
  const auto g = gold_steps(gold, cfg);
  const auto p = pred_steps(pred);
  EvaluationReport r;
  r.reaction_id = gold.reaction_id;
  r.level = gold.level;
  r.dominant_type = dominant_type(g);
  r.n_gold = static_cast<int>(g.size());
  r.n_pred = static_cast<int>(p.size());
  r.alignment = align(g, p, cfg.align);
  r.V = validity_score(p);
  r.L = logic_score(r.alignment, r.n_gold);
  std::tie(r.S_tot, r.S_part) = omes_scores(r.alignment);
  r.mechanical_error_tags = detail::mechanical_tags(pred);
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Partition { overall, level, type, length };

inline std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::overall: return "overall";
    case Partition::level: return "level";
    case Partition::type: return "type";
    case Partition::length: return "length";
  }
  return "overall";
}

inline Partition parse_partition(std::string_view s) {
  for (auto p : {Partition::overall, Partition::level, Partition::type, Partition::length})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown partition '" + std::string(s) + "'");
}

struct AggregateRow {
  std::string group;
  int count = 0;
  // Unweighted means scaled by 100.
  double V = 0.0;
  double L = 0.0;
  double S_tot = 0.0;
  double S_part = 0.0;
};

struct AggregateTable {
  Partition partition = Partition::overall;
  std::vector<AggregateRow> rows;  // "overall" first
};

/// Levels follow easy/medium/hard order, types sort by name, lengths by
/// gold step count. Each reaction falls in exactly one group; for the type
/// partition that is the type of its heaviest gold step.
inline AggregateTable aggregate(const std::vector<EvaluationReport>& reports, Partition partition) {
  if (reports.empty()) throw std::invalid_argument("no reports to aggregate");
  auto row_of = [](const std::string& name, const std::vector<const EvaluationReport*>& members) {
    AggregateRow row{name, static_cast<int>(members.size()), 0, 0, 0, 0};
    for (const auto* r : members) {
      row.V += r->V;
      row.L += r->L;
      row.S_tot += r->S_tot;
      row.S_part += r->S_part;
    }
    const double k = 100.0 / static_cast<double>(members.size());
    row.V *= k;
    row.L *= k;
    row.S_tot *= k;
    row.S_part *= k;
    return row;
  };

  AggregateTable t{partition, {}};
  std::vector<const EvaluationReport*> all;
  for (const auto& r : reports) all.push_back(&r);
  t.rows.push_back(row_of("overall", all));
  if (partition == Partition::overall) return t;

  // Group key with a sortable rank.
  std::map<std::pair<long, std::string>, std::vector<const EvaluationReport*>> groups;
  for (const auto& r : reports) {
    switch (partition) {
      case Partition::level: {
        const auto& lv = difficulty_levels();
        const long rank = std::find(lv.begin(), lv.end(), r.level) - lv.begin();
        groups[{rank, r.level}].push_back(&r);
        break;
      }
      case Partition::type: groups[{0, r.dominant_type}].push_back(&r); break;
      case Partition::length: groups[{r.n_gold, std::to_string(r.n_gold)}].push_back(&r); break;
      case Partition::overall: break;
    }
  }
  for (const auto& [key, members] : groups) t.rows.push_back(row_of(key.second, members));
  return t;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string fixed1(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", x);
  return buf;
}

}  // namespace detail

inline std::string aggregate_csv(const std::vector<AggregateTable>& tables) {
  std::string out = "partition,group,count,V,L,S_tot,S_part\n";
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      std::string group = r.group;
      if (group.find_first_of(",\"") != std::string::npos) {
        std::string q = "\"";
        for (char c : group) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        group = q + "\"";
      }
      out += std::string(to_string(t.partition)) + "," + group + "," + std::to_string(r.count) + "," +
             detail::fixed1(r.V) + "," + detail::fixed1(r.L) + "," + detail::fixed1(r.S_tot) + "," +
             detail::fixed1(r.S_part) + "\n";
    }
  }
  return out;
}

inline std::string aggregate_markdown(const std::vector<AggregateTable>& tables) {
  std::string out;
  for (const auto& t : tables) {
    if (!out.empty()) out += "\n";
    out += "### " + std::string(to_string(t.partition)) + "\n\n";
    out += "| group | n | V | L | S_tot | S_part |\n|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : t.rows)
      out += "| " + r.group + " | " + std::to_string(r.count) + " | " + detail::fixed1(r.V) + " | " +
             detail::fixed1(r.L) + " | " + detail::fixed1(r.S_tot) + " | " + detail::fixed1(r.S_part) + " |\n";
  }
  return out;
}

inline nlohmann::ordered_json aggregate_json(const std::vector<AggregateTable>& tables) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& t : tables) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"group", r.group}, {"count", r.count}, {"V", r.V}, {"L", r.L}, {"S_tot", r.S_tot}, {"S_part", r.S_part}});
    out[std::string(to_string(t.partition))] = rows;
  }
  return out;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json actions = nlohmann::ordered_json::array();
  for (const auto& a : r.alignment.actions) {
    nlohmann::ordered_json j;
    j["tag"] = std::string(to_string(a.tag));
    j["gold_index"] = a.gold_index ? nlohmann::ordered_json(*a.gold_index) : nlohmann::ordered_json(nullptr);
    j["pred_index"] = a.pred_index ? nlohmann::ordered_json(*a.pred_index) : nlohmann::ordered_json(nullptr);
    j["s_tot"] = a.s_tot;
    j["s_par"] = a.s_par;
    j["similarity"] = a.similarity;
    actions.push_back(j);
  }
  nlohmann::ordered_json tags = nlohmann::ordered_json::array();
  for (const auto& t : r.mechanical_error_tags) tags.push_back({{"step", t.step}, {"tag", t.tag}});
  nlohmann::ordered_json j;
  j["reaction_id"] = r.reaction_id;
  j["level"] = r.level;
  j["dominant_type"] = r.dominant_type;
  j["n_gold"] = r.n_gold;
  j["n_pred"] = r.n_pred;
  j["V"] = r.V;
  j["L"] = r.L;
  j["S_tot"] = r.S_tot;
  j["S_part"] = r.S_part;
  j["key"] = {{"total", r.alignment.key.total},
              {"partial", r.alignment.key.partial},
              {"rank_sum", r.alignment.key.rank_sum},
              {"penalty", r.alignment.key.penalty}};
  j["actions"] = actions;
  j["mechanical_error_tags"] = tags;
  return j;
}

}  // namespace mecheval
