#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mecheval/taxonomy.hpp"

namespace mecheval {

struct WeightConfig {
  static constexpr int kFormatVersion = 1;

  std::map<std::string, double> base_type_weight{
      {"pericyclic", 4.0},   {"rearrangement", 3.5}, {"radical", 3.0},     {"electron_transfer", 3.0},
      {"substitution", 2.5}, {"cleavage", 2.5},      {"addition", 2.0},    {"elimination", 2.0},
      {"coordination", 1.5}, {"proton_transfer", 1.0}};
  // Subtypes not listed use 1.0.
  std::map<std::string, double> subtype_modifier{
      {"sigmatropic_rearrangement", 1.3}, {"cheletropic_reaction", 1.3},     {"cycloaddition", 1.2},
      {"ene_reaction", 1.2},              {"homolytic_cleavage", 1.2},       {"electrophilic_substitution", 1.2},
      {"nucleophilic_substitution", 1.1}, {"leaving_group_elimination", 1.1}, {"acid_base_proton_transfer", 0.9}};
  double last_step_modifier = 0.9;
  double ring_closure_bonus = 0.3;
  std::string ring_closure_marker = "cycl";
  double bond_forming_bonus = 0.2;
  std::vector<std::string> bond_forming_types{"addition", "substitution"};
  double clip_lo = 0.5;
  double clip_hi = 6.0;

  void validate() const {
    if (!(clip_lo < clip_hi)) throw std::invalid_argument("clip_lo must be below clip_hi");
    for (const auto& [t, w] : base_type_weight)
      if (!(w >= clip_lo && w <= clip_hi))
        throw std::invalid_argument("base weight of '" + t + "' outside clip bounds");
    for (const auto& [s, m] : subtype_modifier)
      if (!(m > 0)) throw std::invalid_argument("subtype modifier of '" + s + "' must be positive");
    if (!(last_step_modifier > 0)) throw std::invalid_argument("last_step_modifier must be positive");
  }
};

struct StepKey {
  std::string type;
  std::string subtype;
  int position = 1;  // 1-based
  bool is_last = false;
};

struct StepWeights {
  std::vector<double> raw;         // clipped, before normalization
  std::vector<double> normalized;  // sums to 1
};

namespace detail {

inline bool contains_ci(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return true;
  auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) ok = lower(hay[i + k]) == lower(needle[k]);
    if (ok) return true;
  }
  return false;
}

}  // namespace detail

/// Clipped raw weight for one step: W_type * M_subtype * P_position + bonuses.
inline double raw_step_weight(const StepKey& k, const WeightConfig& cfg) {
  auto base = cfg.base_type_weight.find(k.type);
  if (base == cfg.base_type_weight.end()) throw std::invalid_argument("no base weight for type '" + k.type + "'");
  auto mod = cfg.subtype_modifier.find(k.subtype);
  const double m = mod == cfg.subtype_modifier.end() ? 1.0 : mod->second;
  const double p = k.is_last ? cfg.last_step_modifier : 1.0;
  double bonus = 0.0;
  if (detail::contains_ci(k.subtype, cfg.ring_closure_marker)) bonus += cfg.ring_closure_bonus;
  if (std::find(cfg.bond_forming_types.begin(), cfg.bond_forming_types.end(), k.type) != cfg.bond_forming_types.end())
    bonus += cfg.bond_forming_bonus;
  return std::clamp(base->second * m * p + bonus, cfg.clip_lo, cfg.clip_hi);
}

/// Raw and normalized weights for a mechanism. Every (type, subtype) must
/// belong to `taxonomy`.
inline StepWeights compute_step_weights(const std::vector<StepKey>& steps, const WeightConfig& cfg = {},
                                        const Taxonomy& taxonomy = Taxonomy::builtin()) {
  if (steps.empty()) throw std::invalid_argument("no steps to weight");
  StepWeights out;
  double sum = 0.0;
  for (const auto& s : steps) {
    if (!taxonomy.has_type(s.type)) throw std::invalid_argument("unknown step type '" + s.type + "'");
    if (!taxonomy.contains(s.type, s.subtype))
      throw std::invalid_argument("subtype '" + s.subtype + "' is not under type '" + s.type + "'");
    out.raw.push_back(raw_step_weight(s, cfg));
    sum += out.raw.back();
  }
  for (double r : out.raw) out.normalized.push_back(r / sum);
  return out;
}

/// Step keys for a typed sequence, marking the final step.
inline std::vector<StepKey> step_keys(const std::vector<std::pair<std::string, std::string>>& typed) {
  std::vector<StepKey> keys;
  for (std::size_t i = 0; i < typed.size(); ++i)
    keys.push_back({typed[i].first, typed[i].second, static_cast<int>(i + 1), i + 1 == typed.size()});
  return keys;
}

struct DriftReport {
  double max_abs_deviation = 0.0;
  std::vector<bool> flagged;  // per step, |stored - recomputed| > tol
  bool any_flagged() const { return std::find(flagged.begin(), flagged.end(), true) != flagged.end(); }
};

inline DriftReport check_stored_weights(const std::vector<double>& stored, const std::vector<double>& recomputed,
                                        double tol) {
  if (stored.size() != recomputed.size()) throw std::invalid_argument("weight vectors differ in length");
  DriftReport r;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const double d = std::abs(stored[i] - recomputed[i]);
    r.max_abs_deviation = std::max(r.max_abs_deviation, d);
    r.flagged.push_back(d > tol);
  }
  return r;
}

inline nlohmann::json weight_config_to_json(const WeightConfig& c) {
  return {{"base_type_weight", c.base_type_weight},
          {"subtype_modifier", c.subtype_modifier},
          {"last_step_modifier", c.last_step_modifier},
          {"ring_closure_bonus", c.ring_closure_bonus},
          {"ring_closure_marker", c.ring_closure_marker},
          {"bond_forming_bonus", c.bond_forming_bonus},
          {"bond_forming_types", c.bond_forming_types},
          {"clip_lo", c.clip_lo},
          {"clip_hi", c.clip_hi}};
}

/// Missing members keep their defaults; unknown members are rejected. A base
/// weight keyed "dissociation" is read as proton_transfer.
inline WeightConfig weight_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("weights must be a JSON object");
  WeightConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "base_type_weight") {
      c.base_type_weight.clear();
      for (const auto& [t, w] : v.items()) c.base_type_weight[t == "dissociation" ? "proton_transfer" : t] = w.get<double>();
    } else if (key == "subtype_modifier") {
      c.subtype_modifier = v.get<std::map<std::string, double>>();
    } else if (key == "last_step_modifier") {
      c.last_step_modifier = v.get<double>();
    } else if (key == "ring_closure_bonus") {
      c.ring_closure_bonus = v.get<double>();
    } else if (key == "ring_closure_marker") {
      c.ring_closure_marker = v.get<std::string>();
    } else if (key == "bond_forming_bonus") {
      c.bond_forming_bonus = v.get<double>();
    } else if (key == "bond_forming_types") {
      c.bond_forming_types = v.get<std::vector<std::string>>();
    } else if (key == "clip_lo") {
      c.clip_lo = v.get<double>();
    } else if (key == "clip_hi") {
      c.clip_hi = v.get<double>();
    } else {
      throw std::invalid_argument("unknown weight config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

/// Taxonomy plus weights as one versioned document.
struct ScoringVocabulary {
  Taxonomy taxonomy = Taxonomy::builtin();
  WeightConfig weights;
};

inline nlohmann::json vocabulary_to_json(const ScoringVocabulary& v) {
  return {{"format_version", WeightConfig::kFormatVersion},
          {"taxonomy", taxonomy_to_json(v.taxonomy)},
          {"weights", weight_config_to_json(v.weights)}};
}

inline ScoringVocabulary vocabulary_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("vocabulary must be a JSON object");
  const int version = j.value("format_version", 0);
  if (version != WeightConfig::kFormatVersion)
    throw std::invalid_argument("unsupported vocabulary format_version " + std::to_string(version));
  for (const auto& [key, _] : j.items())
    if (key != "format_version" && key != "taxonomy" && key != "weights")
      throw std::invalid_argument("unknown vocabulary key '" + key + "'");
  ScoringVocabulary v;
  if (j.contains("taxonomy")) v.taxonomy = taxonomy_from_json(j.at("taxonomy"));
  if (j.contains("weights")) v.weights = weight_config_from_json(j.at("weights"));
  return v;
}

inline ScoringVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  return vocabulary_from_json(nlohmann::json::parse(in));
}

}  // namespace mecheval
