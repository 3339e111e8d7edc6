#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mecheval {

class TaxonomyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SubtypeEntry {
  std::string name;
  std::string type;
  std::string description;
};

/// Step-type vocabulary: each subtype belongs to exactly one type.
class Taxonomy {
 public:
  Taxonomy() = default;

  /// Throws TaxonomyError on a duplicate name, an invalid name, or a subtype
  /// whose parent type is not declared.
  Taxonomy(std::vector<std::string> types, std::vector<SubtypeEntry> subtypes)
      : types_(std::move(types)), subtypes_(std::move(subtypes)) {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      check_name(types_[i]);
      if (std::find(types_.begin(), types_.begin() + static_cast<std::ptrdiff_t>(i), types_[i]) !=
          types_.begin() + static_cast<std::ptrdiff_t>(i))
        throw TaxonomyError("duplicate type '" + types_[i] + "'");
    }
    for (const auto& s : subtypes_) {
      check_name(s.name);
      if (!has_type(s.type)) throw TaxonomyError("subtype '" + s.name + "' has no declared parent type '" + s.type + "'");
      if (!index_.emplace(s.name, &s - subtypes_.data()).second)
        throw TaxonomyError("duplicate subtype '" + s.name + "'");
      if (has_type(s.name) && s.name != s.type) throw TaxonomyError("name '" + s.name + "' used as type and subtype");
    }
  }

  /// Ten types and twenty-six subtypes of the reference vocabulary.
  static const Taxonomy& builtin() {
    static const Taxonomy t = [] {
      const std::vector<std::pair<std::string, std::vector<std::string>>> rows = {
          {"cleavage", {"heterolytic_cleavage", "homolytic_cleavage"}},
          {"addition", {"nucleophilic_addition", "electrophilic_addition", "radical_addition"}},
          {"elimination", {"proton_elimination", "leaving_group_elimination", "radical_elimination"}},
          {"substitution", {"nucleophilic_substitution", "electrophilic_substitution", "radical_substitution"}},
          {"rearrangement", {"1,2-shift", "radical_rearrangement"}},
          {"proton_transfer", {"acid_base_proton_transfer"}},
          {"electron_transfer", {"single_electron_transfer"}},
          {"coordination", {"lewis_acid_base_coordination"}},
          {"radical", {"radical_initiation", "radical_propagation", "radical_termination", "radical_coupling"}},
          {"pericyclic",
           {"cycloaddition", "electrocyclization", "sigmatropic_rearrangement", "group_transfer", "ene_reaction",
            "cheletropic_reaction"}},
      };
      std::vector<std::string> types;
      std::vector<SubtypeEntry> subs;
      for (const auto& [type, names] : rows) {
        types.push_back(type);
        for (const auto& n : names) subs.push_back({n, type, {}});
      }
      return Taxonomy(std::move(types), std::move(subs));
    }();
    return t;
  }

  const std::vector<std::string>& types() const { return types_; }
  const std::vector<SubtypeEntry>& subtypes() const { return subtypes_; }

  bool has_type(std::string_view t) const { return std::find(types_.begin(), types_.end(), t) != types_.end(); }
  bool has_subtype(std::string_view s) const { return index_.count(std::string(s)) > 0; }
  std::optional<std::string> parent_of(std::string_view subtype) const {
    auto it = index_.find(std::string(subtype));
    if (it == index_.end()) return std::nullopt;
    return subtypes_[it->second].type;
  }
  bool contains(std::string_view type, std::string_view subtype) const {
    auto p = parent_of(subtype);
    return p && *p == type;
  }
  std::vector<std::string> subtypes_of(std::string_view type) const {
    std::vector<std::string> out;
    for (const auto& s : subtypes_)
      if (s.type == type) out.push_back(s.name);
    return out;
  }

 private:
  static void check_name(const std::string& n) {
    if (n.empty()) throw TaxonomyError("empty taxonomy name");
    for (char c : n) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == ',' || c == '-';
      if (!ok) throw TaxonomyError("invalid taxonomy name '" + n + "'");
    }
  }

  std::vector<std::string> types_;
  std::vector<SubtypeEntry> subtypes_;
  std::map<std::string, std::size_t> index_;
};

// Taxonomy JSON: [{"type": "...", "subtypes": [{"name": "...", "description": "..."}]}]
// or a flat list [{"type": "...", "subtype": "...", "description": "..."}].
inline Taxonomy taxonomy_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw TaxonomyError("taxonomy must be a JSON array");
  std::vector<std::string> types;
  std::vector<SubtypeEntry> subs;
  auto add_type = [&](const std::string& t) {
    if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
  };
  try {
    for (const auto& row : j) {
      if (row.contains("subtypes")) {
        const std::string t = row.at("type").get<std::string>();
        if (std::find(types.begin(), types.end(), t) != types.end()) throw TaxonomyError("duplicate type '" + t + "'");
        types.push_back(t);
        for (const auto& s : row.at("subtypes")) {
          if (s.is_string()) {
            subs.push_back({s.get<std::string>(), t, {}});
          } else {
            subs.push_back({s.at("name").get<std::string>(), t, s.value("description", std::string{})});
          }
        }
      } else {
        if (!row.contains("type")) throw TaxonomyError("subtype entry without a parent type");
        const std::string t = row.at("type").get<std::string>();
        add_type(t);
        subs.push_back({row.at("subtype").get<std::string>(), t, row.value("description", std::string{})});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw TaxonomyError(std::string("malformed taxonomy: ") + e.what());
  }
  return Taxonomy(std::move(types), std::move(subs));
}

inline nlohmann::json taxonomy_to_json(const Taxonomy& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& type : t.types()) {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : t.subtypes())
      if (s.type == type) subs.push_back({{"name", s.name}, {"description", s.description}});
    out.push_back({{"type", type}, {"subtypes", subs}});
  }
  return out;
}

/// Loads a taxonomy file; an empty path yields the built-in vocabulary. A
/// file holding a full config document uses its "taxonomy" member.
inline Taxonomy load_taxonomy(const std::string& path = {}) {
  if (path.empty()) return Taxonomy::builtin();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open taxonomy file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw TaxonomyError(std::string("malformed taxonomy: ") + e.what());
  }
  if (j.is_object() && j.contains("taxonomy")) return taxonomy_from_json(j.at("taxonomy"));
  return taxonomy_from_json(j);
}

}  // namespace mecheval
