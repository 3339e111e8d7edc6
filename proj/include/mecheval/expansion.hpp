#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mecheval/chem/canonical.hpp"
#include "mecheval/chem/validity.hpp"
#include "mecheval/dataset_io.hpp"
#include "mecheval/fingerprint.hpp"

namespace mecheval {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Placeholder label -> candidate substituent SMILES.
using SuggestionSet = std::map<int, std::vector<std::string>>;

inline std::string placeholder_token(int label) { return "[*:" + std::to_string(label) + "]"; }

namespace detail {

template <class F>
void for_each_smiles_field(const ReactionRecord& r, F&& f) {
  for (std::size_t i = 0; i < r.reactants_smiles.size(); ++i) f("reactant " + std::to_string(i + 1), r.reactants_smiles[i], true);
  for (std::size_t i = 0; i < r.products_smiles.size(); ++i) f("product " + std::to_string(i + 1), r.products_smiles[i], true);
  for (std::size_t i = 0; i < r.mechanism.size(); ++i)
    f("step " + std::to_string(i + 1), r.mechanism[i].intermediate_smiles, false);
}

inline std::set<int> labels_in(const chem::Molecule& m) {
  std::set<int> out;
  for (const auto& a : m.atoms())
    if (a.is_wildcard()) out.insert(a.map_number);
  return out;
}

}  // namespace detail

/// Distinct placeholder labels of a template, ascending. Throws TemplateError
/// on malformed placeholders or on a label that appears only in
/// intermediates.
inline std::vector<int> extract_rgroups(const ReactionRecord& tmpl) {
  std::set<int> all, outer;
  detail::for_each_smiles_field(tmpl, [&](const std::string& where, const std::string& smi, bool is_outer) {
    chem::Molecule m;
    try {
      m = chem::parse_smiles(smi, chem::ParseOptions{true});
    } catch (const chem::ParseError& e) {
      throw TemplateError(tmpl.reaction_id + " " + where + ": " + e.what());
    }
    for (int l : detail::labels_in(m)) {
      all.insert(l);
      if (is_outer) outer.insert(l);
    }
  });
  for (int l : all)
    if (!outer.count(l))
      throw TemplateError(tmpl.reaction_id + ": " + placeholder_token(l) + " appears only in intermediates");
  return {all.begin(), all.end()};
}

/// Parses a substituent; it must be one connected, valid fragment that is
/// not a lone hydrogen. Attachment happens at its first atom.
inline chem::Molecule parse_fragment(const std::string& smiles) {
  chem::Molecule f;
  try {
    f = chem::parse_smiles(smiles);
  } catch (const chem::ParseError& e) {
    throw std::invalid_argument("fragment '" + smiles + "': " + e.what());
  }
  if (f.atom_count() == 0) throw std::invalid_argument("empty fragment");
  if (f.component_count() != 1) throw std::invalid_argument("fragment '" + smiles + "' is disconnected");
  if (f.atom_count() == 1 && f.atom(0).element == 1) throw std::invalid_argument("bare hydrogen fragment '" + smiles + "'");
  if (!chem::validate_molecule(f).is_valid()) throw std::invalid_argument("fragment '" + smiles + "' is not a valid molecule");
  return f;
}

/// Replaces every placeholder atom of `mol` with a copy of its fragment,
/// bonding the fragment's first atom to the placeholder's neighbour with the
/// placeholder's bond order.
inline chem::Molecule substitute_molecule(const chem::Molecule& mol, const std::map<int, chem::Molecule>& fragments) {
  using namespace chem;
  Molecule out;
  std::vector<int> remap(static_cast<std::size_t>(mol.atom_count()), -1);
  for (int i = 0; i < mol.atom_count(); ++i) {
    const Atom& a = mol.atom(i);
    if (a.is_wildcard()) {
      auto it = fragments.find(a.map_number);
      if (it == fragments.end()) throw std::invalid_argument("no fragment for " + placeholder_token(a.map_number));
      if (mol.degree(i) > 1) throw std::invalid_argument(placeholder_token(a.map_number) + " has more than one neighbour");
      const Molecule& frag = it->second;
      const int base = out.atom_count();
      for (const Atom& fa : frag.atoms()) {
        Atom c = fa;
        for (int& r : c.stereo_refs)
          if (r != kImplicitHydrogen) r += base;
        out.add_atom(std::move(c));
      }
      for (const Bond& b : frag.bonds()) out.add_bond(b.begin + base, b.end + base, b.order);
      for (const auto& s : frag.double_bond_stereo())
        out.double_bond_stereo().push_back({s.bond + out.bond_count() - frag.bond_count(), s.begin_ref + base, s.end_ref + base, s.cis});
      remap[static_cast<std::size_t>(i)] = base;
    } else {
      remap[static_cast<std::size_t>(i)] = out.add_atom(a);
    }
  }
  std::vector<int> bond_map(static_cast<std::size_t>(mol.bond_count()), -1);
  for (int bi = 0; bi < mol.bond_count(); ++bi) {
    const Bond& b = mol.bond(bi);
    if ((mol.atom(b.begin).is_wildcard() || mol.atom(b.end).is_wildcard()) && b.order == BondOrder::Aromatic)
      throw std::invalid_argument("placeholder joined by an aromatic bond");
    bond_map[static_cast<std::size_t>(bi)] =
        out.add_bond(remap[static_cast<std::size_t>(b.begin)], remap[static_cast<std::size_t>(b.end)], b.order);
  }
  // Stereo references of the template: a placeholder reference now names the
  // fragment's first atom.
  for (int i = 0; i < mol.atom_count(); ++i) {
    if (mol.atom(i).is_wildcard()) continue;
    for (int& r : out.atom(remap[static_cast<std::size_t>(i)]).stereo_refs)
      if (r != kImplicitHydrogen) r = remap[static_cast<std::size_t>(r)];
  }
  for (const auto& s : mol.double_bond_stereo())
    out.double_bond_stereo().push_back({bond_map[static_cast<std::size_t>(s.bond)], remap[static_cast<std::size_t>(s.begin_ref)],
                                        remap[static_cast<std::size_t>(s.end_ref)], s.cis});
  // A chiral fragment head sees the attachment as its preceding neighbour.
  for (int i = 0; i < mol.atom_count(); ++i) {
    if (!mol.atom(i).is_wildcard() || mol.degree(i) == 0) continue;
    Atom& head = out.atom(remap[static_cast<std::size_t>(i)]);
    if (head.chirality != Chirality::None)
      head.stereo_refs.insert(head.stereo_refs.begin(), remap[static_cast<std::size_t>(mol.neighbors(i)[0].atom)]);
  }
  out.assign_implicit_hydrogens();
  return out;
}

/// Per-field outcome of a substitution: the canonical SMILES, or the reason
/// the substituted structure is not a valid molecule.
struct SubstitutionResult {
  ReactionRecord record;
  std::vector<Diagnostic> problems;  // empty when every field is valid
};

/// Substitutes every placeholder in every SMILES field; metadata is copied
/// verbatim. Throws TemplateError when a label has no fragment or a fragment
/// is unusable. Invalid substituted structures are reported in `problems`
/// and their field keeps the template text.
inline SubstitutionResult substitute_checked(const ReactionRecord& tmpl, const std::map<int, std::string>& assignment) {
  std::map<int, chem::Molecule> frags;
  for (const auto& [label, smi] : assignment) {
    try {
      frags.emplace(label, parse_fragment(smi));
    } catch (const std::invalid_argument& e) {
      throw TemplateError(placeholder_token(label) + ": " + e.what());
    }
  }
  for (int l : extract_rgroups(tmpl))
    if (!frags.count(l)) throw TemplateError(tmpl.reaction_id + ": assignment does not cover " + placeholder_token(l));

  SubstitutionResult res{tmpl, {}};
  auto apply = [&](const std::string& where, std::string& field) {
    const chem::Molecule m = substitute_molecule(chem::parse_smiles(field, chem::ParseOptions{true}), frags);
    try {
      field = chem::canonical_smiles(m);
    } catch (const chem::InvalidMoleculeError& e) {
      res.problems.push_back({tmpl.reaction_id + " " + where, "invalid_instance", e.what()});
    }
  };
  auto& r = res.record;
  for (std::size_t i = 0; i < r.reactants_smiles.size(); ++i) apply("reactant " + std::to_string(i + 1), r.reactants_smiles[i]);
  for (std::size_t i = 0; i < r.products_smiles.size(); ++i) apply("product " + std::to_string(i + 1), r.products_smiles[i]);
  for (std::size_t i = 0; i < r.mechanism.size(); ++i)
    apply("step " + std::to_string(i + 1), r.mechanism[i].intermediate_smiles);
  return res;
}

/// As substitute_checked, but an invalid substituted structure is an error.
inline ReactionRecord substitute(const ReactionRecord& tmpl, const std::map<int, std::string>& assignment) {
  auto res = substitute_checked(tmpl, assignment);
  if (!res.problems.empty()) throw TemplateError(to_string(res.problems.front()));
  return std::move(res.record);
}

// ---------------------------------------------------------------------------
// Providers

class GeneratorProvider {
 public:
  virtual ~GeneratorProvider() = default;
  /// Up to `num_suggestions` fragments for each label. Throws ProviderError.
  virtual SuggestionSet request(const ReactionRecord& tmpl, const std::vector<int>& labels, int num_suggestions) = 0;
};

/// Drops unusable fragments and duplicates; throws ProviderError when a
/// requested label ends up with no fragment.
inline SuggestionSet sanitize_suggestions(const SuggestionSet& raw, const std::vector<int>& labels,
                                          std::vector<Diagnostic>* rejected = nullptr) {
  SuggestionSet out;
  for (int l : labels) {
    auto it = raw.find(l);
    if (it == raw.end()) throw ProviderError("no suggestions for " + placeholder_token(l));
    auto& kept = out[l];
    for (const auto& f : it->second) {
      try {
        parse_fragment(f);
      } catch (const std::invalid_argument& e) {
        if (rejected) rejected->push_back({placeholder_token(l), "rejected_fragment", e.what()});
        continue;
      }
      if (std::find(kept.begin(), kept.end(), f) == kept.end()) kept.push_back(f);
    }
    if (kept.empty()) throw ProviderError("no usable suggestions for " + placeholder_token(l));
  }
  return out;
}

/// Parses a provider reply of the form {"[*:1]": ["C", ...], ...}.
inline SuggestionSet suggestions_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ProviderError("suggestion reply is not a JSON object");
  SuggestionSet out;
  for (const auto& [key, v] : j.items()) {
    int label = 0;
    if (std::sscanf(key.c_str(), "[*:%d]", &label) != 1 || placeholder_token(label) != key || label <= 0)
      throw ProviderError("unexpected suggestion key '" + key + "'");
    if (!v.is_array()) throw ProviderError("suggestions for " + key + " are not a list");
    for (const auto& f : v) {
      if (!f.is_string()) throw ProviderError("non-string suggestion for " + key);
      out[label].push_back(f.get<std::string>());
    }
  }
  return out;
}

inline nlohmann::json suggestions_to_json(const SuggestionSet& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, frags] : s) j[placeholder_token(label)] = frags;
  return j;
}

/// Fixed substituent library; specific labels may carry their own list.
class OfflineProvider : public GeneratorProvider {
 public:
  static const std::vector<std::string>& default_library() {
    static const std::vector<std::string> lib{"C",       "CC",       "C(C)C",  "C(C)(C)C", "c1ccccc1", "C(F)(F)F",
                                              "OC",      "Cl",       "F",      "Br",       "C#N",      "C(=O)OC",
                                              "CCC",     "c1ccc(OC)cc1", "N(C)C", "C(=O)C"};
    return lib;
  }

  OfflineProvider() : library_(default_library()) {}
  explicit OfflineProvider(std::vector<std::string> library, SuggestionSet per_label = {})
      : library_(std::move(library)), per_label_(std::move(per_label)) {}

  SuggestionSet request(const ReactionRecord&, const std::vector<int>& labels, int num_suggestions) override {
    ++calls_;
    SuggestionSet out;
    for (int l : labels) {
      auto it = per_label_.find(l);
      const auto& src = it != per_label_.end() ? it->second : library_;
      const auto n = std::min(src.size(), static_cast<std::size_t>(std::max(num_suggestions, 0)));
      out[l].assign(src.begin(), src.begin() + static_cast<long>(n));
    }
    return out;
  }

  int calls() const { return calls_; }

 private:
  std::vector<std::string> library_;
  SuggestionSet per_label_;
  int calls_ = 0;
};

/// Wraps a provider with a per-template reply cache on disk.
class CachingProvider : public GeneratorProvider {
 public:
  CachingProvider(GeneratorProvider& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}

  SuggestionSet request(const ReactionRecord& tmpl, const std::vector<int>& labels, int num_suggestions) override {
    const auto path = cache_path(tmpl.reaction_id);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
      std::ifstream in(path);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.value("num_suggestions", -1) == num_suggestions && j.contains("suggestions")) {
        try {
          auto cached = suggestions_from_json(j.at("suggestions"));
          if (std::all_of(labels.begin(), labels.end(), [&](int l) { return cached.count(l) > 0; })) {
            ++hits_;
            return cached;
          }
        } catch (const ProviderError&) {
        }
      }
    }
    auto fresh = inner_.request(tmpl, labels, num_suggestions);
    std::filesystem::create_directories(dir_, ec);
    std::ofstream out(path, std::ios::trunc);
    if (out) out << nlohmann::json{{"num_suggestions", num_suggestions}, {"suggestions", suggestions_to_json(fresh)}}.dump(2) << '\n';
    return fresh;
  }

  int hits() const { return hits_; }

 private:
  std::filesystem::path cache_path(const std::string& id) const {
    std::string safe;
    for (char c : id) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return dir_ / (safe + ".json");
  }

  GeneratorProvider& inner_;
  std::filesystem::path dir_;
  int hits_ = 0;
};

// ---------------------------------------------------------------------------
// Enumeration

struct ExpansionLimits {
  int per_label = 8;
  int max_instances = 64;
};

struct ExpansionResult {
  std::vector<ReactionRecord> instances;
  std::vector<std::map<int, std::string>> assignments;  // parallel to instances
  std::vector<Diagnostic> rejections;
};

/// Suggestions for each label are capped, sorted, and combined in odometer
/// order (last label fastest). Each combination is substituted and checked;
/// valid instances are kept up to max_instances, skipping any whose
/// canonical reaction string was already produced.
inline ExpansionResult expand_template(const ReactionRecord& tmpl, GeneratorProvider& provider,
                                       const ExpansionLimits& limits = {}, const LoadOptions& lint = {}) {
  if (limits.per_label < 1 || limits.max_instances < 1) throw std::invalid_argument("expansion limits must be positive");
  ExpansionResult res;
  const auto labels = extract_rgroups(tmpl);

  SuggestionSet sugg;
  if (!labels.empty()) {
    SuggestionSet raw;
    try {
      raw = provider.request(tmpl, labels, limits.per_label);
    } catch (const ProviderError& e) {
      throw ProviderError(tmpl.reaction_id + ": " + e.what());
    }
    sugg = sanitize_suggestions(raw, labels, &res.rejections);
    for (auto& [l, frags] : sugg) {
      if (static_cast<int>(frags.size()) > limits.per_label) frags.resize(static_cast<std::size_t>(limits.per_label));
      std::sort(frags.begin(), frags.end());
    }
  }

  LoadOptions strict = lint;
  strict.strict = false;
  strict.allow_placeholders = false;
  std::set<std::string> seen;
  std::vector<std::size_t> odo(labels.size(), 0);
  int serial = 0;
  while (true) {
    std::map<int, std::string> assignment;
    for (std::size_t k = 0; k < labels.size(); ++k) assignment[labels[k]] = sugg[labels[k]][odo[k]];
    std::string tag;
    for (const auto& [l, f] : assignment) tag += (tag.empty() ? "" : ", ") + placeholder_token(l) + "=" + f;

    auto sub = substitute_checked(tmpl, assignment);
    if (!sub.problems.empty()) {
      for (auto& p : sub.problems) res.rejections.push_back({tag, p.code, p.location + ": " + p.message});
    } else {
      auto rec = std::move(sub.record);
      const std::string key = reaction_smiles(rec.reactants_smiles, rec.products_smiles);
      if (!seen.insert(key).second) {
        res.rejections.push_back({tag, "duplicate_instance", key});
      } else {
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "-S%03d", ++serial);
        rec.reaction_id = tmpl.reaction_id + suffix;
        auto diags = lint_record(rec, "instance", strict);
        if (diags.empty()) {
          res.instances.push_back(std::move(rec));
          res.assignments.push_back(assignment);
        } else {
          --serial;
          for (auto& d : diags) res.rejections.push_back({tag, d.code, d.message});
        }
      }
    }
    if (static_cast<int>(res.instances.size()) >= limits.max_instances) break;

    std::size_t k = labels.size();
    while (k > 0) {
      --k;
      if (++odo[k] < sugg[labels[k]].size()) break;
      odo[k] = 0;
      if (k == 0) {
        k = labels.size() + 1;
        break;
      }
    }
    if (labels.empty() || k == labels.size() + 1) break;
  }
  return res;
}

}  // namespace mecheval
