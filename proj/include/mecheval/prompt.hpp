#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mecheval/dataset_io.hpp"
#include "mecheval/taxonomy.hpp"

namespace mecheval {

/// Built-in mechanism prompt. Placeholders: {taxonomy}, {examples},
/// {reactants_smiles}, {products_smiles}, {conditions}.
inline const std::string& default_icl_template() {
  static const std::string text = R"(You are an organic chemist writing reaction mechanisms one elementary step at a time.

Task: from the reactants, products and conditions below, write the mechanism as a JSON list of steps.
Each step is an object with:
1. "step": position in the sequence, starting at 1
2. "type": one of the step types listed below, spelled exactly
3. "subtype": one of the subtypes listed below under that type, spelled exactly
4. "intermediate_smiles": SMILES of the species formed by the step; it must parse

Allowed step types and subtypes:
{taxonomy}

Return only the valid JSON list, with no prose, code fences or comments around it:
[
  {"step": 1, "type": "", "subtype": "", "intermediate_smiles": ""},
  ...
]
{examples}
Input for you:
[
  {
    "reactants_smiles": "{reactants_smiles}",
    "products_smiles": "{products_smiles}",
    "conditions": "{conditions}"
  }
]

Now, generate your output!
)";
  return text;
}

inline std::string load_prompt_template(const std::string& path) {
  return path.empty() ? default_icl_template() : read_text_file(path);
}

namespace detail {

inline std::string joined(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ".") + p;
  return s;
}

inline std::string taxonomy_listing(const Taxonomy& tax) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& s : tax.subtypes()) {
    nlohmann::ordered_json row{{"type", s.type}, {"subtype", s.name}};
    if (!s.description.empty()) row["description"] = s.description;
    rows.push_back(row);
  }
  std::string out = "[\n";
  for (std::size_t i = 0; i < rows.size(); ++i) out += "  " + rows[i].dump() + (i + 1 < rows.size() ? ",\n" : "\n");
  return out + "]";
}

inline std::string example_block(const ReactionRecord& r, int n) {
  nlohmann::ordered_json input = nlohmann::ordered_json::array();
  input.push_back({{"reactants_smiles", joined(r.reactants_smiles)},
                   {"products_smiles", joined(r.products_smiles)},
                   {"conditions", r.conditions}});
  std::string steps = "[\n";
  for (std::size_t i = 0; i < r.mechanism.size(); ++i) {
    const auto& s = r.mechanism[i];
    nlohmann::ordered_json row{{"step", s.step}, {"type", s.type}, {"subtype", s.subtype}, {"intermediate_smiles", s.intermediate_smiles}};
    steps += "  " + row.dump() + (i + 1 < r.mechanism.size() ? ",\n" : "\n");
  }
  steps += "]";
  return "\nExample " + std::to_string(n) + "\nInput:\n" + input.dump(2) + "\nExpected Output:\n" + steps + "\n";
}

}  // namespace detail

/// Fills the prompt template. Each exemplar contributes one input/output
/// pair; throws std::invalid_argument for an exemplar without mechanism.
inline std::string assemble_icl_prompt(const ReactionRecord& query, const std::vector<ReactionRecord>& exemplars,
                                       const std::string& prompt_template = default_icl_template(),
                                       const Taxonomy& taxonomy = Taxonomy::builtin()) {
  std::string examples;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    if (exemplars[i].mechanism.empty())
      throw std::invalid_argument("exemplar " + exemplars[i].reaction_id + " has no mechanism");
    examples += detail::example_block(exemplars[i], static_cast<int>(i + 1));
  }
  const std::map<std::string, std::string> values{{"{taxonomy}", detail::taxonomy_listing(taxonomy)},
                                                  {"{examples}", examples},
                                                  {"{reactants_smiles}", detail::joined(query.reactants_smiles)},
                                                  {"{products_smiles}", detail::joined(query.products_smiles)},
                                                  {"{conditions}", query.conditions}};
  // Single left-to-right pass so filled text is never rescanned.
  std::string out;
  std::size_t pos = 0;
  while (pos < prompt_template.size()) {
    bool replaced = false;
    if (prompt_template[pos] == '{') {
      for (const auto& [key, val] : values) {
        if (prompt_template.compare(pos, key.size(), key) == 0) {
          out += val;
          pos += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += prompt_template[pos++];
  }
  return out;
}

}  // namespace mecheval
