// Scores one hand-written model answer against a gold mechanism and prints
// the alignment.

#include <cstdio>
#include <iostream>

#include "mecheval/metrics.hpp"

using namespace mecheval;

int main(int argc, char** argv) {
  const std::string gold_path = argc > 1 ? argv[1] : std::string(MECHEVAL_DATA_DIR) + "/e2e/gold.jsonl";
  const auto gold = load_reactions(gold_path).records;
  const auto& pinacol = gold.back();

  // A model that repeats the protonation step and names the last step wrongly.
  const std::string answer = R"(Here is the mechanism:
[
  {"step": 1, "type": "proton_transfer", "subtype": "acid_base_proton_transfer", "intermediate_smiles": "CC(C)(O)C(C)(C)[OH2+]"},
  {"step": 2, "type": "proton_transfer", "subtype": "acid_base_proton_transfer", "intermediate_smiles": "OS(=O)(=O)O"},
  {"step": 3, "type": "cleavage", "subtype": "heterolytic_cleavage", "intermediate_smiles": "CC(C)(O)[C+](C)C"},
  {"step": 4, "type": "rearrangement", "subtype": "1,2-shift", "intermediate_smiles": "CC(C)(C)[C+](C)O"},
  {"step": 5, "type": "elimination", "subtype": "leaving_group_elimination", "intermediate_smiles": "CC(=O)C(C)(C)C"}
])";

  const auto pred = extract_prediction(answer, pinacol.reaction_id);
  for (const auto& d : pred.extraction_diagnostics) std::cout << "extract: " << to_string(d) << '\n';

  const auto report = evaluate_reaction(pinacol, pred);
  std::printf("%s  V=%.3f  L=%.3f  S_tot=%.3f  S_part=%.3f\n", report.reaction_id.c_str(), report.V, report.L,
              report.S_tot, report.S_part);
  for (const auto& a : report.alignment.actions) {
    std::printf("  %-13s gold %-2s pred %-2s  credit %.4f\n", std::string(to_string(a.tag)).c_str(),
                a.gold_index ? std::to_string(*a.gold_index).c_str() : "-",
                a.pred_index ? std::to_string(*a.pred_index).c_str() : "-", a.s_tot);
  }
}
