#pragma once

#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "mecheval/chem/aromaticity.hpp"
#include "mecheval/chem/molecule.hpp"
#include "mecheval/chem/smiles_parser.hpp"

namespace mecheval::chem {

enum class FailureKind { Grammar, UnclosedRing, Valence, Kekulization, Charge };

inline std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::Grammar: return "grammar";
    case FailureKind::UnclosedRing: return "unclosed_ring";
    case FailureKind::Valence: return "valence";
    case FailureKind::Kekulization: return "kekulization";
    case FailureKind::Charge: return "charge";
  }
  return "grammar";
}

struct ValidityFailure {
  FailureKind kind;
  std::string detail;
  // Source offset for grammar-level failures, atom index otherwise.
  std::size_t location = 0;
};

struct ValidityReport {
  std::vector<ValidityFailure> failures;

  bool is_valid() const { return failures.empty(); }
  bool has(FailureKind k) const {
    for (const auto& f : failures)
      if (f.kind == k) return true;
    return false;
  }
};

inline constexpr int kMaxAbsCharge = 4;

/// Checks formal charge range, valence against `table`, and that aromatic
/// systems admit a Kekulé assignment. Under-valent atoms (cations, radicals,
/// carbenes) pass; over-valent atoms fail. Never throws.
inline ValidityReport validate_molecule(const Molecule& mol,
                                        const ValenceTable& table = ValenceTable::builtin()) {
  ValidityReport report;
  for (int i = 0; i < mol.atom_count(); ++i) {
    const Atom& a = mol.atom(i);
    if (std::abs(a.charge) > kMaxAbsCharge)
      report.failures.push_back({FailureKind::Charge,
                                 "formal charge " + std::to_string(a.charge) + " out of range",
                                 static_cast<std::size_t>(i)});
  }

  Molecule kek = mol;
  if (auto err = kekulize(kek, table)) {
    report.failures.push_back({FailureKind::Kekulization, *err, 0});
    kek = mol;  // fall back to aromatic-as-single counting for valence
  }
  for (int i = 0; i < kek.atom_count(); ++i) {
    const Atom& a = kek.atom(i);
    if (a.is_wildcard()) continue;
    auto allowed = table.allowed(a.element, a.charge);
    if (!allowed || allowed->empty()) continue;
    const int used = kek.bond_valence(i) + a.hydrogen_count();
    if (used > allowed->back()) {
      report.failures.push_back(
          {FailureKind::Valence,
           std::string(element_symbol(a.element)) + " (charge " + std::to_string(a.charge) +
               ") has valence " + std::to_string(used) + ", max " +
               std::to_string(allowed->back()),
           static_cast<std::size_t>(i)});
    }
  }
  return report;
}

/// Parse + validate in one step; parse errors become grammar or
/// unclosed_ring failures located at the source offset.
inline ValidityReport assess_smiles(std::string_view text, ParseOptions opts = {},
                                    const ValenceTable& table = ValenceTable::builtin()) {
  try {
    return validate_molecule(parse_smiles(text, opts), table);
  } catch (const ParseError& e) {
    ValidityReport r;
    r.failures.push_back({e.kind() == ParseErrorKind::UnclosedRing ? FailureKind::UnclosedRing
                                                                    : FailureKind::Grammar,
                          e.what(), e.offset()});
    return r;
  }
}

inline bool is_valid_smiles(std::string_view text, ParseOptions opts = {}) {
  return assess_smiles(text, opts).is_valid();
}

}  // namespace mecheval::chem
