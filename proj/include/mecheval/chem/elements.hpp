#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mecheval::chem {

// Atomic number 0 is reserved for the "*" wildcard.
inline constexpr std::array<std::string_view, 119> kElementSymbols = {
    "*",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na",
    "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",
    "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag",
    "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu",
    "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi",
    "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am",
    "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh",
    "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

inline std::optional<int> atomic_number(std::string_view symbol) {
  for (std::size_t z = 0; z < kElementSymbols.size(); ++z) {
    if (kElementSymbols[z] == symbol) return static_cast<int>(z);
  }
  return std::nullopt;
}

inline std::string_view element_symbol(int z) {
  if (z < 0 || z >= static_cast<int>(kElementSymbols.size()))
    throw std::out_of_range("atomic number out of range");
  return kElementSymbols[static_cast<std::size_t>(z)];
}

/// Elements that may be written in lowercase (aromatic) form.
inline bool supports_aromaticity(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 15: case 16: case 33: case 34:
      return true;
    default:
      return false;
  }
}

/// Organic-subset symbols that may appear outside brackets.
inline bool in_organic_subset(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 9: case 15: case 16: case 17:
    case 35: case 53:
      return true;
    default:
      return false;
  }
}

inline bool is_noble_gas(int z) {
  return z == 2 || z == 10 || z == 18 || z == 36 || z == 54 || z == 86;
}

/// Permitted valences per (element, formal charge).
///
/// The neutral table covers the main-group elements the validity check
/// judges. A charged atom takes the valences of its isoelectronic neutral
/// element (N+ behaves like C, O- like F, C+ like B); landing on a noble gas
/// permits no bonds. Elements outside the table are not valence-checked.
/// Entries from an override file replace the computed list for that exact
/// (element, charge) key.
class ValenceTable {
 public:
  static constexpr int kVersion = 1;

  ValenceTable() {
    neutral_ = {
        {1, {1}},        {5, {3}},    {6, {4}},  {7, {3}},     {8, {2}},
        {9, {1}},        {14, {4}},   {15, {3, 5}}, {16, {2, 4, 6}},
        {17, {1}},       {33, {3, 5}}, {34, {2, 4, 6}}, {35, {1}},
        {52, {2, 4, 6}}, {53, {1}},
    };
  }

  static const ValenceTable& builtin() {
    static const ValenceTable table;
    return table;
  }

  /// Empty optional: element/charge combination is not checked.
  std::optional<std::vector<int>> allowed(int z, int charge) const {
    if (auto it = overrides_.find({z, charge}); it != overrides_.end())
      return it->second;
    if (!neutral_.count(z)) return std::nullopt;
    const int shifted = z - charge;
    if (shifted <= 0) return std::vector<int>{0};
    if (is_noble_gas(shifted)) return std::vector<int>{0};
    if (auto it = neutral_.find(shifted); it != neutral_.end())
      return it->second;
    return std::nullopt;
  }

  /// Smallest permitted valence >= used, or nullopt when used exceeds all.
  std::optional<int> fit(int z, int charge, int used) const {
    auto vals = allowed(z, charge);
    if (!vals) return std::nullopt;
    for (int v : *vals)
      if (v >= used) return v;
    return std::nullopt;
  }

  void set_override(int z, int charge, std::vector<int> valences) {
    std::sort(valences.begin(), valences.end());
    overrides_[{z, charge}] = std::move(valences);
  }

  /// Reads "Symbol[+n|-n] = v1,v2" lines; '#' starts a comment.
  void load_overrides(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos)
        line.erase(hash);
      auto eq = line.find('=');
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      if (eq == std::string::npos)
        throw std::runtime_error("valence override line " +
                                 std::to_string(lineno) + ": missing '='");
      std::string key = trim(line.substr(0, eq));
      std::string vals = trim(line.substr(eq + 1));
      std::size_t split = key.find_first_of("+-");
      std::string sym = key.substr(0, split);
      int charge = 0;
      if (split != std::string::npos) {
        std::string c = key.substr(split);
        charge = c.size() == 1 ? (c[0] == '+' ? 1 : -1) : std::stoi(c);
      }
      auto z = atomic_number(sym);
      if (!z || *z == 0)
        throw std::runtime_error("valence override line " +
                                 std::to_string(lineno) + ": unknown element '" +
                                 sym + "'");
      std::vector<int> list;
      std::stringstream ss(vals);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) list.push_back(std::stoi(tok));
      }
      set_override(*z, charge, std::move(list));
    }
  }

  static ValenceTable with_override_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open valence override file " + path);
    ValenceTable t;
    t.load_overrides(in);
    return t;
  }

 private:
  std::map<int, std::vector<int>> neutral_;
  std::map<std::pair<int, int>, std::vector<int>> overrides_;
};

}  // namespace mecheval::chem
