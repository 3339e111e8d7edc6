#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mecheval/chem/elements.hpp"
#include "mecheval/chem/molecule.hpp"

namespace mecheval::chem {

enum class ParseErrorKind { Grammar, UnclosedRing, RingBondConflict };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        kind_(kind),
        offset_(offset) {}

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

struct ParseOptions {
  /// Accept "[*:n]" R-group placeholders (n >= 1). Any other "*" is rejected.
  bool allow_placeholders = false;
};

namespace detail {

class SmilesReader {
 public:
  SmilesReader(std::string_view text, ParseOptions opts) : s_(text), opts_(opts) {}

  Molecule run() {
    if (s_.empty()) fail("empty SMILES");
    bool expect_atom = true;  // start of string or after '.'
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '(') {
        if (prev_ < 0 || pending_) fail("branch without a preceding atom");
        branches_.push_back(prev_);
        ++pos_;
        if (pos_ < s_.size() && s_[pos_] == ')') fail("empty branch");
        continue;
      }
      if (c == ')') {
        if (branches_.empty()) fail("unbalanced ')'");
        if (pending_) fail("bond symbol before ')'");
        prev_ = branches_.back();
        branches_.pop_back();
        ++pos_;
        continue;
      }
      if (c == '.') {
        if (expect_atom || pending_) fail("misplaced '.'");
        if (!branches_.empty()) fail("'.' inside a branch");
        prev_ = -1;
        expect_atom = true;
        ++pos_;
        continue;
      }
      if (is_bond_char(c)) {
        if (prev_ < 0 || pending_) fail("misplaced bond symbol");
        if (c == '$') fail("quadruple bonds are not supported");
        pending_ = c;
        pending_offset_ = pos_;
        ++pos_;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (prev_ < 0) fail("ring bond without a preceding atom");
        ring_bond();
        continue;
      }
      atom();
      expect_atom = false;
    }
    if (pending_) fail_at(pending_offset_, "dangling bond symbol");
    if (!branches_.empty()) fail("unbalanced '('");
    if (expect_atom) fail("trailing '.'");
    if (!rings_.empty()) {
      const auto& [digit, open] = *rings_.begin();
      throw ParseError(ParseErrorKind::UnclosedRing, open.offset,
                       "unclosed ring bond " + std::to_string(digit));
    }
    mol_.assign_implicit_hydrogens();
    resolve_double_bond_stereo();
    return std::move(mol_);
  }

 private:
  struct OpenRing {
    int atom;
    char bond;  // 0 when unspecified
    std::size_t offset;
    std::size_t stereo_slot;  // index into atom's stereo_refs, or npos
  };
  struct DirectionalBond {
    int from;
    int to;
    char dir;
  };

  static bool is_bond_char(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\' || c == '$';
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
    throw ParseError(ParseErrorKind::Grammar, at, msg);
  }

  BondOrder order_for(char sym, int a, int b) const {
    switch (sym) {
      case '=': return BondOrder::Double;
      case '#': return BondOrder::Triple;
      case ':': return BondOrder::Aromatic;
      case '-': case '/': case '\\': return BondOrder::Single;
      default:
        return mol_.atom(a).aromatic && mol_.atom(b).aromatic ? BondOrder::Aromatic
                                                              : BondOrder::Single;
    }
  }

  void note_neighbor(int centre, int nb) {
    Atom& a = mol_.atom(centre);
    if (a.chirality != Chirality::None) a.stereo_refs.push_back(nb);
  }

  void atom() {
    const std::size_t start = pos_;
    Atom a;
    a.source_offset = start;
    if (s_[pos_] == '[') {
      bracket_atom(a);
    } else {
      organic_atom(a);
    }
    const int idx = mol_.add_atom(std::move(a));
    if (prev_ >= 0) {
      const char sym = pending_;
      BondOrder order = order_for(sym, prev_, idx);
      try {
        mol_.add_bond(prev_, idx, order);
      } catch (const std::invalid_argument& e) {
        fail_at(start, e.what());
      }
      if (sym == '/' || sym == '\\') directional_.push_back({prev_, idx, sym});
      note_neighbor(prev_, idx);
      Atom& self = mol_.atom(idx);
      if (self.chirality != Chirality::None) self.stereo_refs.push_back(prev_);
    }
    Atom& self = mol_.atom(idx);
    if (self.chirality != Chirality::None && self.explicit_h.value_or(0) > 0)
      self.stereo_refs.push_back(kImplicitHydrogen);
    pending_ = 0;
    prev_ = idx;
  }

  void organic_atom(Atom& a) {
    const char c = s_[pos_];
    auto two = [&](char second) {
      return pos_ + 1 < s_.size() && s_[pos_ + 1] == second;
    };
    int z = -1;
    std::size_t len = 1;
    switch (c) {
      case 'C':
        if (two('l')) { z = 17; len = 2; } else { z = 6; }
        break;
      case 'B':
        if (two('r')) { z = 35; len = 2; } else { z = 5; }
        break;
      case 'N': z = 7; break;
      case 'O': z = 8; break;
      case 'P': z = 15; break;
      case 'S': z = 16; break;
      case 'F': z = 9; break;
      case 'I': z = 53; break;
      case 'b': z = 5; a.aromatic = true; break;
      case 'c': z = 6; a.aromatic = true; break;
      case 'n': z = 7; a.aromatic = true; break;
      case 'o': z = 8; a.aromatic = true; break;
      case 'p': z = 15; a.aromatic = true; break;
      case 's': z = 16; a.aromatic = true; break;
      case '*': fail("unbracketed wildcard atom");
      default:
        fail(std::string("unexpected character '") + c + "'");
    }
    a.element = z;
    pos_ += len;
  }

  int read_number() {
    int v = 0;
    std::size_t digits = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + (s_[pos_] - '0');
      ++pos_;
      if (++digits > 6) fail("number too long");
    }
    return v;
  }

  void bracket_atom(Atom& a) {
    const std::size_t open = pos_;
    ++pos_;  // '['
    a.bracket = true;
    if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      a.isotope = read_number();
    if (pos_ >= s_.size()) fail_at(open, "unterminated bracket atom");
    const char c = s_[pos_];
    if (c == '*') {
      a.element = 0;
      ++pos_;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::optional<int> z;
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        z = atomic_number(s_.substr(pos_, 2));
        if (z) pos_ += 2;
      }
      if (!z) {
        z = atomic_number(s_.substr(pos_, 1));
        if (!z) fail("unknown element symbol");
        ++pos_;
      }
      a.element = *z;
    } else if (std::islower(static_cast<unsigned char>(c))) {
      std::optional<int> z;
      if (pos_ + 1 < s_.size()) {
        std::string_view two = s_.substr(pos_, 2);
        if (two == "se") z = 34;
        else if (two == "as") z = 33;
        if (z) pos_ += 2;
      }
      if (!z) {
        switch (c) {
          case 'b': z = 5; break;
          case 'c': z = 6; break;
          case 'n': z = 7; break;
          case 'o': z = 8; break;
          case 'p': z = 15; break;
          case 's': z = 16; break;
          default: fail("unknown aromatic symbol");
        }
        ++pos_;
      }
      a.element = *z;
      a.aromatic = true;
    } else {
      fail("expected element symbol in bracket atom");
    }
    if (pos_ < s_.size() && s_[pos_] == '@') {
      ++pos_;
      a.chirality = Chirality::CounterClockwise;
      if (pos_ < s_.size() && s_[pos_] == '@') {
        ++pos_;
        a.chirality = Chirality::Clockwise;
      }
      if (pos_ < s_.size() && std::isupper(static_cast<unsigned char>(s_[pos_])) &&
          s_[pos_] != 'H')
        fail("unsupported stereo class");
    }
    if (pos_ < s_.size() && s_[pos_] == 'H') {
      ++pos_;
      int h = 1;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        h = s_[pos_] - '0';
        ++pos_;
      }
      a.explicit_h = h;
    } else {
      a.explicit_h = 0;
    }
    if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
      const char sign = s_[pos_];
      const int unit = sign == '+' ? 1 : -1;
      ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        a.charge = unit * read_number();
      } else {
        int n = 1;
        while (pos_ < s_.size() && s_[pos_] == sign) {
          ++n;
          ++pos_;
        }
        a.charge = unit * n;
      }
    }
    if (pos_ < s_.size() && s_[pos_] == ':') {
      ++pos_;
      if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
        fail("atom class requires digits");
      a.map_number = read_number();
    }
    if (pos_ >= s_.size() || s_[pos_] != ']') fail("expected ']'");
    ++pos_;
    if (a.element == 0) {
      if (!opts_.allow_placeholders) fail_at(open, "wildcard atom outside template context");
      if (a.map_number <= 0) fail_at(open, "placeholder label must be a positive integer");
      if (a.charge != 0 || a.explicit_h.value_or(0) != 0 || a.isotope || a.aromatic ||
          a.chirality != Chirality::None)
        fail_at(open, "placeholder must be written as [*:n]");
    }
  }

  void ring_bond() {
    const std::size_t at = pos_;
    int digit = 0;
    if (s_[pos_] == '%') {
      ++pos_;
      if (pos_ + 1 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))
        fail("'%' must be followed by two digits");
      digit = (s_[pos_] - '0') * 10 + (s_[pos_ + 1] - '0');
      pos_ += 2;
    } else {
      digit = s_[pos_] - '0';
      ++pos_;
    }
    const char sym = pending_;
    pending_ = 0;
    auto it = rings_.find(digit);
    if (it == rings_.end()) {
      std::size_t slot = std::string::npos;
      Atom& a = mol_.atom(prev_);
      if (a.chirality != Chirality::None) {
        slot = a.stereo_refs.size();
        a.stereo_refs.push_back(-2);  // filled when the ring closes
      }
      rings_[digit] = OpenRing{prev_, sym, at, slot};
      return;
    }
    OpenRing open = it->second;
    rings_.erase(it);
    if (open.atom == prev_)
      throw ParseError(ParseErrorKind::RingBondConflict, at, "ring bond to itself");
    char use = open.bond ? open.bond : sym;
    if (open.bond && sym && open.bond != sym) {
      const bool both_dir = (open.bond == '/' || open.bond == '\\') && (sym == '/' || sym == '\\');
      if (!both_dir)
        throw ParseError(ParseErrorKind::RingBondConflict, at,
                         "conflicting ring bond symbols for ring " + std::to_string(digit));
    }
    BondOrder order = order_for(use, open.atom, prev_);
    try {
      mol_.add_bond(open.atom, prev_, order);
    } catch (const std::invalid_argument&) {
      throw ParseError(ParseErrorKind::RingBondConflict, at,
                       "ring bond duplicates an existing bond");
    }
    if (open.bond == '/' || open.bond == '\\')
      directional_.push_back({open.atom, prev_, open.bond});
    else if (sym == '/' || sym == '\\')
      directional_.push_back({prev_, open.atom, sym});
    if (open.stereo_slot != std::string::npos)
      mol_.atom(open.atom).stereo_refs[open.stereo_slot] = prev_;
    note_neighbor(prev_, open.atom);
  }

  // "F/C=C/F": a bond written u->v with '/' puts v "up" relative to u. For a
  // double-bond end atom x with substituent y, the substituent's side is
  // +1 for '/' when written y->x and flips when written x->y. Equal sides on
  // both ends means cis.
  void resolve_double_bond_stereo() {
    if (directional_.empty()) return;
    auto side = [&](int end, int skip) -> std::optional<std::pair<int, int>> {
      for (const auto& d : directional_) {
        int sub = -1;
        int sign = d.dir == '/' ? 1 : -1;
        if (d.to == end && d.from != skip) {
          sub = d.from;
        } else if (d.from == end && d.to != skip) {
          sub = d.to;
          sign = -sign;
        }
        if (sub >= 0) return std::make_pair(sub, sign);
      }
      return std::nullopt;
    };
    for (int b = 0; b < mol_.bond_count(); ++b) {
      const Bond& bond = mol_.bond(b);
      if (bond.order != BondOrder::Double) continue;
      auto l = side(bond.begin, bond.end);
      auto r = side(bond.end, bond.begin);
      if (!l || !r) continue;
      mol_.double_bond_stereo().push_back(
          DoubleBondStereo{b, l->first, r->first, l->second == r->second});
    }
  }

  std::string_view s_;
  ParseOptions opts_;
  std::size_t pos_ = 0;
  Molecule mol_;
  int prev_ = -1;
  char pending_ = 0;
  std::size_t pending_offset_ = 0;
  std::vector<int> branches_;
  std::map<int, OpenRing> rings_;
  std::vector<DirectionalBond> directional_;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses a SMILES string into a molecular graph.
///
/// Atom order follows the source. Organic-subset atoms receive implicit
/// hydrogens from the standard valence table; bracket atoms keep their
/// written count. Dot-separated fragments become separate components of the
/// same Molecule. Surrounding whitespace is ignored.
///
/// Throws ParseError (grammar, unclosed ring digit, or ring-bond conflict).
inline Molecule parse_smiles(std::string_view text, ParseOptions opts = {}) {
  std::string_view t = detail::trim(text);
  if (t.empty()) throw ParseError(ParseErrorKind::Grammar, 0, "empty SMILES");
  return detail::SmilesReader(t, opts).run();
}

}  // namespace mecheval::chem
