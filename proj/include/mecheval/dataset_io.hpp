#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mecheval/alignment.hpp"
#include "mecheval/chem/validity.hpp"
#include "mecheval/taxonomy.hpp"

namespace mecheval {

struct MechanismStep {
  int step = 0;
  std::string type;
  std::string subtype;
  std::string intermediate_smiles;
  std::optional<double> step_weight;
  std::optional<std::string> rationale;

  bool operator==(const MechanismStep&) const = default;
};

struct ReactionRecord {
  std::string reaction_id;
  std::string level;
  std::string name;
  std::vector<std::string> reactants_smiles;
  std::vector<std::string> products_smiles;
  std::string conditions;
  int mechanism_step_nums = 0;
  std::string description;
  std::vector<MechanismStep> mechanism;

  bool operator==(const ReactionRecord&) const = default;
};

struct Diagnostic {
  std::string location;  // "line 3", "line 3 NR-201 step 2", ...
  std::string code;
  std::string message;
};

inline std::string to_string(const Diagnostic& d) { return d.location + ": " + d.code + ": " + d.message; }

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(Diagnostic d) : std::runtime_error(to_string(d)), diagnostic(std::move(d)) {}
  Diagnostic diagnostic;
};

struct LoadOptions {
  bool strict = true;
  bool allow_placeholders = false;  // template datasets carry [*:n] atoms
  double weight_sum_tolerance = 1e-3;
  const Taxonomy* taxonomy = nullptr;  // built-in when null
};

struct LoadResult {
  std::vector<ReactionRecord> records;
  std::vector<Diagnostic> diagnostics;
};

inline const std::vector<std::string>& difficulty_levels() {
  static const std::vector<std::string> levels{"easy", "medium", "hard"};
  return levels;
}

namespace detail {

inline ReactionRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  ReactionRecord r;
  r.reaction_id = j.at("reaction_id").get<std::string>();
  r.level = j.at("level").get<std::string>();
  r.name = j.value("name", std::string{});
  r.reactants_smiles = j.at("reactants_smiles").get<std::vector<std::string>>();
  r.products_smiles = j.at("products_smiles").get<std::vector<std::string>>();
  r.conditions = j.value("conditions", std::string{});
  r.mechanism_step_nums = j.at("mechanism_step_nums").get<int>();
  r.description = j.value("description", std::string{});
  for (const auto& s : j.at("mechanism")) {
    MechanismStep m;
    m.step = s.at("step").get<int>();
    m.type = s.at("type").get<std::string>();
    m.subtype = s.at("subtype").get<std::string>();
    m.intermediate_smiles = s.at("intermediate_smiles").get<std::string>();
    if (s.contains("step_weight") && !s.at("step_weight").is_null()) m.step_weight = s.at("step_weight").get<double>();
    if (s.contains("rationale") && !s.at("rationale").is_null()) m.rationale = s.at("rationale").get<std::string>();
    r.mechanism.push_back(std::move(m));
  }
  return r;
}

inline std::optional<std::string> smiles_problem(const std::string& smiles, bool allow_placeholders) {
  const auto report = chem::assess_smiles(smiles, chem::ParseOptions{allow_placeholders});
  if (report.is_valid()) return std::nullopt;
  const auto& f = report.failures.front();
  return std::string(chem::to_string(f.kind)) + ": " + f.detail;
}

}  // namespace detail

/// Invariant checks for one record. Returns an empty list when clean.
inline std::vector<Diagnostic> lint_record(const ReactionRecord& r, const std::string& where,
                                           const LoadOptions& opts = {}) {
  const Taxonomy& tax = opts.taxonomy ? *opts.taxonomy : Taxonomy::builtin();
  std::vector<Diagnostic> out;
  const std::string at = where + " " + r.reaction_id;
  auto add = [&](std::string loc, std::string code, std::string msg) {
    out.push_back({std::move(loc), std::move(code), std::move(msg)});
  };

  if (r.reaction_id.empty()) add(where, "schema", "empty reaction_id");
  const auto& levels = difficulty_levels();
  if (std::find(levels.begin(), levels.end(), r.level) == levels.end())
    add(at, "schema", "level '" + r.level + "' is not easy, medium or hard");
  if (r.mechanism.empty()) add(at, "schema", "mechanism is empty");
  if (r.mechanism_step_nums != static_cast<int>(r.mechanism.size()))
    add(at, "step_count", "mechanism_step_nums is " + std::to_string(r.mechanism_step_nums) + " but " +
                              std::to_string(r.mechanism.size()) + " steps are listed");

  auto check_smiles = [&](const std::string& loc, const std::string& smi) {
    if (auto p = detail::smiles_problem(smi, opts.allow_placeholders)) add(loc, "smiles", "'" + smi + "' " + *p);
  };
  for (std::size_t i = 0; i < r.reactants_smiles.size(); ++i)
    check_smiles(at + " reactant " + std::to_string(i + 1), r.reactants_smiles[i]);
  for (std::size_t i = 0; i < r.products_smiles.size(); ++i)
    check_smiles(at + " product " + std::to_string(i + 1), r.products_smiles[i]);
  if (r.reactants_smiles.empty()) add(at, "schema", "no reactants");
  if (r.products_smiles.empty()) add(at, "schema", "no products");

  int weighted = 0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < r.mechanism.size(); ++i) {
    const auto& s = r.mechanism[i];
    const std::string loc = at + " step " + std::to_string(i + 1);
    if (s.step != static_cast<int>(i + 1))
      add(loc, "step_index", "step number " + std::to_string(s.step) + " where " + std::to_string(i + 1) + " expected");
    if (!tax.has_type(s.type)) {
      add(loc, "taxonomy", "unknown type '" + s.type + "'");
    } else if (!tax.contains(s.type, s.subtype)) {
      add(loc, "taxonomy", "subtype '" + s.subtype + "' is not listed under type '" + s.type + "'");
    }
    check_smiles(loc, s.intermediate_smiles);
    if (s.step_weight) {
      ++weighted;
      weight_sum += *s.step_weight;
      if (!(*s.step_weight >= 0.0)) add(loc, "weight", "negative step_weight");
    }
  }
  if (weighted > 0 && weighted < static_cast<int>(r.mechanism.size()))
    add(at, "weight", "step_weight present on only some steps");
  if (weighted == static_cast<int>(r.mechanism.size()) && weighted > 0 &&
      std::abs(weight_sum - 1.0) > opts.weight_sum_tolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", weight_sum);
    add(at, "weight", std::string("step weights sum to ") + buf);
  }
  return out;
}

/// Parses a dataset held in memory: one JSON record per line, or a single
/// JSON document holding a record or an array of records.
inline LoadResult parse_reactions(std::string_view text, const LoadOptions& opts = {}) {
  LoadResult res;
  auto fail = [&](Diagnostic d) {
    if (opts.strict) throw DatasetError(d);
    res.diagnostics.push_back(std::move(d));
  };

  std::vector<std::pair<std::string, nlohmann::json>> docs;  // (location, record json)
  bool whole_ok = false;
  {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos) {
      try {
        auto j = nlohmann::json::parse(text);
        if (j.is_array()) {
          for (std::size_t i = 0; i < j.size(); ++i) docs.emplace_back("record " + std::to_string(i + 1), j[i]);
          whole_ok = true;
        } else if (j.is_object()) {
          docs.emplace_back("record 1", j);
          whole_ok = true;
        }
      } catch (const nlohmann::json::exception&) {
      }
    } else {
      whole_ok = true;
    }
  }
  if (!whole_ok) {
    std::istringstream in{std::string(text)};
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string loc = "line " + std::to_string(lineno);
      docs.emplace_back(loc, nlohmann::json::parse(line, nullptr, false));
    }
  }

  std::set<std::string> ids;
  for (const auto& [loc, j] : docs) {
    if (j.is_discarded()) {
      fail({loc, "json", "line is not valid JSON"});
      continue;
    }
    ReactionRecord r;
    try {
      r = detail::record_from_json(j);
    } catch (const std::exception& e) {
      fail({loc, "schema", e.what()});
      continue;
    }
    auto diags = lint_record(r, loc, opts);
    if (!ids.insert(r.reaction_id).second)
      diags.push_back({loc + " " + r.reaction_id, "duplicate_id", "reaction_id appears more than once"});
    for (auto& d : diags) fail(std::move(d));
    res.records.push_back(std::move(r));
  }
  return res;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

/// Strict mode throws DatasetError at the first violation. Lenient mode keeps
/// every record that decodes and reports violations as diagnostics.
inline LoadResult load_reactions(const std::string& path, const LoadOptions& opts = {}) {
  return parse_reactions(read_text_file(path), opts);
}

namespace detail {

inline std::string json_str(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", w);
  return buf;
}

}  // namespace detail

/// One record as a single JSON line, keys in dataset order, weights at four
/// decimals.
inline std::string record_to_json_line(const ReactionRecord& r) {
  using detail::json_str;
  auto list = [](const std::vector<std::string>& v) { return nlohmann::json(v).dump(); };
  std::string out = "{\"reaction_id\":" + json_str(r.reaction_id) + ",\"level\":" + json_str(r.level) +
                    ",\"name\":" + json_str(r.name) + ",\"reactants_smiles\":" + list(r.reactants_smiles) +
                    ",\"products_smiles\":" + list(r.products_smiles) + ",\"conditions\":" + json_str(r.conditions) +
                    ",\"mechanism_step_nums\":" + std::to_string(r.mechanism_step_nums) +
                    ",\"description\":" + json_str(r.description) + ",\"mechanism\":[";
  for (std::size_t i = 0; i < r.mechanism.size(); ++i) {
    const auto& s = r.mechanism[i];
    if (i) out += ",";
    out += "{\"step\":" + std::to_string(s.step) + ",\"type\":" + json_str(s.type) + ",\"subtype\":" +
           json_str(s.subtype) + ",\"intermediate_smiles\":" + json_str(s.intermediate_smiles);
    if (s.step_weight) out += ",\"step_weight\":" + detail::format_weight(*s.step_weight);
    if (s.rationale) out += ",\"rationale\":" + json_str(*s.rationale);
    out += "}";
  }
  out += "]}";
  return out;
}

inline void save_reactions(const std::vector<ReactionRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Predictions

struct PredictedStep {
  int step = 0;
  std::string type;
  std::string subtype;
  std::string intermediate_smiles;
};

struct PredictionRecord {
  std::string reaction_id;
  std::vector<PredictedStep> steps;
  std::vector<Diagnostic> extraction_diagnostics;

  bool has_diagnostic(std::string_view code) const {
    return std::any_of(extraction_diagnostics.begin(), extraction_diagnostics.end(),
                       [&](const Diagnostic& d) { return d.code == code; });
  }
};

namespace detail {

// End offset (exclusive) of the bracketed value opening at `start`, skipping
// over JSON strings; npos when unbalanced.
inline std::size_t bracket_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"') in_str = true;
    else if (c == '[' || c == '{') ++depth;
    else if (c == ']' || c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

inline bool looks_like_steps(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) return false;
  for (const auto& e : j)
    if (!e.is_object()) return false;
  return std::any_of(j.begin(), j.end(), [](const nlohmann::json& e) {
    return e.contains("intermediate_smiles") || e.contains("type") || e.contains("subtype") || e.contains("step");
  });
}

struct Located {
  nlohmann::json value;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::optional<Located> first_step_array(std::string_view s) {
  for (std::size_t i = s.find('['); i != std::string_view::npos; i = s.find('[', i + 1)) {
    const std::size_t end = bracket_end(s, i);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(s.substr(i, end - i), nullptr, false);
    if (!j.is_discarded() && looks_like_steps(j)) return Located{std::move(j), i, end};
  }
  return std::nullopt;
}

// Contents of ``` fenced blocks, in order.
inline std::vector<std::string_view> fenced_blocks(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = s.find("```", pos);
    if (open == std::string_view::npos) break;
    std::size_t body = s.find('\n', open + 3);
    const std::size_t close = s.find("```", open + 3);
    if (close == std::string_view::npos) break;
    if (body == std::string_view::npos || body > close) body = open + 3;  // one-line fence
    else ++body;
    out.push_back(s.substr(body, close - body));
    pos = close + 3;
  }
  return out;
}

inline bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

inline std::optional<int> coerce_step(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return static_cast<int>(d);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      std::size_t used = 0;
      const int n = std::stoi(s, &used);
      if (used == s.size()) return n;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

inline std::string string_field(const nlohmann::json& obj, const char* key, bool& missing) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    missing = true;
    return {};
  }
  return it->get<std::string>();
}

}  // namespace detail

/// Pulls a step list out of raw model output. Never throws: text without a
/// usable JSON array yields an empty prediction tagged schema_error.
inline PredictionRecord extract_prediction(std::string_view raw, std::string reaction_id = {},
                                           const Taxonomy& taxonomy = Taxonomy::builtin()) {
  PredictionRecord rec;
  rec.reaction_id = std::move(reaction_id);
  auto diag = [&](std::string loc, std::string code, std::string msg) {
    rec.extraction_diagnostics.push_back({std::move(loc), std::move(code), std::move(msg)});
  };

  std::optional<detail::Located> found;
  std::string_view scope = raw;
  for (auto block : detail::fenced_blocks(raw)) {
    if ((found = detail::first_step_array(block))) {
      scope = block;
      diag("output", "code_fence", "steps read from a fenced code block");
      break;
    }
  }
  if (!found) {
    found = detail::first_step_array(raw);
    scope = raw;
    if (found && !detail::blank(raw.substr(0, found->begin))) diag("output", "leading_prose", "text before the JSON array");
    if (found && !detail::blank(raw.substr(found->end))) diag("output", "trailing_prose", "text after the JSON array");
  }
  if (!found) {
    diag("output", "schema_error", "no JSON array of step objects found");
    return rec;
  }

  const auto& arr = found->value;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& o = arr[i];
    const std::string loc = "step " + std::to_string(i + 1);
    PredictedStep s;
    if (auto it = o.find("step"); it != o.end()) {
      if (auto n = detail::coerce_step(*it)) {
        s.step = *n;
        if (!it->is_number_integer()) diag(loc, "coerced_step", "step number coerced from " + it->dump());
      } else {
        s.step = static_cast<int>(i + 1);
        diag(loc, "schema_error", "unreadable step number " + it->dump());
      }
    } else {
      s.step = static_cast<int>(i + 1);
      diag(loc, "schema_error", "missing step number");
    }
    bool missing = false;
    s.type = detail::string_field(o, "type", missing);
    s.subtype = detail::string_field(o, "subtype", missing);
    s.intermediate_smiles = detail::string_field(o, "intermediate_smiles", missing);
    if (missing) diag(loc, "schema_error", "missing or non-string type, subtype or intermediate_smiles");
    if (!taxonomy.has_type(s.type)) {
      diag(loc, "oov_label", "type '" + s.type + "' is not in the taxonomy");
      s.type = std::string(kOutOfVocabulary);
    }
    if (!taxonomy.has_subtype(s.subtype)) {
      diag(loc, "oov_label", "subtype '" + s.subtype + "' is not in the taxonomy");
      s.subtype = std::string(kOutOfVocabulary);
    }
    rec.steps.push_back(std::move(s));
  }
  std::stable_sort(rec.steps.begin(), rec.steps.end(),
                   [](const PredictedStep& a, const PredictedStep& b) { return a.step < b.step; });
  return rec;
}

/// Raw model outputs keyed by reaction_id: either a JSON object mapping ids
/// to text (or to an already parsed step array), or a directory holding one
/// <reaction_id>.<ext> file per reaction.
inline std::map<std::string, std::string> load_raw_predictions(const std::string& path) {
  namespace fs = std::filesystem;
  std::map<std::string, std::string> out;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      out[entry.path().stem().string()] = read_text_file(entry.path().string());
    }
    return out;
  }
  const std::string text = read_text_file(path);
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw IoError(path + " is not a JSON object of predictions");
  for (const auto& [id, v] : j.items()) out[id] = v.is_string() ? v.get<std::string>() : v.dump();
  return out;
}

}  // namespace mecheval
