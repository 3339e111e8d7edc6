#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "mecheval/alignment.hpp"
#include "mecheval/dataset_io.hpp"
#include "mecheval/weights.hpp"

namespace mecheval {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { json, csv, markdown };

inline std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::markdown: return "markdown";
  }
  return "json";
}

inline OutputFormat parse_output_format(std::string_view s) {
  for (auto f : {OutputFormat::json, OutputFormat::csv, OutputFormat::markdown})
    if (to_string(f) == s) return f;
  throw ConfigError("format must be json, csv or markdown, not '" + std::string(s) + "'");
}

inline std::string_view to_string(TiePolicy p) { return p == TiePolicy::prose ? "prose" : "pseudocode"; }

inline TiePolicy parse_tie_policy(std::string_view s) {
  if (s == "pseudocode") return TiePolicy::pseudocode;
  if (s == "prose") return TiePolicy::prose;
  throw ConfigError("tie_policy must be pseudocode or prose, not '" + std::string(s) + "'");
}

struct RunConfig {
  double tau = 0.60;
  double epsilon = 1e-6;
  TiePolicy tie_policy = TiePolicy::pseudocode;
  FingerprintParams fingerprint{};
  std::string vocabulary;  // taxonomy + weight rules; built-in when empty
  int jobs = 1;
  OutputFormat format = OutputFormat::json;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (fingerprint.radius < 0) throw ConfigError("fingerprint.radius must be non-negative");
    if (fingerprint.nbits < 1) throw ConfigError("fingerprint.nbits must be positive");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
  }

  AlignConfig align_config() const { return {tau, epsilon, tie_policy, fingerprint}; }
};

inline nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["tau"] = c.tau;
  j["epsilon"] = c.epsilon;
  j["tie_policy"] = std::string(to_string(c.tie_policy));
  j["fingerprint"] = {{"radius", c.fingerprint.radius}, {"nbits", c.fingerprint.nbits}};
  j["vocabulary"] = c.vocabulary;
  j["jobs"] = c.jobs;
  j["format"] = std::string(to_string(c.format));
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected. A relative
/// vocabulary path is resolved against `base_dir` when one is given.
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"tau", "epsilon", "tie_policy", "fingerprint", "vocabulary", "jobs", "format"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

  RunConfig c;
  try {
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("tie_policy")) c.tie_policy = parse_tie_policy(j.at("tie_policy").get<std::string>());
    if (j.contains("fingerprint")) {
      const auto& f = j.at("fingerprint");
      if (!f.is_object()) throw ConfigError("fingerprint must be an object");
      for (const auto& [k, v] : f.items())
        if (k != "radius" && k != "nbits") throw ConfigError("unknown config key 'fingerprint." + k + "'");
      if (f.contains("radius")) c.fingerprint.radius = f.at("radius").get<int>();
      if (f.contains("nbits")) c.fingerprint.nbits = f.at("nbits").get<int>();
    }
    if (j.contains("vocabulary")) c.vocabulary = j.at("vocabulary").get<std::string>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    if (j.contains("format")) c.format = parse_output_format(j.at("format").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (!c.vocabulary.empty() && !base_dir.empty() && std::filesystem::path(c.vocabulary).is_relative())
    c.vocabulary = (base_dir / c.vocabulary).lexically_normal().string();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + " is not JSON");
  return run_config_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace mecheval
