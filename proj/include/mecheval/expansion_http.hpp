#pragma once

#include <chrono>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mecheval/expansion.hpp"

namespace mecheval {

inline const std::string& default_rgroup_prompt() {
  static const std::string text =
      "You are helping enumerate analogues of an organic reaction template.\n\n"
      "Template (reactants>>products): {template}\n"
      "Placeholders to fill: {rgroups}\n\n"
      "For each placeholder propose {num_suggestions} substituents as SMILES.\n"
      "- Write each substituent without placeholder notation; its first atom bonds to the template.\n"
      "- Write hydrogen-free skeletons (\"C\", \"CC\"), never \"H\" or \"[H]\".\n"
      "- Mix alkyl, aryl and heteroatom groups, donors and acceptors.\n"
      "- Skip ring systems when the template already contains rings.\n\n"
      "Answer with one JSON object keyed by placeholder, for example {\"[*:1]\": [\"C\", \"CC\"]}.\n"
      "Only return the JSON.\n";
  return text;
}

/// Fills {template}, {rgroups} and {num_suggestions}.
inline std::string render_rgroup_prompt(const std::string& prompt_template, const ReactionRecord& tmpl,
                                        const std::vector<int>& labels, int num_suggestions) {
  std::string groups;
  for (int l : labels) groups += (groups.empty() ? "" : ", ") + placeholder_token(l);
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ".") + x;
    return s;
  };
  const std::map<std::string, std::string> values{{"{template}", join(tmpl.reactants_smiles) + ">>" + join(tmpl.products_smiles)},
                                                  {"{rgroups}", groups},
                                                  {"{num_suggestions}", std::to_string(num_suggestions)}};
  std::string out = prompt_template;
  for (const auto& [key, val] : values)
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + val.size())) out.replace(pos, key.size(), val);
  return out;
}

struct HttpProviderConfig {
  std::string endpoint;  // http://host:port/path
  std::string prompt_template = default_rgroup_prompt();
  int timeout_seconds = 60;
  int retries = 2;
  int retry_delay_ms = 500;
  std::string api_key;  // sent as a bearer token when set
};

/// Reads a suggestion object from a reply body. The body may be the object
/// itself or a wrapper whose "text", "output" or "content" string holds it.
inline SuggestionSet parse_suggestion_reply(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_object()) {
    for (const char* key : {"text", "output", "content"}) {
      if (j.contains(key) && j.at(key).is_string()) return parse_suggestion_reply(j.at(key).get<std::string>());
    }
    return suggestions_from_json(j);
  }
  // Free text: take the first balanced object that parses.
  for (std::size_t i = body.find('{'); i != std::string::npos; i = body.find('{', i + 1)) {
    const std::size_t end = detail::bracket_end(body, i);
    if (end == std::string::npos) continue;
    auto inner = nlohmann::json::parse(body.substr(i, end - i), nullptr, false);
    if (inner.is_object()) return suggestions_from_json(inner);
  }
  throw ProviderError("reply holds no suggestion object");
}

/// POSTs {"prompt": ..., "template_id": ...} to the endpoint and expects a
/// suggestion object back. Transport failures and 5xx replies are retried.
class HttpProvider : public GeneratorProvider {
 public:
  explicit HttpProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme = cfg_.endpoint.find("://");
    if (cfg_.endpoint.rfind("http://", 0) != 0 || scheme == std::string::npos)
      throw ProviderError("endpoint must be an http:// URL: '" + cfg_.endpoint + "'");
    const auto slash = cfg_.endpoint.find('/', scheme + 3);
    host_ = cfg_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  }

  SuggestionSet request(const ReactionRecord& tmpl, const std::vector<int>& labels, int num_suggestions) override {
    const std::string body =
        nlohmann::json{{"prompt", render_rgroup_prompt(cfg_.prompt_template, tmpl, labels, num_suggestions)},
                       {"template_id", tmpl.reaction_id}}
            .dump();
    httplib::Client client(host_);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_write_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_delay_ms));
      ++calls_;
      auto res = client.Post(path_, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw ProviderError("HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint);
      return parse_suggestion_reply(res->body);
    }
    throw ProviderError(cfg_.endpoint + ": " + last_error);
  }

  int calls() const { return calls_; }

 private:
  HttpProviderConfig cfg_;
  std::string host_;
  std::string path_;
  int calls_ = 0;
};

}  // namespace mecheval
