// mecheval: lint datasets, score predictions, expand templates, retrieve
// exemplars.
//
// Exit codes: 0 success, 1 findings (lint/scoring/unknown ids), 2 I/O or
// usage, 3 provider failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mecheval/batch.hpp"
#include "mecheval/expansion.hpp"
#include "mecheval/expansion_http.hpp"
#include "mecheval/prompt.hpp"
#include "mecheval/retrieval.hpp"

using namespace mecheval;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kIo = 2;
constexpr int kProvider = 3;

struct Overrides {
  std::optional<double> tau;
  std::optional<double> epsilon;
  std::optional<std::string> tie_policy;
  std::optional<std::string> vocabulary;
  std::optional<int> jobs;
  std::optional<std::string> format;
};

RunConfig resolve_config(const std::string& path, const Overrides& o) {
  RunConfig rc = path.empty() ? RunConfig{} : load_run_config(path);
  if (o.tau) rc.tau = *o.tau;
  if (o.epsilon) rc.epsilon = *o.epsilon;
  if (o.tie_policy) rc.tie_policy = parse_tie_policy(*o.tie_policy);
  if (o.vocabulary) rc.vocabulary = *o.vocabulary;
  if (o.jobs) rc.jobs = *o.jobs;
  if (o.format) rc.format = parse_output_format(*o.format);
  rc.validate();
  return rc;
}

ScoringVocabulary vocabulary_for(const std::string& path) {
  return path.empty() ? ScoringVocabulary{} : load_vocabulary(path);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// lint

struct LintArgs {
  std::vector<std::string> paths;
  bool strict = false;
  bool templates = false;
  std::string vocabulary;
  double drift_tol = 0.01;
};

int cmd_lint(const LintArgs& a) {
  const auto vocab = vocabulary_for(a.vocabulary);
  LoadOptions opts;
  opts.strict = false;
  opts.allow_placeholders = a.templates;
  opts.taxonomy = &vocab.taxonomy;

  std::size_t findings = 0;
  for (const auto& path : a.paths) {
    const auto res = load_reactions(path, opts);
    for (const auto& d : res.diagnostics) std::cout << path << ": " << to_string(d) << '\n';
    findings += res.diagnostics.size();

    for (const auto& r : res.records) {
      const bool all_weighted = !r.mechanism.empty() && std::all_of(r.mechanism.begin(), r.mechanism.end(),
                                                                    [](const auto& s) { return s.step_weight.has_value(); });
      const bool known = std::all_of(r.mechanism.begin(), r.mechanism.end(),
                                     [&](const auto& s) { return vocab.taxonomy.contains(s.type, s.subtype); });
      if (!all_weighted || !known) continue;
      std::vector<std::pair<std::string, std::string>> typed;
      std::vector<double> stored;
      for (const auto& s : r.mechanism) {
        typed.emplace_back(s.type, s.subtype);
        stored.push_back(*s.step_weight);
      }
      const auto recomputed = compute_step_weights(step_keys(typed), vocab.weights, vocab.taxonomy).normalized;
      const auto drift = check_stored_weights(stored, recomputed, a.drift_tol);
      if (drift.any_flagged()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", drift.max_abs_deviation);
        std::cout << path << ": " << r.reaction_id << ": note: stored step weights differ from the rule weights by up to "
                  << buf << '\n';
      }
    }
    std::cerr << path << ": " << res.records.size() << " records, " << res.diagnostics.size() << " diagnostics\n";
  }
  return a.strict && findings > 0 ? kFindings : kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string gold;
  std::string pred;
  std::string config;
  std::string out;
  bool allow_missing = false;
  Overrides over;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const RunConfig rc = resolve_config(a.config, a.over);
  const auto vocab = vocabulary_for(rc.vocabulary);
  LoadOptions lo;
  lo.taxonomy = &vocab.taxonomy;
  const auto gold = load_reactions(a.gold, lo).records;
  const auto raw = load_raw_predictions(a.pred);

  EvalConfig ec{rc.align_config(), vocab.weights, &vocab.taxonomy};
  const auto batch = evaluate_batch(gold, raw, ec, rc.jobs);
  for (const auto& id : batch.unmatched) std::cerr << "warning: prediction for unknown reaction_id " << id << '\n';
  for (const auto& id : batch.missing) std::cerr << (a.allow_missing ? "warning" : "error") << ": no prediction for " << id << '\n';
  if (!batch.missing.empty() && !a.allow_missing) return kFindings;

  const auto tables = standard_tables(batch.reports);
  const std::string aggregate_text = render_aggregate(tables, rc);
  if (a.out.empty()) {
    std::cout << aggregate_text;
    return kOk;
  }
  std::filesystem::create_directories(a.out);
  const char* ext = rc.format == OutputFormat::csv ? "csv" : rc.format == OutputFormat::markdown ? "md" : "json";
  write_file(std::filesystem::path(a.out) / "reports.json", render_reports(batch, rc));
  write_file(std::filesystem::path(a.out) / (std::string("aggregate.") + ext), aggregate_text);
  std::cerr << "scored " << batch.reports.size() << " reactions into " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// expand

struct ExpandArgs {
  std::string templates;
  std::string out;
  std::string provider = "offline";
  std::string library;
  std::string endpoint;
  std::string prompt;
  std::string cache;
  int timeout = 60;
  int retries = 2;
  ExpansionLimits limits;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  for (std::string p; std::getline(in, p, ',');)
    if (!p.empty()) parts.push_back(p);
  return parts;
}

int cmd_expand(const ExpandArgs& a) {
  LoadOptions lo;
  lo.allow_placeholders = true;
  const auto templates = load_reactions(a.templates, lo).records;

  std::unique_ptr<GeneratorProvider> base;
  if (a.provider == "offline") {
    base = a.library.empty() ? std::make_unique<OfflineProvider>()
                             : std::make_unique<OfflineProvider>(split_commas(a.library));
  } else if (a.provider == "http") {
    HttpProviderConfig hc;
    hc.endpoint = a.endpoint;
    hc.prompt_template = a.prompt.empty() ? default_rgroup_prompt() : read_text_file(a.prompt);
    hc.timeout_seconds = a.timeout;
    hc.retries = a.retries;
    if (const char* key = std::getenv("MECHEVAL_API_KEY")) hc.api_key = key;
    base = std::make_unique<HttpProvider>(hc);
  } else {
    throw std::invalid_argument("provider must be offline or http");
  }
  std::optional<CachingProvider> cached;
  if (!a.cache.empty()) cached.emplace(*base, a.cache);
  GeneratorProvider& provider = cached ? static_cast<GeneratorProvider&>(*cached) : *base;

  std::vector<ReactionRecord> instances;
  for (const auto& t : templates) {
    const auto res = expand_template(t, provider, a.limits);
    for (const auto& d : res.rejections) std::cerr << t.reaction_id << ": rejected " << to_string(d) << '\n';
    std::cerr << t.reaction_id << ": " << res.instances.size() << " instances\n";
    instances.insert(instances.end(), res.instances.begin(), res.instances.end());
  }
  if (cached) std::cerr << "cache hits: " << cached->hits() << '\n';
  if (a.out.empty()) {
    for (const auto& r : instances) std::cout << record_to_json_line(r) << '\n';
  } else {
    save_reactions(instances, a.out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveArgs {
  std::string dataset;
  std::string index;
  std::string save_index;
  std::string queries;
  std::string query_id;
  int k = 3;
  bool prompt = false;
  std::string prompt_template;
  bool keep_same_reaction = false;
  std::string vocabulary;
};

int cmd_retrieve(const RetrieveArgs& a) {
  if (a.dataset.empty() && a.index.empty()) throw std::invalid_argument("give --dataset or --index");
  LoadOptions lo;
  lo.strict = false;
  const auto pool = a.dataset.empty() ? std::vector<ReactionRecord>{} : load_reactions(a.dataset, lo).records;
  const ReactionIndex idx = a.index.empty() ? build_index(pool) : load_index(a.index);
  if (!a.save_index.empty()) save_index(idx, a.save_index);
  if (a.query_id.empty()) return kOk;

  const auto qpool = a.queries.empty() ? pool : load_reactions(a.queries, lo).records;
  auto q = std::find_if(qpool.begin(), qpool.end(), [&](const auto& r) { return r.reaction_id == a.query_id; });
  if (q == qpool.end()) {
    std::cerr << "error: unknown query id " << a.query_id << '\n';
    return kFindings;
  }

  RetrievalOptions ro;
  ro.k = a.k;
  ro.exclude_same_reaction = !a.keep_same_reaction;
  const auto hits = top_k_similar(idx, *q, ro);
  if (!a.prompt) {
    for (const auto& h : hits) std::cout << nlohmann::ordered_json{{"reaction_id", h.reaction_id}, {"similarity", h.similarity}}.dump() << '\n';
    return kOk;
  }
  if (pool.empty()) throw std::invalid_argument("--prompt needs --dataset for the exemplar mechanisms");
  std::vector<ReactionRecord> shots;
  for (const auto& h : hits) {
    auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& r) { return r.reaction_id == h.reaction_id; });
    if (it == pool.end()) throw RetrievalError("index entry " + h.reaction_id + " is not in the dataset");
    shots.push_back(*it);
  }
  const auto vocab = vocabulary_for(a.vocabulary);
  std::cout << assemble_icl_prompt(*q, shots, load_prompt_template(a.prompt_template), vocab.taxonomy);
  return kOk;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return kProvider;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFindings;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mechanism-level evaluation toolkit"};
  app.require_subcommand(1);

  LintArgs lint;
  auto* lint_cmd = app.add_subcommand("lint", "Check datasets against the record invariants");
  lint_cmd->add_option("paths", lint.paths, "Dataset files")->required();
  lint_cmd->add_flag("--strict", lint.strict, "Exit 1 on any diagnostic");
  lint_cmd->add_flag("--templates", lint.templates, "Allow [*:n] placeholder atoms");
  lint_cmd->add_option("--vocab", lint.vocabulary, "Taxonomy and weight rules file");
  lint_cmd->add_option("--drift-tol", lint.drift_tol, "Report stored weights further than this from the rule weights");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score model outputs against gold mechanisms");
  ev_cmd->add_option("--gold", ev.gold, "Gold dataset")->required();
  ev_cmd->add_option("--pred", ev.pred, "JSON map or directory of raw model outputs")->required();
  ev_cmd->add_option("--config", ev.config, "Run configuration (JSON)");
  ev_cmd->add_option("--out", ev.out, "Output directory; aggregate goes to stdout when omitted");
  ev_cmd->add_flag("--allow-missing", ev.allow_missing, "Score missing outputs as empty predictions");
  ev_cmd->add_option("--format", ev.over.format, "json | csv | markdown");
  ev_cmd->add_option("--jobs", ev.over.jobs, "Worker threads");
  ev_cmd->add_option("--tau", ev.over.tau, "Similarity threshold");
  ev_cmd->add_option("--epsilon", ev.over.epsilon, "Non-match penalty");
  ev_cmd->add_option("--tie-policy", ev.over.tie_policy, "pseudocode | prose");
  ev_cmd->add_option("--vocab", ev.over.vocabulary, "Taxonomy and weight rules file");

  ExpandArgs ex;
  auto* ex_cmd = app.add_subcommand("expand", "Instantiate R-group templates");
  ex_cmd->add_option("--templates", ex.templates, "Template dataset")->required();
  ex_cmd->add_option("--out", ex.out, "Output JSONL; stdout when omitted");
  ex_cmd->add_option("--provider", ex.provider, "offline | http");
  ex_cmd->add_option("--library", ex.library, "Comma-separated fragments for the offline provider");
  ex_cmd->add_option("--endpoint", ex.endpoint, "http:// URL for the http provider");
  ex_cmd->add_option("--prompt", ex.prompt, "Suggestion prompt template file");
  ex_cmd->add_option("--cache", ex.cache, "Directory caching provider replies");
  ex_cmd->add_option("--timeout", ex.timeout, "Seconds per request");
  ex_cmd->add_option("--retries", ex.retries, "Retries on transport errors and 5xx");
  ex_cmd->add_option("--per-label", ex.limits.per_label, "Suggestions kept per R-group");
  ex_cmd->add_option("--max-instances", ex.limits.max_instances, "Instances kept per template");

  RetrieveArgs rt;
  auto* rt_cmd = app.add_subcommand("retrieve", "Nearest reactions by difference fingerprint");
  rt_cmd->add_option("--dataset", rt.dataset, "Candidate pool with mechanisms");
  rt_cmd->add_option("--index", rt.index, "Prebuilt index instead of --dataset");
  rt_cmd->add_option("--save-index", rt.save_index, "Write the index built from --dataset");
  rt_cmd->add_option("--queries", rt.queries, "Dataset holding the query; defaults to --dataset");
  rt_cmd->add_option("--query", rt.query_id, "Query reaction_id");
  rt_cmd->add_option("--k", rt.k, "Number of hits");
  rt_cmd->add_flag("--prompt", rt.prompt, "Print the assembled in-context prompt instead of hits");
  rt_cmd->add_option("--prompt-template", rt.prompt_template, "Prompt template file");
  rt_cmd->add_flag("--keep-same-reaction", rt.keep_same_reaction, "Keep candidates equal to the query reaction");
  rt_cmd->add_option("--vocab", rt.vocabulary, "Taxonomy listed in the prompt");

  auto* cfg_cmd = app.add_subcommand("default-config", "Print the default run configuration");
  auto* voc_cmd = app.add_subcommand("default-vocab", "Print the built-in taxonomy and weight rules");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIo;
  }

  if (*lint_cmd) return guarded([&] { return cmd_lint(lint); });
  if (*ev_cmd) return guarded([&] { return cmd_evaluate(ev); });
  if (*ex_cmd) return guarded([&] { return cmd_expand(ex); });
  if (*rt_cmd) return guarded([&] { return cmd_retrieve(rt); });
  if (*cfg_cmd) {
    std::cout << run_config_to_json(RunConfig{}).dump(2) << '\n';
    return kOk;
  }
  if (*voc_cmd) {
    std::cout << vocabulary_to_json(ScoringVocabulary{}).dump(2) << '\n';
    return kOk;
  }
  return kIo;
}
