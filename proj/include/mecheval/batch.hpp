#pragma once

#include <atomic>
#include <exception>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mecheval/config.hpp"
#include "mecheval/metrics.hpp"

namespace mecheval {

struct BatchResult {
  std::vector<EvaluationReport> reports;       // sorted by reaction_id
  std::vector<std::string> missing;            // gold ids without a prediction
  std::vector<std::string> unmatched;          // prediction ids without gold
};

/// Scores every gold record against its raw model output. Gold records
/// without output are scored as empty predictions and listed in `missing`.
/// Work is spread over `jobs` threads; results do not depend on the count.
inline BatchResult evaluate_batch(const std::vector<ReactionRecord>& gold, const std::map<std::string, std::string>& raw,
                                  const EvalConfig& cfg = {}, int jobs = 1) {
  BatchResult out;
  std::vector<const ReactionRecord*> order;
  for (const auto& g : gold) order.push_back(&g);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->reaction_id < b->reaction_id; });

  std::map<std::string, bool> seen;
  for (const auto* g : order) {
    seen[g->reaction_id] = true;
    if (!raw.count(g->reaction_id)) out.missing.push_back(g->reaction_id);
  }
  for (const auto& [id, text] : raw)
    if (!seen.count(id)) out.unmatched.push_back(id);

  const Taxonomy& tax = cfg.taxonomy ? *cfg.taxonomy : Taxonomy::builtin();
  out.reports.resize(order.size());
  std::vector<std::exception_ptr> errors(order.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < order.size();) {
      try {
        const auto& g = *order[i];
        auto it = raw.find(g.reaction_id);
        const PredictionRecord p = it == raw.end() ? PredictionRecord{g.reaction_id, {}, {}}
                                                   : extract_prediction(it->second, g.reaction_id, tax);
        out.reports[i] = evaluate_reaction(g, p, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(order.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::vector<AggregateTable> standard_tables(const std::vector<EvaluationReport>& reports) {
  std::vector<AggregateTable> t;
  t.push_back(aggregate(reports, Partition::overall));
  for (auto p : {Partition::level, Partition::type, Partition::length}) {
    auto table = aggregate(reports, p);
    table.rows.erase(table.rows.begin());  // the overall row is already listed
    t.push_back(std::move(table));
  }
  return t;
}

/// Aggregate tables in the requested format. JSON and markdown carry the
/// run configuration; CSV stays a plain table.
namespace detail {

// The thread count never changes results, so it stays out of the echo.
inline nlohmann::ordered_json echoed_config(const RunConfig& rc) {
  auto j = run_config_to_json(rc);
  j.erase("jobs");
  return j;
}

}  // namespace detail

inline std::string render_aggregate(const std::vector<AggregateTable>& tables, const RunConfig& rc) {
  switch (rc.format) {
    case OutputFormat::csv: return aggregate_csv(tables);
    case OutputFormat::markdown:
      return aggregate_markdown(tables) + "\nconfig: `" + detail::echoed_config(rc).dump() + "`\n";
    case OutputFormat::json: break;
  }
  nlohmann::ordered_json j;
  j["config"] = detail::echoed_config(rc);
  j["tables"] = aggregate_json(tables);
  return j.dump(2) + "\n";
}

inline std::string render_reports(const BatchResult& b, const RunConfig& rc) {
  nlohmann::ordered_json j;
  j["config"] = detail::echoed_config(rc);
  j["missing"] = b.missing;
  j["unmatched"] = b.unmatched;
  j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : b.reports) j["reports"].push_back(report_to_json(r));
  return j.dump(2) + "\n";
}

}  // namespace mecheval
