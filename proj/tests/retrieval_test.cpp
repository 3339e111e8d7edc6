#include <gtest/gtest.h>

#include <filesystem>

#include "mecheval/prompt.hpp"
#include "mecheval/retrieval.hpp"

using namespace mecheval;

namespace {

std::vector<ReactionRecord> e2e_gold() {
  return load_reactions(std::string(MECHEVAL_DATA_DIR) + "/e2e/gold.jsonl").records;
}

ReactionRecord bare(const std::string& id, std::vector<std::string> re, std::vector<std::string> pr) {
  ReactionRecord r;
  r.reaction_id = id;
  r.reactants_smiles = std::move(re);
  r.products_smiles = std::move(pr);
  return r;
}

}  // namespace

TEST(Index, OneEntryPerRecordDuplicatesKept) {
  const auto recs = e2e_gold();
  const auto sub = std::vector<ReactionRecord>(recs.begin(), recs.begin() + 3);
  EXPECT_EQ(build_index(sub).entries.size(), 3u);

  auto dup = sub;
  dup.push_back(sub[0]);
  dup.back().reaction_id = "COPY";
  EXPECT_EQ(build_index(dup).entries.size(), 4u);
}

TEST(Index, RebuildIsDeterministic) {
  const auto a = index_to_json(build_index(e2e_gold())).dump();
  const auto b = index_to_json(build_index(e2e_gold())).dump();
  EXPECT_EQ(a, b);
}

TEST(Index, BadReactionNamesRecord) {
  try {
    build_index({bare("BAD-1", {"C1CC"}, {"CC"})});
    FAIL();
  } catch (const RetrievalError& e) {
    EXPECT_NE(std::string(e.what()).find("BAD-1"), std::string::npos);
  }
}

TEST(TopK, IdenticalReactionUnderOtherIdRanksFirst) {
  auto recs = e2e_gold();
  const auto query = recs[2];
  auto twin = query;
  twin.reaction_id = "TWIN";
  // Same reaction with components and atoms written in another order.
  twin.reactants_smiles = {"O=S(=O)(O)O", "OC(C)(C)C"};
  recs.push_back(twin);
  const auto idx = build_index(recs);

  RetrievalOptions keep;
  keep.exclude_same_reaction = false;
  const auto hits = top_k_similar(idx, query, keep);
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].reaction_id, "TWIN");
  EXPECT_DOUBLE_EQ(hits[0].similarity, 1.0);

  for (const auto& h : top_k_similar(idx, query)) {
    EXPECT_NE(h.reaction_id, "TWIN");
    EXPECT_NE(h.reaction_id, query.reaction_id);
  }
}

TEST(TopK, DefaultsOrderingAndScores) {
  const auto recs = e2e_gold();
  const auto idx = build_index(recs);
  const auto hits = top_k_similar(idx, recs[0]);
  ASSERT_EQ(hits.size(), 3u);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    EXPECT_TRUE(hits[i - 1].similarity > hits[i].similarity ||
                (hits[i - 1].similarity == hits[i].similarity && hits[i - 1].reaction_id < hits[i].reaction_id));
  }
  const auto q = drfp(reaction_string(recs[0]));
  for (const auto& h : hits) {
    const auto it = std::find_if(recs.begin(), recs.end(), [&](const auto& r) { return r.reaction_id == h.reaction_id; });
    EXPECT_DOUBLE_EQ(h.similarity, tanimoto_counts(q, drfp(reaction_string(*it))));
    EXPECT_GE(h.similarity, 0.0);
    EXPECT_LE(h.similarity, 1.0);
  }

  RetrievalOptions big;
  big.k = 10;
  EXPECT_EQ(top_k_similar(idx, recs[0], big).size(), recs.size() - 1);
  big.k = 0;
  EXPECT_THROW(top_k_similar(idx, recs[0], big), std::invalid_argument);
}

TEST(TopK, EmptyAfterExclusionIsError) {
  const auto recs = e2e_gold();
  const auto idx = build_index({recs[0]});
  EXPECT_THROW(top_k_similar(idx, recs[0]), RetrievalError);

  const auto idx2 = build_index({recs[0], recs[1]});
  RetrievalOptions o;
  o.exclude_ids = {recs[1].reaction_id};
  EXPECT_THROW(top_k_similar(idx2, recs[0], o), RetrievalError);
}

TEST(IndexJson, RoundTripAndVersion) {
  const auto recs = e2e_gold();
  const auto idx = build_index(recs);
  const auto path = (std::filesystem::temp_directory_path() / "mecheval_index_test.json").string();
  save_index(idx, path);
  const auto back = load_index(path);
  std::filesystem::remove(path);
  EXPECT_EQ(index_to_json(back).dump(), index_to_json(idx).dump());
  EXPECT_EQ(top_k_similar(back, recs[1]).front().reaction_id, top_k_similar(idx, recs[1]).front().reaction_id);

  auto j = index_to_json(idx);
  j["format_version"] = 99;
  EXPECT_THROW(index_from_json(j), RetrievalError);
  EXPECT_THROW(index_from_json(nlohmann::json::parse(R"({"format_version":1})")), RetrievalError);
}

namespace {

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Prompt, ZeroShotHasNoExamples) {
  const auto recs = e2e_gold();
  const auto p = assemble_icl_prompt(recs[0], {});
  EXPECT_EQ(p.find("Example"), std::string::npos);
  EXPECT_NE(p.find("Input for you:"), std::string::npos);
  EXPECT_NE(p.find("\"reactants_smiles\": \"CC=O.[C-]#N\""), std::string::npos);
  EXPECT_NE(p.find("\"products_smiles\": \"CC(O)C#N\""), std::string::npos);
  EXPECT_NE(p.find(recs[0].conditions), std::string::npos);
  EXPECT_NE(p.find("\"subtype\":\"1,2-shift\""), std::string::npos);
  EXPECT_EQ(p.find("{examples}"), std::string::npos);
  EXPECT_EQ(p.find("{taxonomy}"), std::string::npos);
}

TEST(Prompt, ExemplarsPrecedeQueryAndAreStable) {
  const auto recs = e2e_gold();
  const std::vector<ReactionRecord> shots{recs[1], recs[2], recs[3]};
  const auto p = assemble_icl_prompt(recs[4], shots);
  EXPECT_EQ(occurrences(p, "\nExample "), 3u);
  EXPECT_EQ(occurrences(p, "Expected Output:"), 3u);
  const auto query_at = p.find("Input for you:");
  EXPECT_LT(p.find("Example 3"), query_at);
  EXPECT_LT(p.find("C=C(C)C"), query_at);
  EXPECT_NE(p.find("CC(C)(O)C(C)(C)O.OS(=O)(=O)O", query_at), std::string::npos);
  EXPECT_EQ(p, assemble_icl_prompt(recs[4], shots));

  auto hollow = recs[1];
  hollow.mechanism.clear();
  EXPECT_THROW(assemble_icl_prompt(recs[4], {hollow}), std::invalid_argument);
}

TEST(Prompt, FilledTextIsNotRescanned) {
  auto q = bare("Q", {"CC"}, {"C=C"});
  q.conditions = "{products_smiles}";
  const auto p = assemble_icl_prompt(q, {}, "{conditions}|{products_smiles}");
  EXPECT_EQ(p, "{products_smiles}|C=C");
}

TEST(Prompt, BuiltinMatchesShippedFile) {
  EXPECT_EQ(load_prompt_template(std::string(MECHEVAL_DATA_DIR) + "/prompts/mechanism_icl.txt"), default_icl_template());
  EXPECT_EQ(load_prompt_template(""), default_icl_template());
}
