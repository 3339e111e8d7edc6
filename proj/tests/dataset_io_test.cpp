#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "mecheval/dataset_io.hpp"

using namespace mecheval;

namespace {

const std::string kData = MECHEVAL_DATA_DIR;

ReactionRecord nr201() { return load_reactions(kData + "/fixtures/nr201_gold.json").records.at(0); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mecheval_" + name)).string();
}

}  // namespace

TEST(LoadReactions, GoldSampleIsClean) {
  const auto res = load_reactions(kData + "/fixtures/nr201_gold.json");
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_TRUE(res.diagnostics.empty());
  const auto& r = res.records[0];
  EXPECT_EQ(r.reaction_id, "NR-201");
  EXPECT_EQ(r.level, "medium");
  EXPECT_EQ(r.mechanism.size(), 4u);
  EXPECT_DOUBLE_EQ(*r.mechanism[1].step_weight, 0.5714);
}

TEST(LoadReactions, TemplateNeedsPlaceholderMode) {
  LoadOptions opts;
  opts.allow_placeholders = true;
  const auto res = load_reactions(kData + "/fixtures/nr201_template.json", opts);
  EXPECT_TRUE(res.diagnostics.empty());
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_THROW(load_reactions(kData + "/fixtures/nr201_template.json"), DatasetError);
}

TEST(LoadReactions, StepCountMismatch) {
  auto r = nr201();
  r.mechanism_step_nums = 5;
  const std::string line = record_to_json_line(r);
  EXPECT_THROW(parse_reactions(line), DatasetError);
  LoadOptions lenient;
  lenient.strict = false;
  const auto res = parse_reactions(line, lenient);
  ASSERT_EQ(res.records.size(), 1u);
  ASSERT_EQ(res.diagnostics.size(), 1u);
  EXPECT_EQ(res.diagnostics[0].code, "step_count");
}

TEST(LoadReactions, LenientCollectsProblems) {
  auto a = nr201();
  a.mechanism[2].subtype = "nucleophilic_addition";
  auto b = nr201();
  b.reaction_id = "NR-202";
  b.mechanism[0].intermediate_smiles = "C1CC";
  auto c = nr201();
  c.reaction_id = "NR-203";
  c.level = "trivial";
  const std::string text = record_to_json_line(a) + "\n" + record_to_json_line(b) + "\nnot json\n" +
                           record_to_json_line(c) + "\n" + record_to_json_line(a) + "\n";
  LoadOptions lenient;
  lenient.strict = false;
  const auto res = parse_reactions(text, lenient);
  EXPECT_EQ(res.records.size(), 4u);
  std::vector<std::string> codes;
  for (const auto& d : res.diagnostics) codes.push_back(d.code);
  EXPECT_EQ(codes, (std::vector<std::string>{"taxonomy", "smiles", "json", "schema", "taxonomy", "duplicate_id"}));
  EXPECT_NE(res.diagnostics[1].location.find("line 2"), std::string::npos);
  EXPECT_THROW(parse_reactions(text), DatasetError);
}

TEST(LoadReactions, WeightChecks) {
  auto r = nr201();
  r.mechanism[0].step_weight = 0.2;
  EXPECT_THROW(parse_reactions(record_to_json_line(r)), DatasetError);
  r = nr201();
  r.mechanism[0].step_weight.reset();
  EXPECT_THROW(parse_reactions(record_to_json_line(r)), DatasetError);
  for (auto& s : r.mechanism) s.step_weight.reset();
  EXPECT_TRUE(parse_reactions(record_to_json_line(r)).diagnostics.empty());
}

TEST(LoadReactions, MissingFile) { EXPECT_THROW(load_reactions(kData + "/nope.jsonl"), IoError); }

TEST(SaveReactions, RoundTripAndFormatting) {
  auto r = nr201();
  r.mechanism[0].rationale = "note with \"quotes\"";
  const std::string path = temp_path("roundtrip.jsonl");
  auto r2 = r;
  r2.reaction_id = "NR-999";
  save_reactions({r, r2}, path);
  const auto back = load_reactions(path).records;
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], r);
  EXPECT_EQ(back[1], r2);

  auto w = r;
  w.mechanism[0].step_weight = 0.10204;
  EXPECT_NE(record_to_json_line(w).find("\"step_weight\":0.1020,"), std::string::npos);

  save_reactions({}, path);
  EXPECT_EQ(std::filesystem::file_size(path), 0u);
  EXPECT_TRUE(load_reactions(path).records.empty());
  std::filesystem::remove(path);
}

TEST(ExtractPrediction, FencedBlock) {
  const auto p = extract_prediction(
      "```json\n[{\"step\": 1, \"type\": \"pericyclic\", \"subtype\": \"cycloaddition\", \"intermediate_smiles\": "
      "\"C1CC=CCC1\"}]\n```");
  ASSERT_EQ(p.steps.size(), 1u);
  EXPECT_EQ(p.steps[0].subtype, "cycloaddition");
  EXPECT_FALSE(p.has_diagnostic("schema_error"));
}

TEST(ExtractPrediction, LeadingProse) {
  const auto p = extract_prediction(
      "Here is the mechanism [as requested]:\n[{\"step\": \"2\", \"type\": \"addition\", \"subtype\": "
      "\"nucleophilic_addition\", \"intermediate_smiles\": \"CC(O)C#N\"}, {\"step\": 1, \"type\": \"proton_transfer\", "
      "\"subtype\": \"acid_base_proton_transfer\", \"intermediate_smiles\": \"CC=[OH+]\"}]");
  ASSERT_EQ(p.steps.size(), 2u);
  EXPECT_TRUE(p.has_diagnostic("leading_prose"));
  EXPECT_TRUE(p.has_diagnostic("coerced_step"));
  EXPECT_EQ(p.steps[0].step, 1);
  EXPECT_EQ(p.steps[1].intermediate_smiles, "CC(O)C#N");
}

TEST(ExtractPrediction, NoJson) {
  const auto p = extract_prediction("I cannot answer");
  EXPECT_TRUE(p.steps.empty());
  EXPECT_TRUE(p.has_diagnostic("schema_error"));
}

TEST(ExtractPrediction, OutOfVocabularyLabels) {
  const auto p = extract_prediction(
      "[{\"step\": 1, \"type\": \"magic\", \"subtype\": \"sorcery\", \"intermediate_smiles\": \"C\"},"
      " {\"step\": 2, \"type\": \"addition\", \"intermediate_smiles\": \"CC\"}]");
  ASSERT_EQ(p.steps.size(), 2u);
  EXPECT_EQ(p.steps[0].type, kOutOfVocabulary);
  EXPECT_EQ(p.steps[0].subtype, kOutOfVocabulary);
  EXPECT_EQ(p.steps[1].type, "addition");
  EXPECT_EQ(p.steps[1].subtype, kOutOfVocabulary);
  EXPECT_TRUE(p.has_diagnostic("oov_label"));
  EXPECT_TRUE(p.has_diagnostic("schema_error"));
}

TEST(ExtractPrediction, NeverThrowsOnArbitraryText) {
  std::mt19937 rng(17);
  const std::string alphabet = "[]{}\",:0123456789 abcstepyu\\`\n";
  const std::string seed = "[{\"step\": 1, \"type\": \"addition\", \"subtype\": \"x\", \"intermediate_smiles\": \"C\"}]";
  for (int i = 0; i < 3000; ++i) {
    std::string s = seed;
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = rng() % (s.size() + 1);
      if (rng() % 2 && pos < s.size()) s.erase(pos, 1);
      else s.insert(pos, 1, alphabet[rng() % alphabet.size()]);
    }
    PredictionRecord p;
    EXPECT_NO_THROW(p = extract_prediction(s));
    if (p.steps.empty()) {
      EXPECT_TRUE(p.has_diagnostic("schema_error"));
    }
  }
}

TEST(RawPredictions, MapAndDirectory) {
  const std::string file = temp_path("preds.json");
  {
    std::ofstream out(file);
    out << R"({"A": "[{\"step\":1}]", "B": [{"step": 1}]})";
  }
  const auto m = load_raw_predictions(file);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("A"), "[{\"step\":1}]");
  EXPECT_EQ(nlohmann::json::parse(m.at("B")), nlohmann::json::parse(R"([{"step": 1}])"));
  std::filesystem::remove(file);

  const std::string dir = temp_path("preds_dir");
  std::filesystem::create_directories(dir);
  std::ofstream(dir + "/NR-1.txt") << "hello";
  EXPECT_EQ(load_raw_predictions(dir).at("NR-1"), "hello");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_raw_predictions(dir), IoError);
}
