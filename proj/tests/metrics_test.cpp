#include <gtest/gtest.h>

#include <random>

#include "mecheval/metrics.hpp"

using namespace mecheval;

namespace {

ReactionRecord nr201() {
  return load_reactions(std::string(MECHEVAL_DATA_DIR) + "/fixtures/nr201_gold.json").records.at(0);
}

PredictionRecord as_prediction(const ReactionRecord& r) {
  PredictionRecord p{r.reaction_id, {}, {}};
  for (const auto& s : r.mechanism) p.steps.push_back({s.step, s.type, s.subtype, s.intermediate_smiles});
  return p;
}

AlignedAction act(Tag t, std::optional<int> g, std::optional<int> p) { return {t, g, p, 0, 0, 0}; }

}  // namespace

TEST(Validity, Fractions) {
  EXPECT_EQ(validity_score({}), 0.0);
  std::vector<PredStep> p{make_pred_step("a", "b", "CCO"), make_pred_step("a", "b", "C1CC"),
                          make_pred_step("a", "b", "c1ccccc1"), make_pred_step("a", "b", "O")};
  EXPECT_DOUBLE_EQ(validity_score(p), 0.75);
  p.erase(p.begin() + 1);
  EXPECT_DOUBLE_EQ(validity_score(p), 1.0);
}

TEST(Logic, CountsMatchesOverGold) {
  AlignmentResult a;
  a.actions = {act(Tag::match, 1, 1), act(Tag::type_mismatch, 2, 2), act(Tag::skip_gold, 3, std::nullopt)};
  EXPECT_DOUBLE_EQ(logic_score(a, 3), 1.0 / 3);
  EXPECT_THROW(logic_score(a, 4), std::invalid_argument);
  a.actions = {act(Tag::skip_gold, 1, std::nullopt), act(Tag::skip_gold, 2, std::nullopt)};
  EXPECT_EQ(logic_score(a, 2), 0.0);
}

TEST(Evaluate, GoldAgainstItself) {
  const auto g = nr201();
  const auto r = evaluate_reaction(g, as_prediction(g));
  EXPECT_DOUBLE_EQ(r.V, 1.0);
  EXPECT_DOUBLE_EQ(r.L, 1.0);
  EXPECT_NEAR(r.S_tot, 1.0, 1e-12);
  EXPECT_NEAR(r.S_part, 1.0, 1e-12);
  EXPECT_TRUE(r.mechanical_error_tags.empty());
  EXPECT_EQ(r.dominant_type, "pericyclic");
}

TEST(Evaluate, SubtypePerturbation) {
  const auto g = nr201();
  auto p = as_prediction(g);
  p.steps[1].subtype = "cycloaddition";
  const auto r = evaluate_reaction(g, p);
  EXPECT_DOUBLE_EQ(r.L, 0.75);
  EXPECT_NEAR(r.S_tot, 1 - 0.5714, 1e-4);
  EXPECT_NEAR(r.S_part, r.S_tot, 1e-12);
  EXPECT_EQ(r.alignment.count(Tag::type_mismatch), 1);
}

TEST(Evaluate, NonJsonOutput) {
  const auto g = nr201();
  const auto r = evaluate_reaction(g, extract_prediction("Sorry, no idea.", g.reaction_id));
  EXPECT_EQ(r.V, 0.0);
  EXPECT_EQ(r.L, 0.0);
  EXPECT_EQ(r.S_tot, 0.0);
  EXPECT_EQ(r.S_part, 0.0);
  ASSERT_EQ(r.mechanical_error_tags.size(), 1u);
  EXPECT_EQ(r.mechanical_error_tags[0], (MechanicalTag{0, "schema_error"}));
}

TEST(Evaluate, MechanicalTags) {
  const auto g = nr201();
  auto p = as_prediction(g);
  p.steps[0].intermediate_smiles = "C(C)=CC(=[OH+])C=C1";
  p.steps[2].intermediate_smiles = "C(C)(C)(C)(C)C";
  p.steps[3].subtype = std::string(kOutOfVocabulary);
  p.extraction_diagnostics.push_back({"step 4", "oov_label", "subtype 'x' is not in the taxonomy"});
  const auto r = evaluate_reaction(g, p);
  EXPECT_EQ(r.mechanical_error_tags, (std::vector<MechanicalTag>{{1, "invalid_smiles"}, {3, "valence_violation"}, {4, "oov_label"}}));
  EXPECT_DOUBLE_EQ(r.V, 0.5);
}

TEST(Evaluate, InvalidGoldIsAHardError) {
  auto g = nr201();
  g.mechanism[1].intermediate_smiles = "C1CC";
  EXPECT_THROW(evaluate_reaction(g, as_prediction(nr201())), GoldDataError);
  auto partial = nr201();
  partial.mechanism[0].step_weight.reset();
  EXPECT_THROW(gold_steps(partial), GoldDataError);
}

TEST(Evaluate, MissingWeightsAreGenerated) {
  auto g = nr201();
  for (auto& s : g.mechanism) s.step_weight.reset();
  const auto steps = gold_steps(g);
  EXPECT_NEAR(*steps[1].weight, 4.3 / 8.01, 1e-12);
}

TEST(Evaluate, DeterministicReport) {
  const auto g = nr201();
  auto p = as_prediction(g);
  p.steps[2].intermediate_smiles = "C1(=CC(C(=C1)C)CC)O";
  EXPECT_EQ(report_to_json(evaluate_reaction(g, p)).dump(), report_to_json(evaluate_reaction(g, p)).dump());
}

namespace {

EvaluationReport synthetic(std::string id, std::string level, std::string type, int n, double v, double l, double t,
                           double s) {
  EvaluationReport r;
  r.reaction_id = std::move(id);
  r.level = std::move(level);
  r.dominant_type = std::move(type);
  r.n_gold = n;
  r.V = v;
  r.L = l;
  r.S_tot = t;
  r.S_part = s;
  return r;
}

}  // namespace

TEST(Aggregate, OverallScaling) {
  const auto t = aggregate({synthetic("a", "easy", "addition", 2, 1, 0.5, 0.2, 0.379)}, Partition::overall);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NE(aggregate_csv({t}).find("overall,overall,1,100.0,50.0,20.0,37.9"), std::string::npos);
}

TEST(Aggregate, LevelRows) {
  const auto t = aggregate({synthetic("a", "medium", "x", 2, 1, 1, 1, 1), synthetic("b", "easy", "x", 2, 0, 0, 0, 0)},
                           Partition::level);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[1].group, "easy");
  EXPECT_EQ(t.rows[2].group, "medium");
  EXPECT_THROW(parse_partition("colour"), std::invalid_argument);
  EXPECT_THROW(aggregate({}, Partition::overall), std::invalid_argument);
}

TEST(Aggregate, MeansAndLinearity) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<std::string> levels{"easy", "medium", "hard"}, types{"addition", "pericyclic", "radical"};
  std::vector<EvaluationReport> reports;
  for (int i = 0; i < 10; ++i) {
    const double t = u(rng);
    reports.push_back(synthetic("r" + std::to_string(i), levels[rng() % 3], types[rng() % 3], 1 + static_cast<int>(rng() % 5),
                                u(rng), u(rng), t, t + (1 - t) * u(rng)));
  }
  // Column sums computed independently of the aggregator.
  double sv = 0, sl = 0, st = 0, sp = 0;
  for (const auto& r : reports) sv += r.V, sl += r.L, st += r.S_tot, sp += r.S_part;
  for (auto part : {Partition::overall, Partition::level, Partition::type, Partition::length}) {
    const auto t = aggregate(reports, part);
    EXPECT_NEAR(t.rows[0].V, sv * 10, 1e-9);
    EXPECT_NEAR(t.rows[0].L, sl * 10, 1e-9);
    EXPECT_NEAR(t.rows[0].S_tot, st * 10, 1e-9);
    EXPECT_NEAR(t.rows[0].S_part, sp * 10, 1e-9);
    int count = 0;
    double weighted = 0;
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
      count += t.rows[i].count;
      weighted += t.rows[i].count * t.rows[i].S_part;
    }
    if (part != Partition::overall) {
      EXPECT_EQ(count, 10);
      EXPECT_NEAR(weighted / 10, t.rows[0].S_part, 1e-9);
    }
  }
  const auto md = aggregate_markdown({aggregate(reports, Partition::length)});
  EXPECT_NE(md.find("| group | n | V | L | S_tot | S_part |"), std::string::npos);
}
