#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "mecheval/weights.hpp"

using namespace mecheval;

TEST(Taxonomy, Builtin) {
  const Taxonomy& t = Taxonomy::builtin();
  EXPECT_EQ(t.types().size(), 10u);
  EXPECT_EQ(t.subtypes().size(), 26u);
  EXPECT_EQ(t.parent_of("electrocyclization"), "pericyclic");
  EXPECT_EQ(t.subtypes_of("proton_transfer"), std::vector<std::string>{"acid_base_proton_transfer"});
  EXPECT_TRUE(t.contains("rearrangement", "1,2-shift"));
  EXPECT_FALSE(t.contains("addition", "electrocyclization"));
}

TEST(Taxonomy, JsonRoundTripAndErrors) {
  const Taxonomy back = taxonomy_from_json(taxonomy_to_json(Taxonomy::builtin()));
  EXPECT_EQ(back.types(), Taxonomy::builtin().types());
  EXPECT_EQ(back.subtypes().size(), 26u);
  EXPECT_THROW(taxonomy_from_json(nlohmann::json::parse(R"([{"subtype":"x"}])")), TaxonomyError);
  EXPECT_THROW(taxonomy_from_json(nlohmann::json::parse(
                   R"([{"type":"a","subtypes":["x"]},{"type":"b","subtypes":["x"]}])")),
               TaxonomyError);
  EXPECT_THROW(taxonomy_from_json(nlohmann::json::parse(R"([{"type":"a","subtypes":["x"]},{"type":"a","subtypes":["y"]}])")),
               TaxonomyError);
  EXPECT_THROW(Taxonomy({"a"}, {{"x", "b", ""}}), TaxonomyError);
  EXPECT_THROW(Taxonomy({"Bad Name"}, {}), TaxonomyError);
}

TEST(Weights, SingleStep) {
  const auto w = compute_step_weights({{"pericyclic", "cycloaddition", 1, true}});
  ASSERT_EQ(w.normalized.size(), 1u);
  EXPECT_DOUBLE_EQ(w.normalized[0], 1.0);
}

TEST(Weights, TwoStepHandExample) {
  const auto w = compute_step_weights(step_keys({{"substitution", "nucleophilic_substitution"},
                                                 {"proton_transfer", "acid_base_proton_transfer"}}));
  // 2.5*1.1 + 0.2 and 1.0*0.9*0.9
  EXPECT_NEAR(w.raw[0], 2.95, 1e-12);
  EXPECT_NEAR(w.raw[1], 0.81, 1e-12);
  EXPECT_NEAR(w.normalized[0], 0.7846, 1e-4);
  EXPECT_NEAR(w.normalized[1], 0.2154, 1e-4);
}

TEST(Weights, ClipAndBonuses) {
  WeightConfig cfg;
  cfg.base_type_weight["proton_transfer"] = 0.5;
  cfg.subtype_modifier["acid_base_proton_transfer"] = 0.6;
  // 0.5*0.6 = 0.3 is raised to the lower clip bound.
  EXPECT_DOUBLE_EQ(raw_step_weight({"proton_transfer", "acid_base_proton_transfer", 1, false}, cfg), 0.5);
  WeightConfig d;
  EXPECT_DOUBLE_EQ(raw_step_weight({"pericyclic", "electrocyclization", 1, false}, d), 4.3);
  EXPECT_DOUBLE_EQ(raw_step_weight({"pericyclic", "cycloaddition", 1, false}, d), 4.0 * 1.2 + 0.3);
  EXPECT_DOUBLE_EQ(raw_step_weight({"pericyclic", "sigmatropic_rearrangement", 2, true}, d), 6.0 * 0 + std::min(6.0, 4.0 * 1.3 * 0.9));
  EXPECT_DOUBLE_EQ(raw_step_weight({"addition", "nucleophilic_addition", 1, false}, d), 2.2);
  d.ring_closure_marker = "CYCL";
  EXPECT_DOUBLE_EQ(raw_step_weight({"pericyclic", "electrocyclization", 1, false}, d), 4.3);
}

TEST(Weights, Errors) {
  EXPECT_THROW(compute_step_weights({}), std::invalid_argument);
  EXPECT_THROW(compute_step_weights({{"pericyclic", "nucleophilic_addition", 1, true}}), std::invalid_argument);
  EXPECT_THROW(compute_step_weights({{"nonsense", "x", 1, true}}), std::invalid_argument);
  WeightConfig bad;
  bad.clip_lo = 7.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Weights, RandomProperties) {
  const Taxonomy& tax = Taxonomy::builtin();
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<std::pair<std::string, std::string>> typed;
    for (int i = 0; i < n; ++i) {
      const auto& s = tax.subtypes()[rng() % tax.subtypes().size()];
      typed.emplace_back(s.type, s.name);
    }
    const auto w = compute_step_weights(step_keys(typed));
    for (double r : w.raw) {
      EXPECT_GE(r, 0.5);
      EXPECT_LE(r, 6.0);
    }
    EXPECT_NEAR(std::accumulate(w.normalized.begin(), w.normalized.end(), 0.0), 1.0, 1e-9);
    if (n >= 3) {
      // Swapping two non-last steps swaps their weights.
      auto swapped = typed;
      std::swap(swapped[0], swapped[1]);
      const auto w2 = compute_step_weights(step_keys(swapped));
      EXPECT_DOUBLE_EQ(w2.normalized[0], w.normalized[1]);
      EXPECT_DOUBLE_EQ(w2.normalized[1], w.normalized[0]);
    }
  }
}

TEST(Weights, HomogeneousWithoutBonuses) {
  WeightConfig a;
  a.ring_closure_bonus = 0;
  a.bond_forming_bonus = 0;
  a.clip_lo = 0.01;
  a.clip_hi = 100;
  WeightConfig b = a;
  for (auto& [t, w] : b.base_type_weight) w *= 1.7;
  const auto keys = step_keys({{"pericyclic", "electrocyclization"}, {"addition", "nucleophilic_addition"},
                               {"proton_transfer", "acid_base_proton_transfer"}});
  const auto wa = compute_step_weights(keys, a);
  const auto wb = compute_step_weights(keys, b);
  for (std::size_t i = 0; i < keys.size(); ++i) EXPECT_NEAR(wa.normalized[i], wb.normalized[i], 1e-12);
}

TEST(Drift, StoredVersusRecomputed) {
  const auto rec = compute_step_weights(step_keys({{"proton_transfer", "acid_base_proton_transfer"},
                                                   {"pericyclic", "electrocyclization"},
                                                   {"elimination", "proton_elimination"},
                                                   {"proton_transfer", "acid_base_proton_transfer"}}));
  const std::vector<double> stored{0.1020, 0.5714, 0.2449, 0.0816};
  const auto d = check_stored_weights(stored, rec.normalized, 1e-3);
  EXPECT_GT(d.max_abs_deviation, 0.03);
  EXPECT_TRUE(d.any_flagged());
  EXPECT_EQ(check_stored_weights(stored, stored, 0).max_abs_deviation, 0.0);
  EXPECT_TRUE(check_stored_weights({0.5}, {0.5000001}, 0).flagged[0]);
  EXPECT_THROW(check_stored_weights({1.0}, {0.5, 0.5}, 0), std::invalid_argument);
}

TEST(Vocabulary, JsonRoundTrip) {
  const auto j = vocabulary_to_json({});
  const auto v = vocabulary_from_json(j);
  EXPECT_EQ(v.weights.base_type_weight, WeightConfig{}.base_type_weight);
  EXPECT_EQ(v.weights.subtype_modifier, WeightConfig{}.subtype_modifier);
  auto alias = j;
  alias["weights"]["base_type_weight"] = {{"dissociation", 1.5}, {"pericyclic", 4.0}};
  EXPECT_EQ(vocabulary_from_json(alias).weights.base_type_weight.at("proton_transfer"), 1.5);
  auto unknown = j;
  unknown["weights"]["surprise"] = 1;
  EXPECT_THROW(vocabulary_from_json(unknown), std::invalid_argument);
  auto version = j;
  version["format_version"] = 99;
  EXPECT_THROW(vocabulary_from_json(version), std::invalid_argument);
}
