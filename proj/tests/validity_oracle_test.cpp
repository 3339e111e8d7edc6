#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "mecheval/chem/validity.hpp"

// Frozen accept/reject verdicts of a reference cheminformatics toolkit.
TEST(ValidityOracle, MatchesReferenceToolkit) {
  std::ifstream in(std::string(MECHEVAL_DATA_DIR) + "/fixtures/validity_oracle.tsv");
  ASSERT_TRUE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string smiles = line.substr(0, tab);
    const bool expected = line.substr(tab + 1) == "1";
    EXPECT_EQ(mecheval::chem::is_valid_smiles(smiles), expected) << smiles;
    ++rows;
  }
  EXPECT_GT(rows, 50);
}
