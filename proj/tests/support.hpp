#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mecheval/alignment.hpp"
#include "mecheval/chem/canonical.hpp"
#include "mecheval/taxonomy.hpp"

namespace mecheval::test_support {

inline std::vector<std::string> fixture_molecules() {
  std::ifstream in(std::string(MECHEVAL_DATA_DIR) + "/fixtures/molecules.smi");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

// Re-emits a molecule with atoms in a random order using only explicit
// bracket-free syntax and ring digits for every bond not on a spanning tree.
inline std::string random_rewrite(const std::string& smiles, std::mt19937& rng) {
  const chem::Molecule m = chem::parse_smiles(smiles);
  std::vector<chem::Molecule> parts = chem::split_components(m);
  std::vector<std::string> out;
  for (const auto& p : parts) {
    std::vector<int> r(static_cast<std::size_t>(p.atom_count()));
    std::iota(r.begin(), r.end(), 0);
    std::shuffle(r.begin(), r.end(), rng);
    out.push_back(chem::detail::SmilesWriter(p, r, chem::ValenceTable::builtin()).write());
  }
  std::shuffle(out.begin(), out.end(), rng);
  std::string s;
  for (std::size_t i = 0; i < out.size(); ++i) s += (i ? "." : "") + out[i];
  return s;
}

struct RandomInstance {
  std::vector<GoldStep> gold;
  std::vector<PredStep> pred;
};

// Each instance draws labels from three random taxonomy subtypes and
// intermediates from five random members of a 20-molecule pool, so both
// collide often; about one prediction in ten is unparseable.
class InstanceGenerator {
 public:
  explicit InstanceGenerator(unsigned seed) : rng_(seed) {
    const auto mols = fixture_molecules();
    for (std::size_t i = 0; i < 20 && i < mols.size(); ++i) pool_.push_back(chem::canonical_smiles(mols[i]));
  }

  RandomInstance next(int max_n = 6, int max_m = 6) {
    const auto& subs = Taxonomy::builtin().subtypes();
    std::vector<const SubtypeEntry*> labels;
    for (int k = 0; k < 3; ++k) labels.push_back(&subs[pick(subs.size())]);
    std::vector<std::string> mols;
    for (int k = 0; k < 5; ++k) mols.push_back(pool_[pick(pool_.size())]);
    RandomInstance inst;
    const int n = 1 + static_cast<int>(pick(static_cast<std::size_t>(max_n)));
    const int m = static_cast<int>(pick(static_cast<std::size_t>(max_m) + 1));
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto* l = labels[pick(labels.size())];
      const double w = u(rng_);
      sum += w;
      inst.gold.push_back({l->type, l->name, mols[pick(mols.size())], w});
    }
    for (auto& g : inst.gold) g.weight = *g.weight / sum;
    for (int j = 0; j < m; ++j) {
      const auto* l = labels[pick(labels.size())];
      const std::string smi = pick(10) == 0 ? std::string("C1CC") : mols[pick(mols.size())];
      inst.pred.push_back(make_pred_step(l->type, l->name, smi));
    }
    return inst;
  }

  std::mt19937& rng() { return rng_; }
  const std::vector<std::string>& pool() const { return pool_; }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::mt19937 rng_;
  std::vector<std::string> pool_;
};

}  // namespace mecheval::test_support
