#pragma once

#include <vector>

#include "metapop/rng.hpp"
#include "metapop/trait.hpp"

namespace metapop {

struct Atom {
  double r = 0.0;
  Trait x;
  double w = 0.0;
};

// Probability measure on [0,1] x R^d with finitely many atoms. Atoms with
// bit-identical (r, x) are merged; order of first appearance is kept.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  // Throws std::invalid_argument unless the weights are nonnegative and sum
  // to 1 within `tolerance`.
  explicit AtomicMeasure(std::vector<Atom> atoms, double tolerance = 1e-10);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_weight() const;

  // Weight carried by trait x over all positions.
  double trait_mass(TraitView x) const;

  // Draws an atom index with probability proportional to its weight.
  std::size_t sample_index(Rng& rng) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

// Merges bit-identical (r, x) atoms without validating the total weight.
std::vector<Atom> merge_atoms(std::vector<Atom> atoms);

}  // namespace metapop
