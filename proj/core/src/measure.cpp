#include "metapop/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace metapop {

std::vector<Atom> merge_atoms(std::vector<Atom> atoms) {
  std::vector<Atom> out;
  out.reserve(atoms.size());
  std::map<std::pair<std::uint64_t, std::vector<std::uint64_t>>, std::size_t> seen;
  for (auto& a : atoms) {
    std::vector<std::uint64_t> key;
    key.reserve(a.x.dim());
    for (double v : a.x.coords()) key.push_back(std::bit_cast<std::uint64_t>(v));
    auto [it, inserted] = seen.try_emplace({std::bit_cast<std::uint64_t>(a.r), std::move(key)}, out.size());
    if (inserted) {
      out.push_back(std::move(a));
    } else {
      out[it->second].w += a.w;
    }
  }
  return out;
}

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms, double tolerance) : atoms_(merge_atoms(std::move(atoms))) {
  double total = 0.0;
  cumulative_.reserve(atoms_.size());
  for (const auto& a : atoms_) {
    if (!(a.w >= 0.0) || !std::isfinite(a.w)) throw std::invalid_argument("atom weight must be finite and >= 0");
    if (!(a.r >= 0.0 && a.r <= 1.0)) throw std::invalid_argument("atom position must lie in [0, 1]");
    if (!a.x.finite()) throw std::invalid_argument("atom trait must be finite");
    total += a.w;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > tolerance)
    throw std::invalid_argument("atomic measure weights sum to " + std::to_string(total) + ", expected 1");
}

double AtomicMeasure::total_weight() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

double AtomicMeasure::trait_mass(TraitView x) const {
  double m = 0.0;
  for (const auto& a : atoms_)
    if (same_bits(a.x, x)) m += a.w;
  return m;
}

std::size_t AtomicMeasure::sample_index(Rng& rng) const {
  const double u = rng.uniform() * total_weight();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), atoms_.size() - 1);
}

}  // namespace metapop
