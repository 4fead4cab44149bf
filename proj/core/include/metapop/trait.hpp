#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace metapop {

using TraitView = std::span<const double>;

// A point of R^d. All traits in one run share the same dimension.
class Trait {
 public:
  Trait() = default;
  explicit Trait(std::size_t dim, double value = 0.0) : coords_(dim, value) {}
  Trait(std::initializer_list<double> coords) : coords_(coords) {}
  explicit Trait(TraitView coords) : coords_(coords.begin(), coords.end()) {}
  explicit Trait(std::vector<double> coords) : coords_(std::move(coords)) {}

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }

  TraitView view() const { return coords_; }
  operator TraitView() const { return coords_; }  // NOLINT(google-explicit-constructor)
  std::span<double> mutable_view() { return coords_; }
  const std::vector<double>& coords() const { return coords_; }

  double norm() const {
    double s = 0.0;
    for (double v : coords_) s += v * v;
    return std::sqrt(s);
  }

  bool finite() const {
    for (double v : coords_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Trait& a, const Trait& b) = default;
  friend auto operator<=>(const Trait& a, const Trait& b) = default;

 private:
  std::vector<double> coords_;
};

// Bit-level equality; +0.0 and -0.0 are different traits.
inline bool same_bits(TraitView a, TraitView b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

// Position and trait of one site, (r, x) in [0,1] x R^d.
struct SpaceTrait {
  double r = 0.0;
  Trait x;
};

}  // namespace metapop
