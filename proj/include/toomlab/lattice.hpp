#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace toomlab {

// A point of the spatial lattice Z^d.
using SiteVector = std::vector<int>;

SiteVector site_add(const SiteVector& a, const SiteVector& b);
SiteVector site_sub(const SiteVector& a, const SiteVector& b);
SiteVector site_neg(const SiteVector& a);
SiteVector zero_site(int dimension);
SiteVector unit_site(int dimension, int axis);
std::string site_str(const SiteVector& a);

// A monotone map phi: {0,1}^{Z^d} -> {0,1} given by its family of minimal
// one-sets: phi(x) = OR_{A in sets} AND_{i in A} x(i).
// sets == {} is the constant-0 map, sets == {{}} the constant-1 map.
// Canonical storage: each set sorted lexicographically, the family sorted
// lexicographically as sorted lists.
struct MonotonicMap {
  int dimension = 0;
  std::string name;
  std::vector<std::vector<SiteVector>> minimal_sets;

  bool is_zero() const { return minimal_sets.empty(); }
  bool is_one() const {
    return minimal_sets.size() == 1 && minimal_sets[0].empty();
  }
  bool is_constant() const { return is_zero() || is_one(); }
  // all points mentioned by any minimal set ("B(phi)"), sorted, deduped
  std::vector<SiteVector> support() const;
};

bool operator==(const MonotonicMap& a, const MonotonicMap& b);

// Canonicalizes and checks the family is an antichain of distinct sets.
MonotonicMap make_map(int dimension, std::vector<std::vector<SiteVector>> sets,
                      std::string name = "");

// phi(x) for a local configuration given as a predicate on sites.
bool eval_map(const MonotonicMap& map,
              const std::function<bool(const SiteVector&)>& x);

// Same value computed as AND-of-ORs over the dual family.
bool eval_map_via_dual(const MonotonicMap& map,
                       const std::function<bool(const SiteVector&)>& x);

// Recovers the minimal one-sets of a monotone truth table over an explicit
// domain. table[mask] is the value when exactly the sites with mask-bit 1
// are one. Throws std::invalid_argument naming a violating pair of
// configurations if the table is not monotone.
MonotonicMap minimal_sets_from_local_function(
    int dimension, const std::vector<SiteVector>& domain,
    const std::vector<uint8_t>& table, std::string name = "");

// Minimal hitting sets of the minimal one-sets (the family Z(phi)).
std::vector<std::vector<SiteVector>> dual_family(const MonotonicMap& map);
MonotonicMap dual_map(const MonotonicMap& map);

// Built-in maps: "zero", "one", "identity", "nec", "nwc", "swc", "sec",
// "nn" (all d=2), "coop" (any d>=1), "unstable-example" (d=2, uses param).
MonotonicMap builtin_map(const std::string& name, int dimension = 2,
                         int param = 1);

// JSON round trip, schema {"name": str, "dimension": int,
// "minimal_sets": [[[int,...],...],...]}.
MonotonicMap map_from_json(const std::string& text);
std::string map_to_json(const MonotonicMap& map);

// Axis-aligned box in Z^d, inclusive bounds.
struct Box {
  SiteVector lo, hi;
  int dimension() const { return static_cast<int>(lo.size()); }
  long long volume() const;
  bool contains(const SiteVector& p) const;
  // row-major linear index
  long long index_of(const SiteVector& p) const;
  SiteVector site_at(long long index) const;
};

Box make_box(const SiteVector& lo, const SiteVector& hi);
Box cube_box(int dimension, int lo, int hi);

enum class Boundary { AllOnes, AllZeros, Torus };

// One time-slice of a trajectory: a {0,1} field on a box, bit packed along
// axis 0 (64 sites per word), with a boundary rule outside the box.
struct Configuration {
  Box box;
  Boundary boundary = Boundary::AllOnes;
  int words_per_row = 0;
  long long rows = 0;
  std::vector<uint64_t> words;

  int dimension() const { return box.dimension(); }
  void fill(bool value);
  bool get(const SiteVector& p) const;  // applies the boundary rule
  void set(const SiteVector& p, bool value);
  long long count_ones_in_box() const;
};

Configuration make_configuration(const Box& box,
                                 Boundary boundary = Boundary::AllOnes,
                                 bool initial = true);

// phi applied at every site of the box simultaneously (one CA step).
Configuration apply_map_everywhere(const MonotonicMap& map,
                                   const Configuration& x);

}  // namespace toomlab
