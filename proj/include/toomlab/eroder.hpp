#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <optional>

#include "toomlab/lattice.hpp"

namespace toomlab {

using Rational = boost::multiprecision::cpp_rational;

std::string rational_str(const Rational& r);

// Exact-arithmetic linear program: maximize c.x subject to A x <= b, x free.
struct LinearProgram {
  int nvars = 0;
  std::vector<std::vector<Rational>> A;
  std::vector<Rational> b;
  std::vector<Rational> c;
  void add_le(std::vector<Rational> row, Rational rhs);  // row.x <= rhs
  void add_eq(std::vector<Rational> row, Rational rhs);  // row.x == rhs
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Rational value;
  std::vector<Rational> x;
};

// Two-phase dense simplex with Bland's rule; deterministic.
LpResult solve_lp(const LinearProgram& lp);

// A polar function: sigma linear functionals L_s on R^d with sum_s L_s = 0,
// normalized so that max_s max_{i in support} |L_s(i)| <= 1.
struct PolarFunction {
  int sigma = 0;
  int dimension = 0;
  std::vector<std::vector<Rational>> coeffs;        // sigma rows of length d
  std::vector<std::vector<SiteVector>> chosen_sets; // A_s, s = 1..sigma
  Rational value(int s, const SiteVector& i) const; // L_s(i)
};

struct ContourConstants {
  int sigma = 0;
  std::vector<std::vector<SiteVector>> chosen_sets;
  std::vector<Rational> eps_s;  // inf_{i in A_s} L_s(i)
  Rational eps;                 // sum
  std::vector<Rational> R_s;    // -inf_{i in B} L_s(i)
  Rational R;
  std::vector<Rational> Rpp_s;  // sigma == 2 only, crossed constants
  Rational Rpp;
  long long M = 0;   // |B(phi)|
  long long M1 = 0;  // |A_1|, sigma == 2 only
  long long M2 = 0;  // |A_2|, sigma == 2 only
};

struct EdgeSpeedProfile {
  // delta_s = sup_{A in A(phi)} inf_{i in A} L_s(i)
  std::vector<Rational> delta_s;
  Rational total;
};

// Empty-intersection eroder criterion; throws on constant maps. Computed by
// an exact feasibility LP over the full family and cross-checked against the
// (d+1)-subfamily reduction.
bool is_eroder(const MonotonicMap& map);

// Searches sigma = 2..d+1 and all assignments of minimal sets to charges for
// a polar function with positive eps; returns the lexicographically first
// optimum. nullopt iff the map is not an eroder.
std::optional<PolarFunction> find_polar(const MonotonicMap& map);

ContourConstants contour_constants(const MonotonicMap& map,
                                   const PolarFunction& polar);

EdgeSpeedProfile edge_speeds(const MonotonicMap& map,
                             const PolarFunction& polar);

struct ErosionReport {
  bool eroded = false;
  int steps_taken = 0;
  // with a polar: whether r_s(X_n) <= r_s(X_0) - n * delta_s held throughout
  std::optional<bool> polar_certified;
};

// Runs the deterministic automaton from the finite zero set of `initial`
// until all ones or `max_steps`. The working box is inflated automatically so
// boundary effects cannot reach the zeros.
ErosionReport erosion_oracle(const MonotonicMap& map,
                             const Configuration& initial, int max_steps,
                             const std::optional<PolarFunction>& polar = {});

// phi(x) = (1 - x(0)) and_k phi_k(x) + x(0) or_k phi_k(x), via truth table
// on the union of supports. max_domain guards the 2^|domain| construction.
MonotonicMap toom_operator(const std::vector<MonotonicMap>& maps,
                           int max_domain = 20);

}  // namespace toomlab
