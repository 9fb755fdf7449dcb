#pragma once

#include <string>
#include <vector>

#include "toomlab/contour.hpp"
#include "toomlab/eroder.hpp"

namespace toomlab {

// The two deterministic contour families the enumerator and the series
// bounds target. Loose: star edges inside their charge set, ring edges
// anywhere in the support. Crossed (two charges only): ring edges in the
// opposite charge set with spatially distinct targets per source.
enum class ContourFamily { Loose, Crossed };

// Counting bound at exactly n edges per charge: Loose gives
// n^(tau-1) (tau+1)^(2 tau n) M^(sigma n) with tau = ceil(sigma/2);
// Crossed gives (4 M1 M2)^n / 2. Requires n >= 1; Crossed requires two
// charges. Throws std::invalid_argument otherwise.
Rational bound_Nn(const ContourConstants& consts, int n, ContourFamily family);

// Largest n the exhaustive enumeration accepts by default: 6 with two
// charges, 4 beyond.
int default_edge_cap(int sigma);

struct EnumeratedContours {
  int n = 0;
  ContourFamily family = ContourFamily::Loose;
  long long count = 0;                // distinct contours, n edges per charge
  std::vector<ToomContour> contours;  // deduplicated, each re-validated
};

// Exhaustive Euler-walk enumeration of the family with exactly n edges per
// charge, deduplicated by canonical form. Supports two and three charges.
// cap <= 0 means default_edge_cap; n above the cap throws. n = 0 yields the
// single isolated-vertex contour.
EnumeratedContours enumerate_contours(const MonotonicMap& map,
                                      const ContourConstants& consts, int n,
                                      ContourFamily family, int cap = 0);

long long count_contours_exact(const MonotonicMap& map,
                               const ContourConstants& consts, int n,
                               ContourFamily family, int cap = 0);

struct BoundReport {
  std::string model;
  std::string method;  // "generic-series" | "cycle-series"
  int sigma = 0;
  int dimension = 0;
  int tau = 0;
  Rational eps;
  Rational R;      // loose edge-bound constant
  Rational Rpp;    // crossed edge-bound constant (two charges)
  long long M = 0, M1 = 0, M2 = 0;
  Rational kappa;         // series exponent 1 + R/eps (or 1 + Rpp/eps)
  long long base = 0;     // geometric growth of the counting bound
  std::string condition;  // convergence predicate in p
  Rational bound;         // exact when exact, else see value
  bool exact = false;
  double value = 0.0;  // double view of the bound
  std::vector<std::string> derivation;
};

// Largest defect probability with a provably convergent contour series:
// base^(-kappa), exact when kappa is an integer. Requires eps > 0.
BoundReport generic_pc_bound(const MonotonicMap& map,
                             const ContourConstants& consts,
                             ContourFamily family);

// Word-encoded series for the cooperative model with identity noise in
// dimension d: death probability p, identity probability r, q = 1 - p - r.
struct SeriesBound {
  int dimension = 0;
  Rational p, r, q;
  Rational x;              // geometric ratio of the dominating series
  bool converges = false;  // x < 1
  Rational value;          // (p/(p+r)) / (1-x); zero unless converges
  std::string condition;
  std::vector<std::string> derivation;
};

SeriesBound coop_identity_bound(const Rational& p, const Rational& r, int d);

// Positive root c of 16 d c (c + 2d + 1) = 1: whenever p < c * r the series
// above converges, for every q.
double coop_identity_coefficient(int d);

struct WordCount {
  int i = 0, j = 0, dimension = 0;
  long long exact = 0;  // legal words: i inward steps, j of them circled
  long long bound = 0;  // C(2i,i) C(i,j) d^(2i-j)
};

// Exact count of the cycle words with i inward steps of which j return to a
// previously visited source (circled). Circled subscripts are copies of an
// earlier outward step's type and each consumes a distinct earlier source,
// so legality is a prefix condition. Requires 0 <= j <= i <= 8.
WordCount word_count(int i, int j, int d);

// Continuous-time branching series y(lambda) for the d-dimensional contact
// system with death rate 1 and branching rate lambda.
double continuous_series_ratio(double lambda, int d);

struct ContinuousBound {
  int dimension = 0;
  double ratio_threshold = 0.0;      // largest root of y(lambda) = 1
  double quadratic_threshold = 0.0;  // closed-form sufficient condition
  std::string tighter;               // "ratio" | "quadratic"
  std::string ratio_condition;
  std::string quadratic_condition;
  std::vector<std::string> derivation;
};

// Candidate upper bounds for the critical branching rate: the exact root of
// y(lambda) = 1 by bisection, and the quadratic sufficient condition
// 16 d ((2d+1) lambda + 1) < lambda^2 in closed form.
ContinuousBound continuous_lambda_bound(int d);

}  // namespace toomlab
