#pragma once

#include <compare>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "toomlab/eroder.hpp"
#include "toomlab/flow.hpp"
#include "toomlab/lattice.hpp"

namespace toomlab {

// Directed multigraph with sigma typed edge sets. Vertices are abstract
// integer handles 0..num_vertices-1; all geometry lives in the embedding.
struct ToomGraph {
  int sigma = 0;
  int num_vertices = 0;
  std::vector<std::vector<std::pair<int, int>>> edges;  // edges[s-1]
};

enum class VertexKind { Isolated, Source, Sink, Internal, Invalid };

struct VertexClass {
  VertexKind kind = VertexKind::Invalid;
  int charge = 0;  // 1-based charge for Internal, otherwise 0
};

// Isolated vertices count as both a source and a sink.
bool counts_as_source(const VertexClass& c);
bool counts_as_sink(const VertexClass& c);

struct CheckReport {
  bool ok = true;
  std::vector<std::string> violations;
  void fail(std::string message);
};

// Requires well-formed vertex ids; kind Invalid marks vertices whose degree
// profile matches no vertex type.
std::vector<VertexClass> classify_vertices(const ToomGraph& g);

// Degree conditions per vertex plus source/sink count equality.
CheckReport validate_graph(const ToomGraph& g);

struct SpaceTimePoint {
  SiteVector site;
  int time = 0;
  auto operator<=>(const SpaceTimePoint&) const = default;
};

std::string point_str(const SpaceTimePoint& p);

struct Embedding {
  std::vector<SiteVector> site;  // indexed by vertex
  std::vector<int> time;

  SpaceTimePoint point(int v) const { return {site[v], time[v]}; }
};

// Every edge steps one unit down in time; sinks overlap nothing; internal
// vertices of equal charge do not overlap.
CheckReport validate_embedding(const ToomGraph& g, const Embedding& psi);

struct ToomContour {
  ToomGraph graph;
  int root = 0;
  Embedding psi;

  int dimension() const;
  SpaceTimePoint root_point() const { return psi.point(root); }
};

// Graph and embedding valid, graph connected, root a source whose time
// strictly exceeds that of every other image, equally many edges per charge.
CheckReport validate_contour(const ToomContour& c);

struct ContourCounts {
  int sources = 0;
  int sinks = 0;
  std::vector<int> internals;        // per charge
  std::vector<int> edges_per_charge;
  int n_star = 0;  // sinks
  int n_e = 0;     // edges of each charge (contours have them equal)
};

ContourCounts contour_counts(const ToomContour& c);

// Label-free equivalence key: root image, sink images, and the images of the
// edges leaving internal vertices or the root ("star") and those leaving
// other sources ("ring"), each flattened to (source point, target point,
// charge) triples and sorted.
struct CanonicalContour {
  SpaceTimePoint root;
  std::vector<SpaceTimePoint> sinks;
  std::vector<std::tuple<SpaceTimePoint, SpaceTimePoint, int>> star_edges;
  std::vector<std::tuple<SpaceTimePoint, SpaceTimePoint, int>> ring_edges;

  auto operator<=>(const CanonicalContour&) const = default;
};

CanonicalContour canonical_form(const ToomContour& c);

// chosen[k][s-1] is the minimal one-set steering charge s at cells that
// apply map k; constant maps get empty sets.
using ChargeSets = std::vector<std::vector<SiteVector>>;
using ChargeAssignment = std::vector<ChargeSets>;

// For each map: per charge the minimal set maximizing inf_{i in A} L_s(i),
// first in canonical family order among ties.
ChargeSets eroder_charge_sets(const MonotonicMap& map,
                              const PolarFunction& polar);
ChargeAssignment assign_charges(const ModelSpec& model,
                                const PolarFunction& polar);

// The contact-process assignment: charge 1 holds still, charge 2 jumps to a
// forward neighbour.
ChargeSets sexual_contact_charge_sets(int dimension);

struct PresenceReport {
  bool present = true;
  std::vector<std::string> violations;
};

// Sinks on defect cells, other vertices on non-constant cells, edge
// displacements in the chosen set of their charge (root and internal
// starts) or in the union over charges (other sources).
PresenceReport presence_report(const ToomContour& c,
                               const FlowRealization& flow,
                               const ChargeAssignment& chosen);
// Two charges only: displacements out of non-root sources must lie in the
// opposite charge's set and the two targets must differ spatially.
PresenceReport strong_presence_report(const ToomContour& c,
                                      const FlowRealization& flow,
                                      const ChargeAssignment& chosen);
bool is_present(const ToomContour& c, const FlowRealization& flow,
                const ChargeAssignment& chosen);
bool is_strongly_present(const ToomContour& c, const FlowRealization& flow,
                         const ChargeAssignment& chosen);

// Membership in the deterministic one-map contour families used by the
// enumerator: rooted at the origin, star edges steered by their charge set;
// ring edges anywhere in the support ("loose") or in the opposite charge set
// with spatially distinct targets per source ("crossed", two charges).
CheckReport check_loose_family(const ToomContour& c, const MonotonicMap& map,
                               const ChargeSets& sets);
CheckReport check_crossed_family(const ToomContour& c,
                                 const MonotonicMap& map,
                                 const ChargeSets& sets);

// sum_s sum_{(v,w) in E_s} (L_s(psi(w)) - L_s(psi(v))), exactly; zero for
// every embedded Toom graph.
Rational contour_zero_sum(const ToomGraph& g, const Embedding& psi,
                          const PolarFunction& polar);

// n_e <= (1 + R/eps) (n_star - 1), evaluated in exact arithmetic.
bool edge_bound_holds(int n_e, int n_star, const Rational& eps,
                      const Rational& R);

// A closed walk through space-time with unit time steps; descending steps
// carry charge 1, ascending steps charge 2 with reversed edge orientation.
// The trivial cycle is a single point.
struct ToomCycle {
  std::vector<SpaceTimePoint> points;

  int length() const {
    return points.size() == 1 ? 0 : static_cast<int>(points.size());
  }
};

CheckReport validate_cycle(const ToomCycle& cyc);
ToomContour cycle_to_contour(const ToomCycle& cyc);
// Two charges only; throws std::invalid_argument on invalid input. The
// round trip preserves canonical_form.
ToomCycle contour_to_cycle(const ToomContour& c);

// --- continuous time ---

struct ContinuousEmbedding {
  std::vector<SiteVector> site;
  std::vector<double> time;  // event timestamps, compared bit exactly
};

struct ContinuousContour {
  ToomGraph graph;
  int root = 0;
  ContinuousEmbedding psi;

  int dimension() const;
};

// Segments are vertical (same site, time strictly down) or horizontal (same
// time, site moves); sink/internal overlap rules as in discrete time; no
// charge-s internal or sink image interior to a vertical charge-s segment.
CheckReport validate_continuous_embedding(const ToomGraph& g,
                                          const ContinuousEmbedding& psi);
// Embedding valid, graph connected, root a source, root time a strict
// maximum among distinct images.
CheckReport validate_continuous_contour(const ContinuousContour& c);

// Presence against an event-driven realization: sinks exactly at death
// marks, horizontal starts and non-root sources at arrivals, arrival-kind
// restrictions along vertical runs, and displacement rules at arrivals.
PresenceReport continuous_presence_report(const ContinuousContour& c,
                                          const IpsTrajectory& traj,
                                          const ChargeAssignment& chosen);
PresenceReport continuous_strong_presence_report(const ContinuousContour& c,
                                                 const IpsTrajectory& traj,
                                                 const ChargeAssignment& chosen);
bool continuous_is_present(const ContinuousContour& c,
                           const IpsTrajectory& traj,
                           const ChargeAssignment& chosen);
bool continuous_is_strongly_present(const ContinuousContour& c,
                                    const IpsTrajectory& traj,
                                    const ChargeAssignment& chosen);

// --- serialization ---

std::string contour_to_json(const ToomContour& c);
ToomContour contour_from_json(const std::string& text);
std::string continuous_contour_to_json(const ContinuousContour& c);

// Graphviz export: charge-colored edges, star-shaped sinks, doubled border
// on the root.
std::string contour_to_dot(const ToomContour& c);
std::string continuous_contour_to_dot(const ContinuousContour& c);

}  // namespace toomlab
