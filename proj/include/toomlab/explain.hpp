#pragma once

// Explanation graphs, matchings, loop erasure, and minimal explanations.
//
// An explanation graph certifies a zero at the root of a flow realization:
// every non-defect zero cell points, per charge, at a witness cell one plane
// down, and the leaves are defects.  A matching packs the graph's sinks into
// polar rows, a contour is traced along the matched witness paths, and for
// two charges the same certificate can be produced directly as a Toom cycle
// by exploration plus loop erasure.  Minimal explanations enumerate the
// smallest sub-flows that still force the zero.

#include <optional>
#include <vector>

#include "toomlab/contour.hpp"
#include "toomlab/flow.hpp"

namespace toomlab {

struct ExplanationGraph {
  int sigma = 0;
  int dimension = 0;
  std::vector<SpaceTimePoint> points;  // sorted ascending, no duplicates
  int root = -1;                       // index into points
  // out[u][s-1] = index of the charge-s witness, -1 on sinks (all charges).
  std::vector<std::vector<int>> out;
  std::vector<char> sink;

  int num_points() const { return static_cast<int>(points.size()); }
  int index_of(const SpaceTimePoint& p) const;
  std::vector<int> sink_indices() const;
};

// Structural checks: points sorted/unique, root present at strictly maximal
// time, every edge drops exactly one time step, every non-root point has an
// incoming edge, sinks have no out-edges and the rest exactly one per charge.
CheckReport validate_explanation_graph(const ExplanationGraph& eg);

// Presence of the graph in a flow: the maximal trajectory vanishes on every
// point, the sinks are exactly the points carrying the constant-zero map, and
// each charge-s displacement lies in the chosen charge-s set of the tail's
// map.
PresenceReport explanation_presence_report(const ExplanationGraph& eg,
                                           const FlowRealization& flow,
                                           const ChargeAssignment& chosen);
bool explanation_is_present(const ExplanationGraph& eg,
                            const FlowRealization& flow,
                            const ChargeAssignment& chosen);

// Walks the zero set of the maximal trajectory downward from the root,
// taking per charge the lex-smallest witness in the chosen set of the cell's
// map.  Returns nothing iff the trajectory is one at the root.  On planes
// above -slab_depth the witness is instead the fixed head of the chosen set;
// that rule is sound only when the pyramid of head multiples is zero down to
// plane -slab_depth (as in seeded exploration over modified_flow with the
// seed base zero), and a live fixed head raises std::logic_error.  Throws
// std::out_of_range if the root cell is outside the flow window.
std::optional<ExplanationGraph> extract_explanation_graph(
    const FlowRealization& flow, const ChargeAssignment& chosen,
    std::optional<SpaceTimePoint> root = {}, int slab_depth = 0);

// Charge-s witness chain from u down to its sink (u included).
std::vector<int> charge_path(const ExplanationGraph& eg, int u, int s);
int path_sink(const ExplanationGraph& eg, int u, int s);

// Rows are polars: row i lists one point per charge, and following the
// charge-s witness path from rows[i][s-1] reaches, per charge, a sink that no
// other row reaches.  Row 0 is the root repeated sigma times; later rows are
// tight (all entries reachable from a common point by single edges).
struct ToomMatching {
  int sigma = 0;
  std::vector<std::vector<int>> rows;
};

CheckReport validate_matching(const ExplanationGraph& eg,
                              const ToomMatching& m);

// Builds a matching with exactly one row per sink.
ToomMatching toom_matching(const ExplanationGraph& eg);

// Contour tracing the matched witness paths, restricted to the component of
// the root.  Vertex images stay inside the graph's points, sink images at the
// defects; star-edge images land in the typed witness relation, ring-edge
// images in its union over charges.
ToomContour build_contour_from_matching(const ExplanationGraph& eg,
                                        const ToomMatching& m);

// Direct cycle construction for two charges: grow a defective cycle by
// splitting sources at non-defective minima, erase loops between repeated
// sink letters, stop when every minimum sits on a defect.  The result is
// strongly present.  seed_slab > 0 starts the exploration from
// seed_cycle(seed_slab, j1, j2) with j_s the head of the chosen charge-s set
// of the primary map; this expects a flow whose top seed_slab planes apply
// the primary map (see modified_flow) with the head pyramid zero at the slab
// floor.  Throws std::runtime_error("no contour") when the trajectory at the
// root is one.
ToomCycle build_cycle_loop_erasure(const FlowRealization& flow,
                                   const ChargeAssignment& chosen,
                                   int seed_slab = 0,
                                   std::optional<SpaceTimePoint> root = {});

// The 4r-step rectangle through the origin: r charge-1 steps along j1 going
// down, a zigzag of j2/j1 steps along the bottom two planes, r charge-2
// steps along j2 going back up.  r = 0 gives the trivial cycle.
ToomCycle seed_cycle(int r, const SiteVector& j1, const SiteVector& j2);

// Eliminates point sources (non-root sources whose targets share one image)
// by merging each with its targets; afterwards every non-root source is a
// fork.  Requires sources with at most two distinct target images, which
// contours built from matchings satisfy.
ToomContour forks_only(const ToomContour& c);

int count_forks(const ToomContour& c);

// --- continuous time ----------------------------------------------------

struct ClosureEvent {
  SiteVector site;
  double time = 0.0;  // arrival time in the trajectory
  int kind = 0;       // map index sampled at the arrival, 0 = death
};

struct ContinuousExtraction {
  std::vector<ClosureEvent> closure;  // time descending, root's arrival first
  FlowRealization synthetic;          // two planes per closure arrival
  ExplanationGraph graph;
  ToomContour discrete;
  ContinuousContour contour;
};

// Responsibility closure of the root site at time zero: each zero site is
// explained by its last arrival, deaths terminate, and every other arrival
// records the first zero witness per charge from its kind's chosen sets just
// before the arrival, recursing into those.  The closure is discretized two
// planes per arrival into a flow whose arrival cells carry maps pinned to
// the recorded witnesses, extracted and matched as a discrete flow, and the
// resulting contour lifted back to event times.  Returns nothing iff the
// trajectory at the root site is one at time zero.
std::optional<ContinuousExtraction> continuous_extract_trace(
    const IpsTrajectory& traj, const ChargeAssignment& chosen,
    std::optional<SiteVector> root_site = {});
std::optional<ContinuousContour> continuous_extract(
    const IpsTrajectory& traj, const ChargeAssignment& chosen,
    std::optional<SiteVector> root_site = {});

// --- minimal explanations ------------------------------------------------

// A finite explanation pinned down to its minimal form: every listed cell
// carries a single dual set (empty = spontaneous zero, a defect), all other
// cells are constant one, and the origin still evaluates to zero.
struct MinimalExplanation {
  std::vector<SpaceTimePoint> cells;           // sorted ascending
  std::vector<std::vector<SiteVector>> duals;  // duals[i]: the one dual set
  std::vector<int> defects;                    // indices of empty duals
  bool defect_removal_critical = false;
};

struct MinimalExplanationSummary {
  std::vector<MinimalExplanation> explanations;
  std::vector<long long> by_defects;  // [n] = explanations with n defects
};

// Exhaustive search over single-dual assignments on the window (the root plus
// all cells at negative times), keeping the assignments that force a zero at
// the root and are minimal under cellwise dual refinement.  A defect is
// removal-critical when substituting the model's primary map at that cell
// alone flips the root to one.  Throws std::invalid_argument when more than
// max_cells cells are assignable.
MinimalExplanationSummary minimal_explanations_search(
    const FlowRealization& flow, std::optional<SpaceTimePoint> root = {},
    int max_cells = 24);

// Replaces each non-constant map in the flow by the disjunction of its chosen
// sets.  The original dominates the result cellwise, so zeros of the original
// flow stay zeros of the reduced one.
FlowRealization wlog_reduction(const FlowRealization& flow,
                               const ChargeAssignment& chosen);

// True when every non-constant map of the model equals the disjunction of
// its chosen sets, i.e. has exactly the chosen sets as its minimal family.
bool satisfies_wlog(const ModelSpec& model, const ChargeAssignment& chosen);

// Explanation graph read off a minimal explanation of a wlog-reduced flow:
// the points are the listed cells, the sinks its defects, and the charge-s
// witness of a cell the lex-smallest element of its dual set that also lies
// in the chosen charge-s set of the cell's map.  Throws std::logic_error if
// some required intersection is empty (the flow was not wlog-reduced).
ExplanationGraph explanation_graph_from_minimal(const MinimalExplanation& me,
                                                const FlowRealization& flow,
                                                const ChargeAssignment& chosen);

}  // namespace toomlab
