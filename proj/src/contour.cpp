#include "toomlab/contour.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace toomlab {

void CheckReport::fail(std::string message) {
  ok = false;
  violations.push_back(std::move(message));
}

bool counts_as_source(const VertexClass& c) {
  return c.kind == VertexKind::Source || c.kind == VertexKind::Isolated;
}

bool counts_as_sink(const VertexClass& c) {
  return c.kind == VertexKind::Sink || c.kind == VertexKind::Isolated;
}

namespace {

struct DegreeTable {
  // in[v][s-1], out[v][s-1]
  std::vector<std::vector<int>> in, out;
};

DegreeTable degrees(const ToomGraph& g) {
  DegreeTable t;
  t.in.assign(g.num_vertices, std::vector<int>(g.sigma, 0));
  t.out = t.in;
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s]) {
      t.out.at(v)[s] += 1;
      t.in.at(w)[s] += 1;
    }
  return t;
}

VertexClass classify_one(const std::vector<int>& in, const std::vector<int>& out) {
  const int sigma = static_cast<int>(in.size());
  bool all_zero = true, source = true, sink = true;
  for (int s = 0; s < sigma; ++s) {
    if (in[s] != 0 || out[s] != 0) all_zero = false;
    if (in[s] != 0 || out[s] != 1) source = false;
    if (in[s] != 1 || out[s] != 0) sink = false;
  }
  if (all_zero) return {VertexKind::Isolated, 0};
  if (source) return {VertexKind::Source, 0};
  if (sink) return {VertexKind::Sink, 0};
  for (int s = 0; s < sigma; ++s) {
    bool internal = true;
    for (int r = 0; r < sigma; ++r) {
      const int want = r == s ? 1 : 0;
      if (in[r] != want || out[r] != want) internal = false;
    }
    if (internal) return {VertexKind::Internal, s + 1};
  }
  return {VertexKind::Invalid, 0};
}

std::string degree_str(const std::vector<int>& d) {
  std::string s = "(";
  for (size_t k = 0; k < d.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(d[k]);
  }
  return s + ")";
}

bool ids_in_range(const ToomGraph& g) {
  if (g.sigma < 2) return false;
  if (g.edges.size() != static_cast<size_t>(g.sigma)) return false;
  for (const auto& charge : g.edges)
    for (const auto& [v, w] : charge)
      if (v < 0 || v >= g.num_vertices || w < 0 || w >= g.num_vertices)
        return false;
  return true;
}

bool graph_connected(const ToomGraph& g) {
  if (g.num_vertices <= 1) return true;
  std::vector<std::vector<int>> adj(g.num_vertices);
  for (const auto& charge : g.edges)
    for (const auto& [v, w] : charge) {
      adj[v].push_back(w);
      adj[w].push_back(v);
    }
  std::vector<char> seen(g.num_vertices, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
  }
  return reached == g.num_vertices;
}

}  // namespace

std::vector<VertexClass> classify_vertices(const ToomGraph& g) {
  if (!ids_in_range(g))
    throw std::out_of_range("malformed Toom graph: bad sigma or vertex ids");
  const DegreeTable t = degrees(g);
  std::vector<VertexClass> out(g.num_vertices);
  for (int v = 0; v < g.num_vertices; ++v)
    out[v] = classify_one(t.in[v], t.out[v]);
  return out;
}

CheckReport validate_graph(const ToomGraph& g) {
  CheckReport rep;
  if (g.sigma < 2)
    rep.fail("graph needs at least 2 charges, has " + std::to_string(g.sigma));
  if (g.edges.size() != static_cast<size_t>(std::max(g.sigma, 0)))
    rep.fail("graph has " + std::to_string(g.edges.size()) +
             " edge lists for " + std::to_string(g.sigma) + " charges");
  if (g.num_vertices < 0) rep.fail("negative vertex count");
  if (!rep.ok) return rep;
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s])
      if (v < 0 || v >= g.num_vertices || w < 0 || w >= g.num_vertices) {
        rep.fail("charge " + std::to_string(s + 1) + " edge (" +
                 std::to_string(v) + "," + std::to_string(w) +
                 ") leaves the vertex range");
        return rep;
      }
  const DegreeTable t = degrees(g);
  int sources = 0, sinks = 0;
  for (int v = 0; v < g.num_vertices; ++v) {
    const VertexClass c = classify_one(t.in[v], t.out[v]);
    if (c.kind == VertexKind::Invalid)
      rep.fail("vertex " + std::to_string(v) + ": in-degrees " +
               degree_str(t.in[v]) + " and out-degrees " +
               degree_str(t.out[v]) + " match no vertex type");
    if (counts_as_source(c)) ++sources;
    if (counts_as_sink(c)) ++sinks;
  }
  if (rep.ok && sources != sinks)
    rep.fail("graph has " + std::to_string(sources) + " sources but " +
             std::to_string(sinks) + " sinks");
  return rep;
}

std::string point_str(const SpaceTimePoint& p) {
  return site_str(p.site) + " @ " + std::to_string(p.time);
}

CheckReport validate_embedding(const ToomGraph& g, const Embedding& psi) {
  CheckReport rep = validate_graph(g);
  if (!rep.ok) return rep;
  const size_t n = static_cast<size_t>(g.num_vertices);
  if (psi.site.size() != n || psi.time.size() != n) {
    rep.fail("embedding covers " + std::to_string(psi.site.size()) +
             " sites and " + std::to_string(psi.time.size()) + " times for " +
             std::to_string(g.num_vertices) + " vertices");
    return rep;
  }
  for (size_t v = 1; v < n; ++v)
    if (psi.site[v].size() != psi.site[0].size()) {
      rep.fail("vertex " + std::to_string(v) + " has dimension " +
               std::to_string(psi.site[v].size()) + ", vertex 0 has " +
               std::to_string(psi.site[0].size()));
      return rep;
    }
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s])
      if (psi.time[w] != psi.time[v] - 1)
        rep.fail("charge " + std::to_string(s + 1) + " edge " +
                 point_str(psi.point(v)) + " -> " + point_str(psi.point(w)) +
                 " does not step one unit down in time");
  const auto cls = classify_vertices(g);
  for (int v = 0; v < g.num_vertices; ++v) {
    if (!counts_as_sink(cls[v])) continue;
    for (int w = 0; w < g.num_vertices; ++w)
      if (w != v && psi.point(v) == psi.point(w))
        rep.fail("sink " + std::to_string(v) + " overlaps vertex " +
                 std::to_string(w) + " at " + point_str(psi.point(v)));
  }
  for (int v = 0; v < g.num_vertices; ++v)
    for (int w = v + 1; w < g.num_vertices; ++w)
      if (cls[v].kind == VertexKind::Internal &&
          cls[w].kind == VertexKind::Internal &&
          cls[v].charge == cls[w].charge && psi.point(v) == psi.point(w))
        rep.fail("charge " + std::to_string(cls[v].charge) +
                 " internal vertices " + std::to_string(v) + " and " +
                 std::to_string(w) + " overlap at " + point_str(psi.point(v)));
  return rep;
}

int ToomContour::dimension() const {
  return psi.site.empty() ? 0 : static_cast<int>(psi.site.front().size());
}

CheckReport validate_contour(const ToomContour& c) {
  CheckReport rep = validate_embedding(c.graph, c.psi);
  if (!rep.ok) return rep;
  if (c.root < 0 || c.root >= c.graph.num_vertices) {
    rep.fail("root " + std::to_string(c.root) + " is not a vertex");
    return rep;
  }
  const auto cls = classify_vertices(c.graph);
  if (!counts_as_source(cls[c.root]))
    rep.fail("root " + std::to_string(c.root) + " is not a source");
  if (!graph_connected(c.graph)) rep.fail("graph is not connected");
  const SpaceTimePoint rp = c.psi.point(c.root);
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    const SpaceTimePoint p = c.psi.point(v);
    if (p != rp && p.time >= rp.time)
      rep.fail("vertex " + std::to_string(v) + " at " + point_str(p) +
               " is not strictly below the root at " + point_str(rp));
  }
  for (int s = 1; s < c.graph.sigma; ++s)
    if (c.graph.edges[s].size() != c.graph.edges[0].size())
      rep.fail("charge " + std::to_string(s + 1) + " has " +
               std::to_string(c.graph.edges[s].size()) +
               " edges, charge 1 has " +
               std::to_string(c.graph.edges[0].size()));
  return rep;
}

ContourCounts contour_counts(const ToomContour& c) {
  const auto cls = classify_vertices(c.graph);
  ContourCounts n;
  n.internals.assign(c.graph.sigma, 0);
  for (const auto& cl : cls) {
    if (counts_as_source(cl)) ++n.sources;
    if (counts_as_sink(cl)) ++n.sinks;
    if (cl.kind == VertexKind::Internal) ++n.internals[cl.charge - 1];
  }
  for (const auto& charge : c.graph.edges)
    n.edges_per_charge.push_back(static_cast<int>(charge.size()));
  n.n_star = n.sinks;
  n.n_e = n.edges_per_charge.empty() ? 0 : n.edges_per_charge.front();
  return n;
}

CanonicalContour canonical_form(const ToomContour& c) {
  const auto cls = classify_vertices(c.graph);
  CanonicalContour key;
  key.root = c.psi.point(c.root);
  for (int v = 0; v < c.graph.num_vertices; ++v)
    if (counts_as_sink(cls[v])) key.sinks.push_back(c.psi.point(v));
  std::sort(key.sinks.begin(), key.sinks.end());
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const bool star =
          v == c.root || cls[v].kind == VertexKind::Internal;
      auto& bucket = star ? key.star_edges : key.ring_edges;
      bucket.emplace_back(c.psi.point(v), c.psi.point(w), s + 1);
    }
  std::sort(key.star_edges.begin(), key.star_edges.end());
  std::sort(key.ring_edges.begin(), key.ring_edges.end());
  return key;
}

ChargeSets eroder_charge_sets(const MonotonicMap& map,
                              const PolarFunction& polar) {
  ChargeSets sets(polar.sigma);
  if (map.is_constant()) return sets;
  for (int s = 0; s < polar.sigma; ++s) {
    bool have = false;
    Rational best = 0;
    for (const auto& family : map.minimal_sets) {
      Rational worst = 0;
      bool first = true;
      for (const auto& i : family) {
        const Rational v = polar.value(s, i);
        if (first || v < worst) worst = v;
        first = false;
      }
      if (!have || worst > best) {
        have = true;
        best = worst;
        sets[s] = family;
      }
    }
  }
  return sets;
}

ChargeAssignment assign_charges(const ModelSpec& model,
                                const PolarFunction& polar) {
  ChargeAssignment chosen;
  chosen.reserve(model.maps.size());
  for (const auto& map : model.maps)
    chosen.push_back(eroder_charge_sets(map, polar));
  return chosen;
}

ChargeSets sexual_contact_charge_sets(int dimension) {
  ChargeSets sets(2);
  sets[0] = {zero_site(dimension)};
  for (int a = 0; a < dimension; ++a)
    sets[1].push_back(unit_site(dimension, a));
  std::sort(sets[1].begin(), sets[1].end());
  return sets;
}

namespace {

bool in_set(const std::vector<SiteVector>& family, const SiteVector& j) {
  return std::find(family.begin(), family.end(), j) != family.end();
}

bool in_any_set(const ChargeSets& sets, const SiteVector& j) {
  for (const auto& family : sets)
    if (in_set(family, j)) return true;
  return false;
}

// Shared scaffolding of the discrete presence checks.
struct PresenceContext {
  PresenceReport rep;
  std::vector<VertexClass> cls;
  bool usable = false;

  void fail(std::string message) {
    rep.present = false;
    rep.violations.push_back(std::move(message));
  }
};

PresenceContext presence_context(const ToomContour& c,
                                 const FlowRealization& flow,
                                 const ChargeAssignment& chosen) {
  PresenceContext ctx;
  if (!ids_in_range(c.graph) ||
      c.psi.site.size() != static_cast<size_t>(c.graph.num_vertices) ||
      c.psi.time.size() != static_cast<size_t>(c.graph.num_vertices) ||
      c.root < 0 || c.root >= c.graph.num_vertices) {
    ctx.fail("malformed contour");
    return ctx;
  }
  if (chosen.size() != flow.model.maps.size()) {
    ctx.fail("charge assignment covers " + std::to_string(chosen.size()) +
             " maps, model has " + std::to_string(flow.model.maps.size()));
    return ctx;
  }
  for (const auto& sets : chosen)
    if (sets.size() != static_cast<size_t>(c.graph.sigma)) {
      ctx.fail("charge assignment arity differs from the contour's charges");
      return ctx;
    }
  ctx.cls = classify_vertices(c.graph);
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    if (ctx.cls[v].kind == VertexKind::Invalid) {
      ctx.fail("vertex " + std::to_string(v) + " matches no vertex type");
      return ctx;
    }
    if (!flow.in_window(c.psi.site[v], c.psi.time[v])) {
      ctx.fail("vertex " + std::to_string(v) + " at " +
               point_str(c.psi.point(v)) + " is outside the flow window");
      return ctx;
    }
  }
  ctx.usable = true;
  return ctx;
}

void check_presence_core(PresenceContext& ctx, const ToomContour& c,
                         const FlowRealization& flow,
                         const ChargeAssignment& chosen) {
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    const auto& map = flow.map_at(c.psi.site[v], c.psi.time[v]);
    if (counts_as_sink(ctx.cls[v])) {
      if (!map.is_zero())
        ctx.fail("sink " + std::to_string(v) + " at " +
                 point_str(c.psi.point(v)) + " is not on a defect cell");
    } else if (map.is_constant()) {
      ctx.fail("vertex " + std::to_string(v) + " at " +
               point_str(c.psi.point(v)) + " is on a constant-map cell");
    }
  }
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const int k = flow.map_index_at(c.psi.site[v], c.psi.time[v]);
      const SiteVector disp = site_sub(c.psi.site[w], c.psi.site[v]);
      const bool star =
          v == c.root || ctx.cls[v].kind == VertexKind::Internal;
      if (star) {
        if (!in_set(chosen[k][s], disp))
          ctx.fail("charge " + std::to_string(s + 1) + " edge from " +
                   point_str(c.psi.point(v)) + " moves by " + site_str(disp) +
                   ", outside its charge set");
      } else {
        if (!in_any_set(chosen[k], disp))
          ctx.fail("source edge from " + point_str(c.psi.point(v)) +
                   " moves by " + site_str(disp) +
                   ", outside every charge set");
      }
    }
}

void check_strong_extra(PresenceContext& ctx, const ToomContour& c,
                        const FlowRealization& flow,
                        const ChargeAssignment& chosen) {
  if (c.graph.sigma != 2) {
    ctx.fail("strong presence needs exactly 2 charges, contour has " +
             std::to_string(c.graph.sigma));
    return;
  }
  std::vector<std::array<int, 2>> target(c.graph.num_vertices, {-1, -1});
  for (int s = 0; s < 2; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) target[v][s] = w;
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    if (v == c.root || !counts_as_source(ctx.cls[v])) continue;
    const int w1 = target[v][0], w2 = target[v][1];
    if (w1 < 0 || w2 < 0) continue;  // not a source after all
    const int k = flow.map_index_at(c.psi.site[v], c.psi.time[v]);
    const SiteVector d1 = site_sub(c.psi.site[w1], c.psi.site[v]);
    const SiteVector d2 = site_sub(c.psi.site[w2], c.psi.site[v]);
    if (!in_set(chosen[k][1], d1))
      ctx.fail("source at " + point_str(c.psi.point(v)) +
               ": charge 1 edge moves by " + site_str(d1) +
               ", outside the charge 2 set");
    if (!in_set(chosen[k][0], d2))
      ctx.fail("source at " + point_str(c.psi.point(v)) +
               ": charge 2 edge moves by " + site_str(d2) +
               ", outside the charge 1 set");
    if (c.psi.site[w1] == c.psi.site[w2])
      ctx.fail("source at " + point_str(c.psi.point(v)) +
               " sends both charges to site " + site_str(c.psi.site[w1]));
  }
}

}  // namespace

PresenceReport presence_report(const ToomContour& c,
                               const FlowRealization& flow,
                               const ChargeAssignment& chosen) {
  PresenceContext ctx = presence_context(c, flow, chosen);
  if (ctx.usable) check_presence_core(ctx, c, flow, chosen);
  return ctx.rep;
}

PresenceReport strong_presence_report(const ToomContour& c,
                                      const FlowRealization& flow,
                                      const ChargeAssignment& chosen) {
  PresenceContext ctx = presence_context(c, flow, chosen);
  if (ctx.usable) {
    check_presence_core(ctx, c, flow, chosen);
    check_strong_extra(ctx, c, flow, chosen);
  }
  return ctx.rep;
}

bool is_present(const ToomContour& c, const FlowRealization& flow,
                const ChargeAssignment& chosen) {
  return presence_report(c, flow, chosen).present;
}

bool is_strongly_present(const ToomContour& c, const FlowRealization& flow,
                         const ChargeAssignment& chosen) {
  return strong_presence_report(c, flow, chosen).present;
}

namespace {

bool at_origin(const ToomContour& c) {
  const SpaceTimePoint rp = c.psi.point(c.root);
  return rp.time == 0 && rp.site == zero_site(c.dimension());
}

}  // namespace

CheckReport check_loose_family(const ToomContour& c, const MonotonicMap& map,
                               const ChargeSets& sets) {
  CheckReport rep = validate_contour(c);
  if (!rep.ok) return rep;
  if (sets.size() != static_cast<size_t>(c.graph.sigma)) {
    rep.fail("charge sets arity differs from the contour's charges");
    return rep;
  }
  if (!at_origin(c))
    rep.fail("root sits at " + point_str(c.psi.point(c.root)) +
             ", not at the origin");
  const auto cls = classify_vertices(c.graph);
  const auto b = map.support();
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const SiteVector disp = site_sub(c.psi.site[w], c.psi.site[v]);
      const bool star = v == c.root || cls[v].kind == VertexKind::Internal;
      if (star && !in_set(sets[s], disp))
        rep.fail("charge " + std::to_string(s + 1) + " edge from " +
                 point_str(c.psi.point(v)) + " moves by " + site_str(disp) +
                 ", outside its charge set");
      if (!star && !std::binary_search(b.begin(), b.end(), disp))
        rep.fail("source edge from " + point_str(c.psi.point(v)) +
                 " moves by " + site_str(disp) + ", outside the support");
    }
  return rep;
}

CheckReport check_crossed_family(const ToomContour& c,
                                 const MonotonicMap& map,
                                 const ChargeSets& sets) {
  CheckReport rep = validate_contour(c);
  if (!rep.ok) return rep;
  if (c.graph.sigma != 2) {
    rep.fail("crossed family needs exactly 2 charges");
    return rep;
  }
  if (sets.size() != 2) {
    rep.fail("charge sets arity differs from the contour's charges");
    return rep;
  }
  (void)map;
  if (!at_origin(c))
    rep.fail("root sits at " + point_str(c.psi.point(c.root)) +
             ", not at the origin");
  const auto cls = classify_vertices(c.graph);
  for (int s = 0; s < 2; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const SiteVector disp = site_sub(c.psi.site[w], c.psi.site[v]);
      const bool star = v == c.root || cls[v].kind == VertexKind::Internal;
      const auto& family = star ? sets[s] : sets[1 - s];
      if (!in_set(family, disp))
        rep.fail("charge " + std::to_string(s + 1) + " edge from " +
                 point_str(c.psi.point(v)) + " moves by " + site_str(disp) +
                 (star ? ", outside its charge set"
                       : ", outside the opposite charge set"));
    }
  std::vector<std::array<int, 2>> target(c.graph.num_vertices, {-1, -1});
  for (int s = 0; s < 2; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) target[v][s] = w;
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    if (v == c.root || !counts_as_source(cls[v])) continue;
    const int w1 = target[v][0], w2 = target[v][1];
    if (w1 >= 0 && w2 >= 0 && c.psi.site[w1] == c.psi.site[w2])
      rep.fail("source at " + point_str(c.psi.point(v)) +
               " sends both charges to site " + site_str(c.psi.site[w1]));
  }
  return rep;
}

Rational contour_zero_sum(const ToomGraph& g, const Embedding& psi,
                          const PolarFunction& polar) {
  if (g.sigma != polar.sigma)
    throw std::invalid_argument("polar arity differs from the graph's");
  Rational acc = 0;
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s])
      acc += polar.value(s, psi.site.at(w)) - polar.value(s, psi.site.at(v));
  return acc;
}

bool edge_bound_holds(int n_e, int n_star, const Rational& eps,
                      const Rational& R) {
  return Rational(n_e) * eps <= (eps + R) * Rational(n_star - 1);
}

// --- cycles ---

namespace {

enum class CyclePos { Down, Up, Min, Max };

// local time pattern around position k of a cyclic walk
std::vector<CyclePos> cycle_positions(const std::vector<SpaceTimePoint>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<CyclePos> pos(n);
  for (int k = 0; k < n; ++k) {
    const int prev = pts[(k + n - 1) % n].time;
    const int cur = pts[k].time;
    const int next = pts[(k + 1) % n].time;
    if (prev > cur && cur > next) pos[k] = CyclePos::Down;
    else if (prev < cur && cur < next) pos[k] = CyclePos::Up;
    else if (prev > cur && cur < next) pos[k] = CyclePos::Min;
    else pos[k] = CyclePos::Max;
  }
  return pos;
}

}  // namespace

CheckReport validate_cycle(const ToomCycle& cyc) {
  CheckReport rep;
  const int n = static_cast<int>(cyc.points.size());
  if (n == 0) {
    rep.fail("cycle has no points");
    return rep;
  }
  if (n == 1) return rep;  // trivial cycle
  if (n % 2 != 0) {
    rep.fail("cycle length " + std::to_string(n) + " is odd");
    return rep;
  }
  for (int k = 0; k < n; ++k) {
    const auto& a = cyc.points[k];
    const auto& b = cyc.points[(k + 1) % n];
    if (std::abs(a.time - b.time) != 1) {
      rep.fail("step " + std::to_string(k) + " jumps from time " +
               std::to_string(a.time) + " to " + std::to_string(b.time));
      return rep;
    }
    if (a.site.size() != b.site.size()) {
      rep.fail("step " + std::to_string(k) + " changes dimension");
      return rep;
    }
  }
  const auto pos = cycle_positions(cyc.points);
  for (int k = 0; k < n; ++k) {
    if (pos[k] != CyclePos::Min) continue;
    for (int l = 0; l < n; ++l)
      if (l != k && cyc.points[l] == cyc.points[k])
        rep.fail("sink position " + std::to_string(k) +
                 " overlaps position " + std::to_string(l) + " at " +
                 point_str(cyc.points[k]));
  }
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l)
      if (pos[k] == pos[l] &&
          (pos[k] == CyclePos::Down || pos[k] == CyclePos::Up) &&
          cyc.points[k] == cyc.points[l])
        rep.fail("internal positions " + std::to_string(k) + " and " +
                 std::to_string(l) + " of the same charge overlap at " +
                 point_str(cyc.points[k]));
  for (int k = 1; k < n; ++k)
    if (cyc.points[k] != cyc.points[0] &&
        cyc.points[k].time >= cyc.points[0].time)
      rep.fail("position " + std::to_string(k) + " at " +
               point_str(cyc.points[k]) +
               " is not strictly below the root at " +
               point_str(cyc.points[0]));
  return rep;
}

ToomContour cycle_to_contour(const ToomCycle& cyc) {
  CheckReport rep = validate_cycle(cyc);
  if (!rep.ok) throw std::invalid_argument(rep.violations.front());
  ToomContour c;
  c.graph.sigma = 2;
  c.graph.edges.assign(2, {});
  c.root = 0;
  const int n = static_cast<int>(cyc.points.size());
  if (n == 1) {
    c.graph.num_vertices = 1;
    c.psi.site = {cyc.points[0].site};
    c.psi.time = {cyc.points[0].time};
    return c;
  }
  c.graph.num_vertices = n;
  for (int k = 0; k < n; ++k) {
    c.psi.site.push_back(cyc.points[k].site);
    c.psi.time.push_back(cyc.points[k].time);
    const int next = (k + 1) % n;
    if (cyc.points[next].time < cyc.points[k].time)
      c.graph.edges[0].emplace_back(k, next);
    else
      c.graph.edges[1].emplace_back(next, k);
  }
  return c;
}

ToomCycle contour_to_cycle(const ToomContour& c) {
  if (c.graph.sigma != 2)
    throw std::invalid_argument("cycles need exactly 2 charges");
  CheckReport rep = validate_contour(c);
  if (!rep.ok) throw std::invalid_argument(rep.violations.front());
  if (c.graph.num_vertices == 1) return ToomCycle{{c.psi.point(c.root)}};
  const auto cls = classify_vertices(c.graph);
  std::vector<int> out1(c.graph.num_vertices, -1);
  std::vector<int> in2(c.graph.num_vertices, -1);
  for (const auto& [v, w] : c.graph.edges[0]) out1[v] = w;
  for (const auto& [v, w] : c.graph.edges[1]) in2[w] = v;
  ToomCycle cyc;
  int cur = c.root;
  bool down = true;
  do {
    cyc.points.push_back(c.psi.point(cur));
    if (down) {
      cur = out1[cur];
      if (counts_as_sink(cls[cur])) down = false;
    } else {
      cur = in2[cur];
      if (counts_as_source(cls[cur])) down = true;
    }
  } while (cur != c.root);
  if (cyc.points.size() != static_cast<size_t>(c.graph.num_vertices))
    throw std::logic_error("contour walk missed vertices");
  return cyc;
}

// --- continuous time ---

int ContinuousContour::dimension() const {
  return psi.site.empty() ? 0 : static_cast<int>(psi.site.front().size());
}

namespace {

enum class Segment { Vertical, Horizontal, Bad };

Segment segment_kind(const ContinuousEmbedding& psi, int v, int w) {
  if (psi.site[v] == psi.site[w])
    return psi.time[w] < psi.time[v] ? Segment::Vertical : Segment::Bad;
  return psi.time[w] == psi.time[v] ? Segment::Horizontal : Segment::Bad;
}

std::string cpoint_str(const ContinuousEmbedding& psi, int v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", psi.time[v]);
  return site_str(psi.site[v]) + " @ " + buf;
}

}  // namespace

CheckReport validate_continuous_embedding(const ToomGraph& g,
                                          const ContinuousEmbedding& psi) {
  CheckReport rep = validate_graph(g);
  if (!rep.ok) return rep;
  const size_t n = static_cast<size_t>(g.num_vertices);
  if (psi.site.size() != n || psi.time.size() != n) {
    rep.fail("embedding covers " + std::to_string(psi.site.size()) +
             " sites and " + std::to_string(psi.time.size()) + " times for " +
             std::to_string(g.num_vertices) + " vertices");
    return rep;
  }
  for (size_t v = 1; v < n; ++v)
    if (psi.site[v].size() != psi.site[0].size()) {
      rep.fail("vertex " + std::to_string(v) + " has dimension " +
               std::to_string(psi.site[v].size()) + ", vertex 0 has " +
               std::to_string(psi.site[0].size()));
      return rep;
    }
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s])
      if (segment_kind(psi, v, w) == Segment::Bad)
        rep.fail("charge " + std::to_string(s + 1) + " edge " +
                 cpoint_str(psi, v) + " -> " + cpoint_str(psi, w) +
                 " is neither vertical nor horizontal");
  const auto cls = classify_vertices(g);
  auto image_eq = [&](int v, int w) {
    return psi.site[v] == psi.site[w] && psi.time[v] == psi.time[w];
  };
  for (int v = 0; v < g.num_vertices; ++v) {
    if (!counts_as_sink(cls[v])) continue;
    for (int w = 0; w < g.num_vertices; ++w)
      if (w != v && image_eq(v, w))
        rep.fail("sink " + std::to_string(v) + " overlaps vertex " +
                 std::to_string(w) + " at " + cpoint_str(psi, v));
  }
  for (int v = 0; v < g.num_vertices; ++v)
    for (int w = v + 1; w < g.num_vertices; ++w)
      if (cls[v].kind == VertexKind::Internal &&
          cls[w].kind == VertexKind::Internal &&
          cls[v].charge == cls[w].charge && image_eq(v, w))
        rep.fail("charge " + std::to_string(cls[v].charge) +
                 " internal vertices " + std::to_string(v) + " and " +
                 std::to_string(w) + " overlap at " + cpoint_str(psi, v));
  // no charge-s internal or sink image strictly inside a vertical charge-s
  // segment
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v1, v2] : g.edges[s]) {
      if (segment_kind(psi, v1, v2) != Segment::Vertical) continue;
      for (int v3 = 0; v3 < g.num_vertices; ++v3) {
        const bool relevant =
            counts_as_sink(cls[v3]) || (cls[v3].kind == VertexKind::Internal &&
                                        cls[v3].charge == s + 1);
        if (!relevant || psi.site[v3] != psi.site[v1]) continue;
        if (psi.time[v2] < psi.time[v3] && psi.time[v3] < psi.time[v1])
          rep.fail("vertex " + std::to_string(v3) + " at " +
                   cpoint_str(psi, v3) +
                   " lies inside a vertical charge " + std::to_string(s + 1) +
                   " segment");
      }
    }
  return rep;
}

CheckReport validate_continuous_contour(const ContinuousContour& c) {
  CheckReport rep = validate_continuous_embedding(c.graph, c.psi);
  if (!rep.ok) return rep;
  if (c.root < 0 || c.root >= c.graph.num_vertices) {
    rep.fail("root " + std::to_string(c.root) + " is not a vertex");
    return rep;
  }
  const auto cls = classify_vertices(c.graph);
  if (!counts_as_source(cls[c.root]))
    rep.fail("root " + std::to_string(c.root) + " is not a source");
  if (!graph_connected(c.graph)) rep.fail("graph is not connected");
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    const bool same_image = c.psi.site[v] == c.psi.site[c.root] &&
                            c.psi.time[v] == c.psi.time[c.root];
    if (!same_image && c.psi.time[v] >= c.psi.time[c.root])
      rep.fail("vertex " + std::to_string(v) + " at " + cpoint_str(c.psi, v) +
               " is not strictly below the root at " +
               cpoint_str(c.psi, c.root));
  }
  return rep;
}

namespace {

struct EventIndex {
  const IpsTrajectory* traj = nullptr;
  // event kind at an exact (box index, timestamp); at most one per point
  std::map<std::pair<long long, double>, int> kind_at;
  // sorted times per (box index, kind)
  std::map<std::pair<long long, int>, std::vector<double>> times;

  explicit EventIndex(const IpsTrajectory& t) : traj(&t) {
    for (const auto& e : t.events) {
      const long long idx = t.space.index_of(e.site);
      kind_at[{idx, e.time}] = e.kind;
      times[{idx, e.kind}].push_back(e.time);
    }
  }

  // kind of the event at exactly (site, t), or -1
  int kind(const SiteVector& site, double t) const {
    const auto it = kind_at.find({traj->space.index_of(site), t});
    return it == kind_at.end() ? -1 : it->second;
  }

  bool any_in_open(const SiteVector& site, int kind, double lo,
                   double hi) const {
    const auto it = times.find({traj->space.index_of(site), kind});
    if (it == times.end()) return false;
    auto first = std::upper_bound(it->second.begin(), it->second.end(), lo);
    return first != it->second.end() && *first < hi;
  }
};

bool is_origin_only(const std::vector<SiteVector>& family, int dimension) {
  return family.size() == 1 && family[0] == zero_site(dimension);
}

struct ContinuousContext {
  PresenceReport rep;
  std::vector<VertexClass> cls;
  std::vector<char> in_vert, in_hor;
  bool usable = false;

  void fail(std::string message) {
    rep.present = false;
    rep.violations.push_back(std::move(message));
  }
};

ContinuousContext continuous_context(const ContinuousContour& c,
                                     const IpsTrajectory& traj,
                                     const ChargeAssignment& chosen) {
  ContinuousContext ctx;
  if (!ids_in_range(c.graph) ||
      c.psi.site.size() != static_cast<size_t>(c.graph.num_vertices) ||
      c.psi.time.size() != static_cast<size_t>(c.graph.num_vertices) ||
      c.root < 0 || c.root >= c.graph.num_vertices) {
    ctx.fail("malformed contour");
    return ctx;
  }
  if (chosen.empty()) {
    ctx.fail("empty charge assignment");
    return ctx;
  }
  for (const auto& sets : chosen)
    if (sets.size() != static_cast<size_t>(c.graph.sigma)) {
      ctx.fail("charge assignment arity differs from the contour's charges");
      return ctx;
    }
  ctx.cls = classify_vertices(c.graph);
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    if (ctx.cls[v].kind == VertexKind::Invalid) {
      ctx.fail("vertex " + std::to_string(v) + " matches no vertex type");
      return ctx;
    }
    if (!traj.space.contains(c.psi.site[v]) || c.psi.time[v] <= traj.t_start ||
        c.psi.time[v] > 0) {
      ctx.fail("vertex " + std::to_string(v) + " at " + cpoint_str(c.psi, v) +
               " is outside the realization window");
      return ctx;
    }
  }
  ctx.in_vert.assign(c.graph.num_vertices, 0);
  ctx.in_hor.assign(c.graph.num_vertices, 0);
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const Segment seg = segment_kind(c.psi, v, w);
      if (seg == Segment::Bad) {
        ctx.fail("charge " + std::to_string(s + 1) + " edge " +
                 cpoint_str(c.psi, v) + " -> " + cpoint_str(c.psi, w) +
                 " is neither vertical nor horizontal");
        return ctx;
      }
      if (seg == Segment::Vertical) ctx.in_vert[w] = 1;
      if (seg == Segment::Horizontal) ctx.in_hor[v] = 1;
    }
  ctx.usable = true;
  return ctx;
}

void check_continuous_core(ContinuousContext& ctx, const ContinuousContour& c,
                           const IpsTrajectory& traj, const EventIndex& ev,
                           const ChargeAssignment& chosen) {
  const int d = c.dimension();
  const int kinds = static_cast<int>(chosen.size());
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    const int k = ev.kind(c.psi.site[v], c.psi.time[v]);
    const bool sinkish = counts_as_sink(ctx.cls[v]);
    if (sinkish && k != 0)
      ctx.fail("sink " + std::to_string(v) + " at " + cpoint_str(c.psi, v) +
               " is not at a death mark");
    if (!sinkish && k == 0)
      ctx.fail("vertex " + std::to_string(v) + " at " + cpoint_str(c.psi, v) +
               " sits on a death mark");
    const bool needs_arrival =
        ctx.in_hor[v] ||
        (counts_as_source(ctx.cls[v]) && !sinkish && v != c.root);
    if (needs_arrival && k < 1)
      ctx.fail("vertex " + std::to_string(v) + " at " + cpoint_str(c.psi, v) +
               " is not at an arrival");
    if (ctx.cls[v].kind == VertexKind::Internal && ctx.in_vert[v]) {
      const int s = ctx.cls[v].charge;
      if (k < 1 || is_origin_only(chosen[k][s - 1], d))
        ctx.fail("charge " + std::to_string(s) + " internal vertex at " +
                 cpoint_str(c.psi, v) +
                 " is not at an arrival that can move its charge");
    }
  }
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      if (!ctx.in_vert[w]) continue;
      for (int k = 1; k < kinds; ++k) {
        if (in_set(chosen[k][s], zero_site(d))) continue;
        if (ev.any_in_open(c.psi.site[v], k, c.psi.time[w], c.psi.time[v]))
          ctx.fail("a kind " + std::to_string(k) +
                   " arrival interrupts the vertical charge " +
                   std::to_string(s + 1) + " segment " + cpoint_str(c.psi, v) +
                   " -> " + cpoint_str(c.psi, w));
      }
    }
  for (int s = 0; s < c.graph.sigma; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) {
      const int k = ev.kind(c.psi.site[v], c.psi.time[v]);
      if (k < 1) continue;
      const SiteVector disp = site_sub(c.psi.site[w], c.psi.site[v]);
      const bool star = v == c.root || ctx.cls[v].kind == VertexKind::Internal;
      if (star && ctx.in_hor[v] && !in_set(chosen[k][s], disp))
        ctx.fail("charge " + std::to_string(s + 1) + " edge from " +
                 cpoint_str(c.psi, v) + " moves by " + site_str(disp) +
                 ", outside its charge set");
      if (!star && !in_any_set(chosen[k], disp))
        ctx.fail("source edge from " + cpoint_str(c.psi, v) + " moves by " +
                 site_str(disp) + ", outside every charge set");
    }
}

void check_continuous_strong(ContinuousContext& ctx,
                             const ContinuousContour& c, const EventIndex& ev,
                             const ChargeAssignment& chosen) {
  if (c.graph.sigma != 2) {
    ctx.fail("strong presence needs exactly 2 charges, contour has " +
             std::to_string(c.graph.sigma));
    return;
  }
  std::vector<std::array<int, 2>> target(c.graph.num_vertices, {-1, -1});
  for (int s = 0; s < 2; ++s)
    for (const auto& [v, w] : c.graph.edges[s]) target[v][s] = w;
  for (int v = 0; v < c.graph.num_vertices; ++v) {
    if (v == c.root || !counts_as_source(ctx.cls[v])) continue;
    const int w1 = target[v][0], w2 = target[v][1];
    if (w1 < 0 || w2 < 0) continue;
    const int k = ev.kind(c.psi.site[v], c.psi.time[v]);
    if (k >= 1) {
      const SiteVector d1 = site_sub(c.psi.site[w1], c.psi.site[v]);
      const SiteVector d2 = site_sub(c.psi.site[w2], c.psi.site[v]);
      if (!in_set(chosen[k][1], d1))
        ctx.fail("source at " + cpoint_str(c.psi, v) +
                 ": charge 1 edge moves by " + site_str(d1) +
                 ", outside the charge 2 set");
      if (!in_set(chosen[k][0], d2))
        ctx.fail("source at " + cpoint_str(c.psi, v) +
                 ": charge 2 edge moves by " + site_str(d2) +
                 ", outside the charge 1 set");
    }
    if (c.psi.site[w1] == c.psi.site[w2])
      ctx.fail("source at " + cpoint_str(c.psi, v) +
               " sends both charges to site " + site_str(c.psi.site[w1]));
  }
}

}  // namespace

PresenceReport continuous_presence_report(const ContinuousContour& c,
                                          const IpsTrajectory& traj,
                                          const ChargeAssignment& chosen) {
  ContinuousContext ctx = continuous_context(c, traj, chosen);
  if (ctx.usable) {
    const EventIndex ev(traj);
    check_continuous_core(ctx, c, traj, ev, chosen);
  }
  return ctx.rep;
}

PresenceReport continuous_strong_presence_report(
    const ContinuousContour& c, const IpsTrajectory& traj,
    const ChargeAssignment& chosen) {
  ContinuousContext ctx = continuous_context(c, traj, chosen);
  if (ctx.usable) {
    const EventIndex ev(traj);
    check_continuous_core(ctx, c, traj, ev, chosen);
    check_continuous_strong(ctx, c, ev, chosen);
  }
  return ctx.rep;
}

bool continuous_is_present(const ContinuousContour& c,
                           const IpsTrajectory& traj,
                           const ChargeAssignment& chosen) {
  return continuous_presence_report(c, traj, chosen).present;
}

bool continuous_is_strongly_present(const ContinuousContour& c,
                                    const IpsTrajectory& traj,
                                    const ChargeAssignment& chosen) {
  return continuous_strong_presence_report(c, traj, chosen).present;
}

// --- serialization ---

namespace {

nlohmann::json edges_to_json(const ToomGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& charge : g.edges) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [v, w] : charge) list.push_back({v, w});
    edges.push_back(std::move(list));
  }
  return edges;
}

ToomGraph edges_from_json(const nlohmann::json& j, int num_vertices) {
  ToomGraph g;
  g.num_vertices = num_vertices;
  g.sigma = static_cast<int>(j.size());
  for (const auto& charge : j) {
    g.edges.emplace_back();
    for (const auto& e : charge) {
      if (!e.is_array() || e.size() != 2)
        throw std::runtime_error("contour json: bad edge entry");
      g.edges.back().emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  return g;
}

}  // namespace

std::string contour_to_json(const ToomContour& c) {
  nlohmann::json j;
  j["schema"] = "toomlab/contour/1";
  j["sigma"] = c.graph.sigma;
  j["dimension"] = c.dimension();
  j["root"] = c.root;
  nlohmann::json verts = nlohmann::json::array();
  for (int v = 0; v < c.graph.num_vertices; ++v)
    verts.push_back({{"site", c.psi.site[v]}, {"time", c.psi.time[v]}});
  j["vertices"] = std::move(verts);
  j["edges"] = edges_to_json(c.graph);
  return j.dump(2);
}

ToomContour contour_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "toomlab/contour/1")
    throw std::runtime_error("contour json: unknown schema");
  ToomContour c;
  const auto& verts = j.at("vertices");
  const int dimension = j.at("dimension").get<int>();
  for (const auto& v : verts) {
    SiteVector site = v.at("site").get<SiteVector>();
    if (static_cast<int>(site.size()) != dimension)
      throw std::runtime_error("contour json: vertex dimension mismatch");
    c.psi.site.push_back(std::move(site));
    c.psi.time.push_back(v.at("time").get<int>());
  }
  c.graph = edges_from_json(j.at("edges"), static_cast<int>(verts.size()));
  if (c.graph.sigma != j.at("sigma").get<int>())
    throw std::runtime_error("contour json: edge lists disagree with sigma");
  c.root = j.at("root").get<int>();
  if (c.root < 0 || c.root >= c.graph.num_vertices)
    throw std::runtime_error("contour json: root out of range");
  return c;
}

std::string continuous_contour_to_json(const ContinuousContour& c) {
  nlohmann::json j;
  j["schema"] = "toomlab/contour-continuous/1";
  j["sigma"] = c.graph.sigma;
  j["dimension"] = c.dimension();
  j["root"] = c.root;
  nlohmann::json verts = nlohmann::json::array();
  for (int v = 0; v < c.graph.num_vertices; ++v)
    verts.push_back({{"site", c.psi.site[v]}, {"time", c.psi.time[v]}});
  j["vertices"] = std::move(verts);
  j["edges"] = edges_to_json(c.graph);
  return j.dump(2);
}

namespace {

const char* charge_color(int s) {
  static const char* palette[] = {"crimson",    "royalblue", "forestgreen",
                                  "darkorange", "purple",    "teal"};
  return palette[(s - 1) % 6];
}

std::string dot_body(const ToomGraph& g, int root,
                     const std::vector<std::string>& labels) {
  const auto cls = classify_vertices(g);
  std::ostringstream out;
  out << "digraph toom_contour {\n  rankdir=TB;\n"
      << "  node [fontname=\"Helvetica\"];\n";
  for (int v = 0; v < g.num_vertices; ++v) {
    out << "  v" << v << " [label=\"" << labels[v] << "\"";
    if (counts_as_sink(cls[v])) out << ", shape=star";
    else if (cls[v].kind == VertexKind::Internal) out << ", shape=circle";
    else out << ", shape=ellipse";
    if (v == root) out << ", peripheries=2";
    out << "];\n";
  }
  for (int s = 0; s < g.sigma; ++s)
    for (const auto& [v, w] : g.edges[s])
      out << "  v" << v << " -> v" << w << " [color=" << charge_color(s + 1)
          << "];\n";
  out << "}\n";
  return out.str();
}

}  // namespace

std::string contour_to_dot(const ToomContour& c) {
  std::vector<std::string> labels;
  for (int v = 0; v < c.graph.num_vertices; ++v)
    labels.push_back(point_str(c.psi.point(v)));
  return dot_body(c.graph, c.root, labels);
}

std::string continuous_contour_to_dot(const ContinuousContour& c) {
  std::vector<std::string> labels;
  for (int v = 0; v < c.graph.num_vertices; ++v)
    labels.push_back(cpoint_str(c.psi, v));
  return dot_body(c.graph, c.root, labels);
}

}  // namespace toomlab
