#include "toomlab/explain.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

namespace toomlab {

namespace {

bool in_set(const std::vector<SiteVector>& set, const SiteVector& j) {
  return std::find(set.begin(), set.end(), j) != set.end();
}

std::string charge_str(int s) { return "charge " + std::to_string(s); }

}  // namespace

int ExplanationGraph::index_of(const SpaceTimePoint& p) const {
  auto it = std::lower_bound(points.begin(), points.end(), p);
  if (it == points.end() || *it != p) return -1;
  return static_cast<int>(it - points.begin());
}

std::vector<int> ExplanationGraph::sink_indices() const {
  std::vector<int> out;
  for (int u = 0; u < num_points(); ++u)
    if (sink[u]) out.push_back(u);
  return out;
}

CheckReport validate_explanation_graph(const ExplanationGraph& eg) {
  CheckReport rep;
  if (eg.sigma < 2) rep.fail("fewer than two charges");
  const int n = eg.num_points();
  if (n == 0) {
    rep.fail("no points");
    return rep;
  }
  if (eg.root < 0 || eg.root >= n) {
    rep.fail("root index out of range");
    return rep;
  }
  if (static_cast<int>(eg.out.size()) != n ||
      static_cast<int>(eg.sink.size()) != n) {
    rep.fail("out/sink tables do not match the point count");
    return rep;
  }
  for (int u = 0; u < n; ++u) {
    if (static_cast<int>(eg.points[u].site.size()) != eg.dimension)
      rep.fail("point " + point_str(eg.points[u]) + " has the wrong dimension");
    if (u > 0 && !(eg.points[u - 1] < eg.points[u])) {
      rep.fail("points are not sorted and distinct");
      return rep;
    }
  }
  const int root_time = eg.points[eg.root].time;
  for (int u = 0; u < n; ++u)
    if (u != eg.root && eg.points[u].time >= root_time)
      rep.fail("point " + point_str(eg.points[u]) +
               " does not lie strictly below the root");
  std::vector<char> entered(n, 0);
  for (int u = 0; u < n; ++u) {
    if (eg.sink[u]) {
      for (int v : eg.out[u])
        if (v != -1) rep.fail("sink " + point_str(eg.points[u]) + " has an out-edge");
      continue;
    }
    if (static_cast<int>(eg.out[u].size()) != eg.sigma) {
      rep.fail("point " + point_str(eg.points[u]) +
               " does not have one witness per charge");
      continue;
    }
    for (int s = 0; s < eg.sigma; ++s) {
      const int v = eg.out[u][s];
      if (v < 0 || v >= n) {
        rep.fail("witness index out of range at " + point_str(eg.points[u]));
        continue;
      }
      if (eg.points[v].time != eg.points[u].time - 1)
        rep.fail("witness edge at " + point_str(eg.points[u]) +
                 " does not step one plane down");
      entered[v] = 1;
    }
  }
  for (int u = 0; u < n; ++u)
    if (u != eg.root && !entered[u])
      rep.fail("point " + point_str(eg.points[u]) + " has no incoming edge");
  return rep;
}

PresenceReport explanation_presence_report(const ExplanationGraph& eg,
                                           const FlowRealization& flow,
                                           const ChargeAssignment& chosen) {
  PresenceReport rep;
  auto fail = [&](std::string m) {
    rep.present = false;
    rep.violations.push_back(std::move(m));
  };
  CheckReport structural = validate_explanation_graph(eg);
  if (!structural.ok) {
    for (auto& v : structural.violations) fail(v);
    return rep;
  }
  if (chosen.size() != flow.model.maps.size()) {
    fail("charge assignment does not cover the model maps");
    return rep;
  }
  Trajectory traj = maximal_trajectory(flow);
  for (int u = 0; u < eg.num_points(); ++u) {
    const SpaceTimePoint& p = eg.points[u];
    if (!flow.in_window(p.site, p.time)) {
      fail("point " + point_str(p) + " outside the flow window");
      continue;
    }
    if (traj.value(p.site, p.time))
      fail("maximal trajectory is one at " + point_str(p));
    const int k = flow.map_index_at(p.site, p.time);
    const bool defect = flow.model.maps[k].is_zero();
    if (defect != static_cast<bool>(eg.sink[u]))
      fail(defect ? "defect cell " + point_str(p) + " is not a sink"
                  : "sink " + point_str(p) + " is not on a defect cell");
    if (eg.sink[u] || defect) continue;
    if (static_cast<int>(chosen[k].size()) != eg.sigma) {
      fail("map " + std::to_string(k) + " has no charge sets");
      continue;
    }
    for (int s = 0; s < eg.sigma; ++s) {
      const SpaceTimePoint& w = eg.points[eg.out[u][s]];
      if (!in_set(chosen[k][s], site_sub(w.site, p.site)))
        fail(charge_str(s + 1) + " witness displacement at " + point_str(p) +
             " not in the chosen set");
    }
  }
  return rep;
}

bool explanation_is_present(const ExplanationGraph& eg,
                            const FlowRealization& flow,
                            const ChargeAssignment& chosen) {
  return explanation_presence_report(eg, flow, chosen).present;
}

std::optional<ExplanationGraph> extract_explanation_graph(
    const FlowRealization& flow, const ChargeAssignment& chosen,
    std::optional<SpaceTimePoint> root, int slab_depth) {
  const int d = flow.model.dimension;
  const SpaceTimePoint r = root ? *root : SpaceTimePoint{zero_site(d), 0};
  if (!flow.in_window(r.site, r.time))
    throw std::out_of_range("root cell " + point_str(r) +
                            " is outside the flow window");
  if (chosen.size() != flow.model.maps.size())
    throw std::invalid_argument("charge assignment does not cover the model maps");
  const int sigma = static_cast<int>(chosen[flow.model.primary].size());
  if (sigma < 2) throw std::invalid_argument("fewer than two charges");

  Trajectory traj = maximal_trajectory(flow);
  if (traj.value(r.site, r.time)) return std::nullopt;

  std::set<SpaceTimePoint> seen{r};
  std::vector<SpaceTimePoint> queue{r};
  struct Edge {
    SpaceTimePoint from;
    int s;
    SpaceTimePoint to;
  };
  std::vector<Edge> edges;
  std::set<SpaceTimePoint> sinks;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const SpaceTimePoint p = queue[qi];
    const int k = flow.map_index_at(p.site, p.time);
    const MonotonicMap& map = flow.model.maps[k];
    if (map.is_zero()) {
      sinks.insert(p);
      continue;
    }
    if (map.is_one())
      throw std::logic_error("constant-one map on a zero cell at " + point_str(p));
    if (static_cast<int>(chosen[k].size()) != sigma)
      throw std::invalid_argument("map " + std::to_string(k) +
                                  " lacks one chosen set per charge");
    for (int s = 0; s < sigma; ++s) {
      const std::vector<SiteVector>& set = chosen[k][s];
      SpaceTimePoint w;
      bool found = false;
      if (slab_depth > 0 && p.time > -slab_depth) {
        if (set.empty())
          throw std::logic_error("empty chosen set inside the slab");
        w = {site_add(p.site, set.front()), p.time - 1};
        if (traj.value(w.site, w.time))
          throw std::logic_error("slab witness at " + point_str(w) +
                                 " is not zero");
        found = true;
      } else {
        for (const SiteVector& j : set) {
          SpaceTimePoint cand{site_add(p.site, j), p.time - 1};
          if (!traj.value(cand.site, cand.time)) {
            w = cand;
            found = true;
            break;
          }
        }
      }
      if (!found)
        throw std::logic_error("no zero witness for " + charge_str(s + 1) +
                               " at " + point_str(p));
      edges.push_back({p, s, w});
      if (seen.insert(w).second) queue.push_back(w);
    }
  }

  ExplanationGraph eg;
  eg.sigma = sigma;
  eg.dimension = d;
  eg.points.assign(seen.begin(), seen.end());
  eg.root = eg.index_of(r);
  eg.out.assign(eg.num_points(), std::vector<int>(sigma, -1));
  eg.sink.assign(eg.num_points(), 0);
  for (const SpaceTimePoint& p : sinks) eg.sink[eg.index_of(p)] = 1;
  for (const Edge& e : edges) eg.out[eg.index_of(e.from)][e.s] = eg.index_of(e.to);
  return eg;
}

std::vector<int> charge_path(const ExplanationGraph& eg, int u, int s) {
  if (u < 0 || u >= eg.num_points())
    throw std::out_of_range("point index out of range");
  if (s < 1 || s > eg.sigma) throw std::out_of_range("charge out of range");
  std::vector<int> path{u};
  while (!eg.sink[path.back()]) {
    const int next = eg.out[path.back()][s - 1];
    if (next < 0 || static_cast<int>(path.size()) > eg.num_points())
      throw std::logic_error("charge path does not reach a sink");
    path.push_back(next);
  }
  return path;
}

int path_sink(const ExplanationGraph& eg, int u, int s) {
  return charge_path(eg, u, s).back();
}

// --- matchings ------------------------------------------------------------

namespace {

// Same-height points sharing a witness-descendant, closed transitively,
// grouped level by level; every class has a unique parent class.
struct EgClasses {
  int levels = 0;
  std::vector<int> height;                  // per point
  std::vector<int> cls;                     // per point
  std::vector<std::vector<int>> members;    // per class, ascending
  std::vector<std::vector<int>> by_level;   // class ids per level
  std::vector<std::vector<int>> children;   // per class, ascending
  std::vector<std::vector<int>> succs;      // distinct witnesses per point
};

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

EgClasses decompose_classes(const ExplanationGraph& eg) {
  const int n = eg.num_points();
  EgClasses c;
  c.height.resize(n);
  const int root_time = eg.points[eg.root].time;
  int max_h = 0;
  for (int u = 0; u < n; ++u) {
    c.height[u] = root_time - eg.points[u].time;
    max_h = std::max(max_h, c.height[u]);
  }
  c.levels = max_h + 1;
  c.succs.resize(n);
  for (int u = 0; u < n; ++u) {
    if (eg.sink[u]) continue;
    std::set<int> t(eg.out[u].begin(), eg.out[u].end());
    c.succs[u].assign(t.begin(), t.end());
  }
  std::vector<std::vector<int>> at(c.levels);
  for (int u = 0; u < n; ++u) at[c.height[u]].push_back(u);

  const int words = (n + 63) / 64;
  std::vector<uint64_t> desc(static_cast<size_t>(n) * words, 0);
  for (int h = c.levels - 1; h >= 0; --h)
    for (int u : at[h]) {
      desc[static_cast<size_t>(u) * words + u / 64] |= 1ull << (u % 64);
      for (int v : c.succs[u])
        for (int w = 0; w < words; ++w)
          desc[static_cast<size_t>(u) * words + w] |=
              desc[static_cast<size_t>(v) * words + w];
    }
  auto share_descendant = [&](int a, int b) {
    for (int w = 0; w < words; ++w)
      if (desc[static_cast<size_t>(a) * words + w] &
          desc[static_cast<size_t>(b) * words + w])
        return true;
    return false;
  };

  c.cls.assign(n, -1);
  c.by_level.resize(c.levels);
  for (int h = 0; h < c.levels; ++h) {
    const auto& pts = at[h];
    const int m = static_cast<int>(pts.size());
    Dsu dsu(m);
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (share_descendant(pts[i], pts[j])) dsu.unite(i, j);
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < m; ++i) groups[dsu.find(i)].push_back(pts[i]);
    std::vector<std::vector<int>> ordered;
    for (auto& [rep, mem] : groups) ordered.push_back(mem);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& mem : ordered) {
      const int id = static_cast<int>(c.members.size());
      for (int u : mem) c.cls[u] = id;
      c.members.push_back(mem);
      c.by_level[h].push_back(id);
    }
  }

  c.children.resize(c.members.size());
  std::vector<int> parent(c.members.size(), -1);
  for (int u = 0; u < n; ++u)
    for (int v : c.succs[u]) {
      const int pu = c.cls[u], pv = c.cls[v];
      if (parent[pv] == -1) {
        parent[pv] = pu;
        c.children[pu].push_back(pv);
      } else if (parent[pv] != pu) {
        throw std::logic_error("witness class with two parent classes");
      }
    }
  for (auto& kids : c.children) std::sort(kids.begin(), kids.end());
  return c;
}

}  // namespace

ToomMatching toom_matching(const ExplanationGraph& eg) {
  CheckReport ok = validate_explanation_graph(eg);
  if (!ok.ok)
    throw std::invalid_argument("invalid explanation graph: " +
                                ok.violations.front());
  const int sigma = eg.sigma;
  ToomMatching m;
  m.sigma = sigma;
  m.rows.push_back(std::vector<int>(sigma, eg.root));
  if (eg.sink[eg.root]) return m;

  EgClasses cd = decompose_classes(eg);

  // vert[i][s][l]: the vertex of row i's charge-s path at level l, or -1.
  std::vector<std::vector<std::vector<int>>> vert;
  auto path_levels = [&](const std::vector<int>& row) {
    std::vector<std::vector<int>> per(sigma,
                                      std::vector<int>(cd.levels, -1));
    for (int s = 0; s < sigma; ++s)
      for (int u : charge_path(eg, row[s], s + 1)) per[s][cd.height[u]] = u;
    return per;
  };
  auto add_row = [&](const std::vector<int>& row) {
    m.rows.push_back(row);
    vert.push_back(path_levels(row));
  };
  vert.push_back(path_levels(m.rows.front()));

  for (int l = 0; l + 1 < cd.levels; ++l) {
    for (int cid : cd.by_level[l]) {
      if (cd.members[cid].size() == 1 && eg.sink[cd.members[cid].front()])
        continue;
      std::vector<int> base(sigma, -1);
      for (int s = 0; s < sigma; ++s) {
        int found = -1;
        for (int i = 0; i < static_cast<int>(m.rows.size()); ++i) {
          const int u = vert[i][s][l];
          if (u >= 0 && cd.cls[u] == cid) {
            if (found >= 0)
              throw std::logic_error("two rows route a charge through one class");
            found = i;
          }
        }
        if (found < 0)
          throw std::logic_error("no row routes a charge through a class");
        base[s] = vert[found][s][l + 1];
        if (base[s] < 0)
          throw std::logic_error("charge path stops inside a class");
      }

      const std::vector<int>& kids = cd.children[cid];
      if (kids.size() <= 1) continue;
      std::map<int, std::vector<int>> adj;  // child class -> child classes
      for (int v : cd.members[cid])
        for (int w1 : cd.succs[v])
          for (int w2 : cd.succs[v]) {
            if (w1 == w2) continue;
            adj[cd.cls[w1]].push_back(cd.cls[w2]);
          }
      auto connected = [&](const std::vector<int>& set) {
        if (set.empty()) return true;
        std::set<int> inside(set.begin(), set.end());
        std::vector<int> stack{set.front()};
        std::set<int> found{set.front()};
        while (!stack.empty()) {
          const int x = stack.back();
          stack.pop_back();
          for (int y : adj[x])
            if (inside.count(y) && found.insert(y).second) stack.push_back(y);
        }
        return found.size() == inside.size();
      };
      auto erased = [](const std::vector<int>& set, int x) {
        std::vector<int> out;
        for (int y : set)
          if (y != x) out.push_back(y);
        return out;
      };

      std::function<void(std::vector<int>, std::vector<int>)> grow =
          [&](std::vector<int> dp, std::vector<int> polar_base) {
            if (dp.size() <= 1) return;
            if (!connected(dp))
              throw std::logic_error("descendant classes are disconnected");
            int cut = -1;
            for (int cand : dp)
              if (connected(erased(dp, cand))) {
                cut = cand;
                break;
              }
            if (cut < 0) throw std::logic_error("no removable class");
            const std::vector<int> rest = erased(dp, cut);
            std::vector<char> inside(sigma, 0);
            bool any_in = false, all_in = true;
            for (int s = 0; s < sigma; ++s) {
              inside[s] = cd.cls[polar_base[s]] == cut;
              any_in = any_in || inside[s];
              all_in = all_in && inside[s];
            }
            if (!any_in) {
              add_row(std::vector<int>(sigma, cd.members[cut].front()));
              grow(rest, polar_base);
            } else if (all_in) {
              int w = std::numeric_limits<int>::max();
              for (int cid2 : rest) w = std::min(w, cd.members[cid2].front());
              add_row(std::vector<int>(sigma, w));
              grow(rest, std::vector<int>(sigma, w));
            } else {
              std::set<int> rest_set(rest.begin(), rest.end());
              int bv = -1, bw1 = -1, bw2 = -1;
              for (int v : cd.members[cid]) {
                int w1 = -1, w2 = -1;
                for (int w : cd.succs[v]) {
                  if (w1 < 0 && cd.cls[w] == cut) w1 = w;
                  if (w2 < 0 && rest_set.count(cd.cls[w])) w2 = w;
                }
                if (w1 >= 0 && w2 >= 0) {
                  bv = v, bw1 = w1, bw2 = w2;
                  break;
                }
              }
              if (bv < 0) throw std::logic_error("no predecessor spans the cut");
              std::vector<int> row(sigma), cont(sigma);
              for (int s = 0; s < sigma; ++s) {
                row[s] = inside[s] ? bw2 : bw1;
                cont[s] = inside[s] ? bw2 : polar_base[s];
              }
              add_row(row);
              grow(rest, cont);
            }
          };
      grow(kids, base);
    }
    for (int cid : cd.by_level[l + 1])
      for (int s = 0; s < sigma; ++s) {
        int count = 0;
        for (const auto& rv : vert)
          if (rv[s][l + 1] >= 0 && cd.cls[rv[s][l + 1]] == cid) ++count;
        if (count != 1)
          throw std::logic_error("charge coverage broke at level " +
                                 std::to_string(l + 1));
      }
  }
  if (m.rows.size() != eg.sink_indices().size())
    throw std::logic_error("matching row count differs from the sink count");
  return m;
}

namespace {

std::vector<std::vector<int>> predecessor_lists(const ExplanationGraph& eg) {
  std::vector<std::vector<int>> pred(eg.num_points());
  for (int u = 0; u < eg.num_points(); ++u) {
    if (eg.sink[u]) continue;
    std::set<int> t(eg.out[u].begin(), eg.out[u].end());
    for (int v : t) pred[v].push_back(u);
  }
  return pred;
}

// Lex-smallest point with every row entry among its witnesses, -1 if none.
int tight_apex(const ExplanationGraph& eg,
               const std::vector<std::vector<int>>& pred,
               const std::vector<int>& row) {
  for (int v : pred[row.front()]) {
    bool all = true;
    for (int a : row) {
      const auto& o = eg.out[v];
      if (std::find(o.begin(), o.end(), a) == o.end()) {
        all = false;
        break;
      }
    }
    if (all) return v;
  }
  return -1;
}

}  // namespace

CheckReport validate_matching(const ExplanationGraph& eg,
                              const ToomMatching& m) {
  CheckReport rep;
  CheckReport structural = validate_explanation_graph(eg);
  if (!structural.ok) {
    rep.fail("underlying explanation graph invalid: " +
             structural.violations.front());
    return rep;
  }
  if (m.sigma != eg.sigma) {
    rep.fail("charge count mismatch");
    return rep;
  }
  const int n = eg.num_points();
  const auto sinks = eg.sink_indices();
  if (m.rows.size() != sinks.size())
    rep.fail("row count differs from the sink count");
  if (m.rows.empty()) return rep;
  for (int a : m.rows.front())
    if (a != eg.root) {
      rep.fail("first row must repeat the root");
      break;
    }
  for (size_t i = 0; i < m.rows.size(); ++i) {
    const auto& row = m.rows[i];
    if (static_cast<int>(row.size()) != m.sigma) {
      rep.fail("row " + std::to_string(i) + " has the wrong width");
      return rep;
    }
    for (int a : row)
      if (a < 0 || a >= n) {
        rep.fail("row " + std::to_string(i) + " indexes outside the graph");
        return rep;
      }
    for (int a : row)
      if (eg.points[a].time != eg.points[row.front()].time)
        rep.fail("row " + std::to_string(i) + " is not a polar");
  }
  const auto pred = predecessor_lists(eg);
  for (size_t i = 1; i < m.rows.size(); ++i) {
    std::set<int> distinct(m.rows[i].begin(), m.rows[i].end());
    if (distinct.size() == 1) continue;
    if (tight_apex(eg, pred, m.rows[i]) < 0)
      rep.fail("row " + std::to_string(i) + " is not tight");
  }
  const std::set<int> sink_set(sinks.begin(), sinks.end());
  for (int s = 1; s <= m.sigma; ++s) {
    std::set<int> starts, ends;
    for (const auto& row : m.rows) {
      if (!starts.insert(row[s - 1]).second)
        rep.fail(charge_str(s) + " reuses a start point");
      if (!ends.insert(path_sink(eg, row[s - 1], s)).second)
        rep.fail(charge_str(s) + " reuses a sink");
    }
    if (ends != sink_set) rep.fail(charge_str(s) + " does not cover the sinks");
  }
  return rep;
}

ToomContour build_contour_from_matching(const ExplanationGraph& eg,
                                        const ToomMatching& m) {
  CheckReport ok = validate_matching(eg, m);
  if (!ok.ok)
    throw std::invalid_argument("invalid matching: " + ok.violations.front());
  const int sigma = eg.sigma;

  std::vector<SiteVector> vsite;
  std::vector<int> vtime;
  std::vector<std::vector<std::pair<int, int>>> edges(sigma);
  std::map<int, int> sink_vertex;
  auto alloc = [&](int pid) {
    vsite.push_back(eg.points[pid].site);
    vtime.push_back(eg.points[pid].time);
    return static_cast<int>(vsite.size()) - 1;
  };
  auto sink_v = [&](int pid) {
    auto it = sink_vertex.find(pid);
    if (it != sink_vertex.end()) return it->second;
    const int v = alloc(pid);
    sink_vertex[pid] = v;
    return v;
  };

  const auto pred = predecessor_lists(eg);
  int root_vertex = -1;
  for (size_t i = 0; i < m.rows.size(); ++i) {
    const auto& row = m.rows[i];
    const bool point_row =
        std::all_of(row.begin(), row.end(), [&](int a) { return a == row[0]; });
    if (point_row && eg.sink[row[0]]) {
      const int v = sink_v(row[0]);
      if (i == 0) root_vertex = v;
      continue;
    }
    int src;
    if (point_row) {
      src = alloc(row[0]);
    } else {
      const int apex = tight_apex(eg, pred, row);
      if (apex < 0) throw std::logic_error("tight row lost its apex");
      src = alloc(apex);
    }
    if (i == 0) root_vertex = src;
    for (int s = 0; s < sigma; ++s) {
      const auto path = charge_path(eg, row[s], s + 1);
      int prev = src;
      for (size_t j = point_row ? 1 : 0; j + 1 < path.size(); ++j) {
        const int iv = alloc(path[j]);
        edges[s].push_back({prev, iv});
        prev = iv;
      }
      edges[s].push_back({prev, sink_v(path.back())});
    }
  }

  // restrict to the root's component
  const int nv = static_cast<int>(vsite.size());
  std::vector<std::vector<int>> adj(nv);
  for (const auto& es : edges)
    for (const auto& [a, b] : es) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  std::vector<int> remap(nv, -1);
  std::vector<int> stack{root_vertex};
  remap[root_vertex] = 0;
  int kept = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (remap[w] < 0) {
        remap[w] = kept++;
        stack.push_back(w);
      }
  }

  ToomContour c;
  c.graph.sigma = sigma;
  c.graph.num_vertices = kept;
  c.graph.edges.assign(sigma, {});
  c.psi.site.resize(kept);
  c.psi.time.resize(kept);
  for (int v = 0; v < nv; ++v)
    if (remap[v] >= 0) {
      c.psi.site[remap[v]] = vsite[v];
      c.psi.time[remap[v]] = vtime[v];
    }
  for (int s = 0; s < sigma; ++s)
    for (const auto& [a, b] : edges[s])
      if (remap[a] >= 0) c.graph.edges[s].push_back({remap[a], remap[b]});
  c.root = remap[root_vertex];
  return c;
}

// --- cycles ----------------------------------------------------------------

ToomCycle seed_cycle(int r, const SiteVector& j1, const SiteVector& j2) {
  if (r < 0) throw std::invalid_argument("seed depth must be nonnegative");
  if (j1.size() != j2.size())
    throw std::invalid_argument("seed displacements differ in dimension");
  const int d = static_cast<int>(j1.size());
  ToomCycle cyc;
  if (r == 0) {
    cyc.points.push_back({zero_site(d), 0});
    return cyc;
  }
  auto combo = [&](int a, int b) {
    SiteVector v(d);
    for (int k = 0; k < d; ++k) v[k] = a * j1[k] + b * j2[k];
    return v;
  };
  cyc.points.push_back({zero_site(d), 0});
  for (int k = 1; k <= r; ++k) cyc.points.push_back({combo(k, 0), -k});
  for (int k = 1; k <= r; ++k) {
    cyc.points.push_back({combo(r - k, k - 1), 1 - r});
    cyc.points.push_back({combo(r - k, k), -r});
  }
  for (int k = 1; k < r; ++k) cyc.points.push_back({combo(0, r - k), k - r});
  return cyc;
}

ToomCycle build_cycle_loop_erasure(const FlowRealization& flow,
                                   const ChargeAssignment& chosen,
                                   int seed_slab,
                                   std::optional<SpaceTimePoint> root) {
  if (chosen.size() != flow.model.maps.size())
    throw std::invalid_argument("charge assignment does not cover the model maps");
  if (static_cast<int>(chosen[flow.model.primary].size()) != 2)
    throw std::invalid_argument("loop erasure requires exactly two charges");

  auto ego = extract_explanation_graph(flow, chosen, root, seed_slab);
  if (!ego) throw std::runtime_error("no contour");
  const ExplanationGraph& eg = *ego;
  const SpaceTimePoint root_pt = eg.points[eg.root];

  std::vector<int> word;
  if (seed_slab > 0) {
    const ChargeSets& ps = chosen[flow.model.primary];
    if (ps[0].empty() || ps[1].empty())
      throw std::invalid_argument("primary charge sets must be nonempty");
    if (ps[0].front() == ps[1].front())
      throw std::invalid_argument("seed displacements coincide");
    const ToomCycle seed = seed_cycle(seed_slab, ps[0].front(), ps[1].front());
    for (const SpaceTimePoint& p : seed.points) {
      const SpaceTimePoint q{site_add(root_pt.site, p.site),
                             root_pt.time + p.time};
      const int idx = eg.index_of(q);
      if (idx < 0)
        throw std::logic_error("seed point " + point_str(q) +
                               " missing from the explanation graph");
      word.push_back(idx);
    }
  } else {
    word.push_back(eg.root);
  }

  auto time_of = [&](int letter) { return eg.points[letter].time; };
  auto erase_loops = [&]() {
    for (bool again = true; again;) {
      again = false;
      const int n = static_cast<int>(word.size());
      auto is_min = [&](int k) {
        const int prev = time_of(word[(k + n - 1) % n]);
        const int next = time_of(word[(k + 1) % n]);
        return prev > time_of(word[k]) && time_of(word[k]) < next;
      };
      for (int k1 = 1; k1 < n && !again; ++k1) {
        if (!is_min(k1)) continue;
        for (int k2 = k1 + 1; k2 < n; ++k2) {
          if (word[k1] != word[k2] || !is_min(k2)) continue;
          word.erase(word.begin() + k1 + 1, word.begin() + k2 + 1);
          again = true;
          break;
        }
      }
    }
  };

  const int cap = 4 * eg.num_points() + 64;
  for (int steps = 0;; ++steps) {
    if (steps > cap)
      throw std::logic_error("cycle exploration did not terminate");
    const int n = static_cast<int>(word.size());
    if (n == 1) {
      if (eg.sink[word[0]]) break;
      const int u = word[0];
      word = {u, eg.out[u][0], u, eg.out[u][1]};
      erase_loops();
      continue;
    }
    int low = 0;
    for (int k = 0; k < n; ++k) low = std::min(low, time_of(word[k]));
    auto is_min = [&](int k) {
      const int prev = time_of(word[(k + n - 1) % n]);
      const int next = time_of(word[(k + 1) % n]);
      return prev > time_of(word[k]) && time_of(word[k]) < next;
    };
    int pick = -1;
    for (int want = low + 1; want >= low && pick < 0; --want)
      for (int k = 0; k < n; ++k)
        if (is_min(k) && !eg.sink[word[k]] && time_of(word[k]) == want &&
            (pick < 0 || word[k] < word[pick]))
          pick = k;
    if (pick < 0) {
      for (int k = 0; k < n; ++k)
        if (is_min(k) && !eg.sink[word[k]])
          throw std::logic_error("live minimum below the active planes");
      break;
    }
    const int u = word[pick];
    const std::vector<int> insert{u, eg.out[u][0], u, eg.out[u][1], u};
    word.erase(word.begin() + pick);
    word.insert(word.begin() + pick, insert.begin(), insert.end());
    erase_loops();
  }

  ToomCycle cyc;
  for (int letter : word) cyc.points.push_back(eg.points[letter]);
  CheckReport ok = validate_cycle(cyc);
  if (!ok.ok)
    throw std::logic_error("loop erasure left an invalid cycle: " +
                           ok.violations.front());
  return cyc;
}

// --- forks ------------------------------------------------------------------

namespace {

// Distinct images at the far end of a source's out-edges.
std::set<SpaceTimePoint> source_images(const ToomContour& c, int v) {
  std::set<SpaceTimePoint> images;
  for (const auto& es : c.graph.edges)
    for (const auto& [a, b] : es)
      if (a == v) images.insert(c.psi.point(b));
  return images;
}

}  // namespace

int count_forks(const ToomContour& c) {
  const auto cls = classify_vertices(c.graph);
  int forks = 0;
  for (int v = 0; v < c.graph.num_vertices; ++v)
    if (cls[v].kind == VertexKind::Source && source_images(c, v).size() == 2)
      ++forks;
  return forks;
}

ToomContour forks_only(const ToomContour& c) {
  CheckReport ok = validate_contour(c);
  if (!ok.ok)
    throw std::invalid_argument("invalid contour: " + ok.violations.front());
  ToomContour cur = c;
  const int sigma = cur.graph.sigma;
  for (;;) {
    const auto cls = classify_vertices(cur.graph);
    int pick = -1;
    for (int v = 0; v < cur.graph.num_vertices && pick < 0; ++v) {
      if (v == cur.root || cls[v].kind != VertexKind::Source) continue;
      const auto images = source_images(cur, v);
      if (images.size() == 1) pick = v;
      if (images.size() > 2)
        throw std::invalid_argument("source with more than two target images");
    }
    if (pick < 0) break;

    std::vector<int> target(sigma, -1);
    for (int s = 0; s < sigma; ++s) {
      for (const auto& [a, b] : cur.graph.edges[s])
        if (a == pick) target[s] = b;
      if (target[s] < 0 || cls[target[s]].kind != VertexKind::Internal)
        throw std::logic_error("point source target is not internal");
    }

    const int nv = cur.graph.num_vertices;
    std::vector<int> remap(nv, -1);
    int kept = 0;
    for (int v = 0; v < nv; ++v) {
      if (v == pick ||
          std::find(target.begin(), target.end(), v) != target.end())
        continue;
      remap[v] = kept++;
    }
    const int merged = kept;  // replaces pick and its targets

    ToomContour out;
    out.graph.sigma = sigma;
    out.graph.num_vertices = kept + 1;
    out.graph.edges.assign(sigma, {});
    for (int s = 0; s < sigma; ++s)
      for (const auto& [a, b] : cur.graph.edges[s]) {
        if (a == pick) continue;
        if (a == target[s])
          out.graph.edges[s].push_back({merged, remap[b]});
        else
          out.graph.edges[s].push_back({remap[a], remap[b]});
      }
    out.psi.site.resize(kept + 1);
    out.psi.time.resize(kept + 1);
    for (int v = 0; v < nv; ++v)
      if (remap[v] >= 0) {
        out.psi.site[remap[v]] = cur.psi.site[v];
        out.psi.time[remap[v]] = cur.psi.time[v];
      }
    out.psi.site[merged] = cur.psi.site[target[0]];
    out.psi.time[merged] = cur.psi.time[target[0]];
    out.root = remap[cur.root];
    cur = std::move(out);
  }
  return cur;
}

// --- continuous time --------------------------------------------------------

std::optional<ContinuousExtraction> continuous_extract_trace(
    const IpsTrajectory& traj, const ChargeAssignment& chosen,
    std::optional<SiteVector> root_site) {
  const int d = traj.dimension;
  const SiteVector r0 = root_site ? *root_site : zero_site(d);
  if (!traj.space.contains(r0))
    throw std::out_of_range("root site outside the trajectory box");
  const int kinds = static_cast<int>(chosen.size());
  if (kinds < 2)
    throw std::invalid_argument("need charge sets for deaths and one arrival kind");
  const int sigma = static_cast<int>(chosen[1].size());
  if (sigma < 2) throw std::invalid_argument("fewer than two charges");
  for (int k = 1; k < kinds; ++k)
    if (static_cast<int>(chosen[k].size()) != sigma)
      throw std::invalid_argument("charge assignment has mixed charge counts");
  if (traj.value_at(r0, 0.0)) return std::nullopt;

  const Box& box = traj.space;
  auto last_event_at = [&](const SiteVector& i, double t, bool strict) {
    int best = -1;
    for (int e : traj.site_events[box.index_of(i)]) {
      const double te = traj.events[e].time;
      if (strict ? te < t : te <= t)
        best = e;
      else
        break;
    }
    return best;
  };

  // responsibility closure: each zero point charges its last arrival, and
  // each kept arrival records one zero witness per charge
  std::set<int> closure_set;
  std::map<int, std::vector<SiteVector>> witness_of;
  std::vector<std::tuple<SiteVector, double, bool>> pending{{r0, 0.0, false}};
  while (!pending.empty()) {
    const auto [site, t, strict] = pending.back();
    pending.pop_back();
    const int e = last_event_at(site, t, strict);
    if (e < 0) throw std::logic_error("zero site without an explaining arrival");
    if (!closure_set.insert(e).second) continue;
    const IpsEvent& ev = traj.events[e];
    if (ev.kind == 0) continue;
    if (ev.kind >= kinds)
      throw std::invalid_argument("event kind without charge sets");
    std::vector<SiteVector> picks(sigma);
    for (int s = 0; s < sigma; ++s) {
      bool any = false;
      for (const SiteVector& j : chosen[ev.kind][s]) {
        const SiteVector w = site_add(ev.site, j);
        if (box.contains(w) && !traj.value_left(w, ev.time)) {
          picks[s] = j;
          any = true;
          break;
        }
      }
      if (!any)
        throw std::logic_error("arrival kept a zero site without zero witnesses");
    }
    const std::set<SiteVector> uniq(picks.begin(), picks.end());
    for (const SiteVector& j : uniq)
      pending.push_back({site_add(ev.site, j), ev.time, true});
    witness_of.emplace(e, std::move(picks));
  }

  std::vector<int> order(closure_set.begin(), closure_set.end());
  std::sort(order.rbegin(), order.rend());  // times strictly increase by index
  const int n = static_cast<int>(order.size());
  if (traj.events[order.front()].site != r0)
    throw std::logic_error("latest closure arrival is not at the root site");

  ContinuousExtraction out;
  for (int e : order)
    out.closure.push_back(
        {traj.events[e].site, traj.events[e].time, traj.events[e].kind});

  // discretization: two planes per closure arrival, identity in between;
  // each arrival cell gets a map pinned to the closure's witness picks so
  // the discrete extraction cannot stray from witnesses verified zero in
  // the real trajectory
  std::vector<MonotonicMap> smaps;
  ChargeAssignment schosen;
  smaps.push_back(builtin_map("zero", d));
  schosen.push_back(ChargeSets(sigma));
  std::map<std::vector<SiteVector>, int> pick_index;
  std::vector<int> map_of(n, 0);
  for (int l = 1; l <= n; ++l) {
    const int e = order[l - 1];
    if (traj.events[e].kind == 0) continue;
    const std::vector<SiteVector>& picks = witness_of.at(e);
    const auto [it, fresh] =
        pick_index.try_emplace(picks, static_cast<int>(smaps.size()));
    if (fresh) {
      std::vector<std::vector<SiteVector>> sets;
      for (const SiteVector& j : std::set<SiteVector>(picks.begin(), picks.end()))
        sets.push_back({j});
      smaps.push_back(make_map(
          d, sets, "arrival-" + std::to_string(pick_index.size() - 1)));
      ChargeSets cs(sigma);
      for (int s = 0; s < sigma; ++s) cs[s] = {picks[s]};
      schosen.push_back(std::move(cs));
    }
    map_of[l - 1] = it->second;
  }
  smaps.push_back(builtin_map("identity", d));
  schosen.push_back(ChargeSets(sigma, std::vector<SiteVector>{zero_site(d)}));
  const int id_index = static_cast<int>(smaps.size()) - 1;
  if (id_index > 255)
    throw std::runtime_error("too many distinct witness patterns");
  const std::vector<double> probs(smaps.size(), 1.0 / smaps.size());

  FlowRealization syn;
  syn.model = make_model("event-ladder", smaps, probs, 1);
  syn.seed = traj.seed;
  syn.space = box;
  syn.depth = 2 * n + 1;
  syn.plane_maps.assign(static_cast<size_t>(syn.depth) * box.volume(),
                        static_cast<uint8_t>(id_index));
  for (int l = 1; l <= n; ++l) {
    const ClosureEvent& ev = out.closure[l - 1];
    const size_t plane = static_cast<size_t>(2 * n - 2 * l);
    syn.plane_maps[plane * box.volume() + box.index_of(ev.site)] =
        static_cast<uint8_t>(map_of[l - 1]);
  }

  const SpaceTimePoint root_pt{r0, 0};
  auto ego = extract_explanation_graph(syn, schosen, root_pt);
  if (!ego) throw std::logic_error("discretization lost the root zero");
  out.synthetic = syn;
  out.graph = *ego;
  if (sigma == 2) {
    out.discrete =
        cycle_to_contour(build_cycle_loop_erasure(syn, schosen, 0, root_pt));
  } else {
    out.discrete =
        build_contour_from_matching(out.graph, toom_matching(out.graph));
  }

  // lift vertices to event times: heights 2l-1 and 2l both belong to
  // arrival l, vertical runs inherit the lift of their top vertex
  std::vector<double> arrival_time(n + 1, 0.0);
  for (int l = 1; l <= n; ++l) arrival_time[l] = out.closure[l - 1].time;
  const ToomGraph& g = out.discrete.graph;
  const Embedding& dpsi = out.discrete.psi;
  const int nv = g.num_vertices;
  std::vector<std::vector<int>> outs(nv), ins(nv);
  for (const auto& es : g.edges)
    for (const auto& [a, b] : es) {
      outs[a].push_back(b);
      ins[b].push_back(a);
    }
  std::vector<int> by_time(nv);
  for (int v = 0; v < nv; ++v) by_time[v] = v;
  std::sort(by_time.begin(), by_time.end(), [&](int a, int b) {
    return dpsi.time[a] != dpsi.time[b] ? dpsi.time[a] > dpsi.time[b] : a < b;
  });
  std::vector<SiteVector> lift_site(nv);
  std::vector<double> lift_time(nv);
  for (int v : by_time) {
    int from = -1;
    bool vertical_out = false;
    for (int w : outs[v]) vertical_out = vertical_out || dpsi.site[w] == dpsi.site[v];
    if (vertical_out)
      for (int w : ins[v])
        if (dpsi.site[w] == dpsi.site[v]) {
          from = w;
          break;
        }
    if (from >= 0) {
      lift_site[v] = lift_site[from];
      lift_time[v] = lift_time[from];
    } else {
      lift_site[v] = dpsi.site[v];
      lift_time[v] = arrival_time[-dpsi.time[v] / 2];
    }
  }

  // quotient: maximal same-lift reachability classes
  const auto cls = classify_vertices(g);
  std::vector<int> cls_id(nv, -1);
  std::vector<int> heads;
  auto claim = [&](int head) {
    const int id = static_cast<int>(heads.size());
    heads.push_back(head);
    std::vector<int> stack{head};
    cls_id[head] = id;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : outs[v]) {
        if (lift_site[w] != lift_site[head] || lift_time[w] != lift_time[head])
          continue;
        if (cls_id[w] == id) continue;
        if (cls_id[w] >= 0)
          throw std::logic_error("same-lift classes overlap");
        cls_id[w] = id;
        stack.push_back(w);
      }
    }
  };
  for (int v = 0; v < nv; ++v)
    if (cls[v].kind == VertexKind::Sink) claim(v);
  for (int v = 0; v < nv; ++v)
    if (cls_id[v] < 0 && counts_as_source(cls[v])) claim(v);
  for (int v : by_time)
    if (cls_id[v] < 0) claim(v);

  ContinuousContour cont;
  cont.graph.sigma = sigma;
  cont.graph.num_vertices = static_cast<int>(heads.size());
  cont.graph.edges.assign(sigma, {});
  for (int s = 0; s < sigma; ++s) {
    std::set<std::pair<int, int>> dedupe;
    for (const auto& [a, b] : g.edges[s]) {
      const std::pair<int, int> e{cls_id[a], cls_id[b]};
      if (e.first != e.second && dedupe.insert(e).second)
        cont.graph.edges[s].push_back(e);
    }
  }
  cont.root = cls_id[out.discrete.root];
  cont.psi.site.resize(heads.size());
  cont.psi.time.resize(heads.size());
  for (size_t i = 0; i < heads.size(); ++i) {
    cont.psi.site[i] = lift_site[heads[i]];
    cont.psi.time[i] = lift_time[heads[i]];
  }
  CheckReport ok = validate_continuous_contour(cont);
  if (!ok.ok)
    throw std::logic_error("lifted contour invalid: " + ok.violations.front());
  out.contour = std::move(cont);
  return out;
}

std::optional<ContinuousContour> continuous_extract(
    const IpsTrajectory& traj, const ChargeAssignment& chosen,
    std::optional<SiteVector> root_site) {
  auto trace = continuous_extract_trace(traj, chosen, root_site);
  if (!trace) return std::nullopt;
  return std::move(trace->contour);
}

// --- minimal explanations ----------------------------------------------------

MinimalExplanationSummary minimal_explanations_search(
    const FlowRealization& flow, std::optional<SpaceTimePoint> root,
    int max_cells) {
  const int d = flow.model.dimension;
  const SpaceTimePoint r = root ? *root : SpaceTimePoint{zero_site(d), 0};
  if (!flow.in_window(r.site, r.time))
    throw std::out_of_range("root cell " + point_str(r) +
                            " is outside the flow window");

  std::vector<std::vector<std::vector<SiteVector>>> dual_cache;
  for (const MonotonicMap& map : flow.model.maps)
    dual_cache.push_back(dual_family(map));

  MinimalExplanationSummary summary;
  if (flow.model.maps[flow.map_index_at(r.site, r.time)].is_one())
    return summary;

  long long assignable = 0;
  for (long long t = r.time; t > flow.t_min(); --t)
    for (long long idx = 0; idx < flow.space.volume(); ++idx) {
      const SiteVector i = flow.space.site_at(idx);
      if (t == r.time && !(i == r.site)) continue;
      if (t < r.time && !flow.in_window(i, t)) continue;
      if (!flow.model.maps[flow.map_index_at(i, t)].is_one()) ++assignable;
    }
  if (assignable > max_cells)
    throw std::invalid_argument(
        "minimal explanation window has " + std::to_string(assignable) +
        " assignable cells, above the limit of " + std::to_string(max_cells));

  std::map<SpaceTimePoint, int> picked;  // cell -> dual index
  std::set<SpaceTimePoint> open;
  std::function<void()> search = [&]() {
    if (open.empty()) {
      MinimalExplanation me;
      for (const auto& [cell, oi] : picked) {
        me.cells.push_back(cell);
        me.duals.push_back(
            dual_cache[flow.map_index_at(cell.site, cell.time)][oi]);
        if (me.duals.back().empty())
          me.defects.push_back(static_cast<int>(me.cells.size()) - 1);
      }
      summary.explanations.push_back(std::move(me));
      return;
    }
    const SpaceTimePoint cell = *open.begin();
    open.erase(open.begin());
    const auto& options = dual_cache[flow.map_index_at(cell.site, cell.time)];
    for (int oi = 0; oi < static_cast<int>(options.size()); ++oi) {
      bool fits = true;
      std::vector<SpaceTimePoint> added;
      for (const SiteVector& j : options[oi]) {
        const SpaceTimePoint ref{site_add(cell.site, j), cell.time - 1};
        if (!flow.in_window(ref.site, ref.time) || ref.time <= flow.t_min()) {
          fits = false;
          break;
        }
        if (!picked.count(ref) && !open.count(ref)) added.push_back(ref);
      }
      if (!fits) continue;
      picked[cell] = oi;
      for (const auto& ref : added) open.insert(ref);
      search();
      for (const auto& ref : added) open.erase(ref);
      picked.erase(cell);
    }
    open.insert(cell);
  };
  open.insert(r);
  search();
  open.clear();

  // the closure construction yields an antichain under support refinement
  if (summary.explanations.size() <= 5000) {
    for (size_t a = 0; a < summary.explanations.size(); ++a)
      for (size_t b = 0; b < summary.explanations.size(); ++b) {
        if (a == b) continue;
        const auto& ea = summary.explanations[a];
        const auto& eb = summary.explanations[b];
        bool refines = true;
        for (size_t i = 0; i < ea.cells.size() && refines; ++i) {
          const auto it = std::lower_bound(eb.cells.begin(), eb.cells.end(),
                                           ea.cells[i]);
          refines = it != eb.cells.end() && *it == ea.cells[i] &&
                    eb.duals[it - eb.cells.begin()] == ea.duals[i];
        }
        if (refines)
          throw std::logic_error("minimal explanations are not an antichain");
      }
  }

  // a defect is critical if swapping in the primary map alone flips the root
  const MonotonicMap& primary = flow.model.maps[flow.model.primary];
  for (MinimalExplanation& me : summary.explanations) {
    auto cell_index = [&](const SpaceTimePoint& p) {
      const auto it = std::lower_bound(me.cells.begin(), me.cells.end(), p);
      return it != me.cells.end() && *it == p
                 ? static_cast<int>(it - me.cells.begin())
                 : -1;
    };
    auto rooted_one = [&](int swapped) {
      std::map<SpaceTimePoint, char> memo;
      std::function<bool(const SpaceTimePoint&)> value =
          [&](const SpaceTimePoint& p) -> bool {
        const int ci = cell_index(p);
        if (ci < 0) return true;
        const auto it = memo.find(p);
        if (it != memo.end()) return it->second;
        bool v;
        if (ci == swapped) {
          v = false;
          for (const auto& set : primary.minimal_sets) {
            bool all = true;
            for (const SiteVector& j : set)
              all = all && value({site_add(p.site, j), p.time - 1});
            if (all) {
              v = true;
              break;
            }
          }
        } else {
          v = false;
          for (const SiteVector& j : me.duals[ci]) {
            v = v || value({site_add(p.site, j), p.time - 1});
            if (v) break;
          }
        }
        memo[p] = v;
        return v;
      };
      return value(r);
    };
    me.defect_removal_critical = !me.defects.empty();
    for (int defect : me.defects)
      if (!rooted_one(defect)) {
        me.defect_removal_critical = false;
        break;
      }
  }

  if (!summary.explanations.empty()) {
    int most = 0;
    for (const auto& me : summary.explanations)
      most = std::max(most, static_cast<int>(me.defects.size()));
    summary.by_defects.assign(most + 1, 0);
    for (const auto& me : summary.explanations)
      ++summary.by_defects[me.defects.size()];
  }
  return summary;
}

FlowRealization wlog_reduction(const FlowRealization& flow,
                               const ChargeAssignment& chosen) {
  if (chosen.size() != flow.model.maps.size())
    throw std::invalid_argument("charge assignment does not cover the model maps");
  std::vector<MonotonicMap> maps = flow.model.maps;
  for (size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].is_constant()) continue;
    std::vector<std::vector<SiteVector>> family = chosen[k];
    std::sort(family.begin(), family.end());
    family.erase(std::unique(family.begin(), family.end()), family.end());
    maps[k] = make_map(flow.model.dimension, family, maps[k].name);
  }
  FlowRealization out = flow;
  out.model = make_model(flow.model.name, std::move(maps), flow.model.probs,
                         flow.model.primary);
  return out;
}

bool satisfies_wlog(const ModelSpec& model, const ChargeAssignment& chosen) {
  if (chosen.size() != model.maps.size())
    throw std::invalid_argument("charge assignment does not cover the model maps");
  for (size_t k = 0; k < model.maps.size(); ++k) {
    if (model.maps[k].is_constant()) continue;
    std::vector<std::vector<SiteVector>> family = chosen[k];
    std::sort(family.begin(), family.end());
    family.erase(std::unique(family.begin(), family.end()), family.end());
    if (make_map(model.dimension, family, "probe").minimal_sets !=
        model.maps[k].minimal_sets)
      return false;
  }
  return true;
}

ExplanationGraph explanation_graph_from_minimal(const MinimalExplanation& me,
                                                const FlowRealization& flow,
                                                const ChargeAssignment& chosen) {
  if (chosen.size() != flow.model.maps.size())
    throw std::invalid_argument("charge assignment does not cover the model maps");
  const int sigma = static_cast<int>(chosen[flow.model.primary].size());
  if (me.cells.empty()) throw std::invalid_argument("empty explanation");

  ExplanationGraph eg;
  eg.sigma = sigma;
  eg.dimension = flow.model.dimension;
  eg.points = me.cells;
  int top = 0;
  for (int i = 1; i < eg.num_points(); ++i)
    if (eg.points[i].time > eg.points[top].time) top = i;
  for (int i = 0; i < eg.num_points(); ++i)
    if (i != top && eg.points[i].time == eg.points[top].time)
      throw std::invalid_argument("explanation has no unique top cell");
  eg.root = top;
  eg.out.assign(eg.num_points(), std::vector<int>(sigma, -1));
  eg.sink.assign(eg.num_points(), 0);
  for (int i = 0; i < eg.num_points(); ++i) {
    const std::vector<SiteVector>& dual = me.duals[i];
    if (dual.empty()) {
      eg.sink[i] = 1;
      continue;
    }
    const SpaceTimePoint& p = eg.points[i];
    if (!flow.in_window(p.site, p.time))
      throw std::invalid_argument("explanation cell " + point_str(p) +
                                  " outside the flow window");
    const int k = flow.map_index_at(p.site, p.time);
    std::vector<SiteVector> sorted_dual = dual;
    std::sort(sorted_dual.begin(), sorted_dual.end());
    for (int s = 0; s < sigma; ++s) {
      int target = -1;
      for (const SiteVector& j : sorted_dual) {
        if (!in_set(chosen[k][s], j)) continue;
        target = eg.index_of({site_add(p.site, j), p.time - 1});
        if (target < 0)
          throw std::logic_error("explanation misses the cell referenced from " +
                                 point_str(p));
        break;
      }
      if (target < 0)
        throw std::logic_error("dual set at " + point_str(p) + " misses the " +
                               charge_str(s + 1) +
                               " witnesses: flow is not reduced");
      eg.out[i][s] = target;
    }
  }
  return eg;
}

}  // namespace toomlab
