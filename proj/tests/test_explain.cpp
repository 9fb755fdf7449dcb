#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "toomlab/eroder.hpp"
#include "toomlab/explain.hpp"

using namespace toomlab;

namespace {

struct Setup {
  ModelSpec model;
  PolarFunction polar;
  ChargeAssignment chosen;
};

Setup make_setup(const std::string& preset, double p) {
  auto model = preset_model(preset, 2, p);
  auto polar = find_polar(model.maps[model.primary]);
  REQUIRE(polar.has_value());
  auto chosen = assign_charges(model, *polar);
  return {std::move(model), std::move(*polar), std::move(chosen)};
}

FlowRealization planted_flow(const std::vector<SpaceTimePoint>& defects) {
  auto model = preset_model("coop", 2, 0.0);
  auto flow = sample_flow(model, 17, cube_box(2, -4, 4), 5);
  for (const auto& p : defects) {
    const long long plane = p.time - (flow.t_min() + 1);
    flow.plane_maps[plane * flow.space.volume() +
                    flow.space.index_of(p.site)] = 0;
  }
  return flow;
}

std::set<SpaceTimePoint> defect_set(const FlowRealization& flow) {
  std::set<SpaceTimePoint> out;
  for (const auto& [site, t] : flow_defects(flow))
    out.insert({site, static_cast<int>(t)});
  return out;
}

}  // namespace

TEST_CASE("extraction at a planted defect") {
  auto s = make_setup("coop", 0.0);
  auto flow = planted_flow({{{0, 0}, 0}});
  auto eg = extract_explanation_graph(flow, s.chosen);
  REQUIRE(eg.has_value());
  CHECK(eg->num_points() == 1);
  CHECK(eg->sink[eg->root] == 1);
  CHECK(validate_explanation_graph(*eg).ok);
  CHECK(explanation_is_present(*eg, flow, s.chosen));

  auto m = toom_matching(*eg);
  CHECK(validate_matching(*eg, m).ok);
  CHECK(m.rows.size() == 1);
  auto c = build_contour_from_matching(*eg, m);
  CHECK(validate_contour(c).ok);
  CHECK(c.graph.num_vertices == 1);
  CHECK(is_present(c, flow, s.chosen));

  auto cyc = build_cycle_loop_erasure(flow, s.chosen);
  CHECK(cyc.points.size() == 1);
  CHECK(cyc.points.front() == SpaceTimePoint{{0, 0}, 0});
}

TEST_CASE("extraction walks the chosen witnesses") {
  auto s = make_setup("coop", 0.0);
  const SiteVector j1 = s.chosen[1][0][0];   // charge-1 head, the origin
  const SiteVector e1 = s.chosen[1][1][0];
  const SiteVector e2 = s.chosen[1][1][1];
  REQUIRE(j1 == SiteVector{0, 0});

  // zero at the origin forced by one defect under each charge
  auto flow = planted_flow({{j1, -1}, {e1, -1}});
  auto eg = extract_explanation_graph(flow, s.chosen);
  REQUIRE(eg.has_value());
  CHECK(eg->num_points() == 3);
  CHECK(eg->sink_indices().size() == 2);
  CHECK(explanation_is_present(*eg, flow, s.chosen));
  // the charge-2 witness prefers the first zero element in canonical order
  const int root = eg->root;
  CHECK(eg->points[eg->out[root][1]] == SpaceTimePoint{e1, -1});

  // with only the later element zero, extraction picks it instead
  auto alt = planted_flow({{j1, -1}, {e2, -1}});
  auto eg2 = extract_explanation_graph(alt, s.chosen);
  REQUIRE(eg2.has_value());
  CHECK(eg2->points[eg2->out[eg2->root][1]] == SpaceTimePoint{e2, -1});

  // no defects anywhere: the trajectory is one and there is no certificate
  auto clean = planted_flow({});
  CHECK_FALSE(extract_explanation_graph(clean, s.chosen).has_value());
  CHECK_THROWS_AS(build_cycle_loop_erasure(clean, s.chosen),
                  std::runtime_error);

  CHECK_THROWS_AS(
      extract_explanation_graph(flow, s.chosen, SpaceTimePoint{{99, 0}, 0}),
      std::out_of_range);
  CHECK_THROWS_AS(
      extract_explanation_graph(flow, s.chosen, SpaceTimePoint{{0, 0}, 1}),
      std::out_of_range);
}

TEST_CASE("explanation graph validation rejects tampering") {
  auto s = make_setup("coop", 0.0);
  auto flow = planted_flow({{{0, 0}, -1}, {{0, 1}, -1}, {{1, 0}, -2}});
  auto eg = extract_explanation_graph(flow, s.chosen);
  REQUIRE(eg.has_value());
  REQUIRE(validate_explanation_graph(*eg).ok);

  auto no_root_top = *eg;
  no_root_top.points[no_root_top.root].time = -5;
  CHECK_FALSE(validate_explanation_graph(no_root_top).ok);

  auto dangling = *eg;
  for (int u = 0; u < dangling.num_points(); ++u)
    if (!dangling.sink[u]) {
      dangling.out[u][0] = dangling.num_points() + 3;
      break;
    }
  CHECK_FALSE(validate_explanation_graph(dangling).ok);

  auto busy_sink = *eg;
  busy_sink.out[busy_sink.sink_indices().front()] = {busy_sink.root,
                                                     busy_sink.root};
  CHECK_FALSE(validate_explanation_graph(busy_sink).ok);

  // presence fails when a sink sits on a live cell
  auto moved = *eg;
  auto rep = explanation_presence_report(moved, planted_flow({{{0, 0}, -1}}),
                                         s.chosen);
  CHECK_FALSE(rep.present);
}

TEST_CASE("charge paths descend to sinks") {
  auto s = make_setup("coop", 0.0);
  auto flow = planted_flow({{{0, 0}, -2}, {{0, 1}, -1}, {{1, 0}, -2}});
  auto eg = extract_explanation_graph(flow, s.chosen);
  REQUIRE(eg.has_value());
  for (int u = 0; u < eg->num_points(); ++u)
    for (int c = 1; c <= eg->sigma; ++c) {
      auto path = charge_path(*eg, u, c);
      CHECK(path.front() == u);
      CHECK(eg->sink[path.back()] == 1);
      CHECK(path_sink(*eg, u, c) == path.back());
      for (size_t k = 0; k + 1 < path.size(); ++k)
        CHECK(eg->points[path[k + 1]].time == eg->points[path[k]].time - 1);
    }
  CHECK_THROWS_AS(charge_path(*eg, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(charge_path(*eg, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(charge_path(*eg, -1, 1), std::out_of_range);
}

TEST_CASE("random flows: extraction, matching, contour, presence") {
  for (const char* preset : {"coop", "nec"}) {
    auto s = make_setup(preset, std::string(preset) == "coop" ? 0.25 : 0.15);
    const auto consts =
        contour_constants(s.model.maps[s.model.primary], s.polar);
    int certified = 0, live = 0;
    for (uint64_t seed = 1; seed <= 60; ++seed) {
      auto flow = sample_flow(s.model, seed, cube_box(2, -6, 6), 7);
      auto traj = maximal_trajectory(flow);
      auto eg = extract_explanation_graph(flow, s.chosen);
      CHECK(eg.has_value() == !traj.value({0, 0}, 0));
      if (!eg) {
        ++live;
        continue;
      }
      ++certified;
      CHECK(validate_explanation_graph(*eg).ok);
      CHECK(explanation_is_present(*eg, flow, s.chosen));

      const auto defects = defect_set(flow);
      for (int u : eg->sink_indices()) CHECK(defects.count(eg->points[u]) == 1);

      auto m = toom_matching(*eg);
      CHECK(validate_matching(*eg, m).ok);
      CHECK(m.rows.size() == eg->sink_indices().size());

      auto c = build_contour_from_matching(*eg, m);
      CHECK(validate_contour(c).ok);
      CHECK(is_present(c, flow, s.chosen));
      CHECK(c.psi.point(c.root) == SpaceTimePoint{{0, 0}, 0});

      // vertex images stay on explanation points, sinks on defects
      std::set<SpaceTimePoint> support(eg->points.begin(), eg->points.end());
      const auto cls = classify_vertices(c.graph);
      for (int v = 0; v < c.graph.num_vertices; ++v) {
        CHECK(support.count(c.psi.point(v)) == 1);
        if (cls[v].kind == VertexKind::Sink ||
            (cls[v].kind == VertexKind::Isolated && c.graph.num_vertices == 1))
          CHECK(defects.count(c.psi.point(v)) == 1);
      }

      CHECK(contour_zero_sum(c.graph, c.psi, s.polar) == Rational(0));
      // the root component can shed sinks whose matching row is an isolated
      // point, so the contour may certify fewer defects than the graph holds
      const auto counts = contour_counts(c);
      CHECK(counts.n_star >= 1);
      CHECK(counts.n_star <= static_cast<int>(eg->sink_indices().size()));
      CHECK(edge_bound_holds(counts.n_e, counts.n_star, consts.eps, consts.R));
    }
    CHECK(certified > 5);
    CHECK(live > 5);
  }
}

TEST_CASE("two-charge cycles are strongly present") {
  auto s = make_setup("coop", 0.25);
  int certified = 0;
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    auto flow = sample_flow(s.model, seed, cube_box(2, -6, 6), 7);
    auto traj = maximal_trajectory(flow);
    if (traj.value({0, 0}, 0)) continue;
    ++certified;
    auto cyc = build_cycle_loop_erasure(flow, s.chosen);
    CHECK(validate_cycle(cyc).ok);
    auto c = cycle_to_contour(cyc);
    CHECK(validate_contour(c).ok);
    CHECK(is_present(c, flow, s.chosen));
    CHECK(is_strongly_present(c, flow, s.chosen));
    CHECK(contour_zero_sum(c.graph, c.psi, s.polar) == Rational(0));

    const auto defects = defect_set(flow);
    for (const auto& p : cyc.points)
      if (defects.count(p) == 0) {
        // non-defective letters are never cyclic minima in the final word
        const auto& pts = cyc.points;
        for (size_t k = 0; k < pts.size(); ++k) {
          if (!(pts[k] == p)) continue;
          const auto& prev = pts[(k + pts.size() - 1) % pts.size()];
          const auto& next = pts[(k + 1) % pts.size()];
          CHECK((prev.time <= pts[k].time || next.time <= pts[k].time));
        }
      }
  }
  CHECK(certified > 5);

  auto nec = make_setup("nec", 0.15);
  auto flow = sample_flow(nec.model, 3, cube_box(2, -4, 4), 5);
  CHECK_THROWS_AS(build_cycle_loop_erasure(flow, nec.chosen),
                  std::invalid_argument);
}

TEST_CASE("seed cycles trace the slab rectangle") {
  const SiteVector j1{0, 0}, j2{0, 1};
  CHECK_THROWS_AS(seed_cycle(-1, j1, j2), std::invalid_argument);
  CHECK_THROWS_AS(seed_cycle(1, {0}, j2), std::invalid_argument);

  auto trivial = seed_cycle(0, j1, j2);
  CHECK(trivial.points.size() == 1);
  CHECK(trivial.length() == 0);

  auto one = seed_cycle(1, j1, j2);
  REQUIRE(one.points.size() == 4);
  CHECK(validate_cycle(one).ok);
  CHECK(one.points[0] == SpaceTimePoint{{0, 0}, 0});
  CHECK(one.points[1] == SpaceTimePoint{j1, -1});
  CHECK(one.points[2] == SpaceTimePoint{{0, 0}, 0});
  CHECK(one.points[3] == SpaceTimePoint{j2, -1});

  for (int r = 2; r <= 5; ++r) {
    auto cyc = seed_cycle(r, j1, j2);
    CHECK(static_cast<int>(cyc.points.size()) == 4 * r);
    CHECK(validate_cycle(cyc).ok);
    int minima = 0;
    for (size_t k = 0; k < cyc.points.size(); ++k) {
      const int t = cyc.points[k].time;
      const int prev = cyc.points[(k + cyc.points.size() - 1) %
                                  cyc.points.size()].time;
      const int next = cyc.points[(k + 1) % cyc.points.size()].time;
      if (prev > t && next > t) {
        ++minima;
        CHECK(t == -r);
      }
    }
    CHECK(minima == r + 1);
  }
}

TEST_CASE("seeded exploration under a defect-free slab") {
  auto s = make_setup("coop", 0.3);
  const int slab = 3;
  const SiteVector j2 = s.chosen[1][1][0];
  int certified = 0;
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    auto flow = sample_flow(s.model, seed, cube_box(2, -7, 7), 8);
    // the seeded route needs the head pyramid zero at the slab floor; plant
    // a defect segment one plane lower so erosion guarantees that base
    for (int k = 0; k <= slab + 1; ++k) {
      SiteVector site{k * j2[0], k * j2[1]};
      const long long plane = (-slab - 1) - (flow.t_min() + 1);
      flow.plane_maps[plane * flow.space.volume() +
                      flow.space.index_of(site)] = 0;
    }
    auto mod = modified_flow(flow, slab);
    auto traj = maximal_trajectory(mod);
    REQUIRE(!traj.value({0, 0}, 0));
    ++certified;
    auto cyc = build_cycle_loop_erasure(mod, s.chosen, slab);
    CHECK(validate_cycle(cyc).ok);
    auto c = cycle_to_contour(cyc);
    CHECK(is_strongly_present(c, mod, s.chosen));

    // minima live below the slab, sources at its bottom plane or lower
    for (size_t k = 0; k < cyc.points.size(); ++k) {
      const auto& pts = cyc.points;
      const int t = pts[k].time;
      const int prev = pts[(k + pts.size() - 1) % pts.size()].time;
      const int next = pts[(k + 1) % pts.size()].time;
      if (prev > t && next > t) CHECK(t <= -slab);
      if (prev < t && next < t && k != 0) CHECK(t <= 1 - slab);
    }
  }
  CHECK(certified == 40);
}

TEST_CASE("forks only keeps presence and sink count") {
  auto s = make_setup("nec", 0.15);
  int checked = 0;
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    auto flow = sample_flow(s.model, seed, cube_box(2, -6, 6), 7);
    auto eg = extract_explanation_graph(flow, s.chosen);
    if (!eg) continue;
    auto c = build_contour_from_matching(*eg, toom_matching(*eg));
    auto f = forks_only(c);
    CHECK(validate_contour(f).ok);
    CHECK(is_present(f, flow, s.chosen));
    CHECK(contour_counts(f).sinks == contour_counts(c).sinks);

    const auto cls = classify_vertices(f.graph);
    int non_root_sources = 0;
    for (int v = 0; v < f.graph.num_vertices; ++v) {
      if (v == f.root || cls[v].kind != VertexKind::Source) continue;
      ++non_root_sources;
      std::set<SpaceTimePoint> images;
      for (const auto& es : f.graph.edges)
        for (const auto& [a, b] : es)
          if (a == v) images.insert(f.psi.point(b));
      CHECK(images.size() == 2);
    }
    CHECK(count_forks(f) >= non_root_sources);
    if (++checked == 12) break;
  }
  CHECK(checked > 5);
}

TEST_CASE("continuous extraction certifies event trajectories") {
  ChargeAssignment chosen = {ChargeSets(2), sexual_contact_charge_sets(2)};
  int certified = 0, live = 0;
  for (uint64_t seed = 1; seed <= 25; ++seed) {
    for (double lambda : {5.0, 12.0}) {
      auto traj =
          sample_ips_trajectory(2, lambda, cube_box(2, -5, 5), -10.0, seed);
      auto trace = continuous_extract_trace(traj, chosen);
      CHECK(trace.has_value() == !traj.value_at({0, 0}, 0.0));
      if (!trace) {
        ++live;
        continue;
      }
      ++certified;
      REQUIRE_FALSE(trace->closure.empty());
      CHECK(trace->closure.front().site == SiteVector{0, 0});
      for (size_t k = 0; k + 1 < trace->closure.size(); ++k)
        CHECK(trace->closure[k].time > trace->closure[k + 1].time);
      CHECK(trace->closure.back().kind == 0);

      CHECK(validate_explanation_graph(trace->graph).ok);
      CHECK(validate_contour(trace->discrete).ok);
      const auto& cont = trace->contour;
      CHECK(validate_continuous_contour(cont).ok);
      CHECK(cont.psi.site[cont.root] == SiteVector{0, 0});
      CHECK(cont.psi.time[cont.root] == 0.0);
      CHECK(continuous_is_present(cont, traj, chosen));
      CHECK(continuous_is_strongly_present(cont, traj, chosen));
    }
  }
  CHECK(certified > 5);
  CHECK(live > 5);
}

TEST_CASE("continuous extraction needs a root inside the box") {
  ChargeAssignment chosen = {ChargeSets(2), sexual_contact_charge_sets(2)};
  auto traj = sample_ips_trajectory(2, 5.0, cube_box(2, -2, 2), -4.0, 9);
  CHECK_THROWS_AS(continuous_extract(traj, chosen, SiteVector{7, 0}),
                  std::out_of_range);
  CHECK_THROWS_AS(continuous_extract(traj, {ChargeSets(2)}, SiteVector{0, 0}),
                  std::invalid_argument);
}

TEST_CASE("minimal explanations on a tiny window") {
  // every cell defective: the root alone explains itself
  auto all = make_model("all-defects", {builtin_map("zero", 2),
                                        builtin_map("coop", 2)},
                        {1.0, 0.0}, 1);
  auto flow = sample_flow(all, 5, make_box({0, 0}, {1, 1}), 2);
  auto summary = minimal_explanations_search(flow);
  REQUIRE(summary.explanations.size() == 1);
  CHECK(summary.explanations[0].cells ==
        std::vector<SpaceTimePoint>{{{0, 0}, 0}});
  CHECK(summary.explanations[0].defects == std::vector<int>{0});
  CHECK(summary.explanations[0].defect_removal_critical);
  CHECK(summary.by_defects == std::vector<long long>{0, 1});

  // no defects and a shallow window: nothing explains the root
  auto clean = preset_model("coop", 2, 0.0);
  auto cflow = sample_flow(clean, 5, make_box({0, 0}, {1, 1}), 2);
  auto csummary = minimal_explanations_search(cflow);
  CHECK(csummary.explanations.empty());
  CHECK(csummary.by_defects.empty());

  // both dual options of the root are live when all three cells defect
  auto model = preset_model("coop", 2, 0.0);
  auto pflow = sample_flow(model, 5, make_box({0, 0}, {1, 1}), 2);
  for (const SiteVector& site :
       {SiteVector{0, 0}, SiteVector{0, 1}, SiteVector{1, 0}})
    pflow.plane_maps[pflow.space.index_of(site)] = 0;
  auto psummary = minimal_explanations_search(pflow);
  REQUIRE(psummary.explanations.size() == 2);
  for (const auto& me : psummary.explanations) {
    CHECK(me.cells.size() == 3);
    CHECK(me.defects.size() == 2);
    // sorted site-major: the origin column's defect precedes the root
    CHECK(me.cells.front() == SpaceTimePoint{{0, 0}, -1});
    CHECK(me.defect_removal_critical);
  }
  CHECK(psummary.by_defects == std::vector<long long>{0, 0, 2});

  // oversized windows are rejected up front
  auto big = sample_flow(model, 5, cube_box(2, -3, 3), 4);
  CHECK_THROWS_AS(minimal_explanations_search(big), std::invalid_argument);
}

TEST_CASE("a ladder with a non-critical defect") {
  // column flow: one live column of height four, everything else constant one
  auto model = make_model("nec-ladder",
                          {builtin_map("zero", 2), builtin_map("nec", 2),
                           builtin_map("one", 2)},
                          {0.25, 0.5, 0.25}, 1);
  auto flow = sample_flow(model, 11, make_box({0, 0}, {0, 3}), 4);
  for (size_t i = 0; i < flow.plane_maps.size(); ++i) flow.plane_maps[i] = 2;
  auto put = [&](int y, long long t, uint8_t k) {
    const long long plane = t - (flow.t_min() + 1);
    flow.plane_maps[plane * flow.space.volume() +
                    flow.space.index_of({0, y})] = k;
  };
  put(0, 0, 1);                      // root
  put(0, -1, 1), put(1, -1, 1);      // two live cells
  put(0, -2, 1), put(2, -2, 1);      // live flanks
  put(1, -2, 0);                     // the non-critical defect
  for (int y = 0; y <= 3; ++y) put(y, -3, 0);

  auto summary = minimal_explanations_search(flow);
  REQUIRE(summary.explanations.size() == 1);
  const auto& me = summary.explanations[0];
  CHECK(me.cells.size() == 10);
  CHECK(me.defects.size() == 5);
  CHECK_FALSE(me.defect_removal_critical);
  CHECK(summary.by_defects == std::vector<long long>{0, 0, 0, 0, 0, 1});

  // the same certificate read back as an explanation graph
  auto polar = find_polar(builtin_map("nec", 2));
  REQUIRE(polar.has_value());
  auto chosen = assign_charges(model, *polar);
  CHECK(satisfies_wlog(model, chosen));
  auto eg = explanation_graph_from_minimal(me, flow, chosen);
  CHECK(validate_explanation_graph(eg).ok);
  CHECK(explanation_is_present(eg, flow, chosen));
}

TEST_CASE("wlog reduction drops unused minimal sets") {
  std::vector<std::vector<SiteVector>> fat_sets = {
      {SiteVector{0, 0}},
      {SiteVector{0, 1}, SiteVector{1, 0}},
      {SiteVector{5, 5}, SiteVector{5, 6}}};
  auto fat = make_map(2, fat_sets, "fat-coop");
  auto model =
      make_model("fat", {builtin_map("zero", 2), fat}, {0.3, 0.7}, 1);
  ChargeAssignment chosen = {
      ChargeSets(2),
      ChargeSets{{SiteVector{0, 0}}, {SiteVector{0, 1}, SiteVector{1, 0}}}};
  CHECK_FALSE(satisfies_wlog(model, chosen));

  auto flow = sample_flow(model, 23, cube_box(2, -3, 3), 4);
  auto red = wlog_reduction(flow, chosen);
  CHECK(red.model.maps[1].minimal_sets == builtin_map("coop", 2).minimal_sets);
  CHECK(satisfies_wlog(red.model, chosen));
  CHECK(red.model.name == flow.model.name);

  // zeros of the original trajectory survive the reduction
  auto t0 = maximal_trajectory(flow);
  auto t1 = maximal_trajectory(red);
  for (int x = -3; x <= 3; ++x)
    for (int y = -3; y <= 3; ++y)
      for (long long t = -3; t <= 0; ++t)
        if (!t0.value({x, y}, t)) CHECK_FALSE(t1.value({x, y}, t));

  CHECK_THROWS_AS(wlog_reduction(flow, ChargeAssignment{ChargeSets(2)}),
                  std::invalid_argument);
}

TEST_CASE("soundness chain on small windows") {
  auto s = make_setup("coop", 0.3);
  int zeros = 0, ones = 0;
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    auto flow = sample_flow(s.model, seed, cube_box(2, -1, 1), 3);
    auto traj = maximal_trajectory(flow);
    const bool zero = !traj.value({0, 0}, 0);
    auto eg = extract_explanation_graph(flow, s.chosen);
    auto summary = minimal_explanations_search(flow);
    CHECK(eg.has_value() == zero);
    CHECK(!summary.explanations.empty() == zero);
    if (!zero) {
      ++ones;
      continue;
    }
    ++zeros;
    auto c = build_contour_from_matching(*eg, toom_matching(*eg));
    CHECK(is_present(c, flow, s.chosen));
    auto cyc = build_cycle_loop_erasure(flow, s.chosen);
    CHECK(is_strongly_present(cycle_to_contour(cyc), flow, s.chosen));
    for (const auto& me : summary.explanations) {
      CHECK(std::count(me.cells.begin(), me.cells.end(),
                       SpaceTimePoint{{0, 0}, 0}) == 1);
      for (size_t k = 0; k < me.cells.size(); ++k)
        CHECK(me.duals[k].empty() ==
              (defect_set(flow).count(me.cells[k]) == 1));
    }
  }
  CHECK(zeros > 5);
  CHECK(ones > 5);
}
