#include <doctest.h>

#include <random>

#include "toomlab/eroder.hpp"

using namespace toomlab;

namespace {

Rational rq(long long n, long long d = 1) { return Rational(n) / d; }

Configuration zero_block(int dimension, int side) {
  SiteVector lo(dimension, 0), hi(dimension, side - 1);
  auto cfg = make_configuration(make_box(lo, hi), Boundary::AllOnes, true);
  for (long long i = 0; i < cfg.box.volume(); ++i)
    cfg.set(cfg.box.site_at(i), false);
  return cfg;
}

MonotonicMap random_monotone(std::mt19937& rng, int dimension,
                             const std::vector<SiteVector>& domain) {
  const size_t n = domain.size();
  std::vector<uint8_t> table(size_t{1} << n, 0);
  std::uniform_int_distribution<uint32_t> pick(0, (1u << n) - 1);
  int seeds = 1 + static_cast<int>(rng() % 3);
  for (int s = 0; s < seeds; ++s) {
    uint32_t base = pick(rng);
    for (uint32_t m = 0; m < (1u << n); ++m)
      if ((m & base) == base) table[m] = 1;
  }
  return minimal_sets_from_local_function(dimension, domain, table, "rnd");
}

}  // namespace

TEST_CASE("simplex on small programs") {
  {
    LinearProgram lp;
    lp.nvars = 1;
    lp.c = {rq(1)};
    lp.add_le({rq(1)}, rq(3));
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == rq(3));
    CHECK(r.x[0] == rq(3));
  }
  {
    LinearProgram lp;
    lp.nvars = 2;
    lp.c = {rq(1), rq(1)};
    lp.add_le({rq(1), rq(2)}, rq(4));
    lp.add_le({rq(3), rq(1)}, rq(6));
    lp.add_le({rq(-1), rq(0)}, rq(0));
    lp.add_le({rq(0), rq(-1)}, rq(0));
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == rq(14, 5));
    CHECK(r.x[0] == rq(8, 5));
    CHECK(r.x[1] == rq(6, 5));
  }
  {
    // negative rhs forces a phase-1 start; optimum at x = -5
    LinearProgram lp;
    lp.nvars = 1;
    lp.c = {rq(1)};
    lp.add_le({rq(1)}, rq(-5));
    lp.add_le({rq(-1)}, rq(10));
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == rq(-5));
    CHECK(r.x[0] == rq(-5));
  }
  {
    LinearProgram lp;
    lp.nvars = 1;
    lp.c = {rq(0)};
    lp.add_le({rq(1)}, rq(1));
    lp.add_le({rq(-1)}, rq(-3));
    CHECK(solve_lp(lp).status == LpStatus::Infeasible);
  }
  {
    LinearProgram lp;
    lp.nvars = 1;
    lp.c = {rq(1)};
    lp.add_le({rq(-1)}, rq(0));
    CHECK(solve_lp(lp).status == LpStatus::Unbounded);
  }
  {
    LinearProgram lp;
    lp.nvars = 2;
    lp.c = {rq(1), rq(1)};
    lp.add_eq({rq(1), rq(1)}, rq(2));
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == rq(2));
  }
  {
    // redundant equalities keep an artificial basic at zero
    LinearProgram lp;
    lp.nvars = 2;
    lp.c = {rq(1), rq(0)};
    lp.add_eq({rq(1), rq(1)}, rq(2));
    lp.add_eq({rq(2), rq(2)}, rq(4));
    lp.add_le({rq(1), rq(0)}, rq(7));
    auto r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == rq(7));
    CHECK(r.x[0] == rq(7));
    CHECK(r.x[1] == rq(-5));
  }
}

TEST_CASE("eroder classification of the built-in maps") {
  CHECK(is_eroder(builtin_map("nec")));
  CHECK(is_eroder(builtin_map("nwc")));
  CHECK(is_eroder(builtin_map("swc")));
  CHECK(is_eroder(builtin_map("sec")));
  for (int d = 1; d <= 4; ++d) CHECK(is_eroder(builtin_map("coop", d)));
  CHECK_FALSE(is_eroder(builtin_map("nn")));
  CHECK_FALSE(is_eroder(builtin_map("identity", 2)));
  CHECK(is_eroder(builtin_map("unstable-example", 2, 2)));
  CHECK_THROWS_AS(is_eroder(builtin_map("zero", 2)), std::invalid_argument);
  CHECK_THROWS_AS(is_eroder(builtin_map("one", 2)), std::invalid_argument);
}

TEST_CASE("polar function for the cooperative map") {
  auto map = builtin_map("coop", 2);
  auto polar = find_polar(map);
  REQUIRE(polar.has_value());
  CHECK(polar->sigma == 2);
  REQUIRE(polar->chosen_sets.size() == 2);
  CHECK(polar->chosen_sets[0] ==
        std::vector<SiteVector>{SiteVector{0, 0}});
  CHECK(polar->chosen_sets[1] ==
        (std::vector<SiteVector>{SiteVector{0, 1}, SiteVector{1, 0}}));
  CHECK(polar->coeffs[0] == (std::vector<Rational>{rq(-1), rq(-1)}));
  CHECK(polar->coeffs[1] == (std::vector<Rational>{rq(1), rq(1)}));

  auto cc = contour_constants(map, *polar);
  CHECK(cc.eps_s == (std::vector<Rational>{rq(0), rq(1)}));
  CHECK(cc.eps == rq(1));
  CHECK(cc.R_s == (std::vector<Rational>{rq(1), rq(0)}));
  CHECK(cc.R == rq(1));
  CHECK(cc.Rpp_s == (std::vector<Rational>{rq(1), rq(0)}));
  CHECK(cc.Rpp == rq(1));
  CHECK(cc.M == 3);
  CHECK(cc.M1 == 1);
  CHECK(cc.M2 == 2);

  auto sp = edge_speeds(map, *polar);
  CHECK(sp.delta_s == (std::vector<Rational>{rq(0), rq(1)}));
  CHECK(sp.total == rq(1));
}

TEST_CASE("polar function for the north-east-center map") {
  auto map = builtin_map("nec");
  auto polar = find_polar(map);
  REQUIRE(polar.has_value());
  CHECK(polar->sigma == 3);
  CHECK(polar->chosen_sets[0] ==
        (std::vector<SiteVector>{SiteVector{0, 0}, SiteVector{0, 1}}));
  CHECK(polar->chosen_sets[1] ==
        (std::vector<SiteVector>{SiteVector{0, 0}, SiteVector{1, 0}}));
  CHECK(polar->chosen_sets[2] ==
        (std::vector<SiteVector>{SiteVector{0, 1}, SiteVector{1, 0}}));
  CHECK(polar->coeffs[0] == (std::vector<Rational>{rq(-1), rq(0)}));
  CHECK(polar->coeffs[1] == (std::vector<Rational>{rq(0), rq(-1)}));
  CHECK(polar->coeffs[2] == (std::vector<Rational>{rq(1), rq(1)}));

  auto cc = contour_constants(map, *polar);
  CHECK(cc.eps_s == (std::vector<Rational>{rq(0), rq(0), rq(1)}));
  CHECK(cc.eps == rq(1));
  CHECK(cc.R_s == (std::vector<Rational>{rq(1), rq(1), rq(0)}));
  CHECK(cc.R == rq(2));
  CHECK(cc.M == 3);

  auto sp = edge_speeds(map, *polar);
  CHECK(sp.delta_s == (std::vector<Rational>{rq(0), rq(0), rq(1)}));
}

TEST_CASE("polar functions for higher-dimensional cooperative maps") {
  for (int d = 1; d <= 4; ++d) {
    CAPTURE(d);
    auto map = builtin_map("coop", d);
    auto polar = find_polar(map);
    REQUIRE(polar.has_value());
    CHECK(polar->sigma == 2);
    auto cc = contour_constants(map, *polar);
    CHECK(cc.eps > 0);
    CHECK(cc.M == d + 1);
    CHECK(cc.M1 == 1);
    CHECK(cc.M2 == d);
  }
}

TEST_CASE("polar existence agrees with the eroder criterion") {
  for (const char* name : {"nec", "nwc", "swc", "sec", "nn", "coop"}) {
    CAPTURE(name);
    auto map = builtin_map(name);
    CHECK(find_polar(map).has_value() == is_eroder(map));
  }
  CHECK_FALSE(find_polar(builtin_map("identity", 2)).has_value());

  std::mt19937 rng(20260817);
  std::vector<SiteVector> line = {{-1}, {0}, {1}};
  for (int t = 0; t < 20; ++t) {
    auto map = random_monotone(rng, 1, line);
    if (map.is_constant()) continue;
    CAPTURE(map.minimal_sets.size());
    CHECK(find_polar(map).has_value() == is_eroder(map));
  }
  std::vector<SiteVector> plane = {{0, 0}, {1, 0}, {0, 1}, {-1, -1}};
  for (int t = 0; t < 6; ++t) {
    auto map = random_monotone(rng, 2, plane);
    if (map.is_constant()) continue;
    CHECK(find_polar(map).has_value() == is_eroder(map));
  }
}

TEST_CASE("erosion oracle on finite islands") {
  auto nec = builtin_map("nec");
  auto nec_polar = find_polar(nec);
  auto rep = erosion_oracle(nec, zero_block(2, 6), 100, nec_polar);
  CHECK(rep.eroded);
  CHECK(rep.steps_taken <= 12);
  REQUIRE(rep.polar_certified.has_value());
  CHECK(*rep.polar_certified);

  auto coop = builtin_map("coop", 2);
  auto coop_polar = find_polar(coop);
  rep = erosion_oracle(coop, zero_block(2, 6), 100, coop_polar);
  CHECK(rep.eroded);
  REQUIRE(rep.polar_certified.has_value());
  CHECK(*rep.polar_certified);

  for (int d = 1; d <= 4; ++d) {
    CAPTURE(d);
    rep = erosion_oracle(builtin_map("coop", d), zero_block(d, 4), 100);
    CHECK(rep.eroded);
  }

  // a 2x2 zero square is invariant under the five-point majority
  rep = erosion_oracle(builtin_map("nn"), zero_block(2, 2), 50);
  CHECK_FALSE(rep.eroded);
  rep = erosion_oracle(builtin_map("nn"), zero_block(2, 6), 50);
  CHECK_FALSE(rep.eroded);

  rep = erosion_oracle(builtin_map("identity", 2), zero_block(2, 2), 50);
  CHECK_FALSE(rep.eroded);

  // all-ones input erodes trivially in zero steps
  auto ones = make_configuration(cube_box(2, 0, 2), Boundary::AllOnes, true);
  rep = erosion_oracle(nec, ones, 10);
  CHECK(rep.eroded);
  CHECK(rep.steps_taken == 0);
}

TEST_CASE("toom operator") {
  auto nec = builtin_map("nec");
  CHECK(toom_operator({nec}) == nec);

  // zero map forces the AND branch to zero, leaving x(0) itself
  auto op = toom_operator({builtin_map("coop", 2), builtin_map("zero", 2)});
  CHECK(op == builtin_map("identity", 2));

  // the four corner majorities combine into a non-eroder
  auto mix = toom_operator({builtin_map("nec"), builtin_map("nwc"),
                            builtin_map("swc"), builtin_map("sec")});
  auto expected = make_map(
      2,
      {{SiteVector{0, 0}, SiteVector{0, 1}},
       {SiteVector{0, 0}, SiteVector{1, 0}},
       {SiteVector{0, -1}, SiteVector{0, 0}},
       {SiteVector{-1, 0}, SiteVector{0, 0}},
       {SiteVector{-1, 0}, SiteVector{0, -1}, SiteVector{0, 1},
        SiteVector{1, 0}}},
      "cross-majority");
  CHECK(mix == expected);
  CHECK_FALSE(is_eroder(mix));
  CHECK_FALSE(find_polar(mix).has_value());

  try {
    toom_operator({builtin_map("nn")}, 4);
    FAIL("expected domain-cap failure");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("5 sites") != std::string::npos);
  }
  CHECK_THROWS_AS(toom_operator({builtin_map("nec"), builtin_map("coop", 3)}),
                  std::invalid_argument);
}
