#include <doctest.h>

#include <random>
#include <set>

#include "toomlab/lattice.hpp"

using namespace toomlab;

namespace {

// scalar reference for apply_map_everywhere
Configuration apply_reference(const MonotonicMap& map,
                              const Configuration& x) {
  Configuration out = make_configuration(x.box, x.boundary, false);
  for (long long i = 0; i < x.box.volume(); ++i) {
    SiteVector site = x.box.site_at(i);
    bool v = eval_map(map, [&](const SiteVector& j) {
      return x.get(site_add(site, j));
    });
    out.set(site, v);
  }
  return out;
}

bool config_equal(const Configuration& a, const Configuration& b) {
  for (long long i = 0; i < a.box.volume(); ++i) {
    SiteVector s = a.box.site_at(i);
    if (a.get(s) != b.get(s)) return false;
  }
  return true;
}

// random monotone truth table: union of up-sets of random seeds
std::vector<uint8_t> random_monotone_table(std::mt19937& rng, int nbits,
                                           int nseeds) {
  std::vector<uint8_t> t(size_t{1} << nbits, 0);
  std::uniform_int_distribution<uint32_t> dist(0, (1u << nbits) - 1);
  for (int s = 0; s < nseeds; ++s) {
    uint32_t seed = dist(rng);
    for (uint32_t m = 0; m < (1u << nbits); ++m)
      if ((m & seed) == seed) t[m] = 1;
  }
  return t;
}

}  // namespace

TEST_CASE("builtin constant and identity maps") {
  auto zero = builtin_map("zero", 2);
  auto one = builtin_map("one", 2);
  auto id = builtin_map("identity", 2);
  CHECK(zero.is_zero());
  CHECK(one.is_one());
  CHECK(zero.minimal_sets.empty());
  REQUIRE(one.minimal_sets.size() == 1);
  CHECK(one.minimal_sets[0].empty());
  REQUIRE(id.minimal_sets.size() == 1);
  CHECK(id.minimal_sets[0] == std::vector<SiteVector>{SiteVector{0, 0}});

  // duals: Z(zero) = {{}}, Z(one) = {}, Z(id) = {{0}}
  CHECK(dual_family(zero) == std::vector<std::vector<SiteVector>>{{}});
  CHECK(dual_family(one).empty());
  CHECK(dual_family(id) ==
        std::vector<std::vector<SiteVector>>{{SiteVector{0, 0}}});

  auto always_false = [](const SiteVector&) { return false; };
  auto always_true = [](const SiteVector&) { return true; };
  CHECK(!eval_map(zero, always_true));
  CHECK(eval_map(one, always_false));
}

TEST_CASE("builtin nec, coop, nn families") {
  auto nec = builtin_map("nec", 2);
  REQUIRE(nec.minimal_sets.size() == 3);
  // canonical order: {(0,0),(0,1)}, {(0,0),(1,0)}, {(0,1),(1,0)}
  CHECK(nec.minimal_sets[0] ==
        std::vector<SiteVector>{SiteVector{0, 0}, SiteVector{0, 1}});
  CHECK(nec.minimal_sets[1] ==
        std::vector<SiteVector>{SiteVector{0, 0}, SiteVector{1, 0}});
  CHECK(nec.minimal_sets[2] ==
        std::vector<SiteVector>{SiteVector{0, 1}, SiteVector{1, 0}});
  // NEC is self-dual
  CHECK(dual_family(nec) == nec.minimal_sets);

  auto coop2 = builtin_map("coop", 2);
  REQUIRE(coop2.minimal_sets.size() == 2);
  CHECK(coop2.minimal_sets[0] == std::vector<SiteVector>{SiteVector{0, 0}});
  CHECK(coop2.minimal_sets[1] ==
        std::vector<SiteVector>{SiteVector{0, 1}, SiteVector{1, 0}});
  CHECK(dual_family(coop2) ==
        std::vector<std::vector<SiteVector>>{
            {SiteVector{0, 0}, SiteVector{0, 1}},
            {SiteVector{0, 0}, SiteVector{1, 0}}});

  auto coop3 = builtin_map("coop", 3);
  REQUIRE(coop3.minimal_sets.size() == 2);
  CHECK(coop3.minimal_sets[1].size() == 3);

  auto nn = builtin_map("nn", 2);
  CHECK(nn.minimal_sets.size() == 10);  // all 3-subsets of the 5-point cross
  CHECK(dual_family(nn) == nn.minimal_sets);  // majority is self-dual

  auto uns = builtin_map("unstable-example", 2, 2);
  REQUIRE(uns.minimal_sets.size() == 3);
  CHECK(uns.minimal_sets[0].size() + uns.minimal_sets[1].size() +
            uns.minimal_sets[2].size() ==
        2 + 2 + 2 * 5);
}

TEST_CASE("make_map canonicalizes and rejects non-antichains") {
  auto m = make_map(1, {{SiteVector{2}, SiteVector{0}}, {SiteVector{1}}});
  CHECK(m.minimal_sets[0] == std::vector<SiteVector>{SiteVector{0},
                                                     SiteVector{2}});
  CHECK_THROWS_AS(make_map(1, {{SiteVector{0}}, {SiteVector{0},
                                                 SiteVector{1}}}),
                  std::invalid_argument);
}

TEST_CASE("eval agreement between one-set and dual forms") {
  std::mt19937 rng(7);
  std::vector<MonotonicMap> maps = {
      builtin_map("nec"),    builtin_map("coop", 2), builtin_map("nn"),
      builtin_map("coop", 3), builtin_map("identity"),
      builtin_map("zero"),   builtin_map("one")};
  for (const auto& map : maps) {
    auto pts = map.support();
    for (int trial = 0; trial < 1000; ++trial) {
      std::set<SiteVector> ones;
      for (const auto& q : pts)
        if (rng() & 1) ones.insert(q);
      auto x = [&](const SiteVector& q) { return ones.count(q) > 0; };
      CHECK(eval_map(map, x) == eval_map_via_dual(map, x));
    }
  }
}

TEST_CASE("dual is an involution") {
  std::vector<MonotonicMap> maps = {builtin_map("nec"), builtin_map("coop", 2),
                                    builtin_map("coop", 4), builtin_map("nn"),
                                    builtin_map("zero"), builtin_map("one"),
                                    builtin_map("identity")};
  std::mt19937 rng(11);
  std::vector<SiteVector> domain = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int trial = 0; trial < 50; ++trial) {
    auto table = random_monotone_table(rng, 4, 1 + trial % 3);
    maps.push_back(minimal_sets_from_local_function(2, domain, table));
  }
  for (const auto& map : maps) {
    auto z = dual_family(map);
    MonotonicMap zmap;
    zmap.dimension = map.dimension;
    zmap.minimal_sets = z;
    CHECK(dual_family(zmap) == map.minimal_sets);
  }
}

TEST_CASE("minimal_sets_from_local_function recovers tables") {
  std::mt19937 rng(3);
  std::vector<SiteVector> domain = {{0}, {1}, {2}, {-1}};
  for (int trial = 0; trial < 100; ++trial) {
    auto table = random_monotone_table(rng, 4, 1 + trial % 4);
    auto map = minimal_sets_from_local_function(1, domain, table);
    for (uint32_t m = 0; m < 16; ++m) {
      auto x = [&](const SiteVector& q) {
        for (size_t k = 0; k < domain.size(); ++k)
          if (domain[k] == q) return (m >> k & 1) != 0;
        return false;
      };
      CHECK(eval_map(map, x) == (table[m] != 0));
    }
  }
}

TEST_CASE("minimal_sets_from_local_function rejects non-monotone tables") {
  std::vector<SiteVector> domain = {{0}, {1}};
  // value 1 on {(0)} but 0 on {(0),(1)}
  std::vector<uint8_t> table = {0, 1, 0, 0};
  try {
    minimal_sets_from_local_function(1, domain, table);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("not monotone") != std::string::npos);
    CHECK(msg.find("(0)") != std::string::npos);
    CHECK(msg.find("(1)") != std::string::npos);
  }
}

TEST_CASE("json round trip") {
  for (const char* name : {"nec", "coop", "nn", "zero", "one"}) {
    auto m = builtin_map(name, 2);
    auto m2 = map_from_json(map_to_json(m));
    CHECK(m2 == m);
    CHECK(m2.name == m.name);
  }
}

TEST_CASE("configuration get/set and boundaries") {
  auto box = make_box({-2, -1}, {3, 2});
  auto c = make_configuration(box, Boundary::AllOnes, true);
  CHECK(c.count_ones_in_box() == box.volume());
  c.set({0, 0}, false);
  CHECK(!c.get({0, 0}));
  CHECK(c.count_ones_in_box() == box.volume() - 1);
  CHECK(c.get({100, 100}));  // all-ones outside

  auto z = make_configuration(box, Boundary::AllZeros, false);
  CHECK(!z.get({100, 100}));

  auto t = make_configuration(box, Boundary::Torus, false);
  t.set({-2, -1}, true);
  CHECK(t.get({4, 3}));  // wraps to (-2,-1)
}

TEST_CASE("apply_map_everywhere matches scalar reference") {
  std::mt19937 rng(19);
  std::vector<MonotonicMap> maps1 = {builtin_map("identity", 1),
                                     builtin_map("coop", 1)};
  maps1.push_back(make_map(1, {{SiteVector{-1}, SiteVector{1}},
                               {SiteVector{0}}}));
  std::vector<MonotonicMap> maps2 = {builtin_map("nec"), builtin_map("coop", 2),
                                     builtin_map("nn"), builtin_map("swc")};
  for (auto boundary :
       {Boundary::AllOnes, Boundary::AllZeros, Boundary::Torus}) {
    for (int W : {1, 5, 63, 64, 65, 100}) {
      auto box = make_box({0}, {W - 1});
      auto c = make_configuration(box, boundary, false);
      for (long long i = 0; i < box.volume(); ++i)
        c.set(box.site_at(i), rng() & 1);
      for (const auto& m : maps1)
        CHECK(config_equal(apply_map_everywhere(m, c), apply_reference(m, c)));
    }
    for (auto [w, h] : {std::pair{7, 5}, {64, 3}, {65, 4}, {128, 2}}) {
      auto box = make_box({-1, -2}, {w - 2, h - 3});
      auto c = make_configuration(box, boundary, false);
      for (long long i = 0; i < box.volume(); ++i)
        c.set(box.site_at(i), rng() & 1);
      for (const auto& m : maps2)
        CHECK(config_equal(apply_map_everywhere(m, c), apply_reference(m, c)));
    }
  }
}

TEST_CASE("single zeros are erased in one step") {
  auto box = cube_box(2, -4, 4);
  auto c = make_configuration(box, Boundary::AllOnes, true);
  c.set({0, 0}, false);
  auto n1 = apply_map_everywhere(builtin_map("nec"), c);
  CHECK(n1.count_ones_in_box() == box.volume());
  auto c2 = make_configuration(box, Boundary::AllOnes, true);
  c2.set({0, 0}, false);
  auto n2 = apply_map_everywhere(builtin_map("coop", 2), c2);
  CHECK(n2.count_ones_in_box() == box.volume());
}
