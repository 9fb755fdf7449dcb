#include "toomlab/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <stdexcept>
#include <thread>
#include <utility>

namespace toomlab {

namespace {

using Int = boost::multiprecision::cpp_int;

bool spatially_zero(const SiteVector& s) {
  return std::all_of(s.begin(), s.end(), [](int c) { return c == 0; });
}

int max_component(const std::vector<SiteVector>& b) {
  int m = 1;
  for (const auto& g : b)
    for (int c : g) m = std::max(m, std::abs(c));
  return m;
}

// One Euler-walk step: descending steps traverse an edge tail-to-head,
// ascending steps traverse one head-to-tail. opts lists the displacements
// the tail vertex may use.
struct StepPlan {
  bool down = false;
  const std::vector<SiteVector>* opts = nullptr;
};

using Found = std::map<CanonicalContour, ToomContour>;

template <typename Leaf>
void walk_dfs(const std::vector<StepPlan>& plan, int lip,
              std::vector<SpaceTimePoint>& pos, int k, const Leaf& leaf) {
  const int m = static_cast<int>(plan.size());
  if (k > m) {
    if (pos[m] == pos[0]) leaf();
    return;
  }
  const StepPlan& sp = plan[k - 1];
  const SpaceTimePoint& p = pos[k - 1];
  const int rem = m - k;
  for (const SiteVector& g : *sp.opts) {
    SpaceTimePoint q;
    q.site = sp.down ? site_add(p.site, g) : site_sub(p.site, g);
    q.time = p.time + (sp.down ? -1 : 1);
    if (q.time > 0 || -q.time > rem) continue;
    if (q.time == 0 && !spatially_zero(q.site)) continue;
    bool fits = true;
    for (int c : q.site)
      if (std::abs(c) > rem * lip) {
        fits = false;
        break;
      }
    if (!fits) continue;
    pos[k] = q;
    walk_dfs(plan, lip, pos, k + 1, leaf);
  }
}

// ---- two charges: contours are closed cycles with one walk each ----

std::vector<uint32_t> cycle_words(int n) {
  const int m = 2 * n;
  std::vector<uint32_t> words;
  for (uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (std::popcount(mask) != n) continue;          // bit set = ascending
    if (mask & 1u) continue;                         // starts descending
    if (!(mask >> (m - 1) & 1u)) continue;           // ends ascending
    int t = 0;
    bool ok = true;
    for (int k = 0; k < m; ++k) {
      t += (mask >> k & 1u) ? 1 : -1;
      if (t > 0) {
        ok = false;
        break;
      }
    }
    if (ok) words.push_back(mask);
  }
  return words;
}

std::vector<StepPlan> cycle_plan(uint32_t word, int m, const ChargeSets& sets,
                                 const std::vector<SiteVector>& b,
                                 bool crossed) {
  const auto up = [word](int k) { return (word >> k & 1u) != 0; };
  // position roles between steps: DD internal-1, UU internal-2, UD source
  std::vector<StepPlan> plan(m);
  for (int k = 1; k <= m; ++k) {
    if (!up(k - 1)) {  // descending, charge 1; tail is position k-1
      const bool star = k - 1 == 0 || !up(k - 2);
      plan[k - 1] = {true, star ? &sets[0] : (crossed ? &sets[1] : &b)};
    } else {  // ascending, charge 2; tail is position k
      const bool star = k == m || up(k);
      plan[k - 1] = {false, star ? &sets[1] : (crossed ? &sets[0] : &b)};
    }
  }
  return plan;
}

Found cycle_enumerate(const std::vector<uint32_t>& words, size_t begin,
                      size_t end, int m, const MonotonicMap& map,
                      const ChargeSets& sets,
                      const std::vector<SiteVector>& b, bool crossed,
                      const SpaceTimePoint& origin, int lip) {
  Found out;
  std::vector<SpaceTimePoint> pos(m + 1, origin);
  for (size_t w = begin; w < end; ++w) {
    const auto plan = cycle_plan(words[w], m, sets, b, crossed);
    walk_dfs(plan, lip, pos, 1, [&] {
      ToomCycle cyc;
      cyc.points.assign(pos.begin(), pos.end() - 1);
      if (!validate_cycle(cyc).ok) return;
      ToomContour c = cycle_to_contour(cyc);
      const CheckReport rep = crossed ? check_crossed_family(c, map, sets)
                                      : check_loose_family(c, map, sets);
      if (rep.ok) out.emplace(canonical_form(c), std::move(c));
    });
  }
  return out;
}

// ---- three charges: walks in the doubled graph, third charge reversed ----

// 0 = descend charge 1, 1 = descend charge 2, 2 = ascend. 4n steps: each
// charge-3 edge is traversed twice.
std::vector<std::vector<int8_t>> triple_words(int n) {
  const int m = 4 * n;
  std::vector<std::vector<int8_t>> words;
  std::vector<int8_t> seq;
  auto rec = [&](auto&& self, int c1, int c2, int t) -> void {
    const int k = static_cast<int>(seq.size());
    if (k == m) {
      if (seq.back() == 2) words.push_back(seq);
      return;
    }
    const int rem = m - k;
    for (int8_t w = 0; w < 3; ++w) {
      if (k == 0 && w != 0) continue;
      const int nc1 = c1 + (w == 0), nc2 = c2 + (w == 1);
      if (nc1 > n || nc2 > n) continue;
      const int nups = k - c1 - c2 + (w == 2);
      if (nups > 2 * n) continue;
      const int nt = t + (w == 2 ? 1 : -1);
      if (nt > 0 || -nt > rem - 1) continue;
      // consecutive descents stay on one charge: the vertex between them
      // relays a single charge
      if (k > 0 && w < 2 && seq[k - 1] < 2 && seq[k - 1] != w) continue;
      seq.push_back(w);
      self(self, nc1, nc2, nt);
      seq.pop_back();
    }
  };
  rec(rec, 0, 0, 0);
  return words;
}

std::vector<StepPlan> triple_plan(const std::vector<int8_t>& word,
                                  const ChargeSets& sets,
                                  const std::vector<SiteVector>& b) {
  const int m = static_cast<int>(word.size());
  std::vector<StepPlan> plan(m);
  for (int k = 1; k <= m; ++k) {
    const int8_t w = word[k - 1];
    if (w < 2) {  // tail is position k-1: root start, internal, or a source
      const bool star = k - 1 == 0 || word[k - 2] < 2;
      plan[k - 1] = {true, star ? &sets[w] : &b};
    } else {  // tail is position k: root, charge-3 internal, or a source
      const bool star = k == m || word[k] == 2;
      plan[k - 1] = {false, star ? &sets[2] : &b};
    }
  }
  return plan;
}

// Rebuild the contour a completed walk traverses. Sink and charge-3
// internal visits merge by point, source visits by (point, predecessor
// point); the root also absorbs the one mid-walk visit that re-enters it
// from its charge-3 head. Anything ambiguous fails validation afterwards.
void resolve_triple(const std::vector<SpaceTimePoint>& pos,
                    const std::vector<int8_t>& word, const MonotonicMap& map,
                    const ChargeSets& sets, Found& out) {
  const int m = static_cast<int>(word.size());
  std::vector<int> vid(m + 1, -1);
  vid[0] = vid[m] = 0;
  int next = 1;
  std::map<SpaceTimePoint, int> sink_at, int3_at;
  std::map<std::pair<SpaceTimePoint, SpaceTimePoint>, int> src_at;
  bool root_mid = false;
  for (int k = 1; k < m; ++k) {
    const bool in_up = word[k - 1] == 2, out_up = word[k] == 2;
    if (!in_up && !out_up) {
      vid[k] = next++;
    } else if (!in_up && out_up) {
      const auto [it, fresh] = sink_at.try_emplace(pos[k], next);
      if (fresh) ++next;
      vid[k] = it->second;
    } else if (in_up && out_up) {
      const auto [it, fresh] = int3_at.try_emplace(pos[k], next);
      if (fresh) ++next;
      vid[k] = it->second;
    } else if (pos[k] == pos[0] && pos[k - 1] == pos[m - 1]) {
      if (root_mid) return;
      root_mid = true;
      vid[k] = 0;
    } else {
      const auto [it, fresh] = src_at.try_emplace({pos[k], pos[k - 1]}, next);
      if (fresh) ++next;
      vid[k] = it->second;
    }
  }
  Embedding psi;
  psi.site.assign(next, {});
  psi.time.assign(next, 0);
  for (int k = 0; k < m; ++k) {
    psi.site[vid[k]] = pos[k].site;
    psi.time[vid[k]] = pos[k].time;
  }
  ToomGraph g;
  g.sigma = 3;
  g.num_vertices = next;
  g.edges.assign(3, {});
  std::map<std::pair<int, int>, int> third;
  for (int k = 1; k <= m; ++k) {
    const int8_t w = word[k - 1];
    if (w < 2)
      g.edges[w].emplace_back(vid[k - 1], vid[k]);
    else
      ++third[{vid[k], vid[k - 1]}];
  }
  for (const auto& [e, cnt] : third) {
    if (cnt != 2) return;
    g.edges[2].push_back(e);
  }
  ToomContour c{std::move(g), 0, std::move(psi)};
  if (!check_loose_family(c, map, sets).ok) return;
  out.emplace(canonical_form(c), std::move(c));
}

Found triple_enumerate(const std::vector<std::vector<int8_t>>& words,
                       size_t begin, size_t end, const MonotonicMap& map,
                       const ChargeSets& sets,
                       const std::vector<SiteVector>& b,
                       const SpaceTimePoint& origin, int lip) {
  Found out;
  for (size_t w = begin; w < end; ++w) {
    const int m = static_cast<int>(words[w].size());
    std::vector<SpaceTimePoint> pos(m + 1, origin);
    const auto plan = triple_plan(words[w], sets, b);
    walk_dfs(plan, lip, pos, 1,
             [&] { resolve_triple(pos, words[w], map, sets, out); });
  }
  return out;
}

template <typename Word, typename Worker>
Found parallel_words(const std::vector<Word>& words, const Worker& worker) {
  Found found;
  const size_t hw =
      std::clamp<size_t>(std::thread::hardware_concurrency(), 2, 8);
  if (words.size() < 2 * hw) {
    found = worker(0, words.size());
  } else {
    const size_t chunk = (words.size() + hw - 1) / hw;
    std::vector<std::future<Found>> futs;
    for (size_t b = 0; b < words.size(); b += chunk)
      futs.push_back(std::async(std::launch::async, worker, b,
                                std::min(b + chunk, words.size())));
    for (auto& f : futs) {
      Found part = f.get();
      found.merge(part);
    }
  }
  return found;
}

long long comb(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

long long ipow(long long base, int e) {
  long long r = 1;
  while (e-- > 0) r *= base;
  return r;
}

}  // namespace

Rational bound_Nn(const ContourConstants& consts, int n,
                  ContourFamily family) {
  if (n < 1) throw std::invalid_argument("counting bound needs n >= 1");
  if (family == ContourFamily::Crossed) {
    if (consts.sigma != 2)
      throw std::invalid_argument("crossed bound needs exactly 2 charges");
    return Rational(pow(Int(4 * consts.M1 * consts.M2), unsigned(n)), 2);
  }
  const int tau = (consts.sigma + 1) / 2;
  return Rational(pow(Int(n), unsigned(tau - 1)) *
                  pow(Int(tau + 1), unsigned(2 * tau * n)) *
                  pow(Int(consts.M), unsigned(consts.sigma * n)));
}

int default_edge_cap(int sigma) { return sigma == 2 ? 6 : 4; }

EnumeratedContours enumerate_contours(const MonotonicMap& map,
                                      const ContourConstants& consts, int n,
                                      ContourFamily family, int cap) {
  if (consts.sigma != 2 && consts.sigma != 3)
    throw std::invalid_argument("enumeration supports 2 or 3 charges");
  if (family == ContourFamily::Crossed && consts.sigma != 2)
    throw std::invalid_argument("crossed enumeration needs exactly 2 charges");
  if (cap <= 0) cap = default_edge_cap(consts.sigma);
  if (n < 0 || n > cap)
    throw std::invalid_argument("n = " + std::to_string(n) +
                                " is outside the enumeration cap " +
                                std::to_string(cap));
  EnumeratedContours res;
  res.n = n;
  res.family = family;
  if (n == 0) {
    ToomContour iso;
    iso.graph.sigma = consts.sigma;
    iso.graph.num_vertices = 1;
    iso.graph.edges.assign(consts.sigma, {});
    iso.root = 0;
    iso.psi.site = {zero_site(map.dimension)};
    iso.psi.time = {0};
    res.count = 1;
    res.contours.push_back(std::move(iso));
    return res;
  }
  const ChargeSets& sets = consts.chosen_sets;
  const std::vector<SiteVector> b = map.support();
  const SpaceTimePoint origin{zero_site(map.dimension), 0};
  const int lip = max_component(b);
  const bool crossed = family == ContourFamily::Crossed;
  Found found;
  if (consts.sigma == 2) {
    const auto words = cycle_words(n);
    found = parallel_words(words, [&](size_t lo, size_t hi) {
      return cycle_enumerate(words, lo, hi, 2 * n, map, sets, b, crossed,
                             origin, lip);
    });
  } else {
    const auto words = triple_words(n);
    found = parallel_words(words, [&](size_t lo, size_t hi) {
      return triple_enumerate(words, lo, hi, map, sets, b, origin, lip);
    });
  }
  res.count = static_cast<long long>(found.size());
  res.contours.reserve(found.size());
  for (auto& [key, c] : found) res.contours.push_back(std::move(c));
  return res;
}

long long count_contours_exact(const MonotonicMap& map,
                               const ContourConstants& consts, int n,
                               ContourFamily family, int cap) {
  return enumerate_contours(map, consts, n, family, cap).count;
}

BoundReport generic_pc_bound(const MonotonicMap& map,
                             const ContourConstants& consts,
                             ContourFamily family) {
  if (consts.eps <= 0)
    throw std::invalid_argument("series bound needs a positive eps");
  BoundReport rep;
  rep.model = map.name + ":" + std::to_string(map.dimension);
  rep.sigma = consts.sigma;
  rep.dimension = map.dimension;
  rep.tau = (consts.sigma + 1) / 2;
  rep.eps = consts.eps;
  rep.R = consts.R;
  rep.Rpp = consts.Rpp;
  rep.M = consts.M;
  rep.M1 = consts.M1;
  rep.M2 = consts.M2;
  Int base;
  if (family == ContourFamily::Crossed) {
    if (consts.sigma != 2)
      throw std::invalid_argument("cycle series needs exactly 2 charges");
    rep.method = "cycle-series";
    base = Int(4) * consts.M1 * consts.M2;
    rep.kappa = 1 + consts.Rpp / consts.eps;
    rep.derivation.push_back(
        "cycle count at n edges per charge is at most (4 M1 M2)^n / 2 = " +
        std::to_string(4 * consts.M1 * consts.M2) + "^n / 2");
    rep.derivation.push_back(
        "sinks >= 1 + n/kappa with kappa = 1 + Rpp/eps = " +
        rational_str(rep.kappa));
  } else {
    rep.method = "generic-series";
    base = pow(Int(rep.tau + 1), unsigned(2 * rep.tau)) *
           pow(Int(consts.M), unsigned(consts.sigma));
    rep.kappa = 1 + consts.R / consts.eps;
    rep.derivation.push_back(
        "contour count at n edges per charge is at most n^(tau-1) (tau+1)^(2 "
        "tau n) M^(sigma n), tau = " +
        std::to_string(rep.tau) + ", M = " + std::to_string(consts.M));
    rep.derivation.push_back("sinks >= 1 + n/kappa with kappa = 1 + R/eps = " +
                             rational_str(rep.kappa));
  }
  rep.base = base.convert_to<long long>();
  rep.derivation.push_back(
      "series p * sum_n count(n) p^(n/kappa) has geometric ratio x = " +
      std::to_string(rep.base) + " * p^(1/" + rational_str(rep.kappa) + ")");
  rep.condition = std::to_string(rep.base) + " * p^(1/" +
                  rational_str(rep.kappa) + ") < 1";
  const Rational num = numerator(rep.kappa);
  if (denominator(rep.kappa) == 1 && num <= 1000) {
    rep.exact = true;
    rep.bound =
        Rational(Int(1), pow(base, numerator(rep.kappa).convert_to<unsigned>()));
    rep.value = rep.bound.convert_to<double>();
  } else {
    rep.exact = false;
    rep.bound = 0;
    rep.value = std::pow(base.convert_to<double>(),
                         -rep.kappa.convert_to<double>());
  }
  rep.derivation.push_back(
      "largest provably convergent p: " + std::to_string(rep.base) + "^(-" +
      rational_str(rep.kappa) + ")" +
      (rep.exact ? " = " + rational_str(rep.bound) : ""));
  return rep;
}

SeriesBound coop_identity_bound(const Rational& p, const Rational& r, int d) {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  if (p < 0 || r < 0 || p + r > 1)
    throw std::invalid_argument("needs p, r >= 0 with p + r <= 1");
  SeriesBound b;
  b.dimension = d;
  b.p = p;
  b.r = r;
  b.q = 1 - p - r;
  b.condition = "16 d p r ((2d+1) r + p) < (p + r)^3";
  b.derivation = {
      "words with i inward steps, j circled, weigh at most C(3i-j,i) p^(i+1) "
      "r^(2i-j) (1-q)^-(3i-j+1)",
      "word counts obey W(i,j) <= C(2i,i) C(i,j) d^(2i-j)",
      "the j sum collapses binomially; the i series is geometric with ratio "
      "x = 16 d p r ((2d+1) r + p) / (p+r)^3",
      "when x < 1 the vacancy bound is (p/(p+r)) / (1-x)",
  };
  if (p == 0) {
    b.x = 0;
    b.converges = true;
    b.value = 0;
    return b;
  }
  const Rational s = p + r;
  b.x = Rational(16) * d * p * r * ((2 * d + 1) * r + p) / (s * s * s);
  b.converges = b.x < 1;
  if (b.converges) b.value = (p / s) / (1 - b.x);
  return b;
}

double coop_identity_coefficient(int d) {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  const double a = d + 0.5;
  return std::sqrt(a * a + 1.0 / (16.0 * d)) - a;
}

WordCount word_count(int i, int j, int d) {
  if (i < 0 || j < 0 || j > i || d < 1)
    throw std::invalid_argument("needs 0 <= j <= i and d >= 1");
  if (i > 8) throw std::invalid_argument("word enumeration is capped at i = 8");
  WordCount w;
  w.i = i;
  w.j = j;
  w.dimension = d;
  w.bound = comb(2 * i, i) * comb(i, j) * ipow(d, 2 * i - j);
  // Arrangements of i outward and i inward blocks; a circled subset is legal
  // iff every prefix holds at least as many outward blocks as circled ones.
  long long legal = 0;
  const int nb = 2 * i;
  for (uint32_t mask = 0; mask < (1u << nb); ++mask) {
    if (std::popcount(mask) != i) continue;  // bit set = outward block
    // ways[c] = circled subsets of the prefix with c circled blocks
    std::vector<long long> ways(j + 1, 0);
    ways[0] = 1;
    int outs = 0;
    for (int k = 0; k < nb; ++k) {
      if (mask >> k & 1u) {
        ++outs;
        continue;
      }
      for (int c = j; c >= 1; --c)
        if (c <= outs) ways[c] += ways[c - 1];
    }
    legal += ways[j];
  }
  w.exact = legal * ipow(d, 2 * i - j);
  return w;
}

double continuous_series_ratio(double lambda, int d) {
  return 16.0 * d * lambda * ((2.0 * d + 1.0) * lambda + 1.0) /
         std::pow(lambda + 1.0, 3);
}

ContinuousBound continuous_lambda_bound(int d) {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  ContinuousBound b;
  b.dimension = d;
  const double lin = 16.0 * d * (2 * d + 1);
  b.quadratic_threshold = 0.5 * (lin + std::sqrt(lin * lin + 64.0 * d));
  // y(1) = 4d(d+1) > 1 and the quadratic condition holds past the closed
  // form, so exactly one crossing lies in the bracket.
  double lo = 1.0, hi = b.quadratic_threshold + 1.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (continuous_series_ratio(mid, d) > 1.0 ? lo : hi) = mid;
  }
  b.ratio_threshold = 0.5 * (lo + hi);
  b.tighter = b.ratio_threshold <= b.quadratic_threshold ? "ratio" : "quadratic";
  b.ratio_condition = "16 d lambda ((2d+1) lambda + 1) < (lambda + 1)^3";
  b.quadratic_condition = "16 d ((2d+1) lambda + 1) < lambda^2";
  b.derivation = {
      "vacancy series (1/(1+lambda)) sum_i y^i with y = 16 d lambda ((2d+1) "
      "lambda + 1) / (lambda+1)^3",
      "ratio threshold: largest root of y(lambda) = 1, bisected to 1e-9",
      "quadratic threshold: 16 d ((2d+1) lambda + 1) < lambda^2 implies y < "
      "(lambda/(lambda+1))^3 < 1",
  };
  return b;
}

}  // namespace toomlab
