#include "toomlab/lattice.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace toomlab {

SiteVector site_add(const SiteVector& a, const SiteVector& b) {
  SiteVector r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
  return r;
}

SiteVector site_sub(const SiteVector& a, const SiteVector& b) {
  SiteVector r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
  return r;
}

SiteVector site_neg(const SiteVector& a) {
  SiteVector r(a.size());
  for (size_t k = 0; k < a.size(); ++k) r[k] = -a[k];
  return r;
}

SiteVector zero_site(int dimension) { return SiteVector(dimension, 0); }

SiteVector unit_site(int dimension, int axis) {
  SiteVector r(dimension, 0);
  r.at(axis) = 1;
  return r;
}

std::string site_str(const SiteVector& a) {
  std::ostringstream os;
  os << "(";
  for (size_t k = 0; k < a.size(); ++k) os << (k ? "," : "") << a[k];
  os << ")";
  return os.str();
}

std::vector<SiteVector> MonotonicMap::support() const {
  std::set<SiteVector> pts;
  for (const auto& A : minimal_sets)
    for (const auto& p : A) pts.insert(p);
  return {pts.begin(), pts.end()};
}

bool operator==(const MonotonicMap& a, const MonotonicMap& b) {
  return a.dimension == b.dimension && a.minimal_sets == b.minimal_sets;
}

static bool is_subset(const std::vector<SiteVector>& a,
                      const std::vector<SiteVector>& b) {
  // both sorted
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

MonotonicMap make_map(int dimension, std::vector<std::vector<SiteVector>> sets,
                      std::string name) {
  for (auto& A : sets) {
    for (const auto& p : A)
      if (static_cast<int>(p.size()) != dimension)
        throw std::invalid_argument("make_map: point " + site_str(p) +
                                    " does not have dimension " +
                                    std::to_string(dimension));
    std::sort(A.begin(), A.end());
    A.erase(std::unique(A.begin(), A.end()), A.end());
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  for (size_t i = 0; i < sets.size(); ++i)
    for (size_t j = 0; j < sets.size(); ++j)
      if (i != j && is_subset(sets[i], sets[j]))
        throw std::invalid_argument(
            "make_map: minimal sets are not an antichain (set " +
            std::to_string(i) + " is contained in set " + std::to_string(j) +
            ")");
  MonotonicMap m;
  m.dimension = dimension;
  m.name = std::move(name);
  m.minimal_sets = std::move(sets);
  return m;
}

bool eval_map(const MonotonicMap& map,
              const std::function<bool(const SiteVector&)>& x) {
  for (const auto& A : map.minimal_sets) {
    bool all = true;
    for (const auto& p : A)
      if (!x(p)) {
        all = false;
        break;
      }
    if (all) return true;
  }
  return false;
}

bool eval_map_via_dual(const MonotonicMap& map,
                       const std::function<bool(const SiteVector&)>& x) {
  for (const auto& Z : dual_family(map)) {
    bool any = false;
    for (const auto& p : Z)
      if (x(p)) {
        any = true;
        break;
      }
    if (!any) return false;
  }
  return true;
}

MonotonicMap minimal_sets_from_local_function(
    int dimension, const std::vector<SiteVector>& domain,
    const std::vector<uint8_t>& table, std::string name) {
  const size_t n = domain.size();
  if (n > 24) throw std::invalid_argument("domain too large (max 24 sites)");
  if (table.size() != (size_t{1} << n))
    throw std::invalid_argument("truth table has wrong size");
  auto mask_str = [&](uint32_t m) {
    std::string s = "{";
    bool first = true;
    for (size_t k = 0; k < n; ++k)
      if (m >> k & 1) {
        if (!first) s += ",";
        s += site_str(domain[k]);
        first = false;
      }
    return s + "}";
  };
  for (uint32_t m = 0; m < (uint32_t{1} << n); ++m)
    for (size_t k = 0; k < n; ++k)
      if (!(m >> k & 1) && table[m] && !table[m | (1u << k)])
        throw std::invalid_argument(
            "table is not monotone: value 1 on " + mask_str(m) +
            " but 0 on its superset " + mask_str(m | (1u << k)));
  std::vector<std::vector<SiteVector>> sets;
  for (uint32_t m = 0; m < (uint32_t{1} << n); ++m) {
    if (!table[m]) continue;
    bool minimal = true;
    for (size_t k = 0; k < n && minimal; ++k)
      if ((m >> k & 1) && table[m & ~(1u << k)]) minimal = false;
    if (!minimal) continue;
    std::vector<SiteVector> A;
    for (size_t k = 0; k < n; ++k)
      if (m >> k & 1) A.push_back(domain[k]);
    sets.push_back(std::move(A));
  }
  return make_map(dimension, std::move(sets), std::move(name));
}

std::vector<std::vector<SiteVector>> dual_family(const MonotonicMap& map) {
  if (map.is_zero()) return {{}};  // Z(phi^0) = { {} }
  if (map.is_one()) return {};     // Z(phi^1) = {}
  std::vector<SiteVector> pts = map.support();
  const size_t n = pts.size();
  if (n > 24) throw std::invalid_argument("support too large (max 24 sites)");
  // bitmask per minimal set
  std::vector<uint32_t> sets;
  for (const auto& A : map.minimal_sets) {
    uint32_t m = 0;
    for (const auto& p : A) {
      size_t k = std::lower_bound(pts.begin(), pts.end(), p) - pts.begin();
      m |= uint32_t{1} << k;
    }
    sets.push_back(m);
  }
  // enumerate candidate hitting sets in order of increasing size
  std::vector<uint32_t> by_size[25];
  for (uint32_t m = 0; m < (uint32_t{1} << n); ++m)
    by_size[__builtin_popcount(m)].push_back(m);
  std::vector<uint32_t> kept;
  for (size_t sz = 0; sz <= n; ++sz)
    for (uint32_t m : by_size[sz]) {
      bool hits = true;
      for (uint32_t s : sets)
        if (!(m & s)) {
          hits = false;
          break;
        }
      if (!hits) continue;
      bool has_smaller = false;
      for (uint32_t k : kept)
        if ((k & m) == k) {
          has_smaller = true;
          break;
        }
      if (!has_smaller) kept.push_back(m);
    }
  std::vector<std::vector<SiteVector>> out;
  for (uint32_t m : kept) {
    std::vector<SiteVector> Z;
    for (size_t k = 0; k < n; ++k)
      if (m >> k & 1) Z.push_back(pts[k]);
    out.push_back(std::move(Z));
  }
  std::sort(out.begin(), out.end());
  return out;
}

MonotonicMap dual_map(const MonotonicMap& map) {
  MonotonicMap m;
  m.dimension = map.dimension;
  m.name = map.name.empty() ? "" : map.name + "-dual";
  m.minimal_sets = dual_family(map);
  return m;
}

MonotonicMap builtin_map(const std::string& name, int dimension, int param) {
  auto p = [](int a, int b) { return SiteVector{a, b}; };
  if (name == "zero") return make_map(dimension, {}, "zero");
  if (name == "one") return make_map(dimension, {{}}, "one");
  if (name == "identity")
    return make_map(dimension, {{zero_site(dimension)}}, "identity");
  if (name == "coop") {
    if (dimension < 1) throw std::invalid_argument("coop needs d >= 1");
    std::vector<SiteVector> diag;
    for (int k = 0; k < dimension; ++k)
      diag.push_back(unit_site(dimension, k));
    return make_map(dimension, {{zero_site(dimension)}, diag}, "coop");
  }
  if (dimension != 2)
    throw std::invalid_argument("builtin map '" + name + "' needs d = 2");
  auto majority3 = [&](SiteVector a, SiteVector b, SiteVector c,
                       const std::string& nm) {
    return make_map(2, {{a, b}, {a, c}, {b, c}}, nm);
  };
  if (name == "nec") return majority3(p(0, 0), p(0, 1), p(1, 0), "nec");
  if (name == "nwc") return majority3(p(0, 0), p(0, 1), p(-1, 0), "nwc");
  if (name == "swc") return majority3(p(0, 0), p(0, -1), p(-1, 0), "swc");
  if (name == "sec") return majority3(p(0, 0), p(0, -1), p(1, 0), "sec");
  if (name == "nn") {
    std::vector<SiteVector> cross = {p(0, 0), p(0, 1), p(1, 0), p(0, -1),
                                     p(-1, 0)};
    std::vector<std::vector<SiteVector>> sets;
    for (int a = 0; a < 5; ++a)
      for (int b = a + 1; b < 5; ++b)
        for (int c = b + 1; c < 5; ++c)
          sets.push_back({cross[a], cross[b], cross[c]});
    return make_map(2, sets, "nn");
  }
  if (name == "unstable-example") {
    int n = param;
    if (n < 0) throw std::invalid_argument("unstable-example needs param >= 0");
    std::vector<SiteVector> block;
    for (int m = -3; m <= -2; ++m)
      for (int k = -n; k <= n; ++k) block.push_back(p(m, k));
    return make_map(2, {{p(-1, 0), p(0, 0)}, {p(-2, 0), p(0, 0)}, block},
                    "unstable-example");
  }
  throw std::invalid_argument("unknown builtin map: " + name);
}

MonotonicMap map_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  int d = j.at("dimension").get<int>();
  std::vector<std::vector<SiteVector>> sets;
  for (const auto& jset : j.at("minimal_sets")) {
    std::vector<SiteVector> A;
    for (const auto& jp : jset) A.push_back(jp.get<SiteVector>());
    sets.push_back(std::move(A));
  }
  return make_map(d, std::move(sets), j.value("name", ""));
}

std::string map_to_json(const MonotonicMap& map) {
  nlohmann::json j;
  j["name"] = map.name;
  j["dimension"] = map.dimension;
  j["minimal_sets"] = map.minimal_sets;
  return j.dump();
}

long long Box::volume() const {
  long long v = 1;
  for (size_t k = 0; k < lo.size(); ++k) v *= (hi[k] - lo[k] + 1);
  return v;
}

bool Box::contains(const SiteVector& p) const {
  for (size_t k = 0; k < lo.size(); ++k)
    if (p[k] < lo[k] || p[k] > hi[k]) return false;
  return true;
}

long long Box::index_of(const SiteVector& p) const {
  long long idx = 0, stride = 1;
  for (size_t k = 0; k < lo.size(); ++k) {
    idx += stride * (p[k] - lo[k]);
    stride *= (hi[k] - lo[k] + 1);
  }
  return idx;
}

SiteVector Box::site_at(long long index) const {
  SiteVector p(lo.size());
  for (size_t k = 0; k < lo.size(); ++k) {
    long long w = hi[k] - lo[k] + 1;
    p[k] = static_cast<int>(lo[k] + index % w);
    index /= w;
  }
  return p;
}

Box make_box(const SiteVector& lo, const SiteVector& hi) {
  if (lo.size() != hi.size())
    throw std::invalid_argument("box bounds have different dimensions");
  for (size_t k = 0; k < lo.size(); ++k)
    if (lo[k] > hi[k]) throw std::invalid_argument("empty box");
  return Box{lo, hi};
}

Box cube_box(int dimension, int lo, int hi) {
  return make_box(SiteVector(dimension, lo), SiteVector(dimension, hi));
}

static int box_width0(const Box& b) { return b.hi[0] - b.lo[0] + 1; }

void Configuration::fill(bool value) {
  std::fill(words.begin(), words.end(),
            value ? ~uint64_t{0} : uint64_t{0});
}

static SiteVector wrap_into(const Box& box, SiteVector p) {
  for (size_t k = 0; k < p.size(); ++k) {
    long long w = box.hi[k] - box.lo[k] + 1;
    long long r = (static_cast<long long>(p[k]) - box.lo[k]) % w;
    if (r < 0) r += w;
    p[k] = static_cast<int>(box.lo[k] + r);
  }
  return p;
}

bool Configuration::get(const SiteVector& p) const {
  SiteVector q = p;
  if (!box.contains(q)) {
    switch (boundary) {
      case Boundary::AllOnes:
        return true;
      case Boundary::AllZeros:
        return false;
      case Boundary::Torus:
        q = wrap_into(box, q);
        break;
    }
  }
  long long row = 0, stride = 1;
  for (size_t k = 1; k < q.size(); ++k) {
    row += stride * (q[k] - box.lo[k]);
    stride *= (box.hi[k] - box.lo[k] + 1);
  }
  int off = q[0] - box.lo[0];
  const uint64_t w = words[row * words_per_row + off / 64];
  return (w >> (off % 64)) & 1;
}

void Configuration::set(const SiteVector& p, bool value) {
  SiteVector q = boundary == Boundary::Torus ? wrap_into(box, p) : p;
  if (!box.contains(q)) throw std::out_of_range("set outside box");
  long long row = 0, stride = 1;
  for (size_t k = 1; k < q.size(); ++k) {
    row += stride * (q[k] - box.lo[k]);
    stride *= (box.hi[k] - box.lo[k] + 1);
  }
  int off = q[0] - box.lo[0];
  uint64_t& w = words[row * words_per_row + off / 64];
  if (value)
    w |= uint64_t{1} << (off % 64);
  else
    w &= ~(uint64_t{1} << (off % 64));
}

long long Configuration::count_ones_in_box() const {
  const int W = box_width0(box);
  long long total = 0;
  for (long long r = 0; r < rows; ++r)
    for (int w = 0; w < words_per_row; ++w) {
      uint64_t v = words[r * words_per_row + w];
      int lo_bit = w * 64;
      if (lo_bit + 64 > W) {
        int keep = W - lo_bit;
        if (keep <= 0) break;
        v &= (keep == 64) ? ~uint64_t{0} : ((uint64_t{1} << keep) - 1);
      }
      total += __builtin_popcountll(v);
    }
  return total;
}

Configuration make_configuration(const Box& box, Boundary boundary,
                                 bool initial) {
  Configuration c;
  c.box = box;
  c.boundary = boundary;
  c.words_per_row = (box_width0(box) + 63) / 64;
  c.rows = box.volume() / box_width0(box);
  c.words.assign(static_cast<size_t>(c.rows) * c.words_per_row,
                 initial ? ~uint64_t{0} : uint64_t{0});
  return c;
}

// Fetches the row of values x(i + offset0) for i ranging over a row of the
// box, as packed words. `src` is the source row (already resolved for the
// non-axis-0 part of the displacement), `fill` the out-of-range bit for box
// boundaries; torus rotates instead.
static void fetch_shifted_row(const uint64_t* src, int W, int nwords,
                              int offset, bool torus, bool fill,
                              uint64_t* out) {
  if (torus) {
    int s = ((offset % W) + W) % W;
    if (s == 0) {
      std::copy(src, src + nwords, out);
      return;
    }
    if (W % 64 == 0) {
      int q = s / 64, r = s % 64;
      for (int w = 0; w < nwords; ++w) {
        uint64_t a = src[(w + q) % nwords];
        if (r == 0) {
          out[w] = a;
        } else {
          uint64_t b = src[(w + q + 1) % nwords];
          out[w] = (a >> r) | (b << (64 - r));
        }
      }
      return;
    }
    // general width: scalar
    for (int w = 0; w < nwords; ++w) out[w] = 0;
    for (int k = 0; k < W; ++k) {
      int j = (k + s) % W;
      if (src[j / 64] >> (j % 64) & 1) out[k / 64] |= uint64_t{1} << (k % 64);
    }
    return;
  }
  // box: out bit k = (0 <= k+offset < W) ? src bit k+offset : fill
  const uint64_t fillw = fill ? ~uint64_t{0} : uint64_t{0};
  for (int k = 0; k < nwords; ++k) out[k] = fillw;
  if (offset >= W || offset <= -W) return;
  if (offset >= 0) {
    int q = offset / 64, r = offset % 64;
    for (int w = 0; w < nwords; ++w) {
      uint64_t a = (w + q < nwords) ? src[w + q] : 0;
      uint64_t b = (w + q + 1 < nwords) ? src[w + q + 1] : 0;
      uint64_t v = (r == 0) ? a : ((a >> r) | (b << (64 - r)));
      // bits k with k + offset >= W take the fill value
      int hi_valid = W - offset - w * 64;  // number of valid bits in word
      if (hi_valid <= 0)
        v = fillw;
      else if (hi_valid < 64)
        v = (v & ((uint64_t{1} << hi_valid) - 1)) | (fillw << hi_valid);
      out[w] = v;
    }
  } else {
    int s = -offset;
    int q = s / 64, r = s % 64;
    for (int w = 0; w < nwords; ++w) {
      uint64_t a = (w - q >= 0) ? src[w - q] : 0;
      uint64_t b = (w - q - 1 >= 0) ? src[w - q - 1] : 0;
      uint64_t v = (r == 0) ? a : ((a << r) | (b >> (64 - r)));
      // bits k with k + offset < 0, i.e. k < s, take the fill value
      int lo_fill = s - w * 64;  // number of low bits to fill in this word
      if (lo_fill >= 64)
        v = fillw;
      else if (lo_fill > 0)
        v = (v & ~((uint64_t{1} << lo_fill) - 1)) |
            (fill ? ((uint64_t{1} << lo_fill) - 1) : 0);
      out[w] = v;
    }
  }
}

Configuration apply_map_everywhere(const MonotonicMap& map,
                                   const Configuration& x) {
  if (map.dimension != x.dimension())
    throw std::invalid_argument("map/configuration dimension mismatch");
  Configuration out = make_configuration(x.box, x.boundary, false);
  if (map.is_zero()) return out;
  if (map.is_one()) {
    out.fill(true);
    return out;
  }
  const int d = x.dimension();
  const int W = box_width0(x.box);
  const int nw = x.words_per_row;
  const bool torus = x.boundary == Boundary::Torus;
  const bool fill = x.boundary != Boundary::AllZeros;

  // row extents for axes 1..d-1
  std::vector<long long> ext(d > 1 ? d - 1 : 0);
  for (int k = 1; k < d; ++k) ext[k - 1] = x.box.hi[k] - x.box.lo[k] + 1;

  std::vector<uint64_t> shifted(nw), acc(nw);
  std::vector<long long> rest(d > 1 ? d - 1 : 0);
  const uint64_t fillw = fill ? ~uint64_t{0} : uint64_t{0};
  for (long long row = 0; row < x.rows; ++row) {
    // decode row -> rest coords (offsets from lo)
    long long rr = row;
    for (int k = 0; k + 1 < d; ++k) {
      rest[k] = rr % ext[k];
      rr /= ext[k];
    }
    uint64_t* orow = out.words.data() + row * nw;
    for (const auto& A : map.minimal_sets) {
      std::fill(acc.begin(), acc.end(), ~uint64_t{0});
      for (const auto& j : A) {
        // resolve source row for the non-axis-0 displacement
        bool in_range = true;
        long long srow = 0, stride = 1;
        for (int k = 1; k < d; ++k) {
          long long c = rest[k - 1] + j[k];
          if (torus) {
            c %= ext[k - 1];
            if (c < 0) c += ext[k - 1];
          } else if (c < 0 || c >= ext[k - 1]) {
            in_range = false;
            break;
          }
          srow += stride * c;
          stride *= ext[k - 1];
        }
        if (!in_range) {
          for (int w = 0; w < nw; ++w) acc[w] &= fillw;
        } else {
          fetch_shifted_row(x.words.data() + srow * nw, W, nw, j[0], torus,
                            fill, shifted.data());
          for (int w = 0; w < nw; ++w) acc[w] &= shifted[w];
        }
        bool any = false;
        for (int w = 0; w < nw; ++w) any |= acc[w] != 0;
        if (!any) break;
      }
      for (int w = 0; w < nw; ++w) orow[w] |= acc[w];
    }
  }
  return out;
}

}  // namespace toomlab
