#include "toomlab/eroder.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace toomlab {

std::string rational_str(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

void LinearProgram::add_le(std::vector<Rational> row, Rational rhs) {
  row.resize(nvars);
  A.push_back(std::move(row));
  b.push_back(std::move(rhs));
}

void LinearProgram::add_eq(std::vector<Rational> row, Rational rhs) {
  std::vector<Rational> neg(row.size());
  for (size_t k = 0; k < row.size(); ++k) neg[k] = -row[k];
  add_le(row, rhs);
  add_le(std::move(neg), -rhs);
}

namespace {

// Dense tableau over rationals. Variables: u (x+), v (x-), slacks,
// artificials. Bland's rule everywhere, so the pivoting is deterministic and
// cannot cycle.
struct Tableau {
  int m = 0, ncols = 0;
  std::vector<std::vector<Rational>> T;  // m rows, ncols + 1 (rhs last)
  std::vector<Rational> obj;             // reduced costs, ncols entries
  Rational objval;
  std::vector<int> basis;  // basic column per row

  void pivot(int row, int col) {
    Rational p = T[row][col];
    for (auto& t : T[row]) t /= p;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      Rational f = T[i][col];
      if (f == 0) continue;
      for (int j = 0; j <= ncols; ++j) T[i][j] -= f * T[row][j];
    }
    Rational f = obj[col];
    if (f != 0) {
      for (int j = 0; j < ncols; ++j) obj[j] -= f * T[row][j];
      objval += f * T[row][ncols];
    }
    basis[row] = col;
  }

  // maximize; returns false if unbounded
  bool run(const std::vector<char>& allowed) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < ncols; ++j)
        if (allowed[j] && obj[j] > 0) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      Rational best;
      for (int i = 0; i < m; ++i) {
        if (T[i][enter] <= 0) continue;
        Rational ratio = T[i][ncols] / T[i][enter];
        if (leave < 0 || ratio < best ||
            (ratio == best && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void set_objective(const std::vector<Rational>& c) {
    obj = c;
    obj.resize(ncols);
    objval = 0;
    for (int i = 0; i < m; ++i) {
      Rational cb = basis[i] < static_cast<int>(c.size()) ? c[basis[i]]
                                                          : Rational(0);
      if (cb == 0) continue;
      for (int j = 0; j < ncols; ++j) obj[j] -= cb * T[i][j];
      objval += cb * T[i][ncols];
    }
  }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const int n = lp.nvars;
  const int m = static_cast<int>(lp.A.size());
  // columns: u(0..n-1), v(n..2n-1), slack(2n..2n+m-1), art(2n+m..2n+2m-1)
  const int cs = 2 * n, ca = 2 * n + m, ncols = 2 * n + 2 * m;
  Tableau t;
  t.m = m;
  t.ncols = ncols;
  t.T.assign(m, std::vector<Rational>(ncols + 1));
  t.basis.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    bool neg = lp.b[i] < 0;
    Rational sgn = neg ? -1 : 1;
    for (int j = 0; j < n; ++j) {
      t.T[i][j] = sgn * lp.A[i][j];
      t.T[i][n + j] = -sgn * lp.A[i][j];
    }
    t.T[i][cs + i] = sgn;
    t.T[i][ncols] = sgn * lp.b[i];
    if (neg) {
      t.T[i][ca + i] = 1;
      t.basis[i] = ca + i;
    } else {
      t.basis[i] = cs + i;
    }
  }
  std::vector<char> allowed(ncols, 1);
  // phase 1: maximize -sum(artificials)
  bool need_phase1 = false;
  std::vector<Rational> phase1(ncols, Rational(0));
  for (int i = 0; i < m; ++i)
    if (t.basis[i] >= ca) {
      phase1[t.basis[i]] = -1;
      need_phase1 = true;
    }
  for (int i = ca; i < ncols; ++i) phase1[i] = -1;
  if (need_phase1) {
    t.set_objective(phase1);
    t.run(allowed);
    if (t.objval != 0) return {LpStatus::Infeasible, Rational(0), {}};
    // pivot remaining artificials (at value 0) out of the basis
    for (int i = 0; i < m; ++i) {
      if (t.basis[i] < ca) continue;
      int col = -1;
      for (int j = 0; j < ca; ++j)
        if (t.T[i][j] != 0) {
          col = j;
          break;
        }
      if (col >= 0) t.pivot(i, col);
      // a fully-zero row is redundant; its artificial stays basic at zero
    }
  }
  for (int j = ca; j < ncols; ++j) allowed[j] = 0;
  // phase 2
  std::vector<Rational> c2(ncols, Rational(0));
  for (int j = 0; j < n; ++j) {
    c2[j] = lp.c[j];
    c2[n + j] = -lp.c[j];
  }
  t.set_objective(c2);
  if (!t.run(allowed)) return {LpStatus::Unbounded, Rational(0), {}};
  LpResult res;
  res.status = LpStatus::Optimal;
  res.value = t.objval;
  res.x.assign(n, Rational(0));
  std::vector<Rational> y(ncols, Rational(0));
  for (int i = 0; i < m; ++i)
    if (t.basis[i] < ncols) y[t.basis[i]] = t.T[i][ncols];
  for (int j = 0; j < n; ++j) res.x[j] = y[j] - y[n + j];
  return res;
}

Rational PolarFunction::value(int s, const SiteVector& i) const {
  Rational v = 0;
  for (int k = 0; k < dimension; ++k) v += coeffs[s][k] * i[k];
  return v;
}

namespace {

// feasibility of  intersection of Conv(A) over the given sets
bool hulls_intersect(int d, const std::vector<std::vector<SiteVector>>& sets) {
  // variables: x (d, free), lambda_{A,i} (>= 0)
  int nl = 0;
  for (const auto& A : sets) nl += static_cast<int>(A.size());
  LinearProgram lp;
  lp.nvars = d + nl;
  lp.c.assign(lp.nvars, Rational(0));
  int base = d;
  for (const auto& A : sets) {
    const int na = static_cast<int>(A.size());
    std::vector<Rational> sum(lp.nvars, Rational(0));
    for (int i = 0; i < na; ++i) {
      sum[base + i] = 1;
      std::vector<Rational> nonneg(lp.nvars, Rational(0));
      nonneg[base + i] = -1;
      lp.add_le(std::move(nonneg), Rational(0));
    }
    lp.add_eq(std::move(sum), Rational(1));
    for (int k = 0; k < d; ++k) {
      std::vector<Rational> row(lp.nvars, Rational(0));
      row[k] = -1;
      for (int i = 0; i < na; ++i) row[base + i] = A[i][k];
      lp.add_eq(std::move(row), Rational(0));
    }
    base += na;
  }
  return solve_lp(lp).status == LpStatus::Optimal;
}

bool eroder_by_helly(const MonotonicMap& map) {
  const int d = map.dimension;
  const auto& fam = map.minimal_sets;
  const int n = static_cast<int>(fam.size());
  const int k_max = std::min(n, d + 1);
  // all subfamilies of size <= d+1; empty intersection for some <=> eroder
  std::vector<int> idx;
  std::function<bool(int, int)> rec = [&](int start, int need) -> bool {
    if (need == 0) {
      std::vector<std::vector<SiteVector>> sub;
      for (int i : idx) sub.push_back(fam[i]);
      return !hulls_intersect(d, sub);
    }
    for (int i = start; i <= n - need; ++i) {
      idx.push_back(i);
      if (rec(i + 1, need - 1)) return true;
      idx.pop_back();
    }
    return false;
  };
  for (int k = 1; k <= k_max; ++k)
    if (rec(0, k)) return true;
  return false;
}

}  // namespace

bool is_eroder(const MonotonicMap& map) {
  if (map.is_constant())
    throw std::invalid_argument("is_eroder: map is constant");
  bool full = !hulls_intersect(map.dimension, map.minimal_sets);
  bool helly = eroder_by_helly(map);
  if (full != helly)
    throw std::logic_error("is_eroder: criterion cross-check failed");
  return full;
}

std::optional<PolarFunction> find_polar(const MonotonicMap& map) {
  if (map.is_constant())
    throw std::invalid_argument("find_polar: map is constant");
  const int d = map.dimension;
  const auto& fam = map.minimal_sets;
  const auto support = map.support();
  const int nfam = static_cast<int>(fam.size());

  for (int sigma = 2; sigma <= d + 1; ++sigma) {
    double count = 1;
    for (int s = 0; s < sigma; ++s) count *= nfam;
    if (count > 2e5)
      throw std::invalid_argument("find_polar: family too large");
    std::vector<int> pick(sigma, 0);
    Rational best_eps = 0;
    std::optional<PolarFunction> best;
    for (;;) {
      // LP vars: L coefficients (sigma*d), then eps_s (sigma)
      LinearProgram lp;
      lp.nvars = sigma * d + sigma;
      lp.c.assign(lp.nvars, Rational(0));
      for (int s = 0; s < sigma; ++s) lp.c[sigma * d + s] = 1;
      // eps_s <= L_s(i) for i in A_s
      for (int s = 0; s < sigma; ++s)
        for (const auto& i : fam[pick[s]]) {
          std::vector<Rational> row(lp.nvars, Rational(0));
          row[sigma * d + s] = 1;
          for (int k = 0; k < d; ++k) row[s * d + k] = -i[k];
          lp.add_le(std::move(row), Rational(0));
        }
      // sum_s L_s = 0 coefficient-wise
      for (int k = 0; k < d; ++k) {
        std::vector<Rational> row(lp.nvars, Rational(0));
        for (int s = 0; s < sigma; ++s) row[s * d + k] = 1;
        lp.add_eq(std::move(row), Rational(0));
      }
      // normalization |L_s(i)| <= 1 on the support
      for (int s = 0; s < sigma; ++s)
        for (const auto& i : support) {
          std::vector<Rational> row(lp.nvars, Rational(0));
          for (int k = 0; k < d; ++k) row[s * d + k] = i[k];
          auto neg = row;
          for (auto& v : neg) v = -v;
          lp.add_le(std::move(row), Rational(1));
          lp.add_le(std::move(neg), Rational(1));
        }
      auto res = solve_lp(lp);
      if (res.status != LpStatus::Optimal)
        throw std::logic_error("find_polar: polar LP not optimal");
      if (res.value > best_eps) {
        best_eps = res.value;
        PolarFunction pf;
        pf.sigma = sigma;
        pf.dimension = d;
        pf.coeffs.assign(sigma, std::vector<Rational>(d));
        for (int s = 0; s < sigma; ++s)
          for (int k = 0; k < d; ++k) pf.coeffs[s][k] = res.x[s * d + k];
        for (int s = 0; s < sigma; ++s) pf.chosen_sets.push_back(fam[pick[s]]);
        best = std::move(pf);
      }
      // next assignment, lexicographic
      int s = sigma - 1;
      while (s >= 0 && pick[s] == nfam - 1) pick[s--] = 0;
      if (s < 0) break;
      ++pick[s];
    }
    if (best_eps > 0) return best;
  }
  return std::nullopt;
}

ContourConstants contour_constants(const MonotonicMap& map,
                                   const PolarFunction& polar) {
  ContourConstants cc;
  cc.sigma = polar.sigma;
  cc.chosen_sets = polar.chosen_sets;
  const auto B = map.support();
  cc.M = static_cast<long long>(B.size());
  for (int s = 0; s < polar.sigma; ++s) {
    Rational eps;
    bool first = true;
    for (const auto& i : polar.chosen_sets[s]) {
      Rational v = polar.value(s, i);
      if (first || v < eps) eps = v;
      first = false;
    }
    if (first) throw std::invalid_argument("empty chosen set");
    cc.eps_s.push_back(eps);
    cc.eps += eps;
    Rational lo;
    first = true;
    for (const auto& i : B) {
      Rational v = polar.value(s, i);
      if (first || v < lo) lo = v;
      first = false;
    }
    cc.R_s.push_back(-lo);
    cc.R += -lo;
  }
  if (polar.sigma == 2) {
    cc.M1 = static_cast<long long>(polar.chosen_sets[0].size());
    cc.M2 = static_cast<long long>(polar.chosen_sets[1].size());
    for (int s = 0; s < 2; ++s) {
      Rational lo;
      bool first = true;
      for (const auto& i : polar.chosen_sets[1 - s]) {
        Rational v = polar.value(s, i);
        if (first || v < lo) lo = v;
        first = false;
      }
      cc.Rpp_s.push_back(-lo);
      cc.Rpp += -lo;
    }
  }
  return cc;
}

EdgeSpeedProfile edge_speeds(const MonotonicMap& map,
                             const PolarFunction& polar) {
  EdgeSpeedProfile prof;
  for (int s = 0; s < polar.sigma; ++s) {
    Rational sup;
    bool sfirst = true;
    for (const auto& A : map.minimal_sets) {
      Rational inf;
      bool ifirst = true;
      for (const auto& i : A) {
        Rational v = polar.value(s, i);
        if (ifirst || v < inf) inf = v;
        ifirst = false;
      }
      if (sfirst || inf > sup) sup = inf;
      sfirst = false;
    }
    prof.delta_s.push_back(sup);
    prof.total += sup;
  }
  return prof;
}

namespace {

// word-scan for zero bits, cheap enough to run every step
std::vector<SiteVector> collect_zeros(const Configuration& cfg) {
  std::vector<SiteVector> zeros;
  const int d = cfg.box.dimension();
  const long long width = cfg.box.hi[0] - cfg.box.lo[0] + 1;
  for (long long r = 0; r < cfg.rows; ++r) {
    SiteVector base = cfg.box.site_at(r * width);
    for (int w = 0; w < cfg.words_per_row; ++w) {
      uint64_t bits = ~cfg.words[r * cfg.words_per_row + w];
      long long first = static_cast<long long>(w) * 64;
      if (first + 64 > width && width > first)
        bits &= (width - first == 64) ? ~uint64_t{0}
                                      : ((uint64_t{1} << (width - first)) - 1);
      else if (first >= width)
        bits = 0;
      while (bits) {
        int b = std::countr_zero(bits);
        bits &= bits - 1;
        SiteVector s = base;
        s[0] = cfg.box.lo[0] + static_cast<int>(first) + b;
        zeros.push_back(std::move(s));
      }
    }
  }
  (void)d;
  return zeros;
}

}  // namespace

ErosionReport erosion_oracle(const MonotonicMap& map,
                             const Configuration& initial, int max_steps,
                             const std::optional<PolarFunction>& polar) {
  const int d = map.dimension;
  std::vector<SiteVector> zeros = collect_zeros(initial);
  ErosionReport rep;
  if (zeros.empty()) {
    rep.eroded = true;
    if (polar) rep.polar_certified = true;
    return rep;
  }
  int max_disp = 1;
  for (const auto& A : map.minimal_sets)
    for (const auto& j : A)
      for (int k = 0; k < d; ++k) max_disp = std::max(max_disp, std::abs(j[k]));

  std::vector<std::optional<Rational>> r0(polar ? polar->sigma : 0);
  if (polar)
    for (const auto& z : zeros)
      for (int q = 0; q < polar->sigma; ++q) {
        Rational v = polar->value(q, z);
        if (!r0[q] || v > *r0[q]) r0[q] = v;
      }
  EdgeSpeedProfile speeds;
  if (polar) speeds = edge_speeds(map, *polar);
  bool certified = true;

  // Work in boxes sized for the current zero set plus one chunk's light
  // cone; zeros cannot outrun max_disp per step, so the chunk dynamics in an
  // all-ones box agree with the infinite lattice.
  const int chunk = 16;
  int steps_done = 0;
  while (steps_done < max_steps) {
    int K = std::min(chunk, max_steps - steps_done);
    SiteVector lo = zeros[0], hi = zeros[0];
    for (const auto& z : zeros)
      for (int k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], z[k]);
        hi[k] = std::max(hi[k], z[k]);
      }
    for (int k = 0; k < d; ++k) {
      lo[k] -= max_disp * K + 1;
      hi[k] += max_disp * K + 1;
    }
    auto x = make_configuration(make_box(lo, hi), Boundary::AllOnes, true);
    for (const auto& z : zeros) x.set(z, false);
    for (int k = 0; k < K; ++k) {
      x = apply_map_everywhere(map, x);
      ++steps_done;
      zeros = collect_zeros(x);
      if (polar && !zeros.empty()) {
        for (int q = 0; q < polar->sigma; ++q) {
          std::optional<Rational> rn;
          for (const auto& z : zeros) {
            Rational v = polar->value(q, z);
            if (!rn || v > *rn) rn = v;
          }
          if (!r0[q] || *rn > *r0[q] - steps_done * speeds.delta_s[q])
            certified = false;
        }
      }
      if (zeros.empty()) {
        rep.eroded = true;
        rep.steps_taken = steps_done;
        if (polar) rep.polar_certified = certified;
        return rep;
      }
    }
  }
  rep.eroded = false;
  rep.steps_taken = max_steps;
  if (polar) rep.polar_certified = certified;
  return rep;
}

MonotonicMap toom_operator(const std::vector<MonotonicMap>& maps,
                           int max_domain) {
  if (maps.empty()) throw std::invalid_argument("toom_operator: no maps");
  const int d = maps[0].dimension;
  for (const auto& m : maps)
    if (m.dimension != d)
      throw std::invalid_argument("toom_operator: dimension mismatch");
  std::set<SiteVector> dom;
  dom.insert(zero_site(d));
  for (const auto& m : maps)
    for (const auto& p : m.support()) dom.insert(p);
  std::vector<SiteVector> domain(dom.begin(), dom.end());
  const size_t n = domain.size();
  if (static_cast<int>(n) > max_domain)
    throw std::invalid_argument(
        "toom_operator: union domain has " + std::to_string(n) +
        " sites, exceeding the cap of " + std::to_string(max_domain));
  size_t zero_idx =
      std::lower_bound(domain.begin(), domain.end(), zero_site(d)) -
      domain.begin();
  std::vector<uint8_t> table(size_t{1} << n);
  for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
    auto x = [&](const SiteVector& q) {
      size_t k = std::lower_bound(domain.begin(), domain.end(), q) -
                 domain.begin();
      return (mask >> k & 1) != 0;
    };
    bool v;
    if (mask >> zero_idx & 1) {
      v = false;
      for (const auto& m : maps) v = v || eval_map(m, x);
    } else {
      v = true;
      for (const auto& m : maps) v = v && eval_map(m, x);
    }
    table[mask] = v ? 1 : 0;
  }
  return minimal_sets_from_local_function(d, domain, table, "toom-operator");
}

}  // namespace toomlab
