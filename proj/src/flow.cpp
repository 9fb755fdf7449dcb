#include "toomlab/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace toomlab {

uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t keyed_hash(uint64_t seed, const uint64_t* words, size_t n) {
  uint64_t h = mix64(seed);
  for (size_t k = 0; k < n; ++k) h = mix64(h ^ words[k]);
  return h;
}

uint64_t site_key(uint64_t seed, const SiteVector& site, long long t,
                  uint64_t salt) {
  uint64_t h = mix64(seed ^ 0x746f6f6d666c6f77ull);
  for (int c : site) h = mix64(h ^ static_cast<uint64_t>(int64_t{c}));
  h = mix64(h ^ static_cast<uint64_t>(t));
  if (salt) h = mix64(h ^ salt);
  return h;
}

double uniform01(uint64_t h) { return static_cast<double>(h >> 11) * 0x1p-53; }

double uniform01_open(uint64_t h) {
  // 52 bits so that the +0.5 is never rounded away at either end
  return (static_cast<double>(h >> 12) + 0.5) * 0x1p-52;
}

double ModelSpec::defect_prob() const {
  double p = 0;
  for (size_t k = 0; k < maps.size(); ++k)
    if (maps[k].is_zero()) p += probs[k];
  return p;
}

int ModelSpec::sample_index(uint64_t seed, const SiteVector& site,
                            long long t) const {
  double u = uniform01(site_key(seed, site, t));
  double cum = 0;
  for (size_t k = 0; k + 1 < probs.size(); ++k) {
    cum += probs[k];
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

ModelSpec make_model(std::string name, std::vector<MonotonicMap> maps,
                     std::vector<double> probs, int primary) {
  if (maps.empty()) throw std::invalid_argument("model needs at least one map");
  if (maps.size() != probs.size())
    throw std::invalid_argument("one probability per map required");
  ModelSpec m;
  m.dimension = maps[0].dimension;
  for (const auto& f : maps)
    if (f.dimension != m.dimension)
      throw std::invalid_argument("model maps must share the dimension");
  double sum = 0;
  for (double p : probs) {
    if (!(p >= 0 && p <= 1))
      throw std::invalid_argument("probabilities must lie in [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("probabilities must sum to 1");
  if (primary < -1 || primary >= static_cast<int>(maps.size()))
    throw std::invalid_argument("primary map index out of range");
  if (primary >= 0 && maps[primary].is_constant())
    throw std::invalid_argument("primary map must be non-constant");
  m.name = std::move(name);
  m.maps = std::move(maps);
  m.probs = std::move(probs);
  m.primary = primary;
  return m;
}

ModelSpec preset_model(const std::string& name, int dimension, double p,
                       double q, double r) {
  auto death = [&](MonotonicMap map) {
    int d = map.dimension;
    return make_model(name, {builtin_map("zero", d), std::move(map)},
                      {p, 1 - p}, 1);
  };
  if (name == "nec" || name == "nwc" || name == "swc" || name == "sec" ||
      name == "nn")
    return death(builtin_map(name));
  if (name == "coop") return death(builtin_map("coop", dimension));
  if (name == "unstable-example")
    return death(builtin_map("unstable-example", 2, 2));
  if (name == "coop-identity")
    return make_model(name,
                      {builtin_map("zero", dimension),
                       builtin_map("identity", dimension),
                       builtin_map("coop", dimension)},
                      {p, q, r}, 2);
  if (name == "corners")
    return make_model(name,
                      {builtin_map("zero"), builtin_map("nec"),
                       builtin_map("nwc"), builtin_map("swc"),
                       builtin_map("sec")},
                      {p, (1 - p) / 4, (1 - p) / 4, (1 - p) / 4, (1 - p) / 4},
                      1);
  throw std::invalid_argument("unknown model preset: " + name);
}

bool FlowRealization::in_window(const SiteVector& i, long long t) const {
  return t > t_min() && t <= 0 && space.contains(i);
}

int FlowRealization::map_index_at(const SiteVector& i, long long t) const {
  if (!in_window(i, t))
    throw std::out_of_range("spacetime point outside the flow window");
  long long plane = t - (t_min() + 1);
  return plane_maps[plane * space.volume() + space.index_of(i)];
}

const MonotonicMap& FlowRealization::map_at(const SiteVector& i,
                                            long long t) const {
  return model.maps[map_index_at(i, t)];
}

FlowRealization sample_flow(const ModelSpec& model, uint64_t seed,
                            const Box& space, int depth) {
  if (depth < 1) throw std::invalid_argument("flow depth must be positive");
  if (space.dimension() != model.dimension)
    throw std::invalid_argument("flow box dimension mismatch");
  FlowRealization flow;
  flow.model = model;
  flow.seed = seed;
  flow.space = space;
  flow.depth = depth;
  const long long vol = space.volume();
  if (depth * vol > (1ll << 31))
    throw std::invalid_argument("flow window too large");
  flow.plane_maps.resize(depth * vol);
  for (int l = 0; l < depth; ++l) {
    long long t = flow.t_min() + 1 + l;
    for (long long i = 0; i < vol; ++i)
      flow.plane_maps[l * vol + i] =
          static_cast<uint8_t>(model.sample_index(seed, space.site_at(i), t));
  }
  return flow;
}

FlowRealization modified_flow(const FlowRealization& flow, int slab_depth) {
  if (slab_depth < 0 || slab_depth > flow.depth)
    throw std::invalid_argument("slab depth outside the window");
  if (flow.model.primary < 0)
    throw std::invalid_argument("model has no primary map");
  FlowRealization out = flow;
  const long long vol = flow.space.volume();
  for (long long t = 1 - slab_depth; t <= 0; ++t) {
    long long l = t - (flow.t_min() + 1);
    std::fill_n(out.plane_maps.begin() + l * vol, vol,
                static_cast<uint8_t>(flow.model.primary));
  }
  return out;
}

std::vector<std::pair<SiteVector, long long>> flow_defects(
    const FlowRealization& flow) {
  std::vector<std::pair<SiteVector, long long>> out;
  const long long vol = flow.space.volume();
  for (int l = 0; l < flow.depth; ++l) {
    long long t = flow.t_min() + 1 + l;
    for (long long i = 0; i < vol; ++i)
      if (flow.model.maps[flow.plane_maps[l * vol + i]].is_zero())
        out.emplace_back(flow.space.site_at(i), t);
  }
  return out;
}

const Configuration& Trajectory::at_time(long long t) const {
  if (t < t_min || t > 0)
    throw std::out_of_range("time outside the trajectory window");
  return planes[t - t_min];
}

bool Trajectory::value(const SiteVector& i, long long t) const {
  if (t < t_min) return true;
  return at_time(t).get(i);
}

namespace {

Configuration apply_indexed_plane(const ModelSpec& model, const uint8_t* idx,
                                  const Configuration& x) {
  auto out = make_configuration(x.box, x.boundary, false);
  std::vector<uint64_t> mask(out.words.size());
  const long long vol = x.box.volume();
  const long long width = x.box.hi[0] - x.box.lo[0] + 1;
  for (size_t k = 0; k < model.maps.size(); ++k) {
    const auto& map = model.maps[k];
    if (map.is_zero()) continue;
    bool any = false;
    std::fill(mask.begin(), mask.end(), 0);
    for (long long i = 0; i < vol; ++i)
      if (idx[i] == static_cast<uint8_t>(k)) {
        long long row = i / width, off = i % width;
        mask[row * x.words_per_row + off / 64] |= uint64_t{1} << (off % 64);
        any = true;
      }
    if (!any) continue;
    if (map.is_one()) {
      for (size_t w = 0; w < mask.size(); ++w) out.words[w] |= mask[w];
    } else {
      auto applied = apply_map_everywhere(map, x);
      for (size_t w = 0; w < mask.size(); ++w)
        out.words[w] |= mask[w] & applied.words[w];
    }
  }
  return out;
}

}  // namespace

Trajectory maximal_trajectory(const FlowRealization& flow) {
  Trajectory traj;
  traj.space = flow.space;
  traj.boundary = Boundary::AllOnes;
  traj.t_min = flow.t_min();
  traj.planes.push_back(
      make_configuration(flow.space, Boundary::AllOnes, true));
  const long long vol = flow.space.volume();
  for (int l = 0; l < flow.depth; ++l)
    traj.planes.push_back(apply_indexed_plane(
        flow.model, flow.plane_maps.data() + l * vol, traj.planes.back()));
  return traj;
}

Configuration step_random_plane(const ModelSpec& model, uint64_t seed,
                                long long t, const Configuration& x) {
  const long long vol = x.box.volume();
  std::vector<uint8_t> idx(vol);
  for (long long i = 0; i < vol; ++i)
    idx[i] =
        static_cast<uint8_t>(model.sample_index(seed, x.box.site_at(i), t));
  return apply_indexed_plane(model, idx.data(), x);
}

Box origin_cone_box(const ModelSpec& model, int depth) {
  const int d = model.dimension;
  SiteVector lo(d, 0), hi(d, 0);
  for (const auto& map : model.maps)
    for (const auto& j : map.support())
      for (int k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], depth * j[k]);
        hi[k] = std::max(hi[k], depth * j[k]);
      }
  return make_box(lo, hi);
}

OriginProbe probe_origin(const ModelSpec& model, uint64_t seed,
                         int initial_depth, int max_depth) {
  if (initial_depth < 1 || max_depth < initial_depth)
    throw std::invalid_argument("bad probe depths");
  SiteVector origin(model.dimension, 0);
  int stable_ones = 0;
  OriginProbe probe;
  for (int depth = initial_depth;; depth *= 2) {
    if (depth > max_depth) depth = max_depth;
    probe.flow = sample_flow(model, seed, origin_cone_box(model, depth), depth);
    probe.trajectory = maximal_trajectory(probe.flow);
    probe.value = probe.trajectory.value(origin, 0);
    if (!probe.value) return probe;
    if (++stable_ones >= 3 || depth == max_depth) return probe;
  }
}

int thread_count() {
  if (const char* env = std::getenv("TOOMLAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

DensityResult density_estimate(const ModelSpec& model, uint64_t seed,
                               int torus_width, int burn_in, int replicas) {
  if (torus_width < 1 || burn_in < 0 || replicas < 1)
    throw std::invalid_argument("bad density parameters");
  std::vector<double> means(replicas);
  auto run_replica = [&](int r) {
    uint64_t words[2] = {0x7265706c696361ull, static_cast<uint64_t>(r)};
    uint64_t rseed = keyed_hash(seed, words, 2);
    auto x = make_configuration(
        cube_box(model.dimension, 0, torus_width - 1), Boundary::Torus, true);
    for (int s = 1; s <= burn_in; ++s)
      x = step_random_plane(model, rseed, s, x);
    means[r] = static_cast<double>(x.count_ones_in_box()) /
               static_cast<double>(x.box.volume());
  };
  int nthreads = std::min(thread_count(), replicas);
  if (nthreads <= 1) {
    for (int r = 0; r < replicas; ++r) run_replica(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int r; (r = next.fetch_add(1)) < replicas;) run_replica(r);
      });
    for (auto& th : pool) th.join();
  }
  DensityResult res;
  res.replica_means = means;
  double mean = 0;
  for (double m : means) mean += m;
  mean /= replicas;
  double var = 0;
  for (double m : means) var += (m - mean) * (m - mean);
  double half = 0;
  if (replicas > 1) {
    double sd = std::sqrt(var / (replicas - 1));
    half = 1.96 * sd / std::sqrt(static_cast<double>(replicas));
  }
  res.rho_mean = mean;
  res.rho_ci_lo = mean - half;
  res.rho_ci_hi = mean + half;
  return res;
}

// --- continuous time ---

bool IpsTrajectory::value_at(const SiteVector& i, double t) const {
  if (!space.contains(i)) return true;
  const auto& ev = site_events[space.index_of(i)];
  int last = -1;
  for (int e : ev) {
    if (events[e].time <= t)
      last = e;
    else
      break;
  }
  return last < 0 ? true : value_after[last] != 0;
}

bool IpsTrajectory::value_left(const SiteVector& i, double t) const {
  if (!space.contains(i)) return true;
  const auto& ev = site_events[space.index_of(i)];
  int last = -1;
  for (int e : ev) {
    if (events[e].time < t)
      last = e;
    else
      break;
  }
  return last < 0 ? true : value_after[last] != 0;
}

namespace {

std::vector<IpsEvent> arrival_stream(uint64_t seed, const SiteVector& site,
                                     int kind, double rate, double t_start,
                                     uint64_t salt) {
  std::vector<IpsEvent> out;
  if (rate <= 0) return out;
  double t = t_start;
  for (uint64_t j = 0;; ++j) {
    uint64_t h = mix64(seed ^ 0x697073676170ull);  // ips gap domain
    for (int c : site) h = mix64(h ^ static_cast<uint64_t>(int64_t{c}));
    h = mix64(h ^ static_cast<uint64_t>(kind));
    h = mix64(h ^ salt);
    h = mix64(h ^ j);
    t += -std::log(uniform01_open(h)) / rate;
    if (t > 0) break;
    out.push_back({t, kind, site});
    if (out.size() > 1000000)
      throw std::runtime_error("event stream too long");
  }
  return out;
}

}  // namespace

IpsTrajectory sample_ips_trajectory(int dimension, double lambda,
                                    const Box& space, double t_start,
                                    uint64_t seed) {
  if (lambda < 0) throw std::invalid_argument("negative rate");
  if (!(t_start < 0)) throw std::invalid_argument("t_start must be negative");
  if (space.dimension() != dimension)
    throw std::invalid_argument("box dimension mismatch");
  IpsTrajectory ips;
  ips.dimension = dimension;
  ips.lambda = lambda;
  ips.space = space;
  ips.t_start = t_start;
  ips.seed = seed;

  const long long vol = space.volume();
  std::vector<uint64_t> salts(vol * 2, 0);
  std::vector<IpsEvent> all;
  for (int round = 0;; ++round) {
    if (round > 100) throw std::runtime_error("timestamp collisions persist");
    all.clear();
    for (long long i = 0; i < vol; ++i) {
      SiteVector site = space.site_at(i);
      auto deaths =
          arrival_stream(seed, site, 0, 1.0, t_start, salts[2 * i]);
      auto births =
          arrival_stream(seed, site, 1, lambda, t_start, salts[2 * i + 1]);
      all.insert(all.end(), deaths.begin(), deaths.end());
      all.insert(all.end(), births.begin(), births.end());
    }
    std::sort(all.begin(), all.end(), [](const IpsEvent& a, const IpsEvent& b) {
      if (a.time != b.time) return a.time < b.time;
      if (a.site != b.site) return a.site < b.site;
      return a.kind < b.kind;
    });
    bool collision = false;
    for (size_t e = 1; e < all.size(); ++e)
      if (all[e].time == all[e - 1].time) {
        salts[2 * space.index_of(all[e].site) + all[e].kind] =
            mix64(salts[2 * space.index_of(all[e].site) + all[e].kind] + 1);
        collision = true;
      }
    if (!collision) break;
  }

  ips.events = std::move(all);
  ips.value_after.resize(ips.events.size());
  ips.site_events.assign(vol, {});
  std::vector<uint8_t> state(vol, 1);
  auto value_of = [&](const SiteVector& p) {
    return space.contains(p) ? state[space.index_of(p)] != 0 : true;
  };
  for (size_t e = 0; e < ips.events.size(); ++e) {
    const auto& ev = ips.events[e];
    long long i = space.index_of(ev.site);
    bool v;
    if (ev.kind == 0) {
      v = false;
    } else {
      v = value_of(ev.site);
      if (!v) {
        bool all_partners = true;
        for (int k = 0; k < dimension && all_partners; ++k)
          all_partners = value_of(site_add(ev.site, unit_site(dimension, k)));
        v = all_partners;
      }
    }
    state[i] = v ? 1 : 0;
    ips.value_after[e] = state[i];
    ips.site_events[i].push_back(static_cast<int>(e));
  }
  return ips;
}

}  // namespace toomlab
