#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "toomlab/lattice.hpp"

namespace toomlab {

// Counter-based generator: every draw is a pure hash of (seed, key words),
// so realizations are stable under window extension and fully reproducible.
uint64_t mix64(uint64_t z);
uint64_t keyed_hash(uint64_t seed, const uint64_t* words, size_t n);
uint64_t site_key(uint64_t seed, const SiteVector& site, long long t,
                  uint64_t salt = 0);
double uniform01(uint64_t h);       // [0, 1)
double uniform01_open(uint64_t h);  // (0, 1)

// A random mixture: at every spacetime point one of `maps` is drawn
// independently with the given probabilities.
struct ModelSpec {
  int dimension = 0;
  std::string name;
  std::vector<MonotonicMap> maps;
  std::vector<double> probs;
  int primary = -1;  // distinguished non-constant map (slab substitutions)

  double defect_prob() const;  // total probability of constant-zero maps
  int sample_index(uint64_t seed, const SiteVector& site, long long t) const;
};

ModelSpec make_model(std::string name, std::vector<MonotonicMap> maps,
                     std::vector<double> probs, int primary);

// Presets: "nec", "nn", "coop", "unstable-example" are death models (defect
// probability p); "coop-identity" mixes defect/identity/cooperative with
// probabilities p, q, r; "corners" splits 1-p over the four corner
// majorities.
ModelSpec preset_model(const std::string& name, int dimension, double p,
                       double q = 0, double r = 0);

// One sampled window of the mixture: map indices on space x (t_min, 0].
struct FlowRealization {
  ModelSpec model;
  uint64_t seed = 0;
  Box space;
  int depth = 0;  // planes at t = -depth+1 .. 0
  std::vector<uint8_t> plane_maps;

  long long t_min() const { return -static_cast<long long>(depth); }
  bool in_window(const SiteVector& i, long long t) const;
  int map_index_at(const SiteVector& i, long long t) const;
  const MonotonicMap& map_at(const SiteVector& i, long long t) const;
};

FlowRealization sample_flow(const ModelSpec& model, uint64_t seed,
                            const Box& space, int depth);

// Copy of `flow` with every plane in -slab_depth < t <= 0 replaced by the
// model's primary map.
FlowRealization modified_flow(const FlowRealization& flow, int slab_depth);

std::vector<std::pair<SiteVector, long long>> flow_defects(
    const FlowRealization& flow);

// The trajectory started from all ones at t_min, one plane per time.
struct Trajectory {
  Box space;
  Boundary boundary = Boundary::AllOnes;
  long long t_min = 0;
  std::vector<Configuration> planes;  // t = t_min .. 0

  const Configuration& at_time(long long t) const;
  bool value(const SiteVector& i, long long t) const;
};

Trajectory maximal_trajectory(const FlowRealization& flow);

// One synchronous random step: plane maps drawn at time t, then applied.
Configuration step_random_plane(const ModelSpec& model, uint64_t seed,
                                long long t, const Configuration& x);

// Spatial box covering everything that can influence the origin in `depth`
// steps.
Box origin_cone_box(const ModelSpec& model, int depth);

struct OriginProbe {
  bool value = true;  // x at the origin at time 0
  FlowRealization flow;
  Trajectory trajectory;
};

// Doubles the window depth until the origin value settles. A windowed zero
// is already exact; a one is accepted once it survives two consecutive
// doublings or the depth cap.
OriginProbe probe_origin(const ModelSpec& model, uint64_t seed,
                         int initial_depth = 8, int max_depth = 256);

struct DensityResult {
  double rho_mean = 0;
  double rho_ci_lo = 0;
  double rho_ci_hi = 0;
  std::vector<double> replica_means;
};

// Density of ones on a torus after burn_in synchronous steps, averaged over
// independent replicas; the interval is a normal 95% CI over replica means.
DensityResult density_estimate(const ModelSpec& model, uint64_t seed,
                               int torus_width, int burn_in, int replicas);

int thread_count();  // TOOMLAB_THREADS override, else hardware concurrency

// --- continuous time ---

struct IpsEvent {
  double time = 0;
  int kind = 0;  // 0 = death, 1 = cooperative birth
  SiteVector site;
};

// Event-driven sexual-contact trajectory on a box with all-ones outside:
// deaths at rate 1, cooperative births at rate lambda (site turns 1 when
// all d forward neighbours are 1). All ones at t_start; the stored step
// function is right-continuous with left limits at arrivals.
struct IpsTrajectory {
  int dimension = 0;
  double lambda = 0;
  Box space;
  double t_start = 0;
  uint64_t seed = 0;
  std::vector<IpsEvent> events;               // strictly increasing times
  std::vector<uint8_t> value_after;           // site value right after event
  std::vector<std::vector<int>> site_events;  // per box index

  bool value_at(const SiteVector& i, double t) const;
  bool value_left(const SiteVector& i, double t) const;
};

IpsTrajectory sample_ips_trajectory(int dimension, double lambda,
                                    const Box& space, double t_start,
                                    uint64_t seed);

}  // namespace toomlab
