#pragma once
// Dimension estimation (box counting, E_k mass-distribution ladder) and
// statistical verification (Lyapunov exponents, correlation decay, CLT) on
// the induced system and its Gibbs measures.

#include <cstdint>
#include <string>
#include <vector>

#include "henon/shift_thermo.hpp"

namespace henon {

struct scale_range_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct degenerate_observable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// points approximating a one-dimensional slice (positions in the leaf chart)
struct SliceSample {
  int leaf_id = 0;
  std::vector<double> positions;  // sorted
  int depth = 0;
};

struct BoxDimFit {
  double dimension = 0;
  double r2 = 0;
  std::vector<double> scales;
  std::vector<long> counts;
};
// least-squares slope of log N(delta) against log(1/delta); scales must span
// at least two decades
BoxDimFit box_dimension(const SliceSample& sample,
                        const std::vector<double>& scales);

// nested compact sets E_k on the clipped tangency leaf, built by iterated
// removal of the Theta_0 preimages, with the length sandwich and the
// mass-distribution lower bound
struct CantorLadder {
  // component intervals per level (E_1..E_kmax) in the leaf's x-chart
  std::vector<std::vector<std::pair<double, double>>> levels;
  std::vector<double> min_len, max_len;     // component lengths per level
  std::vector<double> removed_fraction;     // l(E_k \ E_{k+1}) / l(E_k)
  double diam_theta0 = 0;
  double C_lower = 0, C_upper = 0;  // fitted sandwich constants
  double removal_C = 0;             // removed fraction / diam Theta_0
  double rho = 0;                   // (2 - eps)(1 - removal_C diam Theta_0)
  double lower_bound = 0;           // log rho / log(2 + eps)
};
CantorLadder ek_ladder(InducingContext& ctx, const ThetaTower& theta,
                       int k_max);

// dense point sample of one ladder level, for box counting
SliceSample slice_from_ladder(const CantorLadder& ladder, int level,
                              double resolution);

struct LyapunovEstimate {
  double lambda = 0;
  double error_bar = 0;  // batch-means standard error
  int n = 0;
};
LyapunovEstimate lyapunov_u(const MapParams& p, Point z0, int n, int burn_in);

// phase-space orbit distributed per the lifted Gibbs measure at truncation
// accuracy: symbols sampled i.i.d. from the depth-1 weights, branch orbit
// segments concatenated from the marked points; deterministic given seed
std::vector<Point> sample_gibbs_orbit(InducingContext& ctx,
                                      const InducedSystem& sys,
                                      const TruncatedShift& shift,
                                      const GibbsResult& g, long length,
                                      std::uint64_t seed);

// observable library: Holder observables evaluated along orbits
std::vector<double> observable_x(const std::vector<Point>& orbit);
std::vector<double> observable_dist(const std::vector<Point>& orbit,
                                    Point zeta0);
// psi o f - psi with psi = x-coordinate (coboundary control; length - 1)
std::vector<double> observable_coboundary_x(const std::vector<Point>& orbit);

struct AcfReport {
  std::vector<int> lags;
  std::vector<double> acf;  // normalized, acf at lag 0 equals 1
  double amp = 0, rate = 0;  // fitted |ACF(n)| <= amp * rate^n
  double r2 = 0;
};
AcfReport correlation_decay(const std::vector<double>& values,
                            const std::vector<int>& lags);

struct CltReport {
  int n_block = 0, n_samples = 0;
  double ks_stat = 0;
  double p_value = 0;
  double sigma = 0;  // batch estimate of the CLT variance scale
};
CltReport clt_test(const std::vector<double>& values, int n_block,
                   int n_samples);

// dim^u(mu) = h(mu) / lambda^u(mu) in lifted (Abramov/Kac) form
double dimension_of_measure(const GibbsResult& g, const TruncatedShift& shift);

}  // namespace henon
