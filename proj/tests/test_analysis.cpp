#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "henon/analysis.hpp"

using namespace henon;

namespace {

constexpr double kAStar = 2.002248169994;
constexpr double kTu = 0.978271;  // pressure root of the depth-26 system

// tight-sandwich context (epsilon = 0.1) carrying the E_k ladder to depth 12
struct LadderFx {
  InducingContext ctx;
  ThetaTower tower;
  CantorLadder lad;

  static MapParams make() {
    MapParams p;
    p.a = kAStar;
    p.b = 1e-3;
    p.N = 10;
    p.epsilon = 0.1;
    return p;
  }
  LadderFx() : ctx(make()) {
    AlphaFamily fam =
        build_alpha(ctx, RegionR{{}, {}, {}, {}, Rect{-2, 2, -1, 1}, 0}, 25);
    tower = build_theta(ctx, fam, 0);
    lad = ek_ladder(ctx, tower, 12);
  }
  static LadderFx& fx() {
    static LadderFx f;
    return f;
  }
};

// wide-band context (epsilon = 0.5) with the induced system, the Gibbs state
// at t = 0.8, and a long sampled orbit
struct OrbitFx {
  InducingContext ctx;
  InducedSystem sys;
  TruncatedShift shift;
  GibbsResult gibbs;
  std::vector<Point> orbit;

  static MapParams make() {
    MapParams p;
    p.a = kAStar;
    p.b = 1e-3;
    p.N = 10;
    p.epsilon = 0.5;
    return p;
  }
  static GibbsResult equilibrium(const InducedSystem& sys, double t,
                                 TruncatedShift& out) {
    out = truncate_shift(sys, t, 25);
    double c = solve_pressure_shift(out);
    for (size_t i = 0; i < out.pot.base.size(); ++i)
      out.pot.base[i] -= c * out.pot.tau[i];
    return gibbs_truncated(out);
  }
  OrbitFx() : ctx(make()) {
    AlphaFamily fam =
        build_alpha(ctx, RegionR{{}, {}, {}, {}, Rect{-2, 2, -1, 1}, 0}, 25);
    ThetaTower tw = build_theta(ctx, fam, 0);
    sys = first_return_branches(ctx, tw, 26);
    gibbs = equilibrium(sys, 0.8, shift);
    orbit = sample_gibbs_orbit(ctx, sys, shift, gibbs, 600000, 42);
  }
  static OrbitFx& fx() {
    static OrbitFx f;
    return f;
  }
};

std::vector<double> geometric_scales(double from, double to, double factor) {
  std::vector<double> s;
  for (double d = from; d > to; d *= factor) s.push_back(d);
  return s;
}

// endpoints of the depth-12 two-sided Cantor construction with gap ratio
// 1 - 2/den (den = 3 gives the middle-thirds set)
SliceSample cantor_endpoints(int den) {
  std::vector<std::pair<double, double>> iv = {{0.0, 1.0}};
  for (int k = 0; k < 12; ++k) {
    std::vector<std::pair<double, double>> nx;
    for (auto [a, b] : iv) {
      double t = (b - a) / den;
      nx.push_back({a, a + t});
      nx.push_back({b - t, b});
    }
    iv = std::move(nx);
  }
  SliceSample s;
  for (auto [a, b] : iv) {
    s.positions.push_back(a);
    s.positions.push_back(b);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("box dimension recovers synthetic oracles") {
  SliceSample interval;
  for (int i = 0; i <= 100000; ++i) interval.positions.push_back(i / 100000.0);
  BoxDimFit unit = box_dimension(interval, geometric_scales(0.1, 1e-4, 0.7));
  CHECK(std::abs(unit.dimension - 1.0) < 0.02);
  CHECK(unit.r2 > 0.999);
  CHECK(unit.scales.size() == unit.counts.size());
  // descending scale grid => non-decreasing box counts
  for (size_t i = 0; i + 1 < unit.counts.size(); ++i)
    CHECK(unit.counts[i] <= unit.counts[i + 1]);

  BoxDimFit thirds =
      box_dimension(cantor_endpoints(3), geometric_scales(0.3, 3e-6, 0.65));
  CHECK(std::abs(thirds.dimension - std::log(2.0) / std::log(3.0)) < 0.02);
  CHECK(thirds.r2 > 0.99);

  BoxDimFit fifths =
      box_dimension(cantor_endpoints(5), geometric_scales(0.3, 1e-8, 0.55));
  CHECK(std::abs(fifths.dimension - std::log(2.0) / std::log(5.0)) < 0.02);
  CHECK(fifths.r2 > 0.99);
}

TEST_CASE("box dimension rejects malformed input") {
  SliceSample one;
  one.positions = {0.5};
  CHECK_THROWS_AS(box_dimension(one, geometric_scales(0.1, 1e-4, 0.7)),
                  invalid_input);
  SliceSample ok;
  ok.positions = {0.1, 0.9};
  CHECK_THROWS_AS(box_dimension(ok, {0.1}), scale_range_error);
  // grid narrower than two decades
  CHECK_THROWS_AS(box_dimension(ok, {0.1, 0.05, 0.02}), scale_range_error);
  CHECK_THROWS_AS(box_dimension(ok, {0.1, 0.0}), scale_range_error);
}

// ---------------------------------------------------------------------------

TEST_CASE("E_k ladder: structure and nesting") {
  const CantorLadder& lad = LadderFx::fx().lad;
  REQUIRE(lad.levels.size() == 12);
  REQUIRE(lad.min_len.size() == 12);
  REQUIRE(lad.removed_fraction.size() == 11);

  // E_1 is the clipped leaf minus the tip band: two components bracketing 0
  REQUIRE(lad.levels[0].size() == 2);
  CHECK(lad.levels[0][0].second < 0);
  CHECK(lad.levels[0][1].first > 0);
  CHECK(lad.diam_theta0 == doctest::Approx(2.04e-3).epsilon(0.1));
  // the gap between them is the tip band itself
  CHECK(lad.levels[0][1].first - lad.levels[0][0].second ==
        doctest::Approx(lad.diam_theta0).epsilon(1e-6));

  // the first preimage removal lands outside the clipped leaf, so E_2 = E_1;
  // the first actual cut happens at level 3
  CHECK(lad.removed_fraction[0] == 0.0);
  CHECK(lad.removed_fraction[1] == doctest::Approx(0.0246).epsilon(0.15));
  CHECK(lad.levels[1].size() == 2);
  CHECK(lad.levels[2].size() == 4);

  // component counts grow; the deepest level resolves hundreds of pieces
  for (size_t k = 0; k + 1 < lad.levels.size(); ++k)
    CHECK(lad.levels[k].size() <= lad.levels[k + 1].size());
  CHECK(lad.levels[11].size() > 400);
  CHECK(lad.levels[11].size() < 800);

  // strict nesting: every component of E_{k+1} sits inside one of E_k
  for (size_t k = 0; k + 1 < lad.levels.size(); ++k) {
    for (auto [a, b] : lad.levels[k + 1]) {
      bool inside = false;
      for (auto [c, d] : lad.levels[k])
        if (a >= c - 1e-10 && b <= d + 1e-10) {
          inside = true;
          break;
        }
      CHECK(inside);
    }
    // disjoint, sorted components within each level
    for (size_t i = 0; i + 1 < lad.levels[k].size(); ++i)
      CHECK(lad.levels[k][i].second < lad.levels[k][i + 1].first);
  }
}

TEST_CASE("E_k ladder: length sandwich and mass-distribution bound") {
  const CantorLadder& lad = LadderFx::fx().lad;
  const double eps = 0.1;

  // fitted constants are finite and modest
  CHECK(lad.C_lower > 0.5);
  CHECK(lad.C_lower < 2.0);
  CHECK(lad.C_upper > 10.0);
  CHECK(lad.C_upper < 100.0);

  // (1/C)(2+eps)^-k <= component length <= C (2-eps)^-k at every level
  for (size_t i = 0; i < lad.levels.size(); ++i) {
    int k = static_cast<int>(i) + 1;
    CHECK(lad.min_len[i] >=
          std::pow(2.0 + eps, -k) / lad.C_lower * (1.0 - 1e-9));
    CHECK(lad.max_len[i] <=
          lad.C_upper * std::pow(2.0 - eps, -k) * (1.0 + 1e-9));
  }

  // after the parity transient the per-level constants settle: comparing
  // level k against k + 2 (same removal parity) varies by < 30% once the
  // largest components have started being cut (k >= 10 on the upper side)
  {
    double cu_a = lad.max_len[9] * std::pow(2.0 - eps, 10);
    double cu_b = lad.max_len[11] * std::pow(2.0 - eps, 12);
    CHECK(std::abs(cu_a - cu_b) / cu_b < 0.30);
  }
  for (int k = 9; k + 2 <= 12; ++k) {
    double cl_a = std::pow(2.0 + eps, -k) / lad.min_len[k - 1];
    double cl_b = std::pow(2.0 + eps, -(k + 2)) / lad.min_len[k + 1];
    CHECK(std::abs(cl_a - cl_b) / cl_b < 0.30);
  }

  // removed fractions: uniformly small, proportional to diam Theta_0, and
  // comparable across the levels that actually cut (within a factor two)
  double lo = 1.0, hi = 0.0;
  for (size_t i = 4; i < lad.removed_fraction.size(); ++i) {
    double f = lad.removed_fraction[i];
    CHECK(f > 0.0);
    CHECK(f <= lad.removal_C * lad.diam_theta0 * (1.0 + 1e-12));
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  CHECK(hi / lo < 2.0);
  CHECK(lad.removal_C == doctest::Approx(12.1).epsilon(0.25));

  // contraction-vs-removal balance gives a positive dimension lower bound
  CHECK(lad.rho > 1.0);
  CHECK(lad.rho < 2.0 - eps);
  CHECK(lad.lower_bound ==
        doctest::Approx(std::log(lad.rho) / std::log(2.0 + eps)));
  CHECK(lad.lower_bound > 0.7);
  CHECK(lad.lower_bound < 0.95);
}

TEST_CASE("E_k ladder: box dimension of the deepest level matches t^u") {
  const CantorLadder& lad = LadderFx::fx().lad;
  SliceSample slice = slice_from_ladder(lad, 12, 1e-6);
  CHECK(slice.depth == 12);
  CHECK(slice.positions.size() > 10000);
  CHECK(std::is_sorted(slice.positions.begin(), slice.positions.end()));

  BoxDimFit fit = box_dimension(slice, geometric_scales(3e-2, 2e-5, 0.7));
  CHECK(fit.r2 > 0.99);
  CHECK(std::abs(fit.dimension - kTu) < 0.05);
  // the mass-distribution bound really is a lower bound for the estimate
  CHECK(lad.lower_bound < fit.dimension);
}

TEST_CASE("E_k ladder: validation") {
  LadderFx& f = LadderFx::fx();
  CHECK_THROWS_AS(ek_ladder(f.ctx, f.tower, 0), invalid_input);
  CHECK_THROWS_AS(ek_ladder(f.ctx, f.tower, 21), invalid_input);

  ThetaTower degen = f.tower;
  degen.theta_k[0].degenerate = true;
  CHECK_THROWS_AS(ek_ladder(f.ctx, degen, 4), refinement_needed);

  InducingContext fresh(LadderFx::make());
  CHECK_THROWS_AS(ek_ladder(fresh, f.tower, 4), invalid_input);

  CHECK_THROWS_AS(slice_from_ladder(f.lad, 0, 1e-6), invalid_input);
  CHECK_THROWS_AS(slice_from_ladder(f.lad, 13, 1e-6), invalid_input);
  CHECK_THROWS_AS(slice_from_ladder(f.lad, 3, 0.0), invalid_input);
}

// ---------------------------------------------------------------------------

TEST_CASE("Lyapunov exponent: one-dimensional limit oracle") {
  MapParams p;
  p.a = 2.0;
  p.b = 0.0;
  LyapunovEstimate est = lyapunov_u(p, Point{0.3, 0.0}, 200000, 100);
  CHECK(est.n == 200000);
  CHECK(est.lambda == doctest::Approx(std::log(2.0)).epsilon(1e-3));
  CHECK(est.error_bar > 0.0);
  CHECK(est.error_bar < 1e-3);

  CHECK_THROWS_AS(lyapunov_u(p, Point{2.0, 0.0}, 1000, 0), escape_error);
  CHECK_THROWS_AS(lyapunov_u(p, Point{0.3, 0.0}, 5, 0), invalid_input);
}

// ---------------------------------------------------------------------------

TEST_CASE("Gibbs orbit sampling: support and determinism") {
  OrbitFx& f = OrbitFx::fx();
  REQUIRE(f.orbit.size() == 600000);
  for (size_t i = 0; i < f.orbit.size(); i += 97) {
    CHECK(std::abs(f.orbit[i].x) < 1.05);
    CHECK(std::abs(f.orbit[i].y) < 0.05);
  }

  auto again = sample_gibbs_orbit(f.ctx, f.sys, f.shift, f.gibbs, 5000, 42);
  for (int i = 0; i < 5000; ++i) {
    CHECK(again[i].x == f.orbit[i].x);
    CHECK(again[i].y == f.orbit[i].y);
  }
  auto other = sample_gibbs_orbit(f.ctx, f.sys, f.shift, f.gibbs, 5000, 43);
  int diff = 0;
  for (int i = 0; i < 5000; ++i)
    if (other[i].x != f.orbit[i].x) ++diff;
  CHECK(diff > 1000);

  TruncatedShift empty;
  CHECK_THROWS_AS(sample_gibbs_orbit(f.ctx, f.sys, empty, f.gibbs, 10, 1),
                  invalid_input);
  GibbsResult bad = f.gibbs;
  bad.weights.pop_back();
  CHECK_THROWS_AS(sample_gibbs_orbit(f.ctx, f.sys, f.shift, bad, 10, 1),
                  invalid_input);
}

// ---------------------------------------------------------------------------

TEST_CASE("correlation decay: synthetic oracles") {
  std::vector<int> lags;
  for (int l = 1; l <= 20; ++l) lags.push_back(l);

  // i.i.d. noise: every autocorrelation inside the 3/sqrt(n) band
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> iid(50000);
  for (double& v : iid) v = uni(rng);
  AcfReport white = correlation_decay(iid, lags);
  CHECK(white.acf[0] == 1.0);
  for (size_t i = 1; i < white.acf.size(); ++i)
    CHECK(std::abs(white.acf[i]) < 3.0 / std::sqrt(50000.0) * 1.5);

  // AR(1) with coefficient 0.6: ACF(l) = 0.6^l, so the fit pins rate and
  // amp over the lags where 0.6^l still clears the sampling noise
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ar(200000);
  double prev = 0.0;
  for (double& v : ar) {
    prev = 0.6 * prev + gauss(rng);
    v = prev;
  }
  AcfReport fit = correlation_decay(ar, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(fit.rate == doctest::Approx(0.6).epsilon(0.03));
  CHECK(fit.amp == doctest::Approx(1.0).epsilon(0.1));
  CHECK(fit.r2 > 0.98);

  std::vector<double> flat(5000, 3.14);
  CHECK_THROWS_AS(correlation_decay(flat, lags), degenerate_observable);
  std::vector<double> shorty(500, 0.0);
  CHECK_THROWS_AS(correlation_decay(shorty, lags), invalid_input);
  CHECK_THROWS_AS(correlation_decay({}, lags), invalid_input);
  CHECK_THROWS_AS(correlation_decay(iid, {}), invalid_input);
}

TEST_CASE("correlation decay on the Gibbs orbit") {
  OrbitFx& f = OrbitFx::fx();
  std::vector<int> lags;
  for (int l = 1; l <= 30; ++l) lags.push_back(l);

  // x-coordinate: the measure is nearly symmetric, so its autocorrelations
  // sit at the sampling noise floor from lag 1 on -- decay is immediate
  AcfReport ax = correlation_decay(observable_x(f.orbit), lags);
  CHECK(ax.rate < 1.0);
  for (size_t i = 1; i < ax.acf.size(); ++i) CHECK(std::abs(ax.acf[i]) < 0.03);

  // distance to the tip: genuinely correlated within return blocks, and the
  // decay is geometric over the lags where the signal clears the noise
  auto dist = observable_dist(f.orbit, Point{0.0, -0.022});
  AcfReport ad = correlation_decay(dist, {1, 2, 3, 4, 5, 6});
  CHECK(std::abs(ad.acf[1]) > 0.1);
  CHECK(ad.rate > 0.2);
  CHECK(ad.rate < 0.55);
  CHECK(ad.r2 > 0.9);
  // past the signal range the tail is again inside the noise band
  AcfReport tail = correlation_decay(dist, lags);
  for (size_t i = 1; i < tail.acf.size(); ++i)
    if (tail.lags[i] >= 10) CHECK(std::abs(tail.acf[i]) < 0.012);
}

// ---------------------------------------------------------------------------

TEST_CASE("central limit theorem: block sums are asymptotically normal") {
  // i.i.d. signs: KS against the fitted normal should rarely reject
  int accepted = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> v(60000);
    for (double& x : v) x = (rng() & 1) ? 1.0 : -1.0;
    CltReport rep = clt_test(v, 200, 300);
    if (rep.p_value > 0.01) ++accepted;
    CHECK(rep.sigma == doctest::Approx(1.0).epsilon(0.08));
  }
  CHECK(accepted >= 18);

  OrbitFx& f = OrbitFx::fx();
  CltReport cx = clt_test(observable_x(f.orbit), 1024, 500);
  CHECK(cx.p_value > 0.01);
  CHECK(cx.sigma > 0.5);
  CHECK(cx.sigma < 0.8);

  // coboundary observable: the block variance scale collapses ~ 1/sqrt(m)
  auto cb = observable_coboundary_x(f.orbit);
  CltReport c1 = clt_test(cb, 256, 100);
  CltReport c2 = clt_test(cb, 1024, 100);
  CltReport c3 = clt_test(cb, 4096, 100);
  CHECK(c2.sigma / c1.sigma > 0.35);
  CHECK(c2.sigma / c1.sigma < 0.65);
  CHECK(c3.sigma / c2.sigma > 0.35);
  CHECK(c3.sigma / c2.sigma < 0.65);
  CHECK(c3.sigma < 0.02);

  std::vector<double> v(1000, 0.0);
  CHECK_THROWS_AS(clt_test(v, 1, 100), invalid_input);
  CHECK_THROWS_AS(clt_test(v, 10, 5), invalid_input);
  CHECK_THROWS_AS(clt_test(v, 100, 100), invalid_input);
  CltReport flat = clt_test(v, 10, 100);
  CHECK(flat.sigma == 0.0);
  CHECK(flat.p_value == 1.0);
}

// ---------------------------------------------------------------------------

TEST_CASE("dimension of the Gibbs measure") {
  // synthetic: uniform two-symbol state with per-symbol expansion log 2 has
  // entropy log 2 and dimension exactly one
  GibbsResult g;
  g.weights = {0.5, 0.5};
  g.entropy = std::log(2.0);
  TruncatedShift sh;
  sh.pot.log_deriv = {std::log(2.0), std::log(2.0)};
  CHECK(dimension_of_measure(g, sh) == doctest::Approx(1.0));
  sh.pot.log_deriv = {0.0, 0.0};
  CHECK_THROWS_AS(dimension_of_measure(g, sh), invalid_input);

  // at the pressure root the Gibbs dimension reproduces t^u
  OrbitFx& f = OrbitFx::fx();
  TruncatedShift su;
  GibbsResult gu = OrbitFx::equilibrium(f.sys, kTu, su);
  double du = dimension_of_measure(gu, su);
  CHECK(std::abs(du - kTu) < 0.02);

  // equilibrium states at other t never exceed the root dimension by more
  // than the truncation error
  for (double t : {0.3, 0.5, 0.9}) {
    TruncatedShift st;
    GibbsResult gt = OrbitFx::equilibrium(f.sys, t, st);
    double dt = dimension_of_measure(gt, st);
    CHECK(dt > 0.95);
    CHECK(dt <= du + 0.01);
  }
}
