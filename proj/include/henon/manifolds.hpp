#pragma once
// Stable/unstable manifolds of the fixed saddles, tangency detection, and the
// first-bifurcation parameter a*(b).

#include <functional>
#include <optional>
#include <vector>

#include "henon/curve.hpp"

namespace henon {

struct not_found_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct bracket_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct insufficient_curve : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Rect {
  double x_lo, x_hi, y_lo, y_hi;
  bool contains(Point z) const {
    return z.x >= x_lo && z.x <= x_hi && z.y >= y_lo && z.y <= y_hi;
  }
};

struct TangencyReport {
  Point location;              // candidate tangency point
  double gap = 0;              // signed normal distance (>0 separated, <0 crossed)
  double misalignment = 0;     // radians at closest approach
  std::string side;            // e.g. "W^u(Q) vs W^s(Q)"
};

// ---------------------------------------------------------------------------
// Machine-precision local parameterizations (used by the high-accuracy paths).

// Quadratic local invariant manifold gamma(t) = z + t v + t^2 w satisfying
// f(gamma(t)) = gamma(lambda t) + O(t^3).
struct LocalManifold {
  Point z, v, w;
  double lambda = 0;
  Point at(double t) const { return {z.x + t * v.x + t * t * w.x,
                                     z.y + t * v.y + t * t * w.y}; }
  Point deriv_at(double t) const { return {v.x + 2 * t * w.x,
                                           v.y + 2 * t * w.y}; }
};
LocalManifold local_unstable(const MapParams& p, const Saddle& s);
LocalManifold local_stable(const MapParams& p, const Saddle& s);

// Global chart for one branch of an invariant manifold: point(u) is evaluated
// by shrinking u into the local manifold's validity disc and re-iterating.
struct ManifoldChart {
  MapParams params;
  LocalManifold loc;
  double d0 = 1e-7;     // local validity radius
  bool forward = true;  // true: unstable (iterate f), false: stable (f^{-1})
  Point at(double u) const;
  Point tangent_at(double u) const;  // unit tangent (d point/du normalized)
};
ManifoldChart unstable_chart(const MapParams& p, const Saddle& s);
ManifoldChart stable_chart(const MapParams& p, const Saddle& s);

// Local stable manifold of a saddle represented as a graph x = g(y),
// computed by the graph transform to machine precision on a dense grid.
struct StableGraph {
  std::vector<double> ys, xs;  // ys increasing
  double at(double y) const;          // linear interpolation
  double slope_at(double y) const;    // secant slope
};
StableGraph local_stable_graph(const MapParams& p, const Saddle& s,
                               double y_half, int ny = 20001);

// Solves f^2(x, y) in graph for y given x (the stable "parabola" through the
// tangency region, a component of f^{-2} of the local stable manifold).
// Returns nullopt if the Newton solve fails to converge.
std::optional<double> parabola_y(const MapParams& p, const StableGraph& gQ,
                                 double x, double y_seed);

// A monotone sub-piece of an unstable-manifold image strand:
// s in [s_lo, s_hi] maps to f^level(loc.at(s)), monotone in x.
struct Strand {
  MapParams params;
  LocalManifold loc;
  int level = 0;
  double s_lo = 0, s_hi = 0;
  Point at(double s) const { return apply_n(params, loc.at(s), level); }
  double x_at(double s) const { return at(s).x; }
  double y_at(double s) const { return at(s).y; }
  double s_of_x(double x) const;  // bisection; requires monotone coverage
  // unit tangent and accumulated log-derivative along the strand
  TangentData tangent_at(double s) const;
};

// Finds the lowest monotone unstable strand of W^u(Q) crossing the vertical
// line x = x_ref inside |y| <= y_window; searches image levels <= max_level.
std::optional<Strand> bottom_strand(const MapParams& p, const Saddle& Q,
                                    double x_ref, double y_window,
                                    int max_level = 14,
                                    double span_lo = -0.55,
                                    double span_hi = 0.55);

// ---------------------------------------------------------------------------
// Public operations on polyline curves.

Curve grow_unstable(const MapParams& p, const Saddle& s,
                    double arclength_budget, double tol);
Curve grow_stable(const MapParams& p, const Saddle& s,
                  double arclength_budget, double tol);

TangencyReport detect_tangency(const Curve& wu, const Curve& ws,
                               const Rect& window);

struct BifurcationResult {
  double a_star = 0;
  TangencyReport report;
  int iterations = 0;
};
BifurcationResult find_first_bifurcation(const MapParams& params_template,
                                         double a_lo, double a_hi,
                                         double tol_a);

// signed gap between the lowest unstable strand and the stable parabola vertex
// at parameter a (b, orientation taken from params); >0 above a*.
double tangency_gap(MapParams p, double a, TangencyReport* report = nullptr);

// Least-squares fit of the strand-to-parabola vertical distance near the
// tangency, d(x) ~ alpha + beta (x - x_c)^2; rel_residual is sqrt(SSR/SST).
struct QuadraticFit {
  double alpha = 0, beta = 0, x_c = 0, rel_residual = 0;
};
QuadraticFit quadratic_tangency_fit(MapParams p, double a_star,
                                    double half_width = 2e-3, int npts = 41);

struct C2bReport {
  double max_slope = 0, max_curvature = 0;
  bool pass = false;
};
C2bReport c2b_check(const Curve& c, double b);

}  // namespace henon
