#include "henon/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace henon {

namespace {

// solve (lambda^2 I - Df_z) w = (-a v_x^2, 0) for the quadratic coefficient
Point quadratic_coeff(const MapParams& p, Point z, Point v, double lambda) {
  Mat2 J = jacobian(p, z);
  double l2 = lambda * lambda;
  Mat2 M{l2 - J.m00, -J.m01, -J.m10, l2 - J.m11};
  Point rhs{-p.a * v.x * v.x, 0.0};
  double det = M.det();
  if (det == 0) return {0, 0};
  return {(M.m11 * rhs.x - M.m01 * rhs.y) / det,
          (M.m00 * rhs.y - M.m10 * rhs.x) / det};
}

}  // namespace

LocalManifold local_unstable(const MapParams& p, const Saddle& s) {
  LocalManifold m;
  m.z = s.location;
  m.v = s.ev_u;
  m.lambda = s.lambda_u;
  m.w = quadratic_coeff(p, s.location, s.ev_u, s.lambda_u);
  return m;
}

LocalManifold local_stable(const MapParams& p, const Saddle& s) {
  LocalManifold m;
  m.z = s.location;
  m.v = s.ev_s;
  m.lambda = s.lambda_s;
  m.w = quadratic_coeff(p, s.location, s.ev_s, s.lambda_s);
  return m;
}

Point ManifoldChart::at(double u) const {
  double t = u;
  int m = 0;
  if (forward) {
    while (std::abs(t) > d0) { t /= loc.lambda; ++m; }
    Point z = loc.at(t);
    for (int i = 0; i < m; ++i) z = apply(params, z);
    return z;
  }
  while (std::abs(t) > d0) { t *= loc.lambda; ++m; }
  Point z = loc.at(t);
  for (int i = 0; i < m; ++i) z = inverse(params, z);
  return z;
}

Point ManifoldChart::tangent_at(double u) const {
  double t = u;
  int m = 0;
  if (forward) {
    while (std::abs(t) > d0) { t /= loc.lambda; ++m; }
  } else {
    while (std::abs(t) > d0) { t *= loc.lambda; ++m; }
  }
  Point z = loc.at(t);
  Point d = loc.deriv_at(t);
  double dn = norm(d);
  if (dn > 0) d = {d.x / dn, d.y / dn};
  for (int i = 0; i < m; ++i) {
    if (forward) {
      d = jacobian(params, z) * d;
      z = apply(params, z);
    } else {
      Point zp = inverse(params, z);
      // derivative of f^{-1} at z equals inverse of Df at zp
      Mat2 J = jacobian(params, zp);
      double det = J.det();
      Mat2 Ji{J.m11 / det, -J.m01 / det, -J.m10 / det, J.m00 / det};
      d = Ji * d;
      z = zp;
    }
    double n = norm(d);
    if (n > 0) d = {d.x / n, d.y / n};
  }
  return d;
}

ManifoldChart unstable_chart(const MapParams& p, const Saddle& s) {
  ManifoldChart c;
  c.params = p;
  c.loc = local_unstable(p, s);
  c.d0 = 1e-7;
  c.forward = true;
  return c;
}

ManifoldChart stable_chart(const MapParams& p, const Saddle& s) {
  ManifoldChart c;
  c.params = p;
  c.loc = local_stable(p, s);
  c.d0 = 1e-6;
  c.forward = false;
  return c;
}

double StableGraph::at(double y) const {
  if (ys.empty()) throw not_found_error("StableGraph: empty");
  if (y <= ys.front()) return xs.front();
  if (y >= ys.back()) return xs.back();
  auto it = std::lower_bound(ys.begin(), ys.end(), y);
  size_t i = it - ys.begin();
  double t = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
  return xs[i - 1] + t * (xs[i] - xs[i - 1]);
}

double StableGraph::slope_at(double y) const {
  auto it = std::lower_bound(ys.begin(), ys.end(), y);
  size_t i = std::clamp<size_t>(it - ys.begin(), 1, ys.size() - 1);
  return (xs[i] - xs[i - 1]) / (ys[i] - ys[i - 1]);
}

StableGraph local_stable_graph(const MapParams& p, const Saddle& s,
                               double y_half, int ny) {
  if (p.b <= 0) throw singular_map("local_stable_graph: requires b > 0");
  StableGraph g;
  g.ys.resize(ny);
  g.xs.resize(ny);
  const double y0 = s.location.y;
  const double lo = std::min(-y_half, y0 - 0.01);
  const double hi = std::max(y_half, y0 + 0.01);
  const double slope = s.ev_s.x / s.ev_s.y;  // dx/dy of the eigenline
  for (int i = 0; i < ny; ++i) {
    g.ys[i] = lo + (hi - lo) * i / (ny - 1);
    g.xs[i] = s.location.x + (g.ys[i] - y0) * slope;
  }
  const double sb = p.sqrt_b(), sgn = p.s();
  // graph transform: new graph x'(y) solves f(x', y) in old graph
  for (int sweep = 0; sweep < 200; ++sweep) {
    double max_change = 0;
    std::vector<double> nx(ny);
    for (int i = 0; i < ny; ++i) {
      double y = g.ys[i];
      double x = g.xs[i];
      for (int it = 0; it < 50; ++it) {
        double Y = sgn * sb * x;
        double F = 1.0 - p.a * x * x + sb * y - g.at(Y);
        double dF = -2.0 * p.a * x - g.slope_at(Y) * sgn * sb;
        double step = F / dF;
        x -= step;
        if (std::abs(step) < 1e-15) break;
      }
      nx[i] = x;
      max_change = std::max(max_change, std::abs(nx[i] - g.xs[i]));
    }
    g.xs = std::move(nx);
    if (max_change < 1e-14) break;
  }
  return g;
}

std::optional<double> parabola_y(const MapParams& p, const StableGraph& gQ,
                                 double x, double y_seed) {
  const double sb = p.sqrt_b(), sgn = p.s();
  double y = y_seed;
  for (int it = 0; it < 100; ++it) {
    double X1 = 1.0 - p.a * x * x + sb * y;
    double Y1 = sgn * sb * x;
    double X2 = 1.0 - p.a * X1 * X1 + sb * Y1;
    double Y2 = sgn * sb * X1;
    double F = X2 - gQ.at(Y2);
    double dX1 = sb;
    double dF = -2.0 * p.a * X1 * dX1 - gQ.slope_at(Y2) * sgn * sb * dX1;
    if (dF == 0) return std::nullopt;
    double step = F / dF;
    y -= step;
    if (!std::isfinite(y) || std::abs(y) > 50) return std::nullopt;
    if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(y))) return y;
  }
  return std::nullopt;
}

double Strand::s_of_x(double x) const {
  double lo = s_lo, hi = s_hi;
  double xlo = x_at(lo), xhi = x_at(hi);
  bool inc = xhi > xlo;
  if ((x < std::min(xlo, xhi)) || (x > std::max(xlo, xhi)))
    throw not_found_error("Strand::s_of_x: x outside strand range");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    double xm = x_at(mid);
    if ((xm < x) == inc) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

TangentData Strand::tangent_at(double s) const {
  Point z = loc.at(s);
  Point d = loc.deriv_at(s);
  double dn = norm(d);
  double log_norm = 0;
  if (dn > 0) d = {d.x / dn, d.y / dn};
  for (int i = 0; i < level; ++i) {
    d = jacobian(params, z) * d;
    z = apply(params, z);
    double n = norm(d);
    log_norm += std::log(n);
    d = {d.x / n, d.y / n};
  }
  return {z, d, log_norm};
}

std::optional<Strand> bottom_strand(const MapParams& p, const Saddle& Q,
                                    double x_ref, double y_window,
                                    int max_level, double span_lo,
                                    double span_hi) {
  LocalManifold loc = local_unstable(p, Q);
  const double d0 = 1e-7;
  const double lam = std::abs(loc.lambda);
  // levels needed before the image of the fundamental annulus reaches O(1)
  const int m_reach = static_cast<int>(std::ceil(std::log(1.0 / d0) / std::log(lam)));
  const int m_max = m_reach + max_level;
  const int ns = 20000;

  std::optional<Strand> best;
  double best_y = std::numeric_limits<double>::infinity();
  // Levels explored past the first spanning candidate: the boundary strand is
  // reached within a couple of levels, while rounding noise in f^m grows
  // ~lambda^m and would fake improvements at deep levels.
  int levels_after_found = 0;

  for (int m = m_reach - 2; m <= m_max && levels_after_found < 5; ++m) {
    // sample the fundamental annulus t in +/-(d0/lam, d0], advanced m levels
    std::vector<double> ts(2 * ns);
    std::vector<Point> zs(2 * ns);
    for (int i = 0; i < ns; ++i) {
      double t = d0 / lam + (d0 - d0 / lam) * (i + 0.5) / ns;
      ts[i] = -t;
      ts[ns + i] = t;
    }
    std::sort(ts.begin(), ts.end());
    bool ok_any = false;
    for (int i = 0; i < 2 * ns; ++i) {
      Point z = loc.at(ts[i]);
      bool ok = true;
      for (int k = 0; k < m; ++k) {
        z = apply(p, z);
        if (std::abs(z.x) > 10 || std::abs(z.y) > 10) { ok = false; break; }
      }
      zs[i] = ok ? z : Point{1e9, 1e9};
      ok_any = ok_any || ok;
    }
    if (!ok_any) continue;
    // monotone-in-x runs; negative-t and positive-t halves never mix since
    // ts is sorted and the seed annulus is symmetric
    int i = 0;
    while (i + 1 < 2 * ns) {
      if (zs[i].x > 1e8) { ++i; continue; }
      int j = i + 1;
      if (zs[j].x > 1e8 || zs[j].x == zs[i].x) { ++i; continue; }
      bool inc = zs[j].x > zs[i].x;
      while (j + 1 < 2 * ns && zs[j + 1].x < 1e8 &&
             ((zs[j + 1].x > zs[j].x) == inc) && zs[j + 1].x != zs[j].x)
        ++j;
      // run [i, j]
      double rx_lo = std::min(zs[i].x, zs[j].x);
      double rx_hi = std::max(zs[i].x, zs[j].x);
      if (rx_lo <= std::min(span_lo, x_ref) && rx_hi >= std::max(span_hi, x_ref)) {
        Strand cand{p, loc, m, ts[i], ts[j]};
        double s = cand.s_of_x(x_ref);
        double y = cand.y_at(s);
        if (std::abs(y) <= y_window && y < best_y - 1e-12) {
          best_y = y;
          best = cand;
        }
      }
      i = j;
    }
    if (best) ++levels_after_found;
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

Curve grow_side(const MapParams& p, const ManifoldChart& chart, double sign,
                double budget, double tol, CurveTag tag) {
  std::vector<Point> pts;
  const double h_max = 1e-2, angle_tol = 0.05;
  const double box = 2.5;
  double u = 0;
  double du = std::max(tol, chart.d0) * 0.5;
  Point prev = chart.at(0);
  pts.push_back(prev);
  double arclen = 0;
  Point last_dir{0, 0};
  bool have_dir = false;
  size_t guard = 0;
  while (arclen < budget && ++guard < 2000000) {
    double step = du;
    Point cand;
    for (int halve = 0; halve < 60; ++halve) {
      cand = chart.at(u + sign * step);
      Point d = cand - prev;
      double dn = norm(d);
      if (dn <= h_max) {
        if (!have_dir || dn == 0) break;
        Point dir{d.x / dn, d.y / dn};
        double c = std::clamp(dot(dir, last_dir), -1.0, 1.0);
        if (std::acos(c) < angle_tol) break;
      }
      step *= 0.5;
    }
    Point d = cand - prev;
    double dn = norm(d);
    u += sign * step;
    du = std::min(step * 1.5, std::abs(u) * 0.2 + chart.d0);
    if (dn > 0) {
      last_dir = {d.x / dn, d.y / dn};
      have_dir = true;
      if (dn >= tol * 1e-2) {  // prune ultra-short segments
        pts.push_back(cand);
        arclen += dn;
      }
      prev = cand;
    }
    if (std::abs(cand.x) > box || std::abs(cand.y) > box) break;
  }
  return make_curve(std::move(pts), tag);
}

bool side_bounded(const MapParams& p, const ManifoldChart& chart, double sign,
                  int steps) {
  Point z = chart.at(sign * chart.d0 * 0.5);
  for (int i = 0; i < steps; ++i) {
    z = chart.forward ? apply(p, z) : inverse(p, z);
    if (!z.finite() || std::abs(z.x) > 3 || std::abs(z.y) > 3) return false;
  }
  return true;
}

Curve grow_generic(const MapParams& p, const Saddle& s, double budget,
                   double tol, bool forward) {
  p.validate();
  if (!forward && p.b <= 0)
    throw singular_map("grow_stable: requires b > 0");
  ManifoldChart chart = forward ? unstable_chart(p, s) : stable_chart(p, s);
  CurveTag tag = forward ? CurveTag::unstable : CurveTag::stable;
  bool plus = side_bounded(p, chart, +1, 60);
  bool minus = side_bounded(p, chart, -1, 60);
  if (!plus && !minus) plus = minus = true;  // grow both, clipped by the box
  std::vector<Point> pts;
  if (minus) {
    Curve cm = grow_side(p, chart, -1, budget, tol, tag);
    pts.assign(cm.vertices.rbegin(), cm.vertices.rend());
  }
  if (plus) {
    Curve cp = grow_side(p, chart, +1, budget, tol, tag);
    size_t start = pts.empty() ? 0 : 1;  // both sides share the saddle vertex
    pts.insert(pts.end(), cp.vertices.begin() + start, cp.vertices.end());
  }
  return make_curve(std::move(pts), tag);
}

}  // namespace

Curve grow_unstable(const MapParams& p, const Saddle& s, double budget,
                    double tol) {
  return grow_generic(p, s, budget, tol, true);
}

Curve grow_stable(const MapParams& p, const Saddle& s, double budget,
                  double tol) {
  return grow_generic(p, s, budget, tol, false);
}

// ---------------------------------------------------------------------------

TangencyReport detect_tangency(const Curve& wu, const Curve& ws,
                               const Rect& window) {
  auto inside = [&](Point z) { return window.contains(z); };
  bool wu_in = std::any_of(wu.vertices.begin(), wu.vertices.end(), inside);
  bool ws_in = std::any_of(ws.vertices.begin(), ws.vertices.end(), inside);
  if (!wu_in || !ws_in)
    throw not_found_error(std::string("detect_tangency: ") +
                          (!wu_in ? "unstable" : "stable") +
                          " curve absent from window");

  // transversal crossings of wu with ws inside the window, with wu arclength
  struct Crossing { double s_on_wu; Point pt; };
  std::vector<Crossing> crossings;
  for (size_t i = 0; i + 1 < wu.vertices.size(); ++i) {
    Point a = wu.vertices[i], r = wu.vertices[i + 1] - a;
    for (size_t j = 0; j + 1 < ws.vertices.size(); ++j) {
      Point q = ws.vertices[j], s = ws.vertices[j + 1] - q;
      double denom = r.x * s.y - r.y * s.x;
      if (denom == 0) continue;
      Point qp = q - a;
      double t = (qp.x * s.y - qp.y * s.x) / denom;
      double v = (qp.x * r.y - qp.y * r.x) / denom;
      if (t >= 0 && t < 1 && v >= 0 && v < 1) {
        Point pt = a + t * r;
        if (window.contains(pt))
          crossings.push_back({wu.arclength[i] + t * norm(r), pt});
      }
    }
  }

  auto tangent_near = [](const Curve& c, Point z) {
    size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < c.vertices.size(); ++i) {
      double d = norm(c.vertices[i] - z);
      if (d < bd) { bd = d; best = i; }
    }
    return c.tangents[best];
  };
  auto angle_between = [](Point u, Point v) {
    double c = std::abs(dot(u, v));
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
  };

  TangencyReport rep;
  rep.side = "W^u vs W^s";
  if (crossings.size() >= 2) {
    std::sort(crossings.begin(), crossings.end(),
              [](const Crossing& a, const Crossing& b) {
                return a.s_on_wu < b.s_on_wu;
              });
    double s0 = crossings.front().s_on_wu, s1 = crossings.back().s_on_wu;
    double depth = 0;
    Point deepest = crossings.front().pt;
    for (size_t i = 0; i < wu.vertices.size(); ++i) {
      if (wu.arclength[i] <= s0 || wu.arclength[i] >= s1) continue;
      if (!window.contains(wu.vertices[i])) continue;
      double d = distance_to(ws, wu.vertices[i]);
      if (d > depth) { depth = d; deepest = wu.vertices[i]; }
    }
    rep.gap = -depth;
    rep.location = deepest;
    rep.misalignment = angle_between(tangent_near(wu, deepest),
                                     tangent_near(ws, deepest));
  } else {
    double best = std::numeric_limits<double>::infinity();
    Point at_u{}, at_s{};
    for (Point v : wu.vertices) {
      if (!window.contains(v)) continue;
      double d = distance_to(ws, v);
      if (d < best) { best = d; at_u = v; }
    }
    for (Point v : ws.vertices) {  // symmetrize
      if (!window.contains(v)) continue;
      double d = distance_to(wu, v);
      if (d < best) { best = d; at_s = v; at_u = v; }
    }
    if (!std::isfinite(best))
      throw not_found_error("detect_tangency: no curve points in window");
    rep.gap = crossings.empty() ? best : 0.0;
    rep.location = at_u;
    rep.misalignment = angle_between(tangent_near(wu, rep.location),
                                     tangent_near(ws, rep.location));
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct ParabolaEval {
  MapParams p;
  StableGraph gQ;
  double y_cache;
  ParabolaEval(const MapParams& params, const Saddle& Q) : p(params) {
    double y_half = std::pow(p.b, 0.25);
    gQ = local_stable_graph(p, Q, y_half);
    y_cache = p.a * 0.09 / p.sqrt_b();  // seed near x = -0.3
  }
  std::optional<double> operator()(double x) {
    auto y = parabola_y(p, gQ, x, y_cache);
    if (y) y_cache = *y;
    return y;
  }
};

}  // namespace

double tangency_gap(MapParams p, double a, TangencyReport* report) {
  p.a = a;
  p.validate();
  auto [P, Q] = fixed_saddles(p);
  ParabolaEval par(p, Q);

  // march across the window to seed the vertex search
  double vx = 0, vy = std::numeric_limits<double>::infinity();
  const int nx = 601;
  for (int i = 0; i < nx; ++i) {
    double x = -0.3 + 0.6 * i / (nx - 1);
    auto y = par(x);
    if (y && *y < vy) { vy = *y; vx = x; }
  }
  if (!std::isfinite(vy))
    throw not_found_error("tangency_gap: stable parabola not found");
  // golden-section refine the vertex
  {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = vx - 0.01, hi = vx + 0.01;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = par(x1).value_or(1e18), f2 = par(x2).value_or(1e18);
    for (int it = 0; it < 80 && hi - lo > 1e-9; ++it) {
      if (f1 < f2) {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = par(x1).value_or(1e18);
      } else {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = par(x2).value_or(1e18);
      }
    }
    vx = 0.5 * (lo + hi);
    vy = par(vx).value_or(vy);
  }

  auto strand = bottom_strand(p, Q, vx, 0.5);
  if (!strand)
    throw not_found_error("tangency_gap: no spanning unstable strand");
  // Vertical distance strand minus parabola.  The parabola is convex and the
  // strand nearly flat, so d is concave: its maximum is the signed gap
  // (positive above a*, negative once the vertex pokes through the strand).
  auto dfun = [&](double x) {
    auto yp = par(x);
    if (!yp) return 1e18;
    return -(strand->y_at(strand->s_of_x(x)) - *yp);  // negated: minimize
  };
  double xc = vx, dc;
  {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = vx - 0.05, hi = vx + 0.05;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = dfun(x1), f2 = dfun(x2);
    for (int it = 0; it < 90 && hi - lo > 1e-10; ++it) {
      if (f1 < f2) {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = dfun(x1);
      } else {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = dfun(x2);
      }
    }
    xc = 0.5 * (lo + hi);
    dc = -dfun(xc);
  }
  double gap = dc;

  if (report) {
    report->gap = gap;
    double ys = strand->y_at(strand->s_of_x(xc));
    report->location = {xc, ys - 0.5 * dc};
    report->side = "W^u(Q) vs W^s(Q)";
    // slopes at the common abscissa via central differences; at the argmin
    // of the vertical distance the two slopes coincide up to search tolerance
    const double h = 1e-4;
    auto strand_y = [&](double x) { return strand->y_at(strand->s_of_x(x)); };
    double su = (strand_y(xc + h) - strand_y(xc - h)) / (2 * h);
    double yp1 = par(xc + h).value_or(ys), yp0 = par(xc - h).value_or(ys);
    double ss = (yp1 - yp0) / (2 * h);
    report->misalignment = std::abs(std::atan(su) - std::atan(ss));
  }
  return gap;
}

BifurcationResult find_first_bifurcation(const MapParams& params_template,
                                         double a_lo, double a_hi,
                                         double tol_a) {
  MapParams p = params_template;
  p.validate();
  BifurcationResult res;
  if (p.b == 0) {
    // 1-D oracle mode: the critical orbit of 1 - a x^2 meets the fixed point
    // q(a) = (-1 - sqrt(1 + 4a)) / (2a); g(a) = f_a(f_a(0)) - q(a)
    auto g = [](double a) {
      return (1.0 - a) - (-1.0 - std::sqrt(1.0 + 4.0 * a)) / (2.0 * a);
    };
    double glo = g(a_lo), ghi = g(a_hi);
    if (glo == 0) { res.a_star = a_lo; return res; }
    if (ghi == 0) { res.a_star = a_hi; return res; }
    if ((glo > 0) == (ghi > 0))
      throw bracket_error("find_first_bifurcation: no sign change (1-D mode)");
    while (a_hi - a_lo > tol_a) {
      double mid = 0.5 * (a_lo + a_hi);
      double gm = g(mid);
      ++res.iterations;
      if (gm == 0) { res.a_star = mid; res.report.side = "1-D critical orbit";
        return res; }
      if ((gm > 0) == (ghi > 0)) { a_hi = mid; ghi = gm; }
      else { a_lo = mid; glo = gm; }
    }
    res.a_star = 0.5 * (a_lo + a_hi);
    res.report.side = "1-D critical orbit";
    return res;
  }

  double glo = tangency_gap(p, a_lo);
  double ghi = tangency_gap(p, a_hi);
  if ((glo > 0) == (ghi > 0))
    throw bracket_error(
        "find_first_bifurcation: gap has the same sign at both bracket "
        "endpoints (gap(a_lo)=" + std::to_string(glo) +
        ", gap(a_hi)=" + std::to_string(ghi) + ")");
  int max_iter = 200;
  while (a_hi - a_lo > tol_a && res.iterations < max_iter) {
    double mid = 0.5 * (a_lo + a_hi);
    double gm = tangency_gap(p, mid);
    ++res.iterations;
    if ((gm > 0) == (ghi > 0)) { a_hi = mid; ghi = gm; }
    else { a_lo = mid; glo = gm; }
  }
  res.a_star = 0.5 * (a_lo + a_hi);
  tangency_gap(p, res.a_star, &res.report);
  return res;
}

QuadraticFit quadratic_tangency_fit(MapParams p, double a_star,
                                    double half_width, int npts) {
  TangencyReport rep;
  tangency_gap(p, a_star, &rep);
  p.a = a_star;
  auto [P, Q] = fixed_saddles(p);
  ParabolaEval par(p, Q);
  auto strand = bottom_strand(p, Q, rep.location.x, 0.5);
  if (!strand) throw not_found_error("quadratic_tangency_fit: strand missing");
  std::vector<double> us, ds;
  for (int i = 0; i < npts; ++i) {
    double u = -half_width + 2 * half_width * i / (npts - 1);
    double x = rep.location.x + u;
    auto yp = par(x);
    if (!yp) continue;
    us.push_back(u);
    ds.push_back(strand->y_at(strand->s_of_x(x)) - *yp);
  }
  // least squares d ~ c0 + c1 u + c2 u^2 (normal equations)
  double S[5] = {0, 0, 0, 0, 0}, T[3] = {0, 0, 0};
  for (size_t i = 0; i < us.size(); ++i) {
    double u = us[i], w = 1;
    for (int k = 0; k <= 4; ++k) { S[k] += w; w *= u; }
    T[0] += ds[i];
    T[1] += ds[i] * u;
    T[2] += ds[i] * u * u;
  }
  double A[3][3] = {{S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
  double c[3] = {T[0], T[1], T[2]};
  for (int k = 0; k < 3; ++k) {  // Gaussian elimination with partial pivot
    int piv = k;
    for (int r = k + 1; r < 3; ++r)
      if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
    std::swap(A[k], A[piv]);
    std::swap(c[k], c[piv]);
    for (int r = k + 1; r < 3; ++r) {
      double m = A[r][k] / A[k][k];
      for (int j = k; j < 3; ++j) A[r][j] -= m * A[k][j];
      c[r] -= m * c[k];
    }
  }
  double coef[3];
  for (int k = 2; k >= 0; --k) {
    double acc = c[k];
    for (int j = k + 1; j < 3; ++j) acc -= A[k][j] * coef[j];
    coef[k] = acc / A[k][k];
  }
  QuadraticFit fit;
  fit.beta = coef[2];
  fit.x_c = rep.location.x - coef[1] / (2 * coef[2]);
  fit.alpha = coef[0] - coef[1] * coef[1] / (4 * coef[2]);
  double ssr = 0, sst = 0, mean = 0;
  for (double d : ds) mean += d;
  mean /= ds.size();
  for (size_t i = 0; i < us.size(); ++i) {
    double pred = coef[0] + coef[1] * us[i] + coef[2] * us[i] * us[i];
    ssr += (ds[i] - pred) * (ds[i] - pred);
    sst += (ds[i] - mean) * (ds[i] - mean);
  }
  fit.rel_residual = sst > 0 ? std::sqrt(ssr / sst) : 0.0;
  return fit;
}

C2bReport c2b_check(const Curve& c, double b) {
  C2bReport rep;
  for (size_t i = 0; i < c.tangents.size(); ++i) {
    Point t = c.tangents[i];
    double slope = t.x == 0 ? std::numeric_limits<double>::infinity()
                            : std::abs(t.y / t.x);
    rep.max_slope = std::max(rep.max_slope, slope);
    rep.max_curvature = std::max(rep.max_curvature, c.curvatures[i]);
  }
  double sb = std::sqrt(b);
  rep.pass = rep.max_slope <= sb && rep.max_curvature <= sb;
  return rep;
}

}  // namespace henon
