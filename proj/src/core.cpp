#include "henon/core.hpp"

#include <algorithm>
#include <vector>

namespace henon {

Point apply(const MapParams& p, Point z) {
  if (!z.finite()) throw invalid_input("apply: non-finite input point");
  const double sb = p.sqrt_b();
  return {1.0 - p.a * z.x * z.x + sb * z.y, p.s() * sb * z.x};
}

Point inverse(const MapParams& p, Point z) {
  if (p.b <= 0) throw singular_map("inverse: map is singular at b = 0");
  if (!z.finite()) throw invalid_input("inverse: non-finite input point");
  const double sb = p.sqrt_b();
  const double x = z.y / (p.s() * sb);
  const double y = (z.x - 1.0 + p.a * x * x) / sb;
  return {x, y};
}

Mat2 jacobian(const MapParams& p, Point z) {
  if (!z.finite()) throw invalid_input("jacobian: non-finite input point");
  const double sb = p.sqrt_b();
  return {-2.0 * p.a * z.x, sb, p.s() * sb, 0.0};
}

Point apply_n(const MapParams& p, Point z, int n) {
  for (int i = 0; i < n; ++i) z = apply(p, z);
  return z;
}

namespace {
Saddle make_saddle(const MapParams& p, double x, SaddleLabel label) {
  Point loc{x, p.s() * p.sqrt_b() * x};
  Mat2 J = jacobian(p, loc);
  // eigenvalues of [[-2ax, sb],[s*sb, 0]]
  const double tr = J.m00 + J.m11, det = J.det();
  const double disc = tr * tr - 4.0 * det;
  if (disc < 0) throw no_saddle("fixed point has complex eigenvalues");
  const double sq = std::sqrt(disc);
  double l1 = 0.5 * (tr + sq), l2 = 0.5 * (tr - sq);
  if (std::abs(l1) < std::abs(l2)) std::swap(l1, l2);
  Saddle s;
  s.location = loc;
  s.lambda_u = l1;
  s.lambda_s = l2;
  s.label = label;
  auto eigvec = [&](double lam) -> Point {
    // (J - lam I) v = 0; rows are (m00-lam, m01) and (m10, -lam)
    Point v;
    if (std::abs(J.m01) + std::abs(J.m00 - lam) >
        std::abs(J.m10) + std::abs(lam)) {
      v = {J.m01, lam - J.m00};
      if (norm(v) == 0) v = {lam, J.m10};
    } else {
      v = {lam, J.m10};
      if (norm(v) == 0) v = {J.m01, lam - J.m00};
    }
    double n = norm(v);
    if (n == 0) return {1, 0};
    return {v.x / n, v.y / n};
  };
  s.ev_u = eigvec(l1);
  s.ev_s = (p.b > 0) ? eigvec(l2) : Point{0, 1};
  return s;
}
}  // namespace

std::pair<Saddle, Saddle> fixed_saddles(const MapParams& p) {
  p.validate();
  // Fixed points satisfy x = 1 - a x^2 + s*b*x  =>  a x^2 + (1 - s b) x - 1 = 0.
  const double B = 1.0 - p.s() * p.b;
  const double disc = B * B + 4.0 * p.a;
  if (disc <= 0) throw no_saddle("fixed_saddles: complex fixed points");
  const double sq = std::sqrt(disc);
  const double xP = (-B + sq) / (2.0 * p.a);
  const double xQ = (-B - sq) / (2.0 * p.a);
  return {make_saddle(p, xP, SaddleLabel::P), make_saddle(p, xQ, SaddleLabel::Q)};
}

UnstableDir unstable_direction(const MapParams& p, Point z, int n_back) {
  if (!z.finite()) throw invalid_input("unstable_direction: non-finite point");
  UnstableDir out;
  Point probe{1, 0};
  double log_norm = 0;
  if (p.b <= 0) {
    // degenerate 1-D mode: E^u is the x-axis
    out.tangent = {z, {1, 0}, std::log(std::abs(-2.0 * p.a * z.x))};
    out.Ju = std::abs(-2.0 * p.a * z.x);
    return out;
  }
  // Reconstruct the backward orbit, then push the probe forward.  Backward
  // iteration amplifies rounding off the attractor at rate ~1/|lambda_s|, so
  // the usable depth is truncated where the computed orbit starts drifting
  // out of the box; the cocycle contracts directions at rate ~b per step, so
  // a few steps already give machine-accurate E^u.
  std::vector<Point> orbit;
  orbit.push_back(z);
  for (int i = 0; i < n_back; ++i) {
    Point zp = inverse(p, orbit.back());
    if (!in_box(zp)) {
      if (orbit.size() == 1)
        throw escape_error("unstable_direction: backward orbit escaped box",
                           i + 1);
      break;
    }
    orbit.push_back(zp);
  }
  std::reverse(orbit.begin(), orbit.end());
  for (size_t i = 0; i + 1 < orbit.size(); ++i) {
    probe = jacobian(p, orbit[i]) * probe;
    double n = norm(probe);
    log_norm += std::log(n);
    probe = {probe.x / n, probe.y / n};
  }
  out.tangent = {z, probe, log_norm};
  out.Ju = norm(jacobian(p, z) * probe);
  return out;
}

}  // namespace henon
