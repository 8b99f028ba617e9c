#include "henon/curve.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace henon {

void Curve::finalize() {
  const size_t n = vertices.size();
  tangents.assign(n, Point{1, 0});
  curvatures.assign(n, 0.0);
  arclength.assign(n, 0.0);
  if (n < 2) return;
  for (size_t i = 1; i < n; ++i)
    arclength[i] = arclength[i - 1] + norm(vertices[i] - vertices[i - 1]);
  for (size_t i = 0; i < n; ++i) {
    size_t j0 = i == 0 ? 0 : i - 1;
    size_t j1 = i + 1 < n ? i + 1 : i;
    Point d = vertices[j1] - vertices[j0];
    double dn = norm(d);
    if (dn > 0) tangents[i] = {d.x / dn, d.y / dn};
  }
  // three-point curvature via circumscribed circle
  for (size_t i = 1; i + 1 < n; ++i) {
    Point A = vertices[i - 1], B = vertices[i], C = vertices[i + 1];
    double cross = (B.x - A.x) * (C.y - A.y) - (B.y - A.y) * (C.x - A.x);
    double a = norm(B - A), b = norm(C - B), c = norm(C - A);
    double denom = a * b * c;
    curvatures[i] = denom > 0 ? 2.0 * std::abs(cross) / denom : 0.0;
  }
  if (n >= 3) {
    curvatures[0] = curvatures[1];
    curvatures[n - 1] = curvatures[n - 2];
  }
}

Point Curve::at(double s) const {
  if (vertices.empty()) throw std::runtime_error("Curve::at on empty curve");
  if (s <= arclength.front()) return vertices.front();
  if (s >= arclength.back()) return vertices.back();
  auto it = std::lower_bound(arclength.begin(), arclength.end(), s);
  size_t i = it - arclength.begin();
  double s0 = arclength[i - 1], s1 = arclength[i];
  double t = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
  return vertices[i - 1] + t * (vertices[i] - vertices[i - 1]);
}

Curve make_curve(std::vector<Point> pts, CurveTag tag) {
  Curve c;
  c.vertices = std::move(pts);
  c.tag = tag;
  c.finalize();
  return c;
}

double distance_to(const Curve& c, Point z) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < c.vertices.size(); ++i) {
    Point A = c.vertices[i], B = c.vertices[i + 1];
    Point AB = B - A;
    double len2 = dot(AB, AB);
    double t = len2 > 0 ? std::clamp(dot(z - A, AB) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, norm(z - (A + t * AB)));
  }
  if (c.vertices.size() == 1) best = norm(z - c.vertices[0]);
  return best;
}

std::vector<Point> curve_intersections(const Curve& a, const Curve& b) {
  std::vector<Point> out;
  for (size_t i = 0; i + 1 < a.vertices.size(); ++i) {
    Point p = a.vertices[i], r = a.vertices[i + 1] - p;
    for (size_t j = 0; j + 1 < b.vertices.size(); ++j) {
      Point q = b.vertices[j], s = b.vertices[j + 1] - q;
      double denom = r.x * s.y - r.y * s.x;
      if (denom == 0) continue;
      Point qp = q - p;
      double t = (qp.x * s.y - qp.y * s.x) / denom;
      double u = (qp.x * r.y - qp.y * r.x) / denom;
      if (t >= 0 && t < 1 && u >= 0 && u < 1) out.push_back(p + t * r);
    }
  }
  return out;
}

std::string curve_to_csv(const Curve& c) {
  std::string out = "s,x,y,tx,ty,kappa\n";
  char buf[256];
  for (size_t i = 0; i < c.vertices.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  c.arclength[i], c.vertices[i].x, c.vertices[i].y,
                  c.tangents[i].x, c.tangents[i].y, c.curvatures[i]);
    out += buf;
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
}

}  // namespace henon
