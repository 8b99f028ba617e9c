#pragma once
// Ordered polylines with per-vertex tangent/curvature and arclength tables.

#include <string>
#include <vector>

#include "henon/core.hpp"

namespace henon {

enum class CurveTag { unstable, stable, alpha, gamma, other };

struct Curve {
  std::vector<Point> vertices;
  std::vector<Point> tangents;     // unit vectors, same length as vertices
  std::vector<double> curvatures;  // 1/length units
  std::vector<double> arclength;   // cumulative, arclength[0] = 0
  CurveTag tag = CurveTag::other;

  size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  double length() const { return arclength.empty() ? 0.0 : arclength.back(); }

  // recompute tangents/curvatures/arclength from vertices
  void finalize();

  // point at arclength s (linear interpolation)
  Point at(double s) const;
};

Curve make_curve(std::vector<Point> pts, CurveTag tag);

// closest distance from a point to the polyline (segment-accurate)
double distance_to(const Curve& c, Point z);

// intersections of two polylines (segment pairs); returns intersection points
std::vector<Point> curve_intersections(const Curve& a, const Curve& b);

std::string curve_to_csv(const Curve& c);  // columns: s,x,y,tx,ty,kappa
void write_file(const std::string& path, const std::string& content);

}  // namespace henon
