#pragma once
// Henon family f(x,y) = (1 - a x^2 + sqrt(b) y, +/- sqrt(b) x):
// evaluation, inversion, derivatives, fixed saddles, unstable directions.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace henon {

enum class Orientation { preserving, reversing };

struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct singular_map : std::domain_error {
  using std::domain_error::domain_error;
};
struct no_saddle : std::domain_error {
  using std::domain_error::domain_error;
};
struct escape_error : std::runtime_error {
  int step;
  escape_error(const std::string& what, int step_)
      : std::runtime_error(what), step(step_) {}
};

struct MapParams {
  double a = 2.0;
  double b = 1e-4;
  Orientation orientation = Orientation::preserving;
  double epsilon = 0.5;  // proximity scale, 0 < eps < 1/2
  int N = 22;            // critical-region depth

  // derived, never stored in config files
  int xi() const { return static_cast<int>(std::floor(10.0 / epsilon)); }
  double sigma1() const { return 2.0 - epsilon; }
  double sigma2() const { return 4.0 + epsilon; }
  double sqrt_b() const { return std::sqrt(b); }
  // sign s in the second coordinate s*sqrt(b)*x
  double s() const { return orientation == Orientation::preserving ? 1.0 : -1.0; }

  void validate() const {
    if (!(a > 0)) throw invalid_input("MapParams: a must be positive");
    if (!(b >= 0)) throw invalid_input("MapParams: b must be >= 0");
    if (!(epsilon > 0 && epsilon <= 0.5))
      throw invalid_input("MapParams: epsilon must lie in (0, 1/2]");
    if (N < 1) throw invalid_input("MapParams: N must be >= 1");
  }
};

struct Point {
  double x = 0, y = 0;
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Point operator+(Point p, Point q) { return {p.x + q.x, p.y + q.y}; }
inline Point operator-(Point p, Point q) { return {p.x - q.x, p.y - q.y}; }
inline Point operator*(double c, Point p) { return {c * p.x, c * p.y}; }
inline double dot(Point p, Point q) { return p.x * q.x + p.y * q.y; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }

struct Mat2 {
  // row-major [[m00, m01], [m10, m11]]
  double m00, m01, m10, m11;
  double det() const { return m00 * m11 - m01 * m10; }
  Point operator*(Point v) const {
    return {m00 * v.x + m01 * v.y, m10 * v.x + m11 * v.y};
  }
  Mat2 operator*(const Mat2& o) const {
    return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
            m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
  }
};

struct TangentData {
  Point base;
  Point direction;  // unit vector
  double log_norm = 0;  // accumulated log of derivative norms along the segment
};

enum class SaddleLabel { P, Q };

struct Saddle {
  Point location;
  double lambda_u = 0, lambda_s = 0;
  Point ev_u, ev_s;  // unit eigenvectors
  SaddleLabel label = SaddleLabel::P;
};

Point apply(const MapParams& p, Point z);
Point inverse(const MapParams& p, Point z);
Mat2 jacobian(const MapParams& p, Point z);

// n-fold composition helpers
Point apply_n(const MapParams& p, Point z, int n);

std::pair<Saddle, Saddle> fixed_saddles(const MapParams& p);

// Approximates E^u_z by pushing a probe vector through the Jacobian cocycle
// along the backward orbit f^{-n_back} z, ..., z.  Also reports
// J^u(z) = |Df_z restricted to the direction|.
struct UnstableDir {
  TangentData tangent;
  double Ju = 0;
};
UnstableDir unstable_direction(const MapParams& p, Point z, int n_back);

// Bounding box used for "orbit stays bounded" checks.
inline constexpr double kBoxHalf = 2.0;
inline bool in_box(Point z) {
  return std::abs(z.x) <= kBoxHalf && std::abs(z.y) <= kBoxHalf;
}

}  // namespace henon
