#pragma once
// Geometry of the inducing scheme over the tangency region: the rectangle R,
// the alpha curve families, the Theta tower, slow-recurrence sets on the
// tangency leaf, and the first-return branch structure.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "henon/manifolds.hpp"

namespace henon {

struct refinement_needed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct geometry_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct depth_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One alpha curve as a graph x = x(y) solved through the stable manifold of P:
// points z with f^k(z) on the local stable graph of P, branch picked by seed.
struct AlphaSol {
  char family = 't';  // 't' = tilde alpha_n, '-' / '+' = alpha_n^-/+
  int index = 0;
  int k = 0;  // iterates to reach the local graph of P
  std::vector<double> ys, xs;
  std::vector<char> valid;
  bool degenerate = false;  // below floating-point resolution
  double x_at(double y) const;  // interpolated; requires valid coverage
};

// Precision context shared by the construction pipeline.
class InducingContext {
 public:
  explicit InducingContext(const MapParams& params);

  const MapParams& params() const { return p_; }
  const Saddle& saddleP() const { return P_; }
  const Saddle& saddleQ() const { return Q_; }
  const StableGraph& graphP() const { return gP_; }
  const StableGraph& graphQ() const { return gQ_; }
  const Strand& leaf_strand() const { return *leaf_; }
  double y_band() const { return y_band_; }  // vertical half-extent of R core

  // alpha curve solver, cached; family 't', '-' or '+'
  const AlphaSol& alpha(char family, int index);

  // Newton-refined x on an alpha curve at height y (seed from stored polyline)
  double alpha_x(const AlphaSol& a, double y) const;

  // signed horizontal position of a point relative to an alpha curve
  double side_of(const AlphaSol& a, Point z) const { return z.x - alpha_x(a, z.y); }

  // leaf parameter range: the bottom strand clipped to Theta (set lazily by
  // build_theta / first_return_branches)
  double leaf_s_lo = 0, leaf_s_hi = 0;
  bool leaf_clipped = false;

 private:
  MapParams p_;
  Saddle P_, Q_;
  StableGraph gP_, gQ_;
  std::optional<Strand> leaf_;
  double y_band_ = 0;
  std::map<std::pair<char, int>, AlphaSol> cache_;
  AlphaSol solve_family(char family, int index);
};

struct RegionR {
  Curve bottom, top;    // unstable sides (f gamma_0 and its companion)
  Curve left, right;    // stable sides (hat alpha_0^- and hat alpha_0^+)
  Rect bbox{};
  double corner_gap = 0;  // worst corner mismatch
};

struct AlphaFamily {
  std::vector<Curve> tilde_alpha;             // index n = 0..n_max
  std::vector<Curve> alpha_minus, alpha_plus; // element i is curve index i+1
  int n_max = 0;
};

struct ThetaBand {
  double x_lo = 0, x_hi = 0;  // horizontal extent at mid-height
  int border_index = 0;       // alpha index of the bordering curves
  bool degenerate = false;
};

struct ThetaTower {
  ThetaBand theta;               // bordered by alpha_1^-/+
  std::vector<ThetaBand> theta_k;  // k = 0..K, bordered by alpha_{xi k + N}
  int N = 0, xi = 0;
};

// arclength interval unions on the tangency leaf, one level per n
struct OmegaSets {
  std::vector<std::vector<std::pair<double, double>>> levels;
  bool refinement_warning = false;
};

struct ReturnBranch {
  double s_lo = 0, s_hi = 0;  // leaf chart parameters of the domain
  double a_lo = 0, a_hi = 0;  // arclength along the leaf
  int tau = 0;
  std::string image_tag;      // endpoint labels of the spanned image
  double min_deriv = 0, max_deriv = 0;  // |Df^tau| E^u| extremes over samples
  double distortion = 0;      // max log-ratio over sampled pairs
  double weight = 0;          // log |Df^tau| E^u| at the marked (mid) point
  double length = 0;          // arclength of the domain
  bool boundary_flag = false; // endpoint within h_min of alpha_1^-/+
};

struct InducedSystem {
  std::vector<ReturnBranch> branches;
  std::vector<int> counts;    // counts[n] = #{tau = n}, n <= depth
  int depth = 0;
  bool truncation_flag = false;   // pieces still active at depth
  bool resolution_flag = false;   // pieces dropped below resolution
  MapParams params;
  double a_star = 0;
};

// Arclength resolution on the leaf; positions on the strand are only
// reproducible to ~1e-8, so narrower pieces are not meaningful.
inline constexpr double kHMin = 1e-7;

RegionR build_region(InducingContext& ctx, const Curve& wu, const Curve& wsP,
                     const Curve& wsQ);
AlphaFamily build_alpha(InducingContext& ctx, const RegionR& region, int n_max);
ThetaTower build_theta(InducingContext& ctx, const AlphaFamily& alpha, int K);

// splits gamma at its unique crossing with each alpha_n^-/+ (n <= alpha.n_max)
std::vector<Curve> partition_curve(InducingContext& ctx, const Curve& gamma,
                                   const AlphaFamily& alpha);

OmegaSets omega_sets(InducingContext& ctx, const ThetaTower& theta, int n_max);

InducedSystem first_return_branches(InducingContext& ctx,
                                    const ThetaTower& theta, int depth);

struct BranchCensus {
  std::vector<int> counts;
  double growth_rate = 0;  // max over n in [n0, depth] of log(S(n))/n
  int n0 = 10;
};
BranchCensus branch_census(const InducedSystem& sys, int n0 = 10);

struct HyperbolicityAudit {
  struct BranchCheck {
    int branch = 0;
    bool envelope_pass = true;       // sigma1^tau <= |Df^tau| <= sigma2^tau (5%)
    double min_rate = 0, max_rate = 0;  // per-step log expansion extremes
  };
  std::vector<BranchCheck> checks;
  int violations = 0;
  double distortion_constant = 0;   // fitted C in log-ratio <= C |f^tau x - f^tau y|
  double stable_contraction_C = 0;  // fitted C in |Df^n v_s| <= (C b)^{n/2}
  bool pass = false;
};
HyperbolicityAudit hyperbolicity_audit(InducingContext& ctx,
                                       const InducedSystem& sys,
                                       int samples_per_branch);

}  // namespace henon
