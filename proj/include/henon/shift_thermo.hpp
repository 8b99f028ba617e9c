#pragma once
// Thermodynamic formalism on the induced countable full shift: variations,
// Gurevich pressure, Gibbs measures on finite truncations, Abramov/Kac
// lifting, the pressure curve P(t), its root t^u and the interval (t_-, t_+).

#include <string>
#include <utility>
#include <vector>

#include "henon/inducing.hpp"

namespace henon {

struct iteration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct tail_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct degenerate_parameters : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-symbol potential on the induced shift.  base[i] is the value attached
// to symbol i (for phi_t: -t * log |Df^tau| E^u| at the branch's marked
// point); log_deriv keeps the unweighted expansion for Lyapunov integrals.
// When geometric is set, variation() re-evaluates the potential at sample
// points inside cylinders instead of using the locally constant base value.
struct SymbolPotential {
  std::vector<double> base;
  std::vector<double> log_deriv;
  std::vector<int> tau;
  double t = 0;
  bool geometric = false;
  // optional depth-2 corrections, pair_corr[i][j] added on the 2-cylinder [ij]
  std::vector<std::vector<double>> pair_corr;
};

// phi_t on the branch alphabet of an induced system
SymbolPotential phi_t(const InducedSystem& sys, double t);

// Finite full-shift truncation: all branches with tau <= cutoff, no forbidden
// words.  branch_index maps symbols back into sys.branches (empty for
// hand-built shifts).
struct TruncatedShift {
  SymbolPotential pot;
  std::vector<int> branch_index;
  int cutoff = 0;
};
TruncatedShift truncate_shift(const InducedSystem& sys, double t, int cutoff);

// n-th variation of the potential over sampled depth-n cylinders.  For a
// geometric potential the cylinders are realized as leaf intervals by pulling
// back branch domains through the induced map; n <= 4 at desk scale.
double variation(InducingContext& ctx, const InducedSystem& sys,
                 const SymbolPotential& pot, int n);

struct PressureTrace {
  std::vector<double> per_n;  // (1/n) log sum over periodic words through b
  double value = 0;           // extrapolated limit
};
PressureTrace gurevich_pressure(const TruncatedShift& shift, int n_max);

struct GibbsResult {
  std::vector<double> weights;  // stationary symbol weights, sum = 1
  double pressure = 0;
  double gibbs_constant = 1;  // measured from cylinder ratios to depth 3
  double entropy = 0;
  double mean_tau = 0;
};
GibbsResult gibbs_truncated(const TruncatedShift& shift);

struct LiftedStats {
  double entropy_lifted = 0;   // h_nu / nu(tau)
  double integral_lifted = 0;  // nu(base) / nu(tau)
};
LiftedStats lift_stats(const GibbsResult& g, const TruncatedShift& shift);

// Solves for c with Gurevich pressure of (pot - c tau) equal to zero.
double solve_pressure_shift(const TruncatedShift& shift);

struct PressureEstimate {
  std::vector<int> cutoffs;
  std::vector<double> per_cutoff;
  double value = 0;     // geometric extrapolation over the cutoff schedule
  double residual = 0;  // spread of the last two cutoff values
};
PressureEstimate pressure_at(const InducedSystem& sys, double t,
                             const std::vector<int>& cutoffs);

struct PressureCurve {
  std::vector<double> ts, Ps, residuals;
  double t_u = 0, t_u_residual = 0;
  double bracket_lo = 0, bracket_hi = 0;
  double lambda_u_at_root = 0;  // Kac form nu(log|Df|)/nu(tau) at t^u
  double t_minus = 0, t_plus = 0;
  std::vector<int> cutoffs;
};
PressureCurve pressure_curve(const InducedSystem& sys,
                             const std::vector<double>& t_grid,
                             const std::vector<int>& cutoffs,
                             double bisect_tol = 1e-4);

// root of P on (0, 1); requires P(0) > 0 > P(1)
double t_u_root(const InducedSystem& sys, const std::vector<int>& cutoffs,
                double bisect_tol = 1e-4);

// t_+- from t^u, lambda = lambda^u(mu_{t^u}) and the proximity scale eps
std::pair<double, double> t_interval(double t_u, double lambda_u, double eps);

struct TailReport {
  std::vector<int> taus;           // tau levels present
  std::vector<double> level_sums;  // sum over tau(J) = n of e^{c n} l(J)^t
  double total = 0;
  double c0 = 0;  // convergence bound from the census growth rate
  std::string verdict;  // "convergent", "divergent" or "inconclusive"
};
TailReport tail_sum(const InducedSystem& sys, double t, double c);

}  // namespace henon
