#include "henon/shift_thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace henon {

namespace {

double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// transfer matrix on symbol space: M[i][j] = exp(base_j + pair_corr[i][j]),
// so that a path i0 i1 ... i_{n-1} picks up the potential of the symbols it
// enters.  Stored as log-entries; products are evaluated with rescaling.
struct Transfer {
  int k = 0;
  std::vector<double> logm;  // row-major
  double at(int i, int j) const { return logm[i * k + j]; }
};

Transfer make_transfer(const SymbolPotential& pot) {
  Transfer T;
  T.k = static_cast<int>(pot.base.size());
  T.logm.resize(static_cast<size_t>(T.k) * T.k);
  for (int i = 0; i < T.k; ++i)
    for (int j = 0; j < T.k; ++j) {
      double c = pot.pair_corr.empty() ? 0.0 : pot.pair_corr[i][j];
      T.logm[i * static_cast<size_t>(T.k) + j] = pot.base[j] + c;
    }
  return T;
}

// leading eigenvalue (log) with right and left eigenvectors, power iteration
struct EigenData {
  double log_lambda = 0;
  std::vector<double> right, left;  // positive, normalized to sum 1
};

EigenData leading_eigen(const Transfer& T) {
  const int k = T.k;
  double shift = *std::max_element(T.logm.begin(), T.logm.end());
  std::vector<double> M(T.logm.size());
  for (size_t i = 0; i < M.size(); ++i) M[i] = std::exp(T.logm[i] - shift);
  auto iterate = [&](bool transpose) {
    std::vector<double> v(k, 1.0 / k), w(k);
    double lam = 0, prev = -1;
    // roundoff jitter of the normalizing sum grows like k * eps
    const double tol = 1e-14 + 4e-16 * k;
    int stable = 0;
    for (int it = 0; it < 20000; ++it) {
      for (int i = 0; i < k; ++i) {
        double s = 0;
        for (int j = 0; j < k; ++j)
          s += (transpose ? M[j * static_cast<size_t>(k) + i]
                          : M[i * static_cast<size_t>(k) + j]) * v[j];
        w[i] = s;
      }
      double n = std::accumulate(w.begin(), w.end(), 0.0);
      if (!(n > 0) || !std::isfinite(n))
        throw iteration_error("leading_eigen: transfer iteration degenerated");
      lam = n;
      for (int i = 0; i < k; ++i) v[i] = w[i] / n;
      if (std::abs(lam - prev) <= tol * std::abs(lam)) {
        if (++stable >= 3) return std::make_pair(lam, v);
      } else {
        stable = 0;
      }
      prev = lam;
    }
    throw iteration_error("leading_eigen: power iteration did not converge");
  };
  auto [lam, h] = iterate(false);
  auto [lam2, u] = iterate(true);
  (void)lam2;
  EigenData e;
  e.log_lambda = shift + std::log(lam);
  e.right = std::move(h);
  e.left = std::move(u);
  return e;
}

// x-coordinate of the induced image of the leaf point at parameter s under
// the branch map f^tau
double induced_x(const InducingContext& ctx, double s, int tau) {
  return apply_n(ctx.params(), ctx.leaf_strand().at(s), tau).x;
}

// log |Df^tau| E^u| at the leaf point s, pushing the leaf tangent
double branch_log_deriv(const InducingContext& ctx, double s, int tau) {
  const MapParams& p = ctx.params();
  TangentData td = ctx.leaf_strand().tangent_at(s);
  Point z = td.base, v = td.direction;
  double acc = 0;
  for (int i = 0; i < tau; ++i) {
    v = jacobian(p, z) * v;
    double n = norm(v);
    acc += std::log(n);
    v = (1.0 / n) * v;
    z = apply(p, z);
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------

SymbolPotential phi_t(const InducedSystem& sys, double t) {
  SymbolPotential pot;
  pot.t = t;
  pot.geometric = true;
  for (const auto& br : sys.branches) {
    pot.base.push_back(-t * br.weight);
    pot.log_deriv.push_back(br.weight);
    pot.tau.push_back(br.tau);
  }
  return pot;
}

TruncatedShift truncate_shift(const InducedSystem& sys, double t, int cutoff) {
  SymbolPotential full = phi_t(sys, t);
  TruncatedShift sh;
  sh.cutoff = cutoff;
  sh.pot.t = t;
  sh.pot.geometric = true;
  for (size_t i = 0; i < full.base.size(); ++i) {
    if (full.tau[i] > cutoff) continue;
    sh.pot.base.push_back(full.base[i]);
    sh.pot.log_deriv.push_back(full.log_deriv[i]);
    sh.pot.tau.push_back(full.tau[i]);
    sh.branch_index.push_back(static_cast<int>(i));
  }
  if (sh.pot.base.empty())
    throw invalid_input("truncate_shift: no branches below the cutoff");
  return sh;
}

// ---------------------------------------------------------------------------

double variation(InducingContext& ctx, const InducedSystem& sys,
                 const SymbolPotential& pot, int n) {
  if (n < 1 || n > 4)
    throw depth_error("variation: cylinder depth must lie in [1, 4]");
  if (!pot.geometric) {
    // locally constant in a0 (plus optional a0 a1 correction): only depth 1
    // sees the pair term; deeper cylinders pin every coordinate it reads
    if (n >= 2 || pot.pair_corr.empty()) return 0.0;
    double v = 0;
    for (const auto& row : pot.pair_corr) {
      auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      v = std::max(v, *hi - *lo);
    }
    return v;
  }

  // geometric potential: realize depth-n cylinders as leaf intervals by
  // pulling branch domains back through the induced map, then sample
  // -t log |Df^tau| E^u| inside each interval
  std::vector<int> alpha;  // branch indices, shortest return times first
  {
    std::vector<int> order(sys.branches.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (sys.branches[a].tau != sys.branches[b].tau)
        return sys.branches[a].tau < sys.branches[b].tau;
      return sys.branches[a].s_lo < sys.branches[b].s_lo;
    });
    for (int i : order) {
      if (sys.branches[i].tau > 4 || static_cast<int>(alpha.size()) >= 6) break;
      alpha.push_back(i);
    }
  }
  if (alpha.empty()) throw depth_error("variation: no short branches to sample");

  struct Cyl {
    int b0;             // leading symbol
    double s_lo, s_hi;  // leaf interval inside branch b0
  };
  std::vector<Cyl> level;
  for (int b : alpha)
    level.push_back({b, sys.branches[b].s_lo, sys.branches[b].s_hi});

  const Strand& leaf = ctx.leaf_strand();
  auto pull_back = [&](int b, double x_lo, double x_hi) -> std::optional<Cyl> {
    // preimage of the leaf x-interval under the branch map of b (monotone)
    const ReturnBranch& br = sys.branches[b];
    double ga = induced_x(ctx, br.s_lo, br.tau);
    double gb = induced_x(ctx, br.s_hi, br.tau);
    bool inc = gb > ga;
    double lo = std::max(std::min(ga, gb), std::min(x_lo, x_hi));
    double hi = std::min(std::max(ga, gb), std::max(x_lo, x_hi));
    if (hi <= lo) return std::nullopt;
    auto solve = [&](double xt) {
      double sa = br.s_lo, sb = br.s_hi;
      for (int it = 0; it < 70; ++it) {
        double sm = 0.5 * (sa + sb);
        if ((induced_x(ctx, sm, br.tau) < xt) == inc) sa = sm; else sb = sm;
      }
      return 0.5 * (sa + sb);
    };
    Cyl c{b, solve(inc ? lo : hi), solve(inc ? hi : lo)};
    if (c.s_hi <= c.s_lo) return std::nullopt;
    return c;
  };

  for (int depth = 2; depth <= n; ++depth) {
    std::vector<Cyl> next;
    for (int b : alpha)
      for (const Cyl& c : level) {
        auto pc = pull_back(b, leaf.x_at(c.s_lo), leaf.x_at(c.s_hi));
        if (pc) next.push_back(*pc);
      }
    if (next.empty())
      throw depth_error("variation: cylinder refinement lost all mass");
    level = std::move(next);
  }

  double vn = 0;
  for (const Cyl& c : level) {
    if (c.s_hi - c.s_lo < 1e-12) continue;
    int tau = sys.branches[c.b0].tau;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < 5; ++i) {
      double s = c.s_lo + (c.s_hi - c.s_lo) * i / 4.0;
      double w = -pot.t * branch_log_deriv(ctx, s, tau);
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    vn = std::max(vn, hi - lo);
  }
  return vn;
}

// ---------------------------------------------------------------------------

PressureTrace gurevich_pressure(const TruncatedShift& shift, int n_max) {
  const int k = static_cast<int>(shift.pot.base.size());
  if (k == 0) throw invalid_input("gurevich_pressure: empty alphabet");
  if (n_max < 2) throw invalid_input("gurevich_pressure: n_max must be >= 2");
  Transfer T = make_transfer(shift.pot);
  double shiftv = *std::max_element(T.logm.begin(), T.logm.end());
  std::vector<double> M(T.logm.size());
  for (size_t i = 0; i < M.size(); ++i) M[i] = std::exp(T.logm[i] - shiftv);

  PressureTrace out;
  // A = M^n with running log-scale; per_n = (1/n) log tr M^n
  std::vector<double> A(M), B(M.size());
  double log_scale = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (n > 1) {
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          double s = 0;
          for (int l = 0; l < k; ++l)
            s += A[i * static_cast<size_t>(k) + l] * M[l * static_cast<size_t>(k) + j];
          B[i * static_cast<size_t>(k) + j] = s;
        }
      double mx = *std::max_element(B.begin(), B.end());
      if (!(mx > 0)) throw iteration_error("gurevich_pressure: matrix power underflow");
      for (size_t i = 0; i < B.size(); ++i) A[i] = B[i] / mx;
      log_scale += std::log(mx);
    }
    double tr = 0;
    for (int i = 0; i < k; ++i) tr += A[i * static_cast<size_t>(k) + i];
    out.per_n.push_back((std::log(tr) + log_scale + n * shiftv) / n);
  }
  out.value = leading_eigen(T).log_lambda;
  return out;
}

GibbsResult gibbs_truncated(const TruncatedShift& shift) {
  const int k = static_cast<int>(shift.pot.base.size());
  if (k == 0) throw invalid_input("gibbs_truncated: empty alphabet");
  Transfer T = make_transfer(shift.pot);
  EigenData e = leading_eigen(T);

  GibbsResult g;
  g.pressure = e.log_lambda;
  // stationary symbol weights from the left/right eigen-data
  g.weights.resize(k);
  double tot = 0;
  for (int i = 0; i < k; ++i) {
    g.weights[i] = e.left[i] * e.right[i];
    tot += g.weights[i];
  }
  for (double& w : g.weights) w /= tot;

  // Markov transitions p(i -> j) and the measure-theoretic entropy
  std::vector<double> P(static_cast<size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j)
      P[i * static_cast<size_t>(k) + j] =
          std::exp(T.at(i, j) - e.log_lambda) * e.right[j] / e.right[i];
    // renormalize against roundoff so rows are stochastic to machine accuracy
    double rs = 0;
    for (int j = 0; j < k; ++j) rs += P[i * static_cast<size_t>(k) + j];
    for (int j = 0; j < k; ++j) P[i * static_cast<size_t>(k) + j] /= rs;
  }
  g.entropy = 0;
  g.mean_tau = 0;
  for (int i = 0; i < k; ++i) {
    g.mean_tau += g.weights[i] * shift.pot.tau[i];
    for (int j = 0; j < k; ++j) {
      double p = P[i * static_cast<size_t>(k) + j];
      if (p > 0) g.entropy -= g.weights[i] * p * std::log(p);
    }
  }

  // Gibbs constant: cylinder measures against exp(-nP + sum of potential)
  auto cyl_ratio = [&](const std::vector<int>& w) {
    double logmu = std::log(g.weights[w[0]]);
    double logref = shift.pot.base[w[0]] - g.pressure;
    for (size_t i = 0; i + 1 < w.size(); ++i) {
      logmu += std::log(P[w[i] * static_cast<size_t>(k) + w[i + 1]]);
      logref += T.at(w[i], w[i + 1]) - g.pressure;
    }
    return std::exp(std::abs(logmu - logref));
  };
  double C = 1.0;
  std::vector<int> w;
  for (int i = 0; i < k; ++i) C = std::max(C, cyl_ratio(w = {i}));
  if (static_cast<long>(k) * k <= 4000) {
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) C = std::max(C, cyl_ratio(w = {i, j}));
  }
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> pick(0, k - 1);
  long n3 = std::min<long>(4000, static_cast<long>(k) * k * k);
  for (long q = 0; q < n3; ++q)
    C = std::max(C, cyl_ratio(w = {pick(rng), pick(rng), pick(rng)}));
  g.gibbs_constant = C;
  return g;
}

LiftedStats lift_stats(const GibbsResult& g, const TruncatedShift& shift) {
  if (!(g.mean_tau > 0) || !std::isfinite(g.mean_tau))
    throw tail_error("lift_stats: mean return time not finite at truncation");
  LiftedStats ls;
  ls.entropy_lifted = g.entropy / g.mean_tau;
  double phi_bar = 0;
  for (size_t i = 0; i < g.weights.size(); ++i)
    phi_bar += g.weights[i] * shift.pot.base[i];
  ls.integral_lifted = phi_bar / g.mean_tau;
  return ls;
}

// ---------------------------------------------------------------------------

double solve_pressure_shift(const TruncatedShift& shift) {
  // depth-1 potentials make the transfer operator rank one, with leading
  // eigenvalue exactly the weight sum; skip the power iteration there
  const bool rank1 = shift.pot.pair_corr.empty();
  std::vector<double> tmp(shift.pot.base.size());
  auto g = [&](double c) {
    if (rank1) {
      for (size_t i = 0; i < tmp.size(); ++i)
        tmp[i] = shift.pot.base[i] - c * shift.pot.tau[i];
      return logsumexp(tmp);
    }
    TruncatedShift sh = shift;
    for (size_t i = 0; i < sh.pot.base.size(); ++i)
      sh.pot.base[i] -= c * sh.pot.tau[i];
    return leading_eigen(make_transfer(sh.pot)).log_lambda;
  };
  double lo = -20, hi = 20;  // g is strictly decreasing in c (tau >= 1)
  if (!(g(lo) > 0) || !(g(hi) < 0))
    throw bracket_error("solve_pressure_shift: zero not bracketed in c");
  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

PressureEstimate pressure_at(const InducedSystem& sys, double t,
                             const std::vector<int>& cutoffs) {
  if (t <= -1.0)
    throw invalid_input(
        "pressure_at: t <= -1 refused (possible non-uniqueness regime)");
  if (cutoffs.empty()) throw invalid_input("pressure_at: empty cutoff schedule");
  PressureEstimate est;
  for (int cut : cutoffs) {
    est.cutoffs.push_back(cut);
    est.per_cutoff.push_back(solve_pressure_shift(truncate_shift(sys, t, cut)));
  }
  const auto& P = est.per_cutoff;
  size_t m = P.size();
  est.value = P.back();
  est.residual = m >= 2 ? std::abs(P[m - 1] - P[m - 2]) : 0.0;
  if (m >= 3) {
    double d1 = P[m - 2] - P[m - 3], d2 = P[m - 1] - P[m - 2];
    if (std::abs(d1) > 1e-15) {
      double rho = d2 / d1;
      if (rho > 0 && rho < 0.95)
        est.value = P[m - 1] + d2 * rho / (1 - rho);
    }
  }
  // tail sanity at the solved pressure: the shifted series must converge
  TailReport tail = tail_sum(sys, t, -est.value);
  if (tail.verdict == "divergent")
    throw divergence_error(
        "pressure_at: tail series diverges at the solved shift; c0(t) = " +
        std::to_string(tail.c0));
  return est;
}

PressureCurve pressure_curve(const InducedSystem& sys,
                             const std::vector<double>& t_grid,
                             const std::vector<int>& cutoffs,
                             double bisect_tol) {
  PressureCurve pc;
  pc.cutoffs = cutoffs;
  for (double t : t_grid) {
    PressureEstimate e = pressure_at(sys, t, cutoffs);
    pc.ts.push_back(t);
    pc.Ps.push_back(e.value);
    pc.residuals.push_back(e.residual);
  }
  double p0 = pressure_at(sys, 0.0, cutoffs).value;
  double p1 = pressure_at(sys, 1.0, cutoffs).value;
  if (!(p0 > 0) || !(p1 < 0))
    throw bracket_error("pressure_curve: P(0) > 0 > P(1) violated");
  double lo = 0, hi = 1, pm = p0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    pm = pressure_at(sys, mid, cutoffs).value;
    (pm > 0 ? lo : hi) = mid;
    if (std::abs(pm) < bisect_tol && hi - lo < 1e-3) break;
  }
  pc.bracket_lo = lo;
  pc.bracket_hi = hi;
  pc.t_u = 0.5 * (lo + hi);
  pc.t_u_residual = std::abs(pm);

  // Lyapunov exponent of the equilibrium at t^u in Kac form
  TruncatedShift sh = truncate_shift(sys, pc.t_u, cutoffs.back());
  double c = solve_pressure_shift(sh);
  for (size_t i = 0; i < sh.pot.base.size(); ++i)
    sh.pot.base[i] -= c * sh.pot.tau[i];
  GibbsResult g = gibbs_truncated(sh);
  double wbar = 0;
  for (size_t i = 0; i < g.weights.size(); ++i)
    wbar += g.weights[i] * sh.pot.log_deriv[i];
  pc.lambda_u_at_root = wbar / g.mean_tau;

  auto [tm, tp] = t_interval(pc.t_u, pc.lambda_u_at_root, sys.params.epsilon);
  pc.t_minus = tm;
  pc.t_plus = tp;
  return pc;
}

double t_u_root(const InducedSystem& sys, const std::vector<int>& cutoffs,
                double bisect_tol) {
  return pressure_curve(sys, {}, cutoffs, bisect_tol).t_u;
}

std::pair<double, double> t_interval(double t_u, double lambda_u, double eps) {
  double dp = lambda_u - std::log(2.0 - eps) + std::sqrt(eps);
  double dm = lambda_u - std::log(4.0 + eps) - std::sqrt(eps);
  if (std::abs(dp) < 1e-12 || std::abs(dm) < 1e-12)
    throw degenerate_parameters("t_interval: vanishing denominator");
  return {t_u * lambda_u / dm, t_u * lambda_u / dp};
}

// ---------------------------------------------------------------------------

TailReport tail_sum(const InducedSystem& sys, double t, double c) {
  TailReport rep;
  std::map<int, std::vector<double>> by_tau;
  for (const auto& br : sys.branches)
    by_tau[br.tau].push_back(c * br.tau + t * std::log(br.length));
  for (auto& [tau, terms] : by_tau) {
    rep.taus.push_back(tau);
    rep.level_sums.push_back(std::exp(logsumexp(terms)));
  }
  rep.total = std::accumulate(rep.level_sums.begin(), rep.level_sums.end(), 0.0);

  BranchCensus census = branch_census(sys, std::min(10, sys.depth - 1));
  double growth = std::max(census.growth_rate, 0.0);
  rep.c0 = (t < 0 ? t * std::log(sys.params.sigma2())
                  : t * std::log(sys.params.sigma1())) - growth;

  // verdict from the slope of log level sums over the last levels
  size_t m = rep.level_sums.size();
  size_t take = std::min<size_t>(10, m);
  if (take < 3) {
    rep.verdict = "inconclusive";
    return rep;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (size_t i = m - take; i < m; ++i) {
    if (!(rep.level_sums[i] > 0)) continue;
    double x = rep.taus[i], y = std::log(rep.level_sums[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++cnt;
  }
  if (cnt < 3) {
    rep.verdict = "inconclusive";
    return rep;
  }
  double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  rep.verdict = slope < -0.05 ? "convergent"
              : slope > 0.05 ? "divergent" : "inconclusive";
  return rep;
}

}  // namespace henon
