#include "henon/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace henon {

namespace {

struct LinFit {
  double slope = 0, intercept = 0, r2 = 0;
};

LinFit least_squares(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  const size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LinFit f;
  double den = n * sxx - sx * sx;
  if (den == 0) return f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ssr = 0, sst = 0, ybar = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double e = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += e * e;
    sst += (ys[i] - ybar) * (ys[i] - ybar);
  }
  f.r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
  return f;
}

double phi_normal(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// asymptotic Kolmogorov distribution Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2l^2}
double kolmogorov_q(double lam) {
  if (lam <= 0) return 1.0;
  double q = 0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::exp(-2.0 * k * k * lam * lam);
    q += (k % 2 ? term : -term);
    if (term < 1e-12) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------

BoxDimFit box_dimension(const SliceSample& sample,
                        const std::vector<double>& scales) {
  if (sample.positions.size() < 2)
    throw invalid_input("box_dimension: need at least two sample points");
  if (scales.size() < 2)
    throw scale_range_error("box_dimension: need at least two scales");
  auto [mn, mx] = std::minmax_element(scales.begin(), scales.end());
  if (!(*mn > 0) || *mx / *mn < 100.0)
    throw scale_range_error(
        "box_dimension: scale grid must span at least two decades");
  std::vector<double> pos = sample.positions;
  std::sort(pos.begin(), pos.end());

  BoxDimFit fit;
  std::vector<double> xs, ys;
  for (double d : scales) {
    long count = 0;
    long prev_box = std::numeric_limits<long>::min();
    for (double p : pos) {
      long box = static_cast<long>(std::floor(p / d));
      if (box != prev_box) {
        ++count;
        prev_box = box;
      }
    }
    fit.scales.push_back(d);
    fit.counts.push_back(count);
    xs.push_back(std::log(1.0 / d));
    ys.push_back(std::log(static_cast<double>(count)));
  }
  LinFit lf = least_squares(xs, ys);
  fit.dimension = lf.slope;
  fit.r2 = lf.r2;
  return fit;
}

// ---------------------------------------------------------------------------

CantorLadder ek_ladder(InducingContext& ctx, const ThetaTower& theta,
                       int k_max) {
  if (k_max < 1 || k_max > 20)
    throw invalid_input("ek_ladder: k_max out of range [1, 20]");
  if (!ctx.leaf_clipped)
    throw invalid_input("ek_ladder: Theta tower not built on this context");
  if (theta.theta_k.empty() || theta.theta_k[0].degenerate)
    throw refinement_needed("ek_ladder: Theta_0 below resolution");
  const MapParams& p = ctx.params();
  const Strand& leaf = ctx.leaf_strand();
  const double eps = p.epsilon;

  // Theta_0 membership from its bordering alpha curves, restricted to the
  // height band where both curves have solved samples
  const AlphaSol& am = ctx.alpha('-', theta.N);
  const AlphaSol& ap = ctx.alpha('+', theta.N);
  double ylo = -std::numeric_limits<double>::infinity(), yhi = -ylo;
  {
    double alo = yhi, ahi = ylo;
    for (size_t i = 0; i < am.ys.size(); ++i)
      if (am.valid[i] && ap.valid[i]) {
        alo = std::min(alo, am.ys[i]);
        ahi = std::max(ahi, am.ys[i]);
      }
    ylo = alo;
    yhi = ahi;
  }
  auto in_theta0 = [&](Point w) {
    if (w.y < ylo || w.y > yhi) return false;
    if (std::abs(w.x) > 0.6) return false;
    return ctx.side_of(am, w) >= 0 && ctx.side_of(ap, w) <= 0;
  };

  // the leaf chart: intervals tracked by the x-coordinate (monotone along
  // the strand); x_of(s) decreasing, so map through s consistently
  auto x_of = [&](double s) { return leaf.x_at(s); };
  double x_hi_band = theta.theta_k[0].x_hi, x_lo_band = theta.theta_k[0].x_lo;
  double s_clip_a = ctx.leaf_s_lo, s_clip_b = ctx.leaf_s_hi;
  double s_band_a = leaf.s_of_x(x_hi_band), s_band_b = leaf.s_of_x(x_lo_band);
  if (s_band_a > s_band_b) std::swap(s_band_a, s_band_b);
  if (s_clip_a > s_clip_b) std::swap(s_clip_a, s_clip_b);

  using Interval = std::pair<double, double>;  // in s
  std::vector<Interval> cur = {{s_clip_a, s_band_a}, {s_band_b, s_clip_b}};
  // the strand parameter lives on the scale of the local-manifold chart, a
  // factor ~1e8 finer than x; translate the resolution floor accordingly
  const double s_hmin =
      kHMin * (s_clip_b - s_clip_a) /
      std::abs(x_of(s_clip_b) - x_of(s_clip_a));

  CantorLadder lad;
  lad.diam_theta0 = x_hi_band - x_lo_band;

  auto chord = [&](const Interval& iv) {
    return norm(leaf.at(iv.second) - leaf.at(iv.first));
  };
  auto record = [&](const std::vector<Interval>& level) {
    std::vector<Interval> xiv;
    double mn = std::numeric_limits<double>::infinity(), mx = 0;
    for (const Interval& iv : level) {
      double a = x_of(iv.first), b = x_of(iv.second);
      if (a > b) std::swap(a, b);
      xiv.push_back({a, b});
      double l = chord(iv);
      mn = std::min(mn, l);
      mx = std::max(mx, l);
    }
    std::sort(xiv.begin(), xiv.end());
    lad.levels.push_back(std::move(xiv));
    lad.min_len.push_back(mn);
    lad.max_len.push_back(mx);
  };
  record(cur);

  const int M = 220;
  for (int k = 2; k <= k_max; ++k) {
    auto member = [&](double s) {
      return in_theta0(apply_n(p, leaf.at(s), k - 1));
    };
    std::vector<Interval> next;
    for (const Interval& iv : cur) {
      std::vector<char> in(M);
      for (int i = 0; i < M; ++i)
        in[i] = member(iv.first + (iv.second - iv.first) * i / (M - 1.0));
      double open = iv.first;
      bool keeping = !in[0];
      auto cross = [&](int i) {  // boundary between sample i and i+1
        double a = iv.first + (iv.second - iv.first) * i / (M - 1.0);
        double b = iv.first + (iv.second - iv.first) * (i + 1) / (M - 1.0);
        bool ma = in[i];
        for (int it = 0; it < 55; ++it) {
          double m = 0.5 * (a + b);
          (member(m) == ma ? a : b) = m;
        }
        return 0.5 * (a + b);
      };
      for (int i = 0; i + 1 < M; ++i) {
        if (in[i] == in[i + 1]) continue;
        double s = cross(i);
        if (in[i]) {  // leaving Theta_0 preimage: open a kept piece
          open = s;
          keeping = true;
        } else {  // entering: close the kept piece
          if (keeping && s - open > s_hmin) next.push_back({open, s});
          keeping = false;
        }
      }
      if (keeping && iv.second - open > s_hmin)
        next.push_back({open, iv.second});
    }
    if (next.empty())
      throw refinement_needed("ek_ladder: component tracking lost at level " +
                              std::to_string(k));
    // removed fraction measured in chord length
    double before = 0, after = 0;
    for (const Interval& iv : cur) before += chord(iv);
    for (const Interval& iv : next) after += chord(iv);
    lad.removed_fraction.push_back(std::max(0.0, (before - after) / before));
    cur = std::move(next);
    record(cur);
  }

  // fitted sandwich constants (1/C_lower)(2+eps)^{-k} <= l <= C_upper(2-eps)^{-k}
  for (size_t i = 0; i < lad.levels.size(); ++i) {
    int k = static_cast<int>(i) + 1;
    lad.C_lower = std::max(lad.C_lower,
                           std::pow(2.0 + eps, -k) / lad.min_len[i]);
    lad.C_upper = std::max(lad.C_upper,
                           lad.max_len[i] * std::pow(2.0 - eps, k));
  }
  double worst_fraction = 0;
  for (double f : lad.removed_fraction) worst_fraction = std::max(worst_fraction, f);
  lad.removal_C = lad.diam_theta0 > 0 ? worst_fraction / lad.diam_theta0 : 0;
  lad.rho = (2.0 - eps) * (1.0 - worst_fraction);
  lad.lower_bound = std::log(lad.rho) / std::log(2.0 + eps);
  return lad;
}

SliceSample slice_from_ladder(const CantorLadder& ladder, int level,
                              double resolution) {
  if (level < 1 || level > static_cast<int>(ladder.levels.size()))
    throw invalid_input("slice_from_ladder: level out of range");
  if (!(resolution > 0))
    throw invalid_input("slice_from_ladder: resolution must be positive");
  SliceSample s;
  s.depth = level;
  for (auto [a, b] : ladder.levels[level - 1]) {
    int m = std::max(2, static_cast<int>(std::ceil((b - a) / resolution)) + 1);
    for (int i = 0; i < m; ++i)
      s.positions.push_back(a + (b - a) * i / (m - 1.0));
  }
  std::sort(s.positions.begin(), s.positions.end());
  return s;
}

// ---------------------------------------------------------------------------

LyapunovEstimate lyapunov_u(const MapParams& p, Point z0, int n, int burn_in) {
  if (n < 10) throw invalid_input("lyapunov_u: n too small");
  Point z = z0, v{1.0, 0.0};
  const int n_batch = 10;
  std::vector<double> batch(n_batch, 0.0);
  int per_batch = n / n_batch;
  double total = 0;
  for (int step = 0; step < burn_in + per_batch * n_batch; ++step) {
    if (!in_box(z)) throw escape_error("lyapunov_u: orbit escaped", step);
    v = jacobian(p, z) * v;
    double nv = norm(v);
    if (!(nv > 0)) throw escape_error("lyapunov_u: tangent collapsed", step);
    if (step >= burn_in) {
      int b = (step - burn_in) / per_batch;
      batch[b] += std::log(nv);
      total += std::log(nv);
    }
    v = (1.0 / nv) * v;
    z = apply(p, z);
  }
  LyapunovEstimate est;
  est.n = per_batch * n_batch;
  est.lambda = total / est.n;
  double var = 0;
  for (double b : batch) {
    double m = b / per_batch - est.lambda;
    var += m * m;
  }
  est.error_bar = std::sqrt(var / (n_batch - 1)) / std::sqrt(n_batch);
  return est;
}

// ---------------------------------------------------------------------------

std::vector<Point> sample_gibbs_orbit(InducingContext& ctx,
                                      const InducedSystem& sys,
                                      const TruncatedShift& shift,
                                      const GibbsResult& g, long length,
                                      std::uint64_t seed) {
  if (shift.branch_index.empty())
    throw invalid_input("sample_gibbs_orbit: shift carries no branch indices");
  if (g.weights.size() != shift.branch_index.size())
    throw invalid_input("sample_gibbs_orbit: weight/alphabet size mismatch");
  std::vector<double> cum(g.weights.size());
  std::partial_sum(g.weights.begin(), g.weights.end(), cum.begin());
  cum.back() = 1.0;

  const MapParams& p = ctx.params();
  const Strand& leaf = ctx.leaf_strand();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Point> orbit;
  orbit.reserve(length);
  while (static_cast<long>(orbit.size()) < length) {
    size_t sym = std::lower_bound(cum.begin(), cum.end(), uni(rng)) - cum.begin();
    const ReturnBranch& br = sys.branches[shift.branch_index[sym]];
    Point z = leaf.at(0.5 * (br.s_lo + br.s_hi));
    for (int j = 0; j < br.tau && static_cast<long>(orbit.size()) < length; ++j) {
      orbit.push_back(z);
      z = apply(p, z);
    }
  }
  return orbit;
}

std::vector<double> observable_x(const std::vector<Point>& orbit) {
  std::vector<double> v;
  v.reserve(orbit.size());
  for (Point z : orbit) v.push_back(z.x);
  return v;
}

std::vector<double> observable_dist(const std::vector<Point>& orbit,
                                    Point zeta0) {
  std::vector<double> v;
  v.reserve(orbit.size());
  for (Point z : orbit) v.push_back(norm(z - zeta0));
  return v;
}

std::vector<double> observable_coboundary_x(const std::vector<Point>& orbit) {
  std::vector<double> v;
  if (orbit.size() < 2) return v;
  v.reserve(orbit.size() - 1);
  for (size_t i = 0; i + 1 < orbit.size(); ++i)
    v.push_back(orbit[i + 1].x - orbit[i].x);
  return v;
}

// ---------------------------------------------------------------------------

AcfReport correlation_decay(const std::vector<double>& values,
                            const std::vector<int>& lags) {
  if (values.empty() || lags.empty())
    throw invalid_input("correlation_decay: empty input");
  int max_lag = *std::max_element(lags.begin(), lags.end());
  if (static_cast<long>(values.size()) < 100L * std::max(1, max_lag))
    throw invalid_input("correlation_decay: orbit too short for the lags");
  const size_t n = values.size();
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::vector<double> c(n);
  double var = 0;
  for (size_t i = 0; i < n; ++i) {
    c[i] = values[i] - mean;
    var += c[i] * c[i];
  }
  var /= n;
  if (var < 1e-14 * std::max(1.0, mean * mean))
    throw degenerate_observable("correlation_decay: observable has no variance");

  AcfReport rep;
  rep.lags.push_back(0);
  rep.acf.push_back(1.0);
  std::vector<double> xs, ys;
  for (int l : lags) {
    if (l <= 0) continue;
    double s = 0;
    for (size_t i = 0; i + l < n; ++i) s += c[i] * c[i + l];
    double a = s / ((n - l) * var);
    rep.lags.push_back(l);
    rep.acf.push_back(a);
    if (std::abs(a) > 1e-8) {
      xs.push_back(l);
      ys.push_back(std::log(std::abs(a)));
    }
  }
  if (xs.size() >= 2) {
    LinFit lf = least_squares(xs, ys);
    rep.rate = std::exp(lf.slope);
    rep.amp = std::exp(lf.intercept);
    rep.r2 = lf.r2;
  }
  return rep;
}

CltReport clt_test(const std::vector<double>& values, int n_block,
                   int n_samples) {
  if (n_block < 2 || n_samples < 10)
    throw invalid_input("clt_test: block length or sample count too small");
  if (static_cast<long>(n_block) * n_samples > static_cast<long>(values.size()))
    throw invalid_input("clt_test: orbit shorter than n_block * n_samples");
  const long used = static_cast<long>(n_block) * n_samples;
  double mean = 0;
  for (long i = 0; i < used; ++i) mean += values[i];
  mean /= used;

  std::vector<double> S(n_samples, 0.0);
  for (int j = 0; j < n_samples; ++j) {
    double s = 0;
    for (int i = 0; i < n_block; ++i)
      s += values[static_cast<long>(j) * n_block + i] - mean;
    S[j] = s / std::sqrt(static_cast<double>(n_block));
  }
  CltReport rep;
  rep.n_block = n_block;
  rep.n_samples = n_samples;
  double var = 0;
  for (double s : S) var += s * s;
  var /= (n_samples - 1);
  rep.sigma = std::sqrt(var);
  if (!(rep.sigma > 0)) {
    rep.ks_stat = 0;
    rep.p_value = 1;
    return rep;
  }
  std::sort(S.begin(), S.end());
  double D = 0;
  for (int i = 0; i < n_samples; ++i) {
    double F = phi_normal(S[i] / rep.sigma);
    D = std::max(D, std::abs((i + 1.0) / n_samples - F));
    D = std::max(D, std::abs(F - static_cast<double>(i) / n_samples));
  }
  rep.ks_stat = D;
  double sq = std::sqrt(static_cast<double>(n_samples));
  rep.p_value = kolmogorov_q((sq + 0.12 + 0.11 / sq) * D);
  return rep;
}

// ---------------------------------------------------------------------------

double dimension_of_measure(const GibbsResult& g, const TruncatedShift& shift) {
  double lam_induced = 0;
  for (size_t i = 0; i < g.weights.size(); ++i)
    lam_induced += g.weights[i] * shift.pot.log_deriv[i];
  if (!(lam_induced > 0))
    throw invalid_input("dimension_of_measure: nonpositive Lyapunov exponent");
  return g.entropy / lam_induced;
}

}  // namespace henon
