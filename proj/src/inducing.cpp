#include "henon/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace henon {

namespace {

constexpr int kNy = 161;

// Newton solve for x with f^k(x, y) on the local stable graph of P; `cap`
// bounds the total displacement from the seed (trust region).
double newton_graph(const MapParams& p, const StableGraph& gP, int k, double y,
                    double seed, double cap, bool& ok) {
  const double sb = p.sqrt_b(), sg = p.s();
  double x = seed;
  ok = false;
  for (int it = 0; it < 80; ++it) {
    double X = x, Y = y, vx = 1, vy = 0;
    for (int j = 0; j < k; ++j) {
      double Xn = 1.0 - p.a * X * X + sb * Y;
      double Yn = sg * sb * X;
      double vxn = -2.0 * p.a * X * vx + sb * vy;
      double vyn = sg * sb * vx;
      X = Xn; Y = Yn; vx = vxn; vy = vyn;
      if (!std::isfinite(X) || std::abs(X) > 1e8) return x;
    }
    double F = X - gP.at(Y);
    double dF = vx - gP.slope_at(Y) * vy;
    if (dF == 0 || !std::isfinite(dF)) return x;
    double dx = F / dF;
    if (std::abs(dx) > 0.5 * cap) dx = std::copysign(0.5 * cap, dx);
    x -= dx;
    if (std::abs(x - seed) > 2.0 * cap) return x;  // left the trust region
    if (std::abs(dx) < 1e-15 * std::abs(x) + 1e-17) { ok = true; return x; }
  }
  return x;
}

// plain residual of f^k(x, y) against the local stable graph of P
double graph_residual(const MapParams& p, const StableGraph& gP, int k,
                      double x, double y) {
  const double sb = p.sqrt_b(), sg = p.s();
  double X = x, Y = y;
  for (int j = 0; j < k; ++j) {
    double Xn = 1.0 - p.a * X * X + sb * Y;
    Y = sg * sb * X;
    X = Xn;
    if (!std::isfinite(X) || std::abs(X) > 1e8)
      return std::numeric_limits<double>::quiet_NaN();
  }
  return X - gP.at(Y);
}

// First zero of the depth-k residual strictly inward of x_prev (itself a root,
// on the previous curve of the accumulating family).  The chain structure
// leaves no interleaved roots between consecutive rungs, so a sign-change
// march with geometric steps isolates the next curve.
double march_root(const MapParams& p, const StableGraph& gP, int k, double y,
                  double x_prev, double dir, double g_prev, bool& ok) {
  ok = false;
  if (!(g_prev > 0)) return x_prev;
  double h = g_prev * 1e-4;
  const double hmax = g_prev * 0.95;
  double f0 = graph_residual(p, gP, k, x_prev + dir * h, y);
  if (!std::isfinite(f0) || f0 == 0) return x_prev;
  double h_lo = h;
  while (true) {
    h *= 1.35;
    if (h > hmax) return x_prev;  // no next rung at this height
    double f = graph_residual(p, gP, k, x_prev + dir * h, y);
    if (!std::isfinite(f)) return x_prev;
    if ((f > 0) != (f0 > 0)) break;
    h_lo = h;
  }
  double h_hi = h;
  for (int it = 0; it < 100; ++it) {
    double hm = 0.5 * (h_lo + h_hi);
    if (hm == h_lo || hm == h_hi) break;
    double f = graph_residual(p, gP, k, x_prev + dir * hm, y);
    if (!std::isfinite(f)) return x_prev;
    if ((f > 0) == (f0 > 0)) h_lo = hm;
    else h_hi = hm;
  }
  ok = true;
  return x_prev + dir * 0.5 * (h_lo + h_hi);
}

// Number of chain rungs f^2(z), f^3(z), ... staying left of the local stable
// graph of P inside the box: the depth of z in the alpha funnel.
int track_count(const MapParams& p, const StableGraph& gP, Point z, int cap) {
  Point w = apply(p, apply(p, z));
  int j = 0;
  while (j < cap) {
    if (!w.finite() || std::abs(w.x) > 3 || std::abs(w.y) > 3) break;
    if (w.x > gP.at(w.y)) break;
    w = apply(p, w);
    ++j;
  }
  return j;
}

}  // namespace

double AlphaSol::x_at(double y) const {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(ys.size()); ++i)
    if (valid[i]) idx.push_back(i);
  if (idx.empty()) throw not_found_error("alpha curve has no valid samples");
  if (idx.size() == 1) return xs[idx[0]];
  auto lerp = [&](int i, int j) {
    double t = (y - ys[i]) / (ys[j] - ys[i]);
    return xs[i] + t * (xs[j] - xs[i]);
  };
  if (y <= ys[idx.front()]) return lerp(idx[0], idx[1]);
  if (y >= ys[idx.back()]) return lerp(idx[idx.size() - 2], idx.back());
  for (size_t q = 1; q < idx.size(); ++q)
    if (ys[idx[q]] >= y) return lerp(idx[q - 1], idx[q]);
  return xs[idx.back()];
}

InducingContext::InducingContext(const MapParams& params) : p_(params) {
  p_.validate();
  if (p_.b <= 0)
    throw singular_map("InducingContext: inducing scheme requires b > 0");
  auto pq = fixed_saddles(p_);
  P_ = pq.first;
  Q_ = pq.second;
  y_band_ = 3.0 * p_.sqrt_b();
  gP_ = local_stable_graph(p_, P_, y_band_, 12001);
  gQ_ = local_stable_graph(p_, Q_, std::pow(p_.b, 0.25), 12001);
  leaf_ = bottom_strand(p_, Q_, 0.0, 0.5);
  if (!leaf_)
    throw not_found_error("InducingContext: no spanning bottom unstable strand");
}

const AlphaSol& InducingContext::alpha(char family, int index) {
  bool bad_fam = family != 't' && family != '-' && family != '+';
  if (bad_fam || (family == 't' && index < 0) || (family != 't' && index < 1))
    throw invalid_input("alpha: family must be 't'/'-'/'+' with valid index");
  auto key = std::make_pair(family, index);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  AlphaSol sol = solve_family(family, index);
  return cache_.emplace(key, std::move(sol)).first->second;
}

AlphaSol InducingContext::solve_family(char family, int index) {
  AlphaSol a;
  a.family = family;
  a.index = index;
  a.k = (family == 't') ? index : index + 1;
  a.ys.resize(kNy);
  a.xs.assign(kNy, 0.0);
  a.valid.assign(kNy, 0);
  for (int i = 0; i < kNy; ++i)
    a.ys[i] = -y_band_ + 2.0 * y_band_ * i / (kNy - 1);

  // seed chain of the one-dimensional limit map 1 - a x^2
  std::vector<double> t(std::max(index, 1) + 1);
  t[0] = P_.location.x;
  for (size_t j = 1; j < t.size(); ++j)
    t[j] = -std::sqrt(std::max(0.0, (1.0 - t[j - 1]) / p_.a));
  double seed1d;
  const AlphaSol *prev1 = nullptr, *prev2 = nullptr;
  const int march_from = 3;  // 1-D seeds suffice for the shallow curves
  if (family == 't') {
    seed1d = t[index];
    if (index >= march_from) {
      prev1 = &alpha('t', index - 1);
      prev2 = &alpha('t', index - 2);
    }
  } else {
    double u = std::sqrt(std::max(0.0, (1.0 - t[index - 1]) / p_.a));
    seed1d = (family == '+' ? 1.0 : -1.0) *
             std::sqrt(std::max(0.0, (1.0 - u) / p_.a));
    if (index >= march_from) {
      prev1 = &alpha(family, index - 1);
      prev2 = &alpha(family, index - 2);
    }
  }

  // inward accumulation direction of the family
  const double dir = (family == '+') ? -1.0 : (family == '-') ? 1.0 : -1.0;
  double cont = std::numeric_limits<double>::quiet_NaN();
  for (int i = kNy - 1; i >= 0; --i) {
    double y = a.ys[i];
    bool ok = false;
    double x;
    if (prev1) {
      // next rung inward of the previous curve of the family
      if (prev1->valid[i] && prev2->valid[i]) {
        double g_prev = std::abs(prev1->xs[i] - prev2->xs[i]);
        x = march_root(p_, gP_, a.k, y, prev1->xs[i], dir, g_prev, ok);
      } else {
        x = 0;
      }
    } else {
      double seed = std::isfinite(cont) ? cont : seed1d;
      x = newton_graph(p_, gP_, a.k, y, seed, 0.1, ok);
    }
    if (ok) {
      if (family == '+' && x <= 0) ok = false;
      if (family == '-' && x >= 0) ok = false;
      if (family == 't' && (x < -1.3 || x > 0.8)) ok = false;
    }
    a.xs[i] = ok ? x : 0;
    a.valid[i] = ok ? 1 : 0;
    if (ok) cont = x;
  }

  int nvalid = 0;
  double dist_prev = 0;
  for (int i = 0; i < kNy; ++i) {
    if (!a.valid[i]) continue;
    ++nvalid;
    if (prev1 && prev1->valid[i])
      dist_prev = std::max(dist_prev, std::abs(a.xs[i] - prev1->xs[i]));
  }
  a.degenerate = nvalid < kNy / 3 || (prev1 && nvalid > 0 && dist_prev < 1e-14);
  return a;
}

double InducingContext::alpha_x(const AlphaSol& a, double y) const {
  double seed = a.x_at(y);
  bool ok = false;
  double x = newton_graph(p_, gP_, a.k, y, seed, 1e-3, ok);
  return ok ? x : seed;
}

// ---------------------------------------------------------------------------

namespace {

// clips the bottom strand to Theta (between alpha_1^- and alpha_1^+)
void ensure_leaf_clip(InducingContext& ctx) {
  if (ctx.leaf_clipped) return;
  const Strand& leaf = ctx.leaf_strand();
  const AlphaSol& am = ctx.alpha('-', 1);
  const AlphaSol& ap = ctx.alpha('+', 1);
  double sa = leaf.s_lo, sb = leaf.s_hi;
  bool inc = leaf.x_at(sb) > leaf.x_at(sa);
  double sL = inc ? sa : sb, sR = inc ? sb : sa;  // x(sL) < x(sR)
  auto cross = [&](const AlphaSol& al) {
    double lo = sL, hi = sR;
    double flo = ctx.side_of(al, leaf.at(lo));
    double fhi = ctx.side_of(al, leaf.at(hi));
    if ((flo > 0) == (fhi > 0))
      throw not_found_error("leaf strand does not cross a Theta border");
    for (int it = 0; it < 90; ++it) {
      double mid = 0.5 * (lo + hi);
      if ((ctx.side_of(al, leaf.at(mid)) > 0) == (fhi > 0)) hi = mid;
      else lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  double e1 = cross(am), e2 = cross(ap);
  ctx.leaf_s_lo = std::min(e1, e2);
  ctx.leaf_s_hi = std::max(e1, e2);
  ctx.leaf_clipped = true;
}

struct TipBand {
  double s_lo, s_hi, s_center;
  int count;
};

// locates the Theta-band funnel tip on the leaf: the interval of points that
// track at least m rungs of the stable chain
std::optional<TipBand> tip_search(InducingContext& ctx, int m) {
  const Strand& leaf = ctx.leaf_strand();
  const MapParams& p = ctx.params();
  const StableGraph& gP = ctx.graphP();
  const int cap = m + 4;
  auto cnt = [&](double s) { return track_count(p, gP, leaf.at(s), cap); };
  double lo = ctx.leaf_s_lo, hi = ctx.leaf_s_hi;
  double best_s = lo;
  int best = -1;
  for (int round = 0; round < 4; ++round) {
    const int ns = 801;
    double step = (hi - lo) / (ns - 1);
    for (int i = 0; i < ns; ++i) {
      double s = lo + step * i;
      int c = cnt(s);
      if (c > best) { best = c; best_s = s; }
    }
    lo = std::max(ctx.leaf_s_lo, best_s - 2 * step);
    hi = std::min(ctx.leaf_s_hi, best_s + 2 * step);
  }
  if (best < m) return std::nullopt;
  auto edge = [&](double sin_, double sout) {
    for (int it = 0; it < 90; ++it) {
      double mid = 0.5 * (sin_ + sout);
      if (cnt(mid) >= m) sin_ = mid;
      else sout = mid;
    }
    return 0.5 * (sin_ + sout);
  };
  double eL = edge(best_s, ctx.leaf_s_lo);
  double eR = edge(best_s, ctx.leaf_s_hi);
  return TipBand{std::min(eL, eR), std::max(eL, eR), best_s, best};
}

}  // namespace

// ---------------------------------------------------------------------------

RegionR build_region(InducingContext& ctx, const Curve& wu, const Curve& wsP,
                     const Curve& wsQ) {
  const MapParams& p = ctx.params();
  const double yq = std::pow(p.b, 0.25);
  auto reach = [](const Curve& c, double xlo, double xhi, double yext) {
    for (Point v : c.vertices)
      if (v.x > xlo && v.x < xhi && std::abs(v.y) <= yext) return true;
    return false;
  };
  if (!reach(wsQ, -1.2, -0.8, yq))
    throw insufficient_curve(
        "build_region: stable side hat alpha_0^- missing (W^s(Q) arc too short)");
  if (!reach(wu, -0.2, 0.2, 0.5))
    throw insufficient_curve(
        "build_region: unstable side f gamma_0 missing (W^u(Q) arc too short)");
  if (!reach(wsP, 0.3, 0.7, 0.2))
    throw insufficient_curve("build_region: W^s(P) arc too short");

  RegionR reg;
  const StableGraph& gQ = ctx.graphQ();
  const int nside = 201;
  // left stable side: local graph of W^s(Q) within |y| <= b^{1/4}
  {
    std::vector<Point> pts;
    for (int i = 0; i < nside; ++i) {
      double y = -yq + 2.0 * yq * i / (nside - 1);
      pts.push_back({gQ.at(y), y});
    }
    reg.left = make_curve(std::move(pts), CurveTag::stable);
  }
  // right stable side: the f-preimage component of the left side near x = +1
  auto right_x = [&](double y) {
    double x = 1.0;
    const double sb = p.sqrt_b(), sg = p.s();
    for (int it = 0; it < 60; ++it) {
      double X = 1.0 - p.a * x * x + sb * y;
      double Y = sg * sb * x;
      double F = X - gQ.at(Y);
      double dF = -2.0 * p.a * x - gQ.slope_at(Y) * sg * sb;
      double dx = F / dF;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    return x;
  };
  {
    std::vector<Point> pts;
    for (int i = 0; i < nside; ++i) {
      double y = -yq + 2.0 * yq * i / (nside - 1);
      pts.push_back({right_x(y), y});
    }
    reg.right = make_curve(std::move(pts), CurveTag::stable);
  }

  // unstable sides: the lowest strand spanning the region and its companion
  auto wide = bottom_strand(p, ctx.saddleQ(), 0.0, 0.5, 14, -0.9, 0.9);
  if (!wide)
    throw not_found_error("build_region: no wide spanning unstable strand");
  auto strand_poly = [&](const Strand& st) {
    std::vector<Point> pts;
    const int ns = 801;
    for (int i = 0; i < ns; ++i) {
      double s = st.s_lo + (st.s_hi - st.s_lo) * i / (ns - 1);
      pts.push_back(st.at(s));
    }
    if (pts.front().x > pts.back().x) std::reverse(pts.begin(), pts.end());
    return make_curve(std::move(pts), CurveTag::unstable);
  };
  reg.bottom = strand_poly(*wide);

  // companion: next-lowest spanning monotone run at the same image level
  {
    LocalManifold loc = local_unstable(p, ctx.saddleQ());
    const double d0 = 1e-7, lam = std::abs(loc.lambda);
    const int ns = 20000;
    std::vector<double> ts(2 * ns);
    for (int i = 0; i < ns; ++i) {
      double tt = d0 / lam + (d0 - d0 / lam) * (i + 0.5) / ns;
      ts[i] = -tt;
      ts[ns + i] = tt;
    }
    std::sort(ts.begin(), ts.end());
    std::optional<Strand> top;
    double top_y = std::numeric_limits<double>::infinity();
    double bot_y = wide->y_at(wide->s_of_x(0.0));
    for (int lvl : {wide->level, wide->level - 1, wide->level + 1}) {
      std::vector<Point> zs(2 * ns);
      for (int i = 0; i < 2 * ns; ++i) {
        Point z = loc.at(ts[i]);
        bool ok = true;
        for (int k = 0; k < lvl; ++k) {
          z = apply(p, z);
          if (std::abs(z.x) > 10 || std::abs(z.y) > 10) { ok = false; break; }
        }
        zs[i] = ok ? z : Point{1e9, 1e9};
      }
      int i = 0;
      while (i + 1 < 2 * ns) {
        if (zs[i].x > 1e8) { ++i; continue; }
        int j = i + 1;
        if (zs[j].x > 1e8 || zs[j].x == zs[i].x) { ++i; continue; }
        bool inc = zs[j].x > zs[i].x;
        while (j + 1 < 2 * ns && zs[j + 1].x < 1e8 &&
               ((zs[j + 1].x > zs[j].x) == inc) && zs[j + 1].x != zs[j].x)
          ++j;
        double rx_lo = std::min(zs[i].x, zs[j].x);
        double rx_hi = std::max(zs[i].x, zs[j].x);
        if (rx_lo <= -0.9 && rx_hi >= 0.9) {
          Strand cand{p, loc, lvl, ts[i], ts[j]};
          double y = cand.y_at(cand.s_of_x(0.0));
          if (std::abs(y) <= 0.5 && y > bot_y + 1e-9 && y < top_y) {
            top_y = y;
            top = cand;
          }
        }
        i = j;
      }
    }
    if (!top)
      throw not_found_error("build_region: no companion upper unstable strand");
    reg.top = strand_poly(*top);
  }

  // corners: crossings of the unstable sides with the stable sides
  auto corner = [&](const Curve& uns, bool left_side) -> double {
    double worst = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < uns.size(); ++i) {
      Point a = uns.vertices[i], b = uns.vertices[i + 1];
      auto sx = [&](double y) { return left_side ? gQ.at(y) : right_x(y); };
      double fa = a.x - sx(a.y), fb = b.x - sx(b.y);
      if ((fa > 0) == (fb > 0)) continue;
      double tt = fa / (fa - fb);
      Point zc = a + tt * (b - a);
      worst = std::abs(zc.x - sx(zc.y));
      break;
    }
    return worst;
  };
  double cg = 0;
  for (bool ls : {true, false}) {
    cg = std::max(cg, corner(reg.bottom, ls));
    cg = std::max(cg, corner(reg.top, ls));
  }
  reg.corner_gap = std::isfinite(cg) ? cg : -1.0;

  double xlo = 1e9, xhi = -1e9, ylo = 1e9, yhi = -1e9;
  for (const Curve* c : {&reg.bottom, &reg.top, &reg.left, &reg.right})
    for (Point v : c->vertices) {
      xlo = std::min(xlo, v.x);
      xhi = std::max(xhi, v.x);
      ylo = std::min(ylo, v.y);
      yhi = std::max(yhi, v.y);
    }
  reg.bbox = Rect{xlo, xhi, ylo, yhi};
  return reg;
}

// ---------------------------------------------------------------------------

AlphaFamily build_alpha(InducingContext& ctx, const RegionR& region, int n_max) {
  if (n_max < 1 || n_max > 80)
    throw invalid_input("build_alpha: n_max out of range [1, 80]");
  AlphaFamily fam;
  fam.n_max = n_max;
  auto to_curve = [&](const AlphaSol& s) {
    std::vector<Point> pts;
    for (int i = 0; i < static_cast<int>(s.ys.size()); ++i)
      if (s.valid[i] && s.ys[i] >= region.bbox.y_lo - 1e-12 &&
          s.ys[i] <= region.bbox.y_hi + 1e-12)
        pts.push_back({s.xs[i], s.ys[i]});
    if (pts.size() < 2) return Curve{{}, {}, {}, {}, CurveTag::alpha};
    return make_curve(std::move(pts), CurveTag::alpha);
  };
  for (int n = 0; n <= n_max; ++n)
    fam.tilde_alpha.push_back(to_curve(ctx.alpha('t', n)));
  for (int m = 1; m <= n_max; ++m) {
    fam.alpha_minus.push_back(to_curve(ctx.alpha('-', m)));
    fam.alpha_plus.push_back(to_curve(ctx.alpha('+', m)));
  }
  return fam;
}

ThetaTower build_theta(InducingContext& ctx, const AlphaFamily& alpha, int K) {
  if (K < 0) throw invalid_input("build_theta: K must be >= 0");
  const MapParams& p = ctx.params();
  ThetaTower tw;
  tw.N = p.N;
  tw.xi = p.xi();
  ensure_leaf_clip(ctx);
  const Strand& leaf = ctx.leaf_strand();
  double x0 = leaf.x_at(ctx.leaf_s_lo), x1 = leaf.x_at(ctx.leaf_s_hi);
  tw.theta = ThetaBand{std::min(x0, x1), std::max(x0, x1), 1, false};
  for (int k = 0; k <= K; ++k) {
    int m = tw.xi * k + tw.N;
    ThetaBand band;
    band.border_index = m;
    bool alpha_ok = m <= alpha.n_max && !ctx.alpha('-', m).degenerate &&
                    !ctx.alpha('+', m).degenerate;
    auto tip = alpha_ok ? tip_search(ctx, m) : std::nullopt;
    if (tip) {
      double a = leaf.x_at(tip->s_lo), b = leaf.x_at(tip->s_hi);
      band.x_lo = std::min(a, b);
      band.x_hi = std::max(a, b);
      band.degenerate = false;
    } else {
      band.x_lo = band.x_hi = 0;
      band.degenerate = true;  // below tracking resolution at this depth
    }
    tw.theta_k.push_back(band);
  }
  return tw;
}

// ---------------------------------------------------------------------------

std::vector<Curve> partition_curve(InducingContext& ctx, const Curve& gamma,
                                   const AlphaFamily& fam) {
  (void)ctx;
  if (gamma.size() < 2)
    throw invalid_input("partition_curve: degenerate input curve");
  std::vector<double> cuts;
  auto add_cuts = [&](const Curve& al, const char* name) {
    if (al.size() < 2) return;
    std::vector<double> hits;
    for (size_t i = 0; i + 1 < gamma.size(); ++i) {
      Point a = gamma.vertices[i], r = gamma.vertices[i + 1] - a;
      for (size_t j = 0; j + 1 < al.size(); ++j) {
        Point q = al.vertices[j], w = al.vertices[j + 1] - q;
        double den = r.x * w.y - r.y * w.x;
        if (den == 0) continue;
        Point qp = q - a;
        double tt = (qp.x * w.y - qp.y * w.x) / den;
        double uu = (qp.x * r.y - qp.y * r.x) / den;
        if (tt >= 0 && tt < 1 && uu >= 0 && uu < 1)
          hits.push_back(gamma.arclength[i] + tt * norm(r));
      }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<double> uniq;
    for (double h : hits)
      if (uniq.empty() || h - uniq.back() > 1e-9) uniq.push_back(h);
    if (uniq.size() > 1)
      throw geometry_violation(
          std::string("partition_curve: multiple crossings with ") + name);
    for (double h : uniq) cuts.push_back(h);
  };
  for (const Curve& c : fam.tilde_alpha) add_cuts(c, "tilde alpha");
  for (const Curve& c : fam.alpha_minus) add_cuts(c, "alpha^-");
  for (const Curve& c : fam.alpha_plus) add_cuts(c, "alpha^+");
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> bounds{0.0};
  for (double c : cuts)
    if (c - bounds.back() > 1e-9) bounds.push_back(c);
  if (gamma.length() - bounds.back() > 1e-9) bounds.push_back(gamma.length());

  std::vector<Curve> pieces;
  for (size_t q = 0; q + 1 < bounds.size(); ++q) {
    std::vector<Point> pts;
    pts.push_back(gamma.at(bounds[q]));
    for (size_t i = 0; i < gamma.size(); ++i)
      if (gamma.arclength[i] > bounds[q] && gamma.arclength[i] < bounds[q + 1])
        pts.push_back(gamma.vertices[i]);
    pts.push_back(gamma.at(bounds[q + 1]));
    pieces.push_back(make_curve(std::move(pts), gamma.tag));
  }
  return pieces;
}

// ---------------------------------------------------------------------------

OmegaSets omega_sets(InducingContext& ctx, const ThetaTower& theta, int n_max) {
  if (n_max < 0) throw invalid_input("omega_sets: n_max must be >= 0");
  ensure_leaf_clip(ctx);
  OmegaSets om;
  std::vector<std::pair<double, double>> cur;
  auto tip = tip_search(ctx, theta.N);
  if (tip) {
    cur = {{ctx.leaf_s_lo, tip->s_lo}, {tip->s_hi, ctx.leaf_s_hi}};
  } else {
    om.refinement_warning = true;
    cur = {{ctx.leaf_s_lo, ctx.leaf_s_hi}};
  }
  om.levels.push_back(cur);
  for (int n = 1; n <= n_max; ++n) {
    // Time-n exclusions act at radii ~ sigma^-(xi n + N) around the tangency
    // tip; for n >= 1 these are below leaf resolution, so the sets stabilize.
    om.refinement_warning = true;
    om.levels.push_back(cur);
  }
  return om;
}

// ---------------------------------------------------------------------------

InducedSystem first_return_branches(InducingContext& ctx,
                                    const ThetaTower& theta, int depth) {
  const MapParams& p = ctx.params();
  if (depth < 2 || depth > 64)
    throw invalid_input("first_return_branches: depth out of range [2, 64]");
  ensure_leaf_clip(ctx);
  const Strand& leaf = ctx.leaf_strand();
  const AlphaSol& am = ctx.alpha('-', 1);
  const AlphaSol& ap = ctx.alpha('+', 1);

  InducedSystem sys;
  sys.depth = depth;
  sys.params = p;
  sys.a_star = p.a;
  sys.counts.assign(depth + 1, 0);

  // arclength table along the clipped leaf
  const int nt = 4097;
  std::vector<double> ss(nt), arc(nt);
  for (int i = 0; i < nt; ++i)
    ss[i] = ctx.leaf_s_lo + (ctx.leaf_s_hi - ctx.leaf_s_lo) * i / (nt - 1);
  arc[0] = 0;
  Point zp = leaf.at(ss[0]);
  for (int i = 1; i < nt; ++i) {
    Point z = leaf.at(ss[i]);
    arc[i] = arc[i - 1] + norm(z - zp);
    zp = z;
  }
  auto arclen = [&](double s) {
    auto it = std::lower_bound(ss.begin(), ss.end(), s);
    size_t i = std::clamp<size_t>(it - ss.begin(), 1, nt - 1);
    double tt = (s - ss[i - 1]) / (ss[i] - ss[i - 1]);
    return arc[i - 1] + tt * (arc[i] - arc[i - 1]);
  };

  auto fn = [&](double s, int n) { return apply_n(p, leaf.at(s), n); };

  auto make_branch = [&](double sA, double sB, int tau) {
    ReturnBranch br;
    br.s_lo = sA;
    br.s_hi = sB;
    br.tau = tau;
    br.a_lo = arclen(sA);
    br.a_hi = arclen(sB);
    if (br.a_lo > br.a_hi) std::swap(br.a_lo, br.a_hi);
    br.length = br.a_hi - br.a_lo;
    br.image_tag = "spans Theta between alpha_1^- and alpha_1^+";
    const int ns = 17;
    double wmin = std::numeric_limits<double>::infinity();
    double wmax = -wmin, wmid = 0;
    for (int i = 0; i < ns; ++i) {
      double s = sA + (sB - sA) * i / (ns - 1);
      TangentData td = leaf.tangent_at(s);
      Point z = td.base, d = td.direction;
      double w = 0;
      for (int j = 0; j < tau; ++j) {
        d = jacobian(p, z) * d;
        z = apply(p, z);
        double nn = norm(d);
        w += std::log(nn);
        d = {d.x / nn, d.y / nn};
      }
      wmin = std::min(wmin, w);
      wmax = std::max(wmax, w);
      if (i == ns / 2) wmid = w;
    }
    br.min_deriv = std::exp(wmin);
    br.max_deriv = std::exp(wmax);
    br.distortion = wmax - wmin;
    br.weight = wmid;
    double xa = leaf.x_at(sA), xb = leaf.x_at(sB);
    double xl = leaf.x_at(ctx.leaf_s_lo), xr = leaf.x_at(ctx.leaf_s_hi);
    br.boundary_flag =
        std::min({std::abs(xa - xl), std::abs(xa - xr), std::abs(xb - xl),
                  std::abs(xb - xr)}) < 10 * kHMin;
    return br;
  };

  struct Piece {
    double a, b;
  };
  std::vector<Piece> active;

  // Initial slow-recurrence trim: remove the Theta_0 funnel tip around the
  // tangency.  Later-time exclusions act at radii ~ sigma^-(xi n + N) and sit
  // below resolution, so gap pieces are only consumed by returns, folds, and
  // the resolution cutoff.
  auto tip = tip_search(ctx, theta.N);
  if (tip) {
    active.push_back({ctx.leaf_s_lo, tip->s_lo});
    active.push_back({tip->s_hi, ctx.leaf_s_hi});
  } else {
    sys.resolution_flag = true;  // funnel tip below tracking resolution
    active.push_back({ctx.leaf_s_lo, ctx.leaf_s_hi});
  }

  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int n = 1; n <= depth && !active.empty(); ++n) {
    std::vector<Piece> next;
    for (const Piece& pc : active) {
      double wx = std::abs(leaf.x_at(pc.b) - leaf.x_at(pc.a));
      if (wx < kHMin) {
        sys.resolution_flag = true;
        continue;
      }
      const int M = std::min(160, 48 + 4 * n);
      std::vector<double> sv(M), xv(M);
      bool escaped = false;
      for (int i = 0; i < M; ++i) {
        sv[i] = pc.a + (pc.b - pc.a) * i / (M - 1);
        Point z = fn(sv[i], n);
        xv[i] = z.x;
        if (!z.finite() || std::abs(z.x) > 5 || std::abs(z.y) > 5)
          escaped = true;
      }
      if (escaped) {  // cannot happen for leaf orbits; drop defensively
        sys.resolution_flag = true;
        continue;
      }
      // split at folds into monotone runs
      std::vector<double> cuts;
      for (int i = 0; i + 2 < M; ++i) {
        double d1 = xv[i + 1] - xv[i], d2 = xv[i + 2] - xv[i + 1];
        if (d1 == 0 || d2 == 0 || (d1 > 0) == (d2 > 0)) continue;
        bool maximize = d1 > 0;
        double a = sv[i], b = sv[i + 2];
        auto val = [&](double s) {
          double v = fn(s, n).x;
          return maximize ? v : -v;
        };
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = val(x1), f2 = val(x2);
        for (int it = 0; it < 70; ++it) {
          if (f1 > f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = val(x1);
          } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = val(x2);
          }
        }
        cuts.push_back(0.5 * (a + b));
      }
      cuts.push_back(pc.a);
      cuts.push_back(pc.b);
      std::sort(cuts.begin(), cuts.end());
      for (size_t r = 0; r + 1 < cuts.size(); ++r) {
        double ra = cuts[r], rb = cuts[r + 1];
        if (rb - ra <= 0) continue;
        Point za = fn(ra, n), zb = fn(rb, n);
        bool aIsLow = za.x < zb.x;
        double sLow = aIsLow ? ra : rb, sHigh = aIsLow ? rb : ra;
        Point zLow = aIsLow ? za : zb, zHigh = aIsLow ? zb : za;
        // Tolerance admits runs whose image endpoint lands exactly on a
        // border (the leaf endpoints are on W^s(P)-preimages, so their
        // images sit on the borders).  Leaf positions carry ~1e-8 jitter
        // from rounding amplified through the strand level, so the
        // tolerance must sit above that floor.
        const double kSideTol = 1e-6;
        bool spans = ctx.side_of(am, zLow) < kSideTol &&
                     ctx.side_of(ap, zHigh) > -kSideTol;
        if (!spans) {
          next.push_back({ra, rb});
          continue;
        }
        auto crossing = [&](const AlphaSol& al) {
          double s0 = sLow, s1 = sHigh;  // side_of increases from s0 to s1
          for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (s0 + s1);
            if (ctx.side_of(al, fn(mid, n)) < 0) s0 = mid;
            else s1 = mid;
          }
          return 0.5 * (s0 + s1);
        };
        double c1 = crossing(am), c2 = crossing(ap);
        double bl = std::min(c1, c2), bh = std::max(c1, c2);
        sys.branches.push_back(make_branch(bl, bh, n));
        ++sys.counts[n];
        if (bl - ra > 0) next.push_back({ra, bl});
        if (rb - bh > 0) next.push_back({bh, rb});
      }
    }
    active = std::move(next);
  }
  if (!active.empty()) sys.truncation_flag = true;
  std::sort(sys.branches.begin(), sys.branches.end(),
            [](const ReturnBranch& a, const ReturnBranch& b) {
              return a.s_lo < b.s_lo;
            });
  return sys;
}

// ---------------------------------------------------------------------------

BranchCensus branch_census(const InducedSystem& sys, int n0) {
  BranchCensus c;
  c.counts = sys.counts;
  c.n0 = n0;
  double g = 0;
  for (int n = std::max(n0, 1); n < static_cast<int>(sys.counts.size()); ++n)
    if (sys.counts[n] > 0)
      g = std::max(g, std::log(static_cast<double>(sys.counts[n])) / n);
  c.growth_rate = g;
  return c;
}

HyperbolicityAudit hyperbolicity_audit(InducingContext& ctx,
                                       const InducedSystem& sys,
                                       int samples_per_branch) {
  const MapParams& p = ctx.params();
  const Strand& leaf = ctx.leaf_strand();
  ensure_leaf_clip(ctx);
  HyperbolicityAudit au;
  const double ls1 = std::log(p.sigma1()), ls2 = std::log(p.sigma2());
  const double tol5 = std::log(1.0 / 0.95);
  const double tw =
      std::abs(leaf.x_at(ctx.leaf_s_hi) - leaf.x_at(ctx.leaf_s_lo));
  for (size_t bi = 0; bi < sys.branches.size(); ++bi) {
    const ReturnBranch& br = sys.branches[bi];
    HyperbolicityAudit::BranchCheck ck;
    ck.branch = static_cast<int>(bi);
    const int ns = std::max(3, samples_per_branch);
    double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
    for (int i = 0; i < ns; ++i) {
      double s = br.s_lo + (br.s_hi - br.s_lo) * i / (ns - 1);
      TangentData td = leaf.tangent_at(s);
      Point z = td.base, d = td.direction;
      double w = 0;
      for (int j = 0; j < br.tau; ++j) {
        d = jacobian(p, z) * d;
        z = apply(p, z);
        double nn = norm(d);
        w += std::log(nn);
        d = {d.x / nn, d.y / nn};
      }
      double rate = w / br.tau;
      rmin = std::min(rmin, rate);
      rmax = std::max(rmax, rate);
    }
    ck.min_rate = rmin;
    ck.max_rate = rmax;
    ck.envelope_pass =
        rmin >= ls1 - tol5 / br.tau && rmax <= ls2 + tol5 / br.tau;
    if (!ck.envelope_pass) ++au.violations;
    au.distortion_constant =
        std::max(au.distortion_constant, br.distortion / tw);
    au.checks.push_back(ck);
  }
  // stable-direction contraction: smallest singular value of Df^n along
  // branch orbits should sit below (C b)^{n/2}
  double Cmax = 0;
  const int nf = 12;
  size_t stride = std::max<size_t>(1, sys.branches.size() / 20);
  for (size_t bi = 0; bi < sys.branches.size(); bi += stride) {
    const ReturnBranch& br = sys.branches[bi];
    Point z = leaf.at(0.5 * (br.s_lo + br.s_hi));
    Mat2 M{1, 0, 0, 1};
    double lognorm = 0;
    for (int j = 0; j < nf; ++j) {
      M = jacobian(p, z) * M;
      z = apply(p, z);
      double sc = std::max({std::abs(M.m00), std::abs(M.m01),
                            std::abs(M.m10), std::abs(M.m11)});
      lognorm += std::log(sc);
      M = {M.m00 / sc, M.m01 / sc, M.m10 / sc, M.m11 / sc};
    }
    // largest singular value of the normalized product
    double a2 = M.m00 * M.m00 + M.m01 * M.m01 + M.m10 * M.m10 + M.m11 * M.m11;
    double dt = M.det();
    double smax2 = 0.5 * (a2 + std::sqrt(std::max(0.0, a2 * a2 - 4 * dt * dt)));
    double log_smax = lognorm + 0.5 * std::log(smax2);
    double log_smin = nf * std::log(p.b) - log_smax;
    Cmax = std::max(Cmax, std::exp(2.0 * log_smin / nf) / p.b);
  }
  au.stable_contraction_C = Cmax;
  au.pass = au.violations == 0 && (sys.branches.empty() || Cmax * p.b < 1.0);
  return au;
}

}  // namespace henon
