// Command-line front door: stage orchestration over the manifolds ->
// inducing -> pressure -> analysis pipeline, with flat-file configuration
// and deterministic JSON/CSV artifacts.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "henon/analysis.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace henon;

namespace {

constexpr const char* kSchemaVersion = "1.0";

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct dependency_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// configuration

struct RunConfig {
  std::string a = "auto";  // numeric literal or "auto" for a*(b)
  double b = 1e-4;
  std::string orientation = "preserving";
  double epsilon = 0.5;
  int cap_n = 10;
  int depth = 26;
  double a_lo = 1.9, a_hi = 2.1;
  double tol_a = 1e-10;
  std::vector<double> t_grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<int> cutoff_schedule = {10, 15, 20, 25};
  double bisect_tol = 1e-4;
  double study_lo = -0.4, study_hi = 0.6;  // claimed uniqueness window
  int k_max = 12;
  long orbit_length = 600000;
  double stat_t = 0.8;
  std::uint64_t seed = 42;
  int jobs = 0;  // 0 = logical cores
  std::string out = "out";
  std::string stages = "all";

  MapParams map_params(double a_resolved) const {
    MapParams p;
    p.a = a_resolved;
    p.b = b;
    p.orientation = orientation == "reversing" ? Orientation::reversing
                                               : Orientation::preserving;
    p.epsilon = epsilon;
    p.N = cap_n;
    return p;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config: key '" + key + "' has non-numeric value '" +
                       v + "'");
  }
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& v) {
  if (key == "a")
    cfg.a = v;
  else if (key == "b")
    cfg.b = parse_double(key, v);
  else if (key == "orientation")
    cfg.orientation = v;
  else if (key == "epsilon")
    cfg.epsilon = parse_double(key, v);
  else if (key == "cap_n")
    cfg.cap_n = static_cast<int>(parse_double(key, v));
  else if (key == "depth")
    cfg.depth = static_cast<int>(parse_double(key, v));
  else if (key == "a_lo")
    cfg.a_lo = parse_double(key, v);
  else if (key == "a_hi")
    cfg.a_hi = parse_double(key, v);
  else if (key == "tol_a")
    cfg.tol_a = parse_double(key, v);
  else if (key == "t_grid") {
    cfg.t_grid.clear();
    for (const std::string& t : split(v, ','))
      cfg.t_grid.push_back(parse_double(key, t));
  } else if (key == "cutoff_schedule") {
    cfg.cutoff_schedule.clear();
    for (const std::string& t : split(v, ','))
      cfg.cutoff_schedule.push_back(static_cast<int>(parse_double(key, t)));
  } else if (key == "bisect_tol")
    cfg.bisect_tol = parse_double(key, v);
  else if (key == "study_lo")
    cfg.study_lo = parse_double(key, v);
  else if (key == "study_hi")
    cfg.study_hi = parse_double(key, v);
  else if (key == "k_max")
    cfg.k_max = static_cast<int>(parse_double(key, v));
  else if (key == "orbit_length")
    cfg.orbit_length = static_cast<long>(parse_double(key, v));
  else if (key == "stat_t")
    cfg.stat_t = parse_double(key, v);
  else if (key == "seed")
    cfg.seed = static_cast<std::uint64_t>(parse_double(key, v));
  else if (key == "jobs")
    cfg.jobs = static_cast<int>(parse_double(key, v));
  else if (key == "out")
    cfg.out = v;
  else if (key == "stages")
    cfg.stages = v;
  else
    throw config_error("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(lineno) +
                         " is not key=value");
    auto trim = [](std::string s) {
      size_t i = s.find_first_not_of(" \t");
      size_t j = s.find_last_not_of(" \t");
      return i == std::string::npos ? std::string() : s.substr(i, j - i + 1);
    };
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void validate_config(const RunConfig& cfg) {
  if (cfg.a == "auto") {
    if (!(cfg.b >= 0 && cfg.b <= 0.01))
      throw config_error("config: auto-a* needs 0 <= b <= 0.01");
  } else {
    parse_double("a", cfg.a);
  }
  if (cfg.orientation != "preserving" && cfg.orientation != "reversing")
    throw config_error("config: orientation must be preserving or reversing");
  if (!(cfg.epsilon > 0 && cfg.epsilon <= 0.5))
    throw config_error("config: epsilon must lie in (0, 1/2]");
  if (cfg.cap_n < 1) throw config_error("config: cap_n must be >= 1");
  if (cfg.depth < 2) throw config_error("config: depth must be >= 2");
  if (cfg.t_grid.empty()) throw config_error("config: t_grid is empty");
  for (double t : cfg.t_grid)
    if (!(t > -1.0 && t < 7.0))
      throw config_error("config: t_grid values must lie in (-1, 7)");
  if (cfg.cutoff_schedule.empty())
    throw config_error("config: cutoff_schedule is empty");
  if (!(cfg.bisect_tol > 0))
    throw config_error("config: bisect_tol must be positive");
  if (!(cfg.study_lo < cfg.study_hi))
    throw config_error("config: study interval must have study_lo < study_hi");
  if (cfg.k_max < 1 || cfg.k_max > 20)
    throw config_error("config: k_max must lie in [1, 20]");
  if (cfg.orbit_length < 1000)
    throw config_error("config: orbit_length must be >= 1000");
}

json config_echo(const RunConfig& cfg) {
  json j;
  j["a"] = cfg.a;
  j["b"] = cfg.b;
  j["orientation"] = cfg.orientation;
  j["epsilon"] = cfg.epsilon;
  j["cap_n"] = cfg.cap_n;
  j["depth"] = cfg.depth;
  j["a_lo"] = cfg.a_lo;
  j["a_hi"] = cfg.a_hi;
  j["tol_a"] = cfg.tol_a;
  j["t_grid"] = cfg.t_grid;
  j["cutoff_schedule"] = cfg.cutoff_schedule;
  j["bisect_tol"] = cfg.bisect_tol;
  j["study_lo"] = cfg.study_lo;
  j["study_hi"] = cfg.study_hi;
  j["k_max"] = cfg.k_max;
  j["orbit_length"] = cfg.orbit_length;
  j["stat_t"] = cfg.stat_t;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["stages"] = cfg.stages;
  return j;
}

// ---------------------------------------------------------------------------
// artifact plumbing

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path, const std::string& stage) {
  std::ifstream in(path);
  if (!in)
    throw dependency_error("dependency error: missing artifact '" +
                           path.string() + "' — run stage '" + stage +
                           "' first");
  json j;
  in >> j;
  if (!j.contains("schema_version") ||
      split(j["schema_version"].get<std::string>(), '.')[0] !=
          split(kSchemaVersion, '.')[0])
    throw config_error("artifact '" + path.string() +
                       "' has incompatible schema version");
  return j;
}

json artifact_header(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_echo(cfg);
  return j;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// stages

struct Orchestrator {
  RunConfig cfg;
  fs::path out;

  // in-memory caches, so a single-process pipeline run does not redo geometry
  std::optional<double> a_star_;
  std::optional<InducedSystem> sys_;
  std::unique_ptr<InducingContext> ctx_;
  std::optional<ThetaTower> tower_;

  explicit Orchestrator(RunConfig c) : cfg(std::move(c)), out(cfg.out) {}

  fs::path stale_marker(const std::string& stage) const {
    return out / stage / ".stale";
  }
  void begin_stage(const std::string& stage) {
    write_text(stale_marker(stage), "in progress\n");
  }
  void end_stage(const std::string& stage) {
    fs::remove(stale_marker(stage));
  }
  bool cached(const std::string& stage,
              const std::vector<std::string>& files) const {
    if (fs::exists(stale_marker(stage))) return false;
    for (const std::string& f : files)
      if (!fs::exists(out / stage / f)) return false;
    return true;
  }

  double resolved_a() {
    if (a_star_) return *a_star_;
    if (cfg.a != "auto") {
      a_star_ = parse_double("a", cfg.a);
      return *a_star_;
    }
    // the cached manifolds artifact carries the resolved parameter
    fs::path pj = out / "manifolds" / "params.json";
    if (fs::exists(pj)) {
      a_star_ = read_json(pj, "manifolds")["a_resolved"].get<double>();
      return *a_star_;
    }
    MapParams tmpl = cfg.map_params(2.0);
    BifurcationResult r =
        find_first_bifurcation(tmpl, cfg.a_lo, cfg.a_hi, cfg.tol_a);
    a_star_ = r.a_star;
    return *a_star_;
  }

  InducingContext& context() {
    if (!ctx_) ctx_ = std::make_unique<InducingContext>(cfg.map_params(resolved_a()));
    return *ctx_;
  }

  const ThetaTower& tower() {
    if (!tower_) {
      InducingContext& ctx = context();
      RegionR region = build_region(
          ctx, grow_unstable(cfg.map_params(resolved_a()), ctx.saddleQ(), 4.0, 1e-6),
          grow_stable(cfg.map_params(resolved_a()), ctx.saddleP(), 1.0, 1e-6),
          grow_stable(cfg.map_params(resolved_a()), ctx.saddleQ(), 1.0, 1e-6));
      (void)region;
      AlphaFamily fam = build_alpha(
          ctx, RegionR{{}, {}, {}, {}, Rect{-2, 2, -1, 1}, 0}, 25);
      tower_ = build_theta(ctx, fam, 1);
    }
    return *tower_;
  }

  const InducedSystem& system() {
    if (!sys_) {
      fs::path sj = out / "inducing" / "system.json";
      if (fs::exists(sj) && !fs::exists(stale_marker("inducing"))) {
        sys_ = system_from_json(read_json(sj, "inducing"));
      } else {
        sys_ = first_return_branches(context(), tower(), cfg.depth);
      }
    }
    return *sys_;
  }

  // ---- find-astar -------------------------------------------------------

  void run_find_astar() {
    MapParams tmpl = cfg.map_params(2.0);
    BifurcationResult r =
        find_first_bifurcation(tmpl, cfg.a_lo, cfg.a_hi, cfg.tol_a);
    a_star_ = r.a_star;
    json j = artifact_header(cfg);
    j["a_star"] = r.a_star;
    j["iterations"] = r.iterations;
    j["tangency"] = {{"x", r.report.location.x},
                     {"y", r.report.location.y},
                     {"gap", r.report.gap},
                     {"misalignment", r.report.misalignment},
                     {"side", r.report.side}};
    write_json(out / "a_star.json", j);
    std::printf("a_star = %.12f (%d iterations)\n", r.a_star, r.iterations);
  }

  // ---- manifolds --------------------------------------------------------

  void run_manifolds() {
    const std::vector<std::string> files = {"params.json", "tangency.json",
                                            "wu_Q.csv", "ws_P.csv", "ws_Q.csv"};
    if (cached("manifolds", files)) {
      std::printf("manifolds: cached\n");
      return;
    }
    begin_stage("manifolds");
    double a = resolved_a();
    MapParams p = cfg.map_params(a);
    auto [P, Q] = fixed_saddles(p);
    Curve wu = grow_unstable(p, Q, 4.0, 1e-6);
    Curve wsP = grow_stable(p, P, 1.0, 1e-6);
    Curve wsQ = grow_stable(p, Q, 1.0, 1e-6);
    write_text(out / "manifolds" / "wu_Q.csv", curve_to_csv(wu));
    write_text(out / "manifolds" / "ws_P.csv", curve_to_csv(wsP));
    write_text(out / "manifolds" / "ws_Q.csv", curve_to_csv(wsQ));

    json pj = artifact_header(cfg);
    pj["a_resolved"] = a;
    pj["saddles"] = {
        {"P", {{"x", P.location.x}, {"y", P.location.y}, {"lambda_u", P.lambda_u}}},
        {"Q", {{"x", Q.location.x}, {"y", Q.location.y}, {"lambda_u", Q.lambda_u}}}};
    write_json(out / "manifolds" / "params.json", pj);

    json tj = artifact_header(cfg);
    if (p.b > 0) {
      TangencyReport rep;
      double gap = tangency_gap(p, a, &rep);
      QuadraticFit qf = quadratic_tangency_fit(p, a);
      tj["gap"] = gap;
      tj["location"] = {{"x", rep.location.x}, {"y", rep.location.y}};
      tj["misalignment"] = rep.misalignment;
      tj["quadratic_fit"] = {{"alpha", qf.alpha},
                             {"beta", qf.beta},
                             {"x_c", qf.x_c},
                             {"rel_residual", qf.rel_residual}};
      C2bReport cb = c2b_check(wu, p.b);
      tj["c2b"] = {{"max_slope", cb.max_slope},
                   {"max_curvature", cb.max_curvature},
                   {"pass", cb.pass}};
    } else {
      tj["gap"] = 0.0;
      tj["note"] = "one-dimensional limit: tangency degenerates to the "
                   "critical orbit";
    }
    write_json(out / "manifolds" / "tangency.json", tj);
    end_stage("manifolds");
    std::printf("manifolds: done (a = %.12f)\n", a);
  }

  // ---- inducing ---------------------------------------------------------

  static json branch_to_json(const ReturnBranch& b) {
    json j;
    j["tau"] = b.tau;
    j["s_lo"] = b.s_lo;
    j["s_hi"] = b.s_hi;
    j["a_lo"] = b.a_lo;
    j["a_hi"] = b.a_hi;
    j["image_tag"] = b.image_tag;
    j["min_deriv"] = b.min_deriv;
    j["max_deriv"] = b.max_deriv;
    j["distortion"] = b.distortion;
    j["weight"] = b.weight;
    j["length"] = b.length;
    j["boundary_flag"] = b.boundary_flag;
    return j;
  }

  static InducedSystem system_from_json(const json& j) {
    InducedSystem sys;
    for (const json& bj : j["branches"]) {
      ReturnBranch b;
      b.tau = bj["tau"].get<int>();
      b.s_lo = bj["s_lo"].get<double>();
      b.s_hi = bj["s_hi"].get<double>();
      b.a_lo = bj["a_lo"].get<double>();
      b.a_hi = bj["a_hi"].get<double>();
      b.image_tag = bj["image_tag"].get<std::string>();
      b.min_deriv = bj["min_deriv"].get<double>();
      b.max_deriv = bj["max_deriv"].get<double>();
      b.distortion = bj["distortion"].get<double>();
      b.weight = bj["weight"].get<double>();
      b.length = bj["length"].get<double>();
      b.boundary_flag = bj["boundary_flag"].get<bool>();
      sys.branches.push_back(std::move(b));
    }
    sys.counts = j["counts"].get<std::vector<int>>();
    sys.depth = j["depth"].get<int>();
    sys.truncation_flag = j["truncation_flag"].get<bool>();
    sys.resolution_flag = j["resolution_flag"].get<bool>();
    sys.a_star = j["a_star"].get<double>();
    sys.params.a = j["params"]["a"].get<double>();
    sys.params.b = j["params"]["b"].get<double>();
    sys.params.orientation =
        j["params"]["orientation"].get<std::string>() == "reversing"
            ? Orientation::reversing
            : Orientation::preserving;
    sys.params.epsilon = j["params"]["epsilon"].get<double>();
    sys.params.N = j["params"]["cap_n"].get<int>();
    return sys;
  }

  void run_inducing() {
    if (cached("inducing", {"system.json"})) {
      std::printf("inducing: cached\n");
      return;
    }
    read_json(out / "manifolds" / "params.json", "manifolds");
    begin_stage("inducing");
    const InducedSystem& sys = system();
    BranchCensus census = branch_census(sys);
    HyperbolicityAudit audit = hyperbolicity_audit(context(), sys, 9);

    json j = artifact_header(cfg);
    j["a_star"] = sys.a_star;
    j["params"] = {{"a", sys.params.a},
                   {"b", sys.params.b},
                   {"orientation", sys.params.orientation == Orientation::reversing
                                       ? "reversing"
                                       : "preserving"},
                   {"epsilon", sys.params.epsilon},
                   {"cap_n", sys.params.N}};
    j["depth"] = sys.depth;
    j["truncation_flag"] = sys.truncation_flag;
    j["resolution_flag"] = sys.resolution_flag;
    j["counts"] = sys.counts;
    j["growth_rate"] = census.growth_rate;
    json bj = json::array();
    for (const ReturnBranch& b : sys.branches) bj.push_back(branch_to_json(b));
    j["branches"] = std::move(bj);
    j["audit"] = {{"violations", audit.violations},
                  {"distortion_constant", audit.distortion_constant},
                  {"stable_contraction_C", audit.stable_contraction_C},
                  {"pass", audit.pass}};
    write_json(out / "inducing" / "system.json", j);
    end_stage("inducing");
    std::printf("inducing: %zu branches to depth %d (audit %s)\n",
                sys.branches.size(), sys.depth, audit.pass ? "pass" : "FAIL");
  }

  // ---- pressure ---------------------------------------------------------

  void run_pressure() {
    if (cached("pressure", {"pressure_curve.csv", "pressure_curve.json"})) {
      std::printf("pressure: cached\n");
      return;
    }
    read_json(out / "inducing" / "system.json", "inducing");
    begin_stage("pressure");
    const InducedSystem& sys = system();
    PressureCurve pc =
        pressure_curve(sys, cfg.t_grid, cfg.cutoff_schedule, cfg.bisect_tol);

    std::string csv = "t,P,residual\n";
    for (size_t i = 0; i < pc.ts.size(); ++i)
      csv += fmt17(pc.ts[i]) + "," + fmt17(pc.Ps[i]) + "," +
             fmt17(pc.residuals[i]) + "\n";
    write_text(out / "pressure" / "pressure_curve.csv", csv);

    json j = artifact_header(cfg);
    j["t"] = pc.ts;
    j["P"] = pc.Ps;
    j["residual"] = pc.residuals;
    j["t_u"] = pc.t_u;
    j["t_u_residual"] = pc.t_u_residual;
    j["lambda_u"] = pc.lambda_u_at_root;
    j["t_minus"] = pc.t_minus;
    j["t_plus"] = pc.t_plus;
    j["cutoffs"] = pc.cutoffs;
    write_json(out / "pressure" / "pressure_curve.json", j);
    end_stage("pressure");
    std::printf("pressure: t_u = %.6f, lambda_u = %.6f, interval (%.4f, %.4f)\n",
                pc.t_u, pc.lambda_u_at_root, pc.t_minus, pc.t_plus);
  }

  // ---- dimension --------------------------------------------------------

  void run_dimension() {
    if (cached("analysis", {"dimension.json", "boxdim.csv"})) {
      std::printf("dimension: cached\n");
      return;
    }
    json pj = read_json(out / "pressure" / "pressure_curve.json", "pressure");
    begin_stage("analysis");
    double t_u = pj["t_u"].get<double>();

    CantorLadder lad = ek_ladder(context(), tower(), cfg.k_max);
    SliceSample slice = slice_from_ladder(lad, cfg.k_max, 1e-6);
    std::vector<double> scales;
    for (double d = 3e-2; d > 2e-5; d *= 0.7) scales.push_back(d);
    BoxDimFit fit = box_dimension(slice, scales);

    std::string csv = "log_inv_delta,log_count\n";
    for (size_t i = 0; i < fit.scales.size(); ++i)
      csv += fmt17(std::log(1.0 / fit.scales[i])) + "," +
             fmt17(std::log(static_cast<double>(fit.counts[i]))) + "\n";
    write_text(out / "analysis" / "boxdim.csv", csv);

    json j = artifact_header(cfg);
    j["t_u"] = t_u;
    j["box_dimension"] = fit.dimension;
    j["fit_r2"] = fit.r2;
    j["abs_difference"] = std::abs(fit.dimension - t_u);
    j["ladder"] = {{"k_max", cfg.k_max},
                   {"components", lad.levels.back().size()},
                   {"diam_theta0", lad.diam_theta0},
                   {"C_lower", lad.C_lower},
                   {"C_upper", lad.C_upper},
                   {"removal_C", lad.removal_C},
                   {"rho", lad.rho},
                   {"lower_bound", lad.lower_bound}};
    write_json(out / "analysis" / "dimension.json", j);
    std::printf("dimension: box %.4f vs t_u %.4f (|diff| %.4f)\n",
                fit.dimension, t_u, std::abs(fit.dimension - t_u));
  }

  // ---- stats ------------------------------------------------------------

  void run_stats() {
    if (cached("analysis", {"stats.json", "acf.csv"})) {
      std::printf("stats: cached\n");
      return;
    }
    read_json(out / "inducing" / "system.json", "inducing");
    begin_stage("analysis");
    const InducedSystem& sys = system();
    TruncatedShift shift =
        truncate_shift(sys, cfg.stat_t, cfg.cutoff_schedule.back());
    double c = solve_pressure_shift(shift);
    for (size_t i = 0; i < shift.pot.base.size(); ++i)
      shift.pot.base[i] -= c * shift.pot.tau[i];
    GibbsResult g = gibbs_truncated(shift);
    std::vector<Point> orbit = sample_gibbs_orbit(context(), sys, shift, g,
                                                  cfg.orbit_length, cfg.seed);

    std::vector<int> lags;
    for (int l = 1; l <= 30; ++l) lags.push_back(l);
    AcfReport acf = correlation_decay(observable_x(orbit), lags);
    CltReport clt = clt_test(observable_x(orbit), 1024,
                             static_cast<int>(cfg.orbit_length / 1200));
    std::vector<double> cb = observable_coboundary_x(orbit);
    std::vector<double> cob_sigma;
    for (int nb : {256, 1024, 4096}) cob_sigma.push_back(clt_test(cb, nb, 100).sigma);

    MapParams p1d = cfg.map_params(2.0);
    p1d.b = 0.0;
    LyapunovEstimate lyap = lyapunov_u(p1d, Point{0.3, 0.0}, 200000, 100);

    std::string csv = "lag,acf\n";
    for (size_t i = 0; i < acf.lags.size(); ++i)
      csv += std::to_string(acf.lags[i]) + "," + fmt17(acf.acf[i]) + "\n";
    write_text(out / "analysis" / "acf.csv", csv);

    json j = artifact_header(cfg);
    j["t"] = cfg.stat_t;
    j["orbit_length"] = cfg.orbit_length;
    j["acf_fit"] = {{"rate", acf.rate}, {"amp", acf.amp}, {"r2", acf.r2}};
    j["clt"] = {{"n_block", clt.n_block},
                {"n_samples", clt.n_samples},
                {"ks_stat", clt.ks_stat},
                {"p_value", clt.p_value},
                {"sigma", clt.sigma}};
    j["coboundary_sigma"] = cob_sigma;
    j["lyapunov_1d"] = {{"lambda", lyap.lambda}, {"error_bar", lyap.error_bar}};
    write_json(out / "analysis" / "stats.json", j);
    std::printf("stats: CLT p = %.4f, sigma = %.4f; ACF rate = %.4f\n",
                clt.p_value, clt.sigma, acf.rate);
  }

  void finish_analysis() {
    // the analysis directory is shared by dimension and stats; clear the
    // stale marker once both requested sub-stages have landed
    end_stage("analysis");
  }

  // ---- report -----------------------------------------------------------

  void run_report() {
    json mp = read_json(out / "manifolds" / "params.json", "manifolds");
    json tp = read_json(out / "manifolds" / "tangency.json", "manifolds");
    json ip = read_json(out / "inducing" / "system.json", "inducing");
    json pp = read_json(out / "pressure" / "pressure_curve.json", "pressure");
    json dp = read_json(out / "analysis" / "dimension.json", "dimension");
    json sp = read_json(out / "analysis" / "stats.json", "stats");

    json checks = json::array();
    auto add = [&](const std::string& name, bool pass, json measured) {
      checks.push_back(
          {{"name", name}, {"pass", pass}, {"measured", std::move(measured)}});
    };

    double a = mp["a_resolved"].get<double>();
    add("bifurcation_anchor", std::abs(a - 2.0) < 0.1, {{"a_star", a}});
    if (tp.contains("quadratic_fit")) {
      double alpha = tp["quadratic_fit"]["alpha"].get<double>();
      double rr = tp["quadratic_fit"]["rel_residual"].get<double>();
      add("quadratic_tangency", std::abs(alpha) < 1e-6 && rr < 0.05,
          {{"alpha", alpha}, {"rel_residual", rr}});
    }

    std::vector<double> ts = pp["t"].get<std::vector<double>>();
    std::vector<double> Ps = pp["P"].get<std::vector<double>>();
    double P0 = 0, P1 = 1;
    bool have0 = false, have1 = false;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (std::abs(ts[i]) < 1e-12) { P0 = Ps[i]; have0 = true; }
      if (std::abs(ts[i] - 1.0) < 1e-12) { P1 = Ps[i]; have1 = true; }
    }
    bool convex = true;
    for (size_t i = 0; i + 2 < Ps.size(); ++i)
      if (Ps[i] - 2 * Ps[i + 1] + Ps[i + 2] < -1e-8) convex = false;
    add("pressure_anchors",
        have0 && have1 && std::abs(P0 - std::log(2.0)) < 0.05 * std::log(2.0) &&
            P1 < 0 && convex,
        {{"P0", P0}, {"P1", P1}, {"convex", convex}});

    double t_u = pp["t_u"].get<double>();
    double bd = dp["box_dimension"].get<double>();
    add("dimension_root",
        t_u > std::log(2.0) / std::log(5.0) && t_u < 1.0 &&
            std::abs(bd - t_u) < 0.05,
        {{"t_u", t_u}, {"box_dimension", bd}});

    double tm = pp["t_minus"].get<double>(), tpl = pp["t_plus"].get<double>();
    bool inside = cfg.study_lo > tm && cfg.study_hi < tpl;
    add("study_interval", inside,
        {{"study_lo", cfg.study_lo},
         {"study_hi", cfg.study_hi},
         {"t_minus", tm},
         {"t_plus", tpl}});

    add("inducing_audit",
        ip["audit"]["pass"].get<bool>() &&
            ip["growth_rate"].get<double>() <=
                ip["params"]["epsilon"].get<double>(),
        {{"violations", ip["audit"]["violations"]},
         {"growth_rate", ip["growth_rate"]}});

    add("ek_ladder",
        dp["ladder"]["lower_bound"].get<double>() < bd + 0.05,
        {{"lower_bound", dp["ladder"]["lower_bound"]}, {"box_dimension", bd}});

    double ly = sp["lyapunov_1d"]["lambda"].get<double>();
    add("lyapunov_anchor", std::abs(ly - std::log(2.0)) < 0.01,
        {{"lambda_1d", ly}});

    std::vector<double> cs = sp["coboundary_sigma"].get<std::vector<double>>();
    bool shrinking = cs.size() >= 2;
    for (size_t i = 0; i + 1 < cs.size(); ++i)
      shrinking = shrinking && cs[i + 1] < cs[i];
    add("statistics",
        sp["clt"]["p_value"].get<double>() > 0.01 &&
            sp["acf_fit"]["rate"].get<double>() < 1.0 && shrinking,
        {{"clt_p", sp["clt"]["p_value"]},
         {"acf_rate", sp["acf_fit"]["rate"]},
         {"coboundary_sigma", cs}});

    bool overall = true;
    for (const json& c : checks) overall = overall && c["pass"].get<bool>();
    json j = artifact_header(cfg);
    j["checks"] = std::move(checks);
    j["overall_pass"] = overall;
    write_json(out / "report.json", j);
    std::printf("report: %s\n", overall ? "overall pass" : "FAIL");
    if (!overall) {
      for (const json& c : j["checks"])
        if (!c["pass"].get<bool>())
          std::printf("  failed: %s\n", c["name"].get<std::string>().c_str());
    }
  }

  // ---- pipeline ---------------------------------------------------------

  void run_pipeline() {
    std::vector<std::string> order = {"manifolds", "inducing", "pressure",
                                      "dimension", "stats"};
    std::set<std::string> wanted;
    if (cfg.stages == "all") {
      wanted.insert(order.begin(), order.end());
    } else {
      for (const std::string& s : split(cfg.stages, ',')) {
        if (std::find(order.begin(), order.end(), s) == order.end())
          throw config_error("config: unknown stage '" + s + "'");
        wanted.insert(s);
      }
    }
    for (const std::string& s : order) {
      if (!wanted.count(s)) continue;
      try {
        if (s == "manifolds") run_manifolds();
        else if (s == "inducing") run_inducing();
        else if (s == "pressure") run_pressure();
        else if (s == "dimension") run_dimension();
        else if (s == "stats") run_stats();
      } catch (const dependency_error&) {
        throw;
      } catch (const config_error&) {
        throw;
      } catch (const std::exception& e) {
        throw std::runtime_error("stage '" + s + "' failed: " + e.what());
      }
    }
    if (wanted.count("dimension") || wanted.count("stats")) finish_analysis();
  }
};

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamic formalism for the Henon map at the first "
               "bifurcation: pipeline driver"};
  app.require_subcommand(1);

  std::string config_path, b_flag, eps_flag, seed_flag, jobs_flag, out_flag,
      stages_flag;
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option("--b", b_flag, "override: map parameter b");
  app.add_option("--epsilon", eps_flag, "override: proximity scale epsilon");
  app.add_option("--seed", seed_flag, "override: RNG seed");
  app.add_option("--jobs", jobs_flag, "override: worker pool size");
  app.add_option("--out", out_flag, "override: output directory");
  app.add_option("--stages", stages_flag, "override: comma list of stages");

  const char* subnames[] = {"find-astar", "manifolds", "inducing", "pressure",
                            "dimension",  "stats",     "report",   "pipeline"};
  const char* subdesc[] = {
      "locate the first-bifurcation parameter a*(b)",
      "grow invariant manifolds and the tangency report",
      "enumerate first-return branches over the tangency region",
      "pressure curve, root t^u, and the uniqueness interval",
      "E_k ladder and box dimension against t^u",
      "Gibbs-orbit correlation decay and the central limit theorem",
      "aggregate artifact checks into report.json",
      "run the selected stages in dependency order"};
  for (int i = 0; i < 8; ++i)
    app.add_subcommand(subnames[i], subdesc[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    if (!b_flag.empty()) apply_key(cfg, "b", b_flag);
    if (!eps_flag.empty()) apply_key(cfg, "epsilon", eps_flag);
    if (!seed_flag.empty()) apply_key(cfg, "seed", seed_flag);
    if (!jobs_flag.empty()) apply_key(cfg, "jobs", jobs_flag);
    if (!out_flag.empty()) apply_key(cfg, "out", out_flag);
    if (!stages_flag.empty()) apply_key(cfg, "stages", stages_flag);
    validate_config(cfg);
    if (cfg.jobs == 0)
      cfg.jobs = static_cast<int>(std::thread::hardware_concurrency());

    Orchestrator orch(cfg);
    std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "find-astar") orch.run_find_astar();
    else if (sub == "manifolds") orch.run_manifolds();
    else if (sub == "inducing") { orch.run_inducing(); }
    else if (sub == "pressure") orch.run_pressure();
    else if (sub == "dimension") { orch.run_dimension(); orch.finish_analysis(); }
    else if (sub == "stats") { orch.run_stats(); orch.finish_analysis(); }
    else if (sub == "report") orch.run_report();
    else if (sub == "pipeline") orch.run_pipeline();
    return 0;
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const dependency_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const invalid_input& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const bracket_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const not_found_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const refinement_needed& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const iteration_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const escape_error& e) {
    std::fprintf(stderr, "error: %s (step %d)\n", e.what(), e.step);
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
