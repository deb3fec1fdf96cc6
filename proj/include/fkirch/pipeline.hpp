#pragma once
// Batch pipeline: construct -> verify -> kernel -> sectors -> reconcile, each stage
// recording named checks with measured values; the convergence study on top.
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "config.hpp"
#include "kirchhoff.hpp"
#include "linearization.hpp"
#include "report.hpp"
#include "sectors.hpp"

namespace fkirch {

enum class Status { pass, fail, inconclusive };

inline const char* to_string(Status s) {
  return s == Status::pass ? "PASS" : s == Status::fail ? "FAIL" : "INCONCLUSIVE";
}

struct Check {
  std::string stage, name;
  double value = 0, threshold = 0;
  std::string relation;  // how value must compare with threshold
  Status status = Status::pass;
  std::string note;

  std::string line() const {
    std::string s = std::string(to_string(status)) + " " + stage + "." + name + ": measured " + fmt(value) +
                    ", required " + relation + " " + fmt(threshold);
    if (!note.empty()) s += " (" + note + ")";
    return s;
  }
};

// Exit-code contract: 0 all checks pass, 2 any failure, 3 inconclusive spectral gap otherwise.
enum ExitCode { exit_ok = 0, exit_usage = 1, exit_failed = 2, exit_inconclusive = 3 };

struct RunResult {
  RunConfig cfg;
  std::vector<Check> checks;
  std::vector<std::string> errors;  // stage aborted by a numerical failure

  // construct
  std::optional<GroundState> gs;
  double oracle_E0 = NAN;
  RootScan root_scan;
  // verify
  std::optional<Inversion> inversion;
  std::optional<IdentityReport> identities;
  std::optional<TestFieldPohozaev> test_field;
  std::optional<RadialPohozaev> radial_poh, radial_poh_coarse;
  double pohozaev_U = NAN;
  std::string pohozaev_U_source;
  // kernel
  std::optional<SpectrumReport> full;
  BoxGrid kernel_grid;
  std::vector<double> candidate_res;
  double kernel_c = NAN;
  // sectors
  std::optional<RadialGroundState> radial;
  std::vector<SectorReport> sectors;
  std::vector<ConfinementCheck> confinement;
  BoxGrid confinement_grid;
  // reconcile
  std::optional<Reconciliation> reconciliation;

  int exit_code() const {
    bool fail = !errors.empty(), inc = false;
    for (auto& c : checks) {
      fail |= c.status == Status::fail;
      inc |= c.status == Status::inconclusive;
    }
    return fail ? exit_failed : inc ? exit_inconclusive : exit_ok;
  }
};

namespace detail {

inline Check make_check(const std::string& stage, const std::string& name, double value, const std::string& rel,
                        double thr, const std::string& note = {}) {
  Check c{stage, name, value, thr, rel, Status::pass, note};
  bool ok = rel == "<"    ? value < thr
            : rel == "<=" ? value <= thr
            : rel == ">"  ? value > thr
            : rel == ">=" ? value >= thr
            : rel == "==" ? value == thr
                          : false;
  c.status = ok ? Status::pass : Status::fail;
  return c;
}

// Plain bisection on f alone, independent of the Newton solver: bracket width 1e-14 relative.
inline double bisect_E0(const ProblemParams& p, double kappa) {
  RootFunction rf{p.a, p.b, kappa, (p.N - 2 * p.s) / (2 * p.s)};
  if (p.b == 0) return p.a;
  double lo = p.a, hi = 2 * p.a;
  while (rf.f(hi) <= 0) lo = hi, hi *= 2;
  while (hi - lo > 1e-14 * hi) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (rf.f(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// ---- stages ----------------------------------------------------------------------------

inline void stage_construct(RunResult& R) {
  using detail::make_check;
  const auto& c = R.cfg;
  auto g = make_box_grid(c.params.N, c.box.L, c.box.m);
  R.gs = build_ground_state(c.params, g, ZeroMode::free_space, c.min_points_per_mu);
  auto& gs = *R.gs;
  const auto& cert = gs.cert;
  R.oracle_E0 = detail::bisect_E0(c.params, cert.kappa);
  const std::string S = "construct";
  R.checks.push_back(make_check(S, "root_vs_bisection", std::abs(cert.E0 - R.oracle_E0) / R.oracle_E0, "<=",
                                c.tol.root));
  if (c.params.b > 0) {
    R.root_scan = scan_root_function(c.params, cert.kappa, cert.theta, 1e6 * cert.E0);
    R.checks.push_back(make_check(S, "f_at_a", cert.f_at_a, "<", 0));
    R.checks.push_back(make_check(S, "convex_samples", cert.convex_at_samples && R.root_scan.convex_everywhere ? 1 : 0,
                                  "==", 1, "f'' > 0 at all sampled points"));
    R.checks.push_back(make_check(S, "sign_changes", R.root_scan.sign_changes, "==", 1, "on (a, 1e6 E0]"));
  } else {
    R.checks.push_back(make_check(S, "E0_equals_a", std::abs(cert.E0 - c.params.a), "==", 0, "b = 0"));
  }
  R.checks.push_back(make_check(S, "kirchhoff_residual", gs.residual, "<", c.tol.residual));
  R.checks.push_back(make_check(S, "self_consistency", cert.consistency_gap, "<", c.tol.consistency,
                                "|E0 - a - b |U|^2| / E0"));
}

inline void stage_verify(RunResult& R) {
  using detail::make_check;
  const auto& c = R.cfg;
  const auto& gs = *R.gs;
  const int N = c.params.N;
  const std::string S = "verify";

  R.inversion = invert_ground_state(c.params, gs.grid, gs.U);
  R.checks.push_back(make_check(S, "inversion_E0", std::abs(R.inversion->E0 - gs.cert.E0) / gs.cert.E0, "<",
                                c.tol.consistency));
  R.checks.push_back(make_check(S, "inversion_fit", R.inversion->fit_residual, "<", 1e-2, "bubble shape of U"));

  auto kc = kernel_candidates(gs.grid, gs.Q, gs.lambda());
  R.identities = verify_linearization_identities(c.params, gs.grid, gs.U, kc, ZeroMode::free_space, unsigned(c.seed));
  R.checks.push_back(make_check(S, "self_adjointness", R.identities->self_adjoint_gap, "<", 1e-10));
  R.checks.push_back(make_check(S, "multiplier_margin", R.identities->multiplier_margin, ">", 0,
                                "sigma fixed point is a contraction"));

  // mean-zero localized test field: both sides in closed form and on the box
  const double Lt = N == 3 ? 15 : 30;
  const int mt = N == 1 ? 1024 : N == 2 ? 256 : 64;
  R.test_field = pohozaev_test_field(make_box_grid(N, Lt, mt), c.params.s);
  R.checks.push_back(make_check(S, "pohozaev_test_field", R.test_field->gap, "<", 1e-6));

  // Pohozaev for U is tail-limited: N >= 2 on the stretched radial grid, N = 1 on the box.
  auto radial_at = [&](double Rmax) {
    auto rg = radial_ground_state(c.params, make_radial_grid(N, c.radial.M, Rmax, c.radial.stretch, c.radial.exponent));
    return radial_pohozaev(rg, c.radial.bc);
  };
  R.radial_poh_coarse = radial_at(c.pohozaev_R_max / 10);
  R.radial_poh = radial_at(c.pohozaev_R_max);
  if (N >= 2) {
    R.pohozaev_U = R.radial_poh->gap;
    R.pohozaev_U_source = "radial";
  } else {
    R.pohozaev_U = R.identities->pohozaev_gap;
    R.pohozaev_U_source = "box";
  }
  R.checks.push_back(make_check(S, "pohozaev_U", R.pohozaev_U, "<", c.tol.pohozaev, R.pohozaev_U_source + " grid"));
  R.checks.push_back(make_check(S, "pohozaev_U_refinement", R.radial_poh->gap, "<", R.radial_poh_coarse->gap,
                                "radial R_max x10"));
}

inline void stage_kernel(RunResult& R) {
  using detail::make_check;
  const auto& c = R.cfg;
  const int N = c.params.N;
  const std::string S = "kernel";
  R.kernel_grid = make_box_grid(N, c.kernel.L, c.kernel.m);
  GroundState gk = R.gs && R.gs->grid.L == c.kernel.L && R.gs->grid.m == c.kernel.m
                       ? *R.gs
                       : build_ground_state(c.params, R.kernel_grid, ZeroMode::free_space, c.min_points_per_mu);
  auto Lp = assemble_L_plus(c.params, gk.U, R.kernel_grid, ZeroMode::free_space, c.mutation);
  R.kernel_c = Lp.c();
  auto kc = kernel_candidates(R.kernel_grid, gk.Q, gk.lambda());
  R.candidate_res = candidate_residuals(Lp, kc);
  NearKernelOptions opt;
  opt.tol_gap = c.tol.gap;
  opt.seed = unsigned(c.seed);
  R.full = near_kernel(Lp, kc, opt);
  const auto& f = *R.full;
  auto dim = make_check(S, "dimension", f.kernel_dim, "==", N + 1);
  auto cor = make_check(S, "correlation", f.kernel_dim > 0 ? f.min_correlation : 0, ">", c.tol.correlation);
  auto sep = make_check(S, "separation", f.cluster_max > 0 ? f.next_abs / f.cluster_max : INFINITY, ">=", 10,
                        "next |lambda| over cluster max");
  // the cluster threshold itself must sit a factor 10 below the rest of the spectrum
  auto margin = make_check(S, "gap_margin", f.next_abs / (f.tol_gap * f.scale), ">=", 10, "next |lambda| over tol_gap");
  if (!f.conclusive) {
    margin.status = Status::inconclusive;
    for (Check* ch : {&dim, &cor, &sep}) {
      ch->status = Status::inconclusive;
      ch->note = "spectral gap below 10 tol_gap";
    }
  }
  R.checks.push_back(dim);
  R.checks.push_back(cor);
  R.checks.push_back(sep);
  R.checks.push_back(margin);
}

inline void stage_sectors(RunResult& R) {
  using detail::make_check;
  const auto& c = R.cfg;
  const int N = c.params.N;
  const std::string S = "sectors";
  R.radial = radial_ground_state(c.params, make_radial_grid(N, c.radial.M, c.radial.R_max, c.radial.stretch,
                                                            c.radial.exponent));
  SectorScanOptions opt;
  opt.l_max = c.l_max;
  opt.count = c.sector_count;
  opt.tol_gap = c.tol.gap;
  opt.bc = c.radial.bc;
  opt.mutation = c.mutation;
  opt.seed = unsigned(c.seed);
  R.sectors = scan_sectors(*R.radial, opt);
  const double tol = c.tol.gap;  // pencil values carry scale 1

  const auto& s1 = R.sectors[1];
  auto zero = make_check(S, "l1_lowest_abs", std::abs(s1.spectrum.eigenvalues.front()), "<", tol);
  auto corr = make_check(S, "l1_correlation", s1.correlation, ">", c.tol.correlation, "against -U'");
  if (!s1.spectrum.conclusive) zero.status = corr.status = Status::inconclusive, zero.note = "spectral gap below 10 tol_gap";
  R.checks.push_back(zero);
  R.checks.push_back(corr);
  double prev = -INFINITY;
  for (auto& s : R.sectors) {
    std::string l = "l" + std::to_string(s.l);
    double lo = s.spectrum.eigenvalues.front();
    if (s.l >= 2) R.checks.push_back(make_check(S, l + "_lowest", lo, ">", 0, "margin " + fmt(lo)));
    R.checks.push_back(make_check(S, l + "_sign_defect", s.sign_defect, "<=", 1e-6, "Perron property"));
    R.checks.push_back(make_check(S, l + "_simplicity_gap", s.simplicity_gap, ">", tol));
    if (s.l >= 1) {
      R.checks.push_back(make_check(S, l + "_monotone", lo, ">=", prev - tol, "lowest eigenvalue nondecreasing in l"));
      prev = lo;
    }
  }

  // rank-one confinement on a box in units of lambda
  if (N <= 2) {
    const double lam = R.radial->lambda;
    R.confinement_grid = N == 1 ? make_box_grid(1, 62 * lam, 2048) : make_box_grid(2, 15 * lam, 128);
    auto U = sample_bubble(R.confinement_grid, R.radial->Q, lam);
    R.confinement = rank_one_confinement(R.confinement_grid, c.params.s, U, c.l_max, unsigned(c.seed), 5);
    for (auto& cc : R.confinement)
      R.checks.push_back(make_check(S, "confinement_l" + std::to_string(cc.l), cc.max_relative, "<",
                                    c.tol.confinement, std::to_string(cc.samples) + " samples"));
  }
}

inline void stage_reconcile(RunResult& R) {
  const auto& c = R.cfg;
  const int N = c.params.N;
  double pred = predicted_u_mode(N, c.params.s, c.params.a, R.kernel_c);
  R.reconciliation = reconcile_sectors(*R.full, R.sectors, N, pred, c.tol.sector);
  const auto& r = *R.reconciliation;
  Check ch = detail::make_check("reconcile", "mismatches", double(r.mismatches.size()), "==", 0,
                                r.consistent() ? "" : r.mismatches.front());
  bool inconclusive = !R.full->conclusive;
  for (auto& s : R.sectors) inconclusive |= s.l <= 1 && !s.spectrum.conclusive;
  if (inconclusive && ch.status == Status::fail) {
    ch.status = Status::inconclusive;
    ch.note = "zero counts rest on an inconclusive gap; " + ch.note;
  }
  R.checks.push_back(ch);
}

// ---- report files --------------------------------------------------------------------------

inline void write_run_reports(const RunResult& R, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + dir + "': " + ec.message());
  const auto& c = R.cfg;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  {
    KeyValueReport k;
    k.add("N", c.params.N);
    k.add("s", c.params.s);
    k.add("a", c.params.a);
    k.add("b", c.params.b);
    if (R.gs) {
      const auto& ct = R.gs->cert;
      k.add("E0", ct.E0);
      k.add("E0_bisection", R.oracle_E0);
      k.add("E0_relative_difference", std::abs(ct.E0 - R.oracle_E0) / R.oracle_E0);
      k.add("kappa", ct.kappa);
      k.add("kappa_closed_form", R.gs->kappa_closed_form);
      k.add("theta", ct.theta);
      k.add("lambda", R.gs->lambda());
      k.add("f_residual", ct.f_residual);
      k.add("df_at_root", ct.df_at_root);
      k.add("bracket", fmt_list({ct.bracket_lo, ct.bracket_hi}));
      k.add("f_at_a", ct.f_at_a);
      k.add("convex_at_samples", ct.convex_at_samples);
      k.add("sign_changes", R.root_scan.sign_changes);
      k.add("newton_iterations", ct.iterations);
      k.add("consistency_gap", ct.consistency_gap);
      k.add("seminorm_sq_U", R.gs->semi_U);
      k.add("bubble_constant", R.gs->calibration.C);
      k.add("bubble_constant_closed_form", bubble_constant_exact(c.params.N, c.params.s));
      k.add("calibration_residual", R.gs->calibration.residual);
      k.add("fixed_point_iterations", R.gs->fixed_point_iterations);
      k.add("grid", R.gs->grid.id());
    }
    write_report(path("certificate.txt"), k.body());
  }
  {
    CsvReport t({"stage", "check", "value", "relation", "threshold", "status", "note"});
    for (auto& ch : R.checks) {
      std::string note = ch.note;
      for (char& x : note)
        if (x == ',') x = ';';
      t.row({ch.stage, ch.name, fmt(ch.value), ch.relation, fmt(ch.threshold), to_string(ch.status), note});
    }
    for (auto& e : R.errors) {
      std::string note = e;
      for (char& x : note)
        if (x == ',') x = ';';
      t.row({"error", "exception", "nan", "", "", "FAIL", note});
    }
    write_report(path("residuals.csv"), t.body());
  }
  if (R.identities || R.test_field) {
    KeyValueReport k;
    if (R.inversion) {
      k.add("inversion_E0", R.inversion->E0);
      k.add("inversion_center", fmt_list({R.inversion->x0.begin(), R.inversion->x0.begin() + c.params.N}));
      k.add("inversion_fit_residual", R.inversion->fit_residual);
    }
    if (R.identities) {
      k.add("self_adjoint_gap", R.identities->self_adjoint_gap);
      k.add("pohozaev_box_lhs", R.identities->pohozaev_lhs);
      k.add("pohozaev_box_rhs", R.identities->pohozaev_rhs);
      k.add("pohozaev_box_gap", R.identities->pohozaev_gap);
      k.add("multiplier", R.identities->multiplier);
      k.add("multiplier_margin", R.identities->multiplier_margin);
      k.add("e0_orthogonality", R.identities->e0_orthogonality);
    }
    if (R.test_field) {
      k.add("pohozaev_test_field_lhs", R.test_field->lhs);
      k.add("pohozaev_test_field_rhs", R.test_field->rhs);
      k.add("pohozaev_test_field_gap", R.test_field->gap);
      k.add("test_field_seminorm_gap", R.test_field->seminorm_gap);
    }
    if (R.radial_poh) {
      k.add("pohozaev_radial_R_max", c.pohozaev_R_max);
      k.add("pohozaev_radial_gap", R.radial_poh->gap);
      k.add("pohozaev_radial_gap_coarse", R.radial_poh_coarse->gap);
      k.add("pohozaev_radial_consistency_gap", R.radial_poh->consistency_gap);
      k.add("pohozaev_U_gap", R.pohozaev_U);
      k.add("pohozaev_U_source", R.pohozaev_U_source);
    }
    write_report(path("identities.txt"), k.body());
  }
  if (R.full) {
    const auto& f = *R.full;
    KeyValueReport k;
    k.add("kind", "full_grid_pencil");
    k.add("grid", R.kernel_grid.id());
    k.add("mutation", to_string(c.mutation));
    k.add("method", f.method);
    k.add("iterations", f.iterations);
    k.add("eigenvalues", f.eigenvalues);
    k.add("eig_residuals", f.eig_residuals);
    k.add("kernel_dim", f.kernel_dim);
    k.add("tol_gap", f.tol_gap);
    k.add("scale", f.scale);
    k.add("cluster_max", f.cluster_max);
    k.add("next_abs", f.next_abs);
    k.add("conclusive", f.conclusive);
    k.add("negative_count", f.negative_count);
    k.add("correlations", f.correlations);
    k.add("min_correlation", f.min_correlation);
    k.add("candidate_residuals", R.candidate_res);
    k.add("c", R.kernel_c);
    k.add("predicted_u_mode", predicted_u_mode(c.params.N, c.params.s, c.params.a, R.kernel_c));
    write_report(path("spectrum_full.txt"), k.body());
  }
  if (!R.sectors.empty()) {
    std::vector<std::string> hdr{"l"};
    const int k = c.sector_count;
    for (int j = 1; j <= k; ++j) hdr.push_back("lambda_" + std::to_string(j));
    for (const char* h : {"sign_definite", "correlation", "multiplicity", "zero_count", "simplicity_gap",
                          "sign_defect", "conclusive"})
      hdr.push_back(h);
    CsvReport t(hdr);
    for (auto& s : R.sectors) {
      std::vector<std::string> row{std::to_string(s.l)};
      for (int j = 0; j < k; ++j)
        row.push_back(j < int(s.spectrum.eigenvalues.size()) ? fmt(s.spectrum.eigenvalues[j]) : "nan");
      row.push_back(fmt(s.sign_definite));
      row.push_back(s.l <= 1 ? fmt(s.correlation) : "nan");
      row.push_back(std::to_string(s.multiplicity));
      row.push_back(std::to_string(s.zero_count));
      row.push_back(fmt(s.simplicity_gap));
      row.push_back(fmt(s.sign_defect));
      row.push_back(fmt(s.spectrum.conclusive));
      t.row(row);
    }
    write_report(path("sectors.csv"), t.body());
  }
  if (R.reconciliation || !R.confinement.empty()) {
    KeyValueReport k;
    if (R.reconciliation) {
      const auto& r = *R.reconciliation;
      k.add("status", r.consistent() ? "consistent" : "mismatch");
      k.add("full_kernel_dim", r.full_kernel_dim);
      k.add("sector_kernel_dim", r.sector_kernel_dim);
      k.add("l0_zero_count", r.l0_zero_count);
      k.add("l1_zero_count", r.l1_zero_count);
      k.add("higher_min", r.higher_min);
      k.add("predicted_u_mode", r.predicted_u_mode);
      k.add("sector_u_mode", r.sector_u_mode);
      k.add("full_u_mode", r.full_u_mode);
      k.add("multiset_max_diff", r.multiset_max_diff);
      k.add("full_values", r.full_values);
      k.add("sector_values", r.sector_values);
      k.add("l0_note",
            "the dilation mode is counted in l=0 empirically; the kernel sum rule is what is asserted");
      k.add("operator_note", "sector operators use the (2*-1)U^(2*-2) potential without a mass term");
      for (std::size_t i = 0; i < r.mismatches.size(); ++i) k.add("mismatch_" + std::to_string(i + 1), r.mismatches[i]);
    }
    if (!R.confinement.empty()) {
      k.add("confinement_grid", R.confinement_grid.id());
      for (auto& cc : R.confinement)
        k.add("confinement_l" + std::to_string(cc.l), fmt(cc.max_relative) + " over " + std::to_string(cc.samples) +
                                                          " profiles");
    }
    write_report(path("reconcile.txt"), k.body());
  }
}

// ---- drivers ---------------------------------------------------------------------------

// Runs the configured stages. A numerical failure aborts the remaining stages and counts as
// a failed check; bad input propagates as InvalidInput (usage error).
inline RunResult run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr) {
  RunResult R;
  R.cfg = cfg;
  const std::pair<Stage, std::function<void(RunResult&)>> stages[] = {
      {Stage::construct, stage_construct}, {Stage::verify, stage_verify}, {Stage::kernel, stage_kernel},
      {Stage::sectors, stage_sectors},     {Stage::reconcile, stage_reconcile}};
  for (auto& [st, fn] : stages) {
    if (!cfg.has(st)) continue;
    if (log) *log << "stage " << to_string(st) << "\n" << std::flush;
    std::size_t before = R.checks.size();
    try {
      fn(R);
    } catch (const NumericalFailure& e) {
      R.errors.push_back(std::string(to_string(st)) + ": " + e.what());
      if (log) *log << "  ERROR " << R.errors.back() << "\n";
      break;
    }
    if (log)
      for (std::size_t i = before; i < R.checks.size(); ++i) *log << "  " << R.checks[i].line() << "\n";
  }
  return R;
}

struct ConvergenceLevel {
  int level = 0;
  BoxGrid grid;
  double residual = NAN, consistency = NAN;
  int radial_M = 0;
  double l1_lowest = NAN, u_mode = NAN;
};

struct ConvergenceStudy {
  std::vector<ConvergenceLevel> levels;
  std::vector<Check> checks;
  int exit_code() const {
    for (auto& c : checks)
      if (c.status != Status::pass) return exit_failed;
    return exit_ok;
  }
};

// Level j of k uses (L, m) / 2^{k-1-j}: same spacing, growing box, so the algebraic tail
// is what refines. The radial sectors halve M in step.
inline ConvergenceStudy convergence_study(const RunConfig& cfg, int levels, std::ostream* log = nullptr) {
  require(levels >= 2, "convergence study needs levels >= 2, got " + std::to_string(levels));
  ConvergenceStudy st;
  const int N = cfg.params.N;
  for (int j = 0; j < levels; ++j) {
    const int shift = levels - 1 - j;
    ConvergenceLevel lv;
    lv.level = j;
    int m = cfg.box.m >> shift;
    require(m >= 16 && (m << shift) == cfg.box.m, "box.m too small for " + std::to_string(levels) + " levels");
    lv.grid = make_box_grid(N, cfg.box.L / double(1 << shift), m);
    auto gs = build_ground_state(cfg.params, lv.grid, ZeroMode::free_space, cfg.min_points_per_mu);
    lv.residual = gs.residual;
    lv.consistency = gs.cert.consistency_gap;
    lv.radial_M = cfg.radial.M >> shift;
    require(lv.radial_M >= 32, "radial.M too small for " + std::to_string(levels) + " levels");
    auto rg = radial_ground_state(cfg.params, make_radial_grid(N, lv.radial_M, cfg.radial.R_max, cfg.radial.stretch,
                                                               cfg.radial.exponent));
    SectorScanOptions opt;
    opt.l_max = 1;
    opt.count = 2;
    opt.tol_gap = cfg.tol.gap;
    opt.bc = cfg.radial.bc;
    opt.mutation = cfg.mutation;
    opt.seed = unsigned(cfg.seed);
    auto sec = scan_sectors(rg, opt);
    lv.u_mode = sec[0].spectrum.eigenvalues.front();
    lv.l1_lowest = sec[1].spectrum.eigenvalues.front();
    if (log)
      *log << "level " << j << " " << lv.grid.id() << " residual " << fmt(lv.residual) << " l1 " << fmt(lv.l1_lowest)
           << "\n"
           << std::flush;
    st.levels.push_back(lv);
  }
  for (std::size_t j = 1; j < st.levels.size(); ++j)
    st.checks.push_back(detail::make_check("converge", "residual_level" + std::to_string(j), st.levels[j].residual,
                                           "<", st.levels[j - 1].residual, "strictly decreasing"));
  // Richardson-style: successive differences of the l=1 zero mode must shrink
  for (std::size_t j = 2; j < st.levels.size(); ++j) {
    double d_new = std::abs(st.levels[j].l1_lowest - st.levels[j - 1].l1_lowest);
    double d_old = std::abs(st.levels[j - 1].l1_lowest - st.levels[j - 2].l1_lowest);
    st.checks.push_back(detail::make_check("converge", "l1_drift_level" + std::to_string(j), d_new, "<", d_old,
                                           "drift of the l=1 zero mode shrinks"));
  }
  return st;
}

inline void write_convergence(const ConvergenceStudy& st, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + dir + "': " + ec.message());
  CsvReport t({"level", "L", "m", "points", "residual", "consistency_gap", "radial_M", "l1_lowest", "l1_drift",
               "u_mode", "u_mode_drift"});
  for (std::size_t j = 0; j < st.levels.size(); ++j) {
    const auto& lv = st.levels[j];
    std::string d1 = "nan", du = "nan";
    if (j + 1 < st.levels.size()) {
      d1 = fmt(std::abs(st.levels[j + 1].l1_lowest - lv.l1_lowest));
      du = fmt(std::abs(st.levels[j + 1].u_mode - lv.u_mode));
    }
    t.row({std::to_string(lv.level), fmt(lv.grid.L), std::to_string(lv.grid.m), std::to_string(lv.grid.size()),
           fmt(lv.residual), fmt(lv.consistency), std::to_string(lv.radial_M), fmt(lv.l1_lowest), d1, fmt(lv.u_mode),
           du});
  }
  write_report((fs::path(dir) / "convergence.csv").string(), t.body());
}

}  // namespace fkirch
