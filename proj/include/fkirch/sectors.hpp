#pragma once
// Angular sectors: L+ restricted to f(r) Y_l, l >= 0, on a radial grid.
//
// In symmetric coordinates y = sqrt(w) f the sector operator is
//   c H_l^s - diag(W) + [l = 0] 2b |S| v v^T,   v = sqrt(w) (-Delta_0)^s U = sqrt(w) U^{2*-1} / c,
// with W = (2*-1) U^{2*-2}. As on the box, spectra are pencil values of (L+_l, W).
// For N = 1 the "sectors" are parities: l = 0 even, l = 1 odd.
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "linearization.hpp"

namespace fkirch {

// dim of degree-l harmonics on S^{N-1}; N = 1 counts parities.
inline int harmonic_multiplicity(int N, int l) {
  require(l >= 0, "negative angular index l");
  if (N == 1) {
    require(l <= 1, "N=1 has only the even (l=0) and odd (l=1) sectors");
    return 1;
  }
  auto binom = [](int n, int k) -> long {
    if (k < 0 || n < k) return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  return int(binom(l + N - 1, N - 1) - binom(l + N - 3, N - 1));
}

inline int worker_threads() {
  if (const char* e = std::getenv("FKIRCH_THREADS")) {
    int n = std::atoi(e);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Radial ground state in closed form: U(r) = Q(r / lambda) with the whole-space constant,
// c (-Delta)^s U = U^{2*-1} for c = lambda^{2s} = E0. The grid passed in is in units of
// lambda (lambda can be huge, e.g. ~1e6 for N=3); the stored grid is physical.
struct RadialGroundState {
  ProblemParams params;
  RadialGrid grid;
  BubbleProfile Q;
  double lambda = 1, c = 1;
  std::vector<double> U, dU;  // U and dU/dr at the nodes
};

inline RadialGroundState radial_ground_state(const ProblemParams& p, const RadialGrid& g) {
  p.validate();
  require(g.N == p.N, "radial_ground_state: grid dimension mismatch");
  RadialGroundState r;
  r.params = p;
  r.Q.N = p.N;
  r.Q.s = p.s;
  r.Q.mu = 1;
  r.Q.C = bubble_constant_exact(p.N, p.s);
  auto cert = solve_E0(p, bubble_kappa_exact(p.N, p.s));
  r.c = cert.E0;
  r.lambda = cert.lambda(p.s);
  r.grid = make_radial_grid(g.N, g.M, g.R_max * r.lambda, g.stretch, g.exponent);
  r.U = sample_bubble(r.grid, r.Q, r.lambda);
  r.dU.resize(r.grid.size());
  const double al = r.Q.alpha();
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    double rho = r.grid.nodes[i] / r.lambda;
    r.dU[i] = -2 * al * rho / (1 + rho * rho) * r.U[i] / r.lambda;
  }
  return r;
}

struct SectorOperator {
  int l = 0;
  DiscreteOperator matrix;   // kind L_plus_sector, y-coordinates; empty unless materialized
  bool includes_rank_one = false;
  RadialGrid grid;
  double c = 0;
  Eigen::VectorXd W;         // potential at the nodes
  Eigen::VectorXd v;         // sqrt(w) (-Delta_0)^s U, l = 0 only
  double rank_one_coeff = 0; // 2b |S|
  std::shared_ptr<const SectorLaplacian> lap;
};

inline SectorOperator assemble_sector(const ProblemParams& p, const std::vector<double>& U_radial, int l,
                                      const RadialGrid& g, double c, OuterBC bc = OuterBC::robin,
                                      Mutation mut = Mutation::none, bool materialize = true) {
  p.validate();
  require(l >= 0, "assemble_sector: invalid angular index l=" + std::to_string(l));
  if (p.N == 1) require(l <= 1, "assemble_sector: N=1 has sectors l=0 (even) and l=1 (odd) only");
  require(U_radial.size() == g.size(), "assemble_sector: U has wrong length");
  for (double u : U_radial) require(u > 0, "assemble_sector: U must be positive pointwise");
  require(c > 0, "assemble_sector: c must be positive");
  SectorOperator so;
  so.l = l;
  so.grid = g;
  so.c = c;
  auto lap = std::make_shared<SectorLaplacian>(assemble_sector_laplacian(g, p.N, l, p.s, bc, materialize));
  so.lap = lap;
  auto Wv = potential_weight(p.N, p.s, U_radial, mut);
  so.W = Eigen::Map<const Eigen::VectorXd>(Wv.data(), Eigen::Index(Wv.size()));
  so.includes_rank_one = l == 0;
  if (so.includes_rank_one) {
    // (-Delta_0)^s U = U^{2*-1} / c holds in closed form; H^s itself is too stiff to apply
    // pointwise near the origin.
    const double pw = critical_exponents(p.N, p.s).power();
    so.v.resize(Eigen::Index(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) so.v(Eigen::Index(i)) = lap->sqrtw(Eigen::Index(i)) * std::pow(U_radial[i], pw) / c;
    so.rank_one_coeff = mut == Mutation::drop_rank_one ? 0.0 : 2 * p.b * sphere_area(p.N);
  }
  if (materialize) {
    Eigen::MatrixXd A = c * lap->op.matrix;
    A.diagonal() -= so.W;
    if (so.includes_rank_one) A += so.rank_one_coeff * so.v * so.v.transpose();
    so.matrix.matrix = 0.5 * (A + A.transpose());
  }
  so.matrix.grid_ref = g.id();
  so.matrix.kind = OpKind::L_plus_sector;
  so.matrix.l = l;
  so.matrix.s = p.s;
  return so;
}

struct SectorReport {
  int l = 0;
  int multiplicity = 1;
  SpectrumReport spectrum;   // pencil values, ascending
  bool sign_definite = false;
  double sign_defect = 0;    // -min*max / sup^2 of the lowest eigenfunction, 0 if one-signed
  double simplicity_gap = 0; // lambda_2 - lambda_1
  double correlation = 0;    // mode closest to zero vs its candidate (l = 0, 1), else 0
  int zero_count = 0;
  std::vector<double> lowest_function;  // f at the nodes
};

// (c H^s + rank one)^{-1} applied through the eigenbasis of H; H^{-s} acts stably where
// H^s does not.
struct SectorResolvent {
  const SectorOperator* op = nullptr;
  Eigen::VectorXd dinv;  // lambda_i^{-s} / c
  Eigen::VectorXd Gv;    // K0^{-1} v
  double beta = 0;

  explicit SectorResolvent(const SectorOperator& o) : op(&o) {
    const auto& lap = *o.lap;
    dinv.resize(lap.eig.values.size());
    for (Eigen::Index i = 0; i < dinv.size(); ++i) {
      if (!(lap.eig.values(i) > 0)) throw NumericalFailure("sector Laplacian is singular");
      dinv(i) = std::pow(lap.eig.values(i), -lap.s) / o.c;
    }
    if (o.includes_rank_one && o.rank_one_coeff != 0) {
      Gv = base(o.v);
      beta = o.rank_one_coeff / (1 + o.rank_one_coeff * o.v.dot(Gv));
    }
  }
  Eigen::VectorXd base(const Eigen::VectorXd& y) const {
    const auto& V = op->lap->eig.vectors;
    return V * dinv.cwiseProduct(V.transpose() * y);
  }
  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const {
    Eigen::VectorXd x = base(y);
    if (beta != 0) x -= (beta * Gv.dot(y)) * Gv;
    return x;
  }
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& Y) const {
    const auto& V = op->lap->eig.vectors;
    Eigen::MatrixXd X = V * (dinv.asDiagonal() * (V.transpose() * Y));
    if (beta != 0) X -= beta * Gv * (Gv.transpose() * Y);
    return X;
  }
};

// Lowest k pencil eigenpairs of a sector from the dominant ones of T = W^{1/2} K^{-1} W^{1/2}.
inline SectorReport sector_spectrum(const SectorOperator& op, int k, double tol_gap,
                                    const std::vector<double>& candidate = {}, unsigned seed = 1) {
  const auto& lap = *op.lap;
  const Eigen::Index M = op.W.size();
  require(k >= 2, "sector_spectrum: need at least two eigenvalues");
  SectorResolvent G(op);
  Eigen::VectorXd sW = op.W.cwiseSqrt();
  SymOperator T;
  T.n = M;
  T.apply = [&](const double* y, double* out) {
    Eigen::Map<const Eigen::VectorXd> ym(y, M);
    Eigen::Map<Eigen::VectorXd>(out, M) = sW.cwiseProduct(G(Eigen::VectorXd(sW.cwiseProduct(ym))));
  };
  T.apply_block = [&](const Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
    Y = sW.asDiagonal() * G(Eigen::MatrixXd(sW.asDiagonal() * X));
  };
  int kk = std::min<int>(k + 2, int(M));
  EigPairs ep = dominant_eigenpairs(T, kk, std::min<int>(kk + 8, int(M)), seed);
  SectorReport r;
  r.l = op.l;
  r.multiplicity = harmonic_multiplicity(op.grid.N, op.l);
  r.spectrum = pencil_report(ep, tol_gap, k);
  r.zero_count = r.spectrum.kernel_dim;
  // lowest eigenfunction: phi = (1 + lambda) G W^{1/2} z, smooth where z / sqrt(W) is noise
  Eigen::VectorXd z = r.spectrum.vectors.col(0);
  Eigen::VectorXd phi = (1 + r.spectrum.eigenvalues[0]) * G(Eigen::VectorXd(sW.cwiseProduct(z)));
  r.lowest_function.resize(M);
  double mn = INFINITY, mx = -INFINITY, sup = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    double f = phi(i) / lap.sqrtw(i);
    r.lowest_function[i] = f;
    mn = std::min(mn, f);
    mx = std::max(mx, f);
    sup = std::max(sup, std::abs(f));
  }
  r.sign_defect = mn * mx < 0 ? -mn * mx / (sup * sup) : 0;
  r.sign_definite = mn * mx >= -1e-6 * sup * sup;
  if (r.spectrum.eigenvalues.size() >= 2) r.simplicity_gap = r.spectrum.eigenvalues[1] - r.spectrum.eigenvalues[0];
  if (!candidate.empty()) {
    require(candidate.size() == std::size_t(M), "sector candidate has wrong length");
    Eigen::VectorXd cz(M);
    for (Eigen::Index i = 0; i < M; ++i) cz(i) = sW(i) * lap.sqrtw(i) * candidate[i];
    // the mode closest to zero
    std::size_t j0 = 0;
    for (std::size_t j = 1; j < r.spectrum.eigenvalues.size(); ++j)
      if (std::abs(r.spectrum.eigenvalues[j]) < std::abs(r.spectrum.eigenvalues[j0])) j0 = j;
    auto zj = r.spectrum.vectors.col(Eigen::Index(j0));
    double best = std::abs(zj.dot(cz)) / (zj.norm() * cz.norm());
    r.correlation = best;
  }
  return r;
}

struct SectorScanOptions {
  int l_max = 3;
  int count = 4;
  double tol_gap = 1e-3;
  OuterBC bc = OuterBC::robin;
  Mutation mutation = Mutation::none;
  int threads = 0;  // 0 -> worker_threads()
  unsigned seed = 1;
};

// Candidates: l = 0 dilation (N-2s)/2 U + r U', l = 1 the translation profile -U'.
inline std::vector<SectorReport> scan_sectors(const RadialGroundState& rg, const SectorScanOptions& opt) {
  const int N = rg.params.N;
  int l_max = N == 1 ? std::min(opt.l_max, 1) : opt.l_max;
  require(l_max >= 1, "sector scan needs l_max >= 1");
  std::vector<double> e0(rg.U.size()), mdU(rg.U.size());
  const double al = rg.Q.alpha();
  for (std::size_t i = 0; i < rg.U.size(); ++i) {
    e0[i] = al * rg.U[i] + rg.grid.nodes[i] * rg.dU[i];
    mdU[i] = -rg.dU[i];
  }
  std::vector<SectorReport> out(l_max + 1);
  std::vector<std::exception_ptr> err(l_max + 1);
  auto job = [&](int l) {
    try {
      auto op = assemble_sector(rg.params, rg.U, l, rg.grid, rg.c, opt.bc, opt.mutation, false);
      out[l] = sector_spectrum(op, opt.count, opt.tol_gap, l == 0 ? e0 : l == 1 ? mdU : std::vector<double>{},
                               opt.seed);
    } catch (...) {
      err[l] = std::current_exception();
    }
  };
  int nt = opt.threads > 0 ? opt.threads : worker_threads();
  for (int base = 0; base <= l_max; base += nt) {
    std::vector<std::thread> pool;
    for (int l = base; l <= l_max && l < base + nt; ++l) pool.emplace_back(job, l);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

// <(-Delta)^{s/2} U, (-Delta)^{s/2} (f Y_l)> on the box for random radial f, relative to
// |U|_D |f Y_l|_D. N = 2: Y = cos(l t), sin(l t); N = 1: odd profiles (l = 1).
struct ConfinementCheck {
  int l = 0;
  int samples = 0;
  double max_relative = 0;
};

inline std::vector<ConfinementCheck> rank_one_confinement(const BoxGrid& g, double s, const std::vector<double>& U,
                                                           int l_max, unsigned seed, int samples = 5) {
  require(g.N <= 2, "rank_one_confinement: box harmonics implemented for N <= 2");
  require(U.size() == g.size(), "rank_one_confinement: U has wrong length");
  BoxLaplacian K(g, s, ZeroMode::periodic);
  auto KU = K.apply(U);
  double nU = std::sqrt(dot_box(g, U, KU));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  std::vector<ConfinementCheck> out;
  // lattice symmetry makes the integrals vanish exactly only for harmonics it separates from l=0
  int lmax = g.N == 1 ? 1 : std::min(l_max, 3);
  int idx[3];
  for (int l = 1; l <= lmax; ++l) {
    ConfinementCheck cc;
    cc.l = l;
    for (int t = 0; t < samples; ++t) {
      double a1 = ud(rng), a2 = ud(rng), w1 = ud(rng), w2 = ud(rng) * 4;
      for (int comp = 0; comp < (g.N == 1 ? 1 : 2); ++comp) {
        std::vector<double> phi(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
          g.unravel(k, idx);
          double x = g.coord(idx[0]), y = g.N == 2 ? g.coord(idx[1]) : 0.0;
          double r = std::hypot(x, y);
          // windowed so that the self-mirrored box edges carry no mass
          double win = r < 0.8 * g.L ? std::pow(1 - std::pow(r / (0.8 * g.L), 2), 3) : 0.0;
          double f = win * (a1 * std::exp(-r * r / (w1 * w1)) + a2 * r / (1 + std::pow(r / w2, 3)));
          double ang;
          if (r == 0) ang = 0;
          else if (g.N == 1) ang = x > 0 ? 1.0 : -1.0;
          else {
            double th = std::atan2(y, x);
            ang = comp == 0 ? std::cos(l * th) : std::sin(l * th);
          }
          phi[k] = f * ang;
        }
        double num = dot_box(g, phi, KU);
        double den = nU * std::sqrt(dot_box(g, phi, K.apply(phi)));
        cc.max_relative = std::max(cc.max_relative, std::abs(num) / den);
        ++cc.samples;
      }
    }
    out.push_back(cc);
  }
  return out;
}

struct Reconciliation {
  int full_kernel_dim = 0;
  int sector_kernel_dim = 0;        // sum over l of zero_count * multiplicity
  int l0_zero_count = 0, l1_zero_count = 0;
  double higher_min = INFINITY;     // lowest eigenvalue over l >= 2
  double predicted_u_mode = 0, sector_u_mode = 0, full_u_mode = 0;
  double multiset_max_diff = 0;
  std::vector<double> full_values, sector_values;
  std::vector<std::string> mismatches;
  bool consistent() const { return mismatches.empty(); }
  std::string summary() const;
};

inline std::string Reconciliation::summary() const {
  std::ostringstream os;
  os << (consistent() ? "consistent" : "MISMATCH");
  for (auto& m : mismatches) os << "\n  " << m;
  return os.str();
}

// Sector results with multiplicities against the full-grid pencil spectrum.
inline Reconciliation reconcile_sectors(const SpectrumReport& full, const std::vector<SectorReport>& sectors,
                                        int N, double predicted_u, double tol_sector) {
  require(sectors.size() >= 2 && sectors[0].l == 0 && sectors[1].l == 1,
          "reconcile_sectors: sectors l=0 and l=1 are required");
  require(full.scale == sectors[0].spectrum.scale && full.tol_gap == sectors[0].spectrum.tol_gap,
          "reconcile_sectors: full and sector reports use different gap conventions");
  Reconciliation r;
  r.full_kernel_dim = full.kernel_dim;
  r.predicted_u_mode = predicted_u;
  char buf[256];
  for (auto& s : sectors) {
    r.sector_kernel_dim += s.zero_count * s.multiplicity;
    if (s.l >= 2) r.higher_min = std::min(r.higher_min, s.spectrum.eigenvalues.front());
    for (double v : s.spectrum.eigenvalues)
      for (int m = 0; m < s.multiplicity; ++m) r.sector_values.push_back(v);
  }
  r.l0_zero_count = sectors[0].zero_count;
  r.l1_zero_count = sectors[1].zero_count;
  r.sector_u_mode = sectors[0].spectrum.eigenvalues.front();
  r.full_u_mode = full.eigenvalues.front();
  r.full_values = full.eigenvalues;
  std::sort(r.sector_values.begin(), r.sector_values.end());

  if (r.sector_kernel_dim != r.full_kernel_dim) {
    std::snprintf(buf, sizeof buf, "kernel dimension: sectors give %d, full grid %d", r.sector_kernel_dim,
                  r.full_kernel_dim);
    r.mismatches.push_back(buf);
  }
  if (r.full_kernel_dim != N + 1) {
    std::snprintf(buf, sizeof buf, "full kernel dimension %d, symmetry generators span %d", r.full_kernel_dim, N + 1);
    r.mismatches.push_back(buf);
  }
  if (r.l1_zero_count != 1) {
    std::snprintf(buf, sizeof buf, "l=1 near-zero count %d, expected 1 (translations)", r.l1_zero_count);
    r.mismatches.push_back(buf);
  }
  if (sectors.size() > 2 && !(r.higher_min > 0)) {
    std::snprintf(buf, sizeof buf, "lowest eigenvalue over l>=2 is %.6e, not positive", r.higher_min);
    r.mismatches.push_back(buf);
  }
  if (std::abs(r.sector_u_mode - predicted_u) > tol_sector) {
    std::snprintf(buf, sizeof buf, "l=0 lowest %.6f differs from the predicted U-mode %.6f", r.sector_u_mode,
                  predicted_u);
    r.mismatches.push_back(buf);
  }
  if (std::abs(r.full_u_mode - predicted_u) > tol_sector) {
    std::snprintf(buf, sizeof buf, "full-grid lowest %.6f differs from the predicted U-mode %.6f", r.full_u_mode,
                  predicted_u);
    r.mismatches.push_back(buf);
  }
  std::size_t n = std::min(r.full_values.size(), r.sector_values.size());
  for (std::size_t i = 0; i < n; ++i)
    r.multiset_max_diff = std::max(r.multiset_max_diff, std::abs(r.full_values[i] - r.sector_values[i]));
  if (r.multiset_max_diff > tol_sector) {
    std::string a = "full:", b = "sectors:";
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, " %.6f", r.full_values[i]);
      a += buf;
      std::snprintf(buf, sizeof buf, " %.6f", r.sector_values[i]);
      b += buf;
    }
    std::snprintf(buf, sizeof buf, "eigenvalue lists differ by %.3e: ", r.multiset_max_diff);
    r.mismatches.push_back(buf + a + " | " + b);
  }
  return r;
}

// Pohozaev identity for the radial ground state in quadratic-form terms:
// <x.grad U, U>_D = (2s-N)/2 |U|_D^2. The stretched grid reaches tails the box cannot.
struct RadialPohozaev {
  double lhs = 0, rhs = 0, gap = 0;
  double consistency_gap = 0;  // |c - a - b |U|_D^2| / c on this grid
};

inline RadialPohozaev radial_pohozaev(const RadialGroundState& rg, OuterBC bc = OuterBC::robin) {
  const int N = rg.params.N;
  const double s = rg.params.s;
  auto lap = assemble_sector_laplacian(rg.grid, N, 0, s, bc, false);
  const Eigen::Index M = Eigen::Index(rg.grid.size());
  Eigen::VectorXd yU(M), yP(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    yU(i) = rg.U[i] * lap.sqrtw(i);
    yP(i) = rg.grid.nodes[i] * rg.dU[i] * lap.sqrtw(i);
  }
  Eigen::VectorXd cU = lap.eig.vectors.transpose() * yU, cP = lap.eig.vectors.transpose() * yP;
  double form = 0, semi = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    double d = std::pow(lap.eig.values(i), s);
    form += d * cU(i) * cP(i);
    semi += d * cU(i) * cU(i);
  }
  const double S = sphere_area(N);
  RadialPohozaev r;
  r.lhs = S * form;
  r.rhs = 0.5 * (2 * s - N) * S * semi;
  r.gap = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
  r.consistency_gap = std::abs(rg.c - rg.params.a - rg.params.b * S * semi) / rg.c;
  return r;
}

}  // namespace fkirch
