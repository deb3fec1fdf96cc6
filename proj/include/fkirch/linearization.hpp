#pragma once
// The linearized operator
//   L+ phi = c (-Delta)^s phi - (2*-1) U^{2*-2} phi + 2b <(-Delta)^s U, phi> (-Delta)^s U
// on the box, its analytic near-kernel, and the identities behind radial nondegeneracy.
//
// Spectra are those of the pencil L+ phi = lambda W phi with W = (2*-1) U^{2*-2}: same
// kernel as L+, but discrete and gapped (U^{2*-2} decays, so unweighted L+ has
// continuous spectrum down to 0). They are computed from the bounded operator
// T = W^{1/2} K^{-1} W^{1/2}, K = L+ + W, whose eigenvalues are nu = 1/(1+lambda).
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bubble.hpp"
#include "eigensolvers.hpp"
#include "errors.hpp"
#include "kirchhoff.hpp"
#include "spectral.hpp"

namespace fkirch {

// Seeded bugs for the negative-control runs.
enum class Mutation { none, potential_exponent, drop_rank_one };

inline const char* to_string(Mutation m) {
  switch (m) {
    case Mutation::none: return "none";
    case Mutation::potential_exponent: return "potential_exponent";
    case Mutation::drop_rank_one: return "drop_rank_one";
  }
  return "?";
}

// Potential weight (2*-1) U^{2*-2}; the mutation uses U^{2*-1} instead.
inline std::vector<double> potential_weight(int N, double s, const std::vector<double>& U,
                                            Mutation mut = Mutation::none) {
  auto ex = critical_exponents(N, s);
  double pw = mut == Mutation::potential_exponent ? ex.power() : ex.p_lin;
  std::vector<double> W(U.size());
  for (std::size_t i = 0; i < U.size(); ++i) W[i] = ex.power() * std::pow(U[i], pw);
  return W;
}

class LinearizedOperator {
 public:
  LinearizedOperator(const ProblemParams& p, const BoxGrid& g, std::vector<double> U, ZeroMode zm,
                     Mutation mut = Mutation::none)
      : p_(p), g_(g), zm_(zm), mut_(mut), K_(std::make_shared<BoxLaplacian>(g, p.s, zm)), U_(std::move(U)) {
    p.validate();
    require(U_.size() == g.size(), "assemble_L_plus: U has wrong length");
    for (double v : U_) require(v > 0, "assemble_L_plus: U must be positive pointwise");
    w_ = K_->apply(U_);
    semi_ = dot_box(g_, U_, w_);
    c_ = p.a + p.b * semi_;
    b_eff_ = mut == Mutation::drop_rank_one ? 0.0 : p.b;
    W_ = potential_weight(p.N, p.s, U_, mut);
    sqrtW_.resize(W_.size());
    for (std::size_t i = 0; i < W_.size(); ++i) sqrtW_[i] = std::sqrt(W_[i]);
  }

  const ProblemParams& params() const { return p_; }
  const BoxGrid& grid() const { return g_; }
  ZeroMode zero_mode() const { return zm_; }
  Mutation mutation() const { return mut_; }
  const BoxLaplacian& frac_laplacian() const { return *K_; }
  const std::vector<double>& U() const { return U_; }
  const std::vector<double>& w() const { return w_; }  // (-Delta)^s U
  const std::vector<double>& W() const { return W_; }
  const std::vector<double>& sqrtW() const { return sqrtW_; }
  double c() const { return c_; }
  double b_coeff() const { return b_eff_; }
  double semi_U() const { return semi_; }
  std::size_t size() const { return U_.size(); }

  // A phi = c (-Delta)^s phi - W phi
  std::vector<double> apply_A(const std::vector<double>& phi) const {
    auto out = K_->apply(phi);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c_ * out[i] - W_[i] * phi[i];
    return out;
  }
  std::vector<double> apply(const std::vector<double>& phi) const {
    auto out = apply_A(phi);
    double sig = 2 * b_eff_ * dot_box(g_, w_, phi);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sig * w_[i];
    return out;
  }

  // (L+ + W)^{-1} f by Sherman-Morrison; G w = U holds exactly since w = K U.
  void apply_K_inverse(const double* f, double* out) const {
    K_->apply(f, out, -1.0);
    const double beta = 2 * b_eff_ / c_;
    double gamma = beta / (1 + beta * semi_);
    double uf = 0;
    for (std::size_t i = 0; i < U_.size(); ++i) uf += U_[i] * f[i];
    uf *= g_.cell_volume();
    for (std::size_t i = 0; i < U_.size(); ++i) out[i] = (out[i] - gamma * uf * U_[i]) / c_;
  }

  SymOperator resolvent() const {
    require(zm_ == ZeroMode::free_space, "the resolvent needs the free-space zero mode");
    SymOperator T;
    T.n = Eigen::Index(size());
    T.apply = [this](const double* y, double* out) {
      std::vector<double> f(size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = sqrtW_[i] * y[i];
      apply_K_inverse(f.data(), out);
      for (std::size_t i = 0; i < f.size(); ++i) out[i] *= sqrtW_[i];
    };
    return T;
  }

  // Dense matrices (small grids only). Symmetric in the Euclidean product of samples.
  DiscreteOperator dense_A() const {
    DiscreteOperator D = box_frac_laplacian_matrix(g_, p_.s, zm_);
    D.matrix *= c_;
    for (Eigen::Index i = 0; i < D.matrix.rows(); ++i) D.matrix(i, i) -= W_[i];
    D.kind = OpKind::base_A;
    return D;
  }
  DiscreteOperator dense() const {
    DiscreteOperator D = dense_A();
    Eigen::Map<const Eigen::VectorXd> w(w_.data(), Eigen::Index(w_.size()));
    D.matrix += (2 * b_eff_ * g_.cell_volume()) * w * w.transpose();
    D.kind = OpKind::L_plus;
    return D;
  }

 private:
  ProblemParams p_;
  BoxGrid g_;
  ZeroMode zm_;
  Mutation mut_;
  std::shared_ptr<BoxLaplacian> K_;
  std::vector<double> U_, w_, W_, sqrtW_;
  double semi_ = 0, c_ = 0, b_eff_ = 0;
};

inline LinearizedOperator assemble_L_plus(const ProblemParams& p, const SpectralField& U, const BoxGrid& g,
                                          ZeroMode zm = ZeroMode::free_space, Mutation mut = Mutation::none) {
  check_on_grid(g, U);
  return LinearizedOperator(p, g, U.values, zm, mut);
}

// ---- analytic candidates ---------------------------------------------------------

struct KernelCandidates {
  std::vector<std::vector<double>> translations;  // d_i U
  std::vector<double> dilation;                    // e0 = (N-2s)/2 U + x.grad U
  std::vector<double> psi;                         // x.grad U
  std::vector<std::vector<double>> all() const {
    auto v = translations;
    v.push_back(dilation);
    return v;
  }
};

// U(x) = Cq (nu / (nu^2 + |x|^2))^alpha with nu = lambda mu; differentiated in closed form.
inline KernelCandidates kernel_candidates(const BoxGrid& g, const BubbleProfile& Q, double lambda) {
  Q.validate();
  const double al = Q.alpha();
  const double nu2 = std::pow(lambda * Q.mu, 2);
  KernelCandidates kc;
  kc.translations.assign(g.N, std::vector<double>(g.size()));
  kc.dilation.resize(g.size());
  kc.psi.resize(g.size());
  auto U = sample_bubble(g, Q, lambda);
  int idx[3];
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.unravel(k, idx);
    double r2 = 0, x[3];
    for (int d = 0; d < g.N; ++d) {
      x[d] = g.coord(idx[d]) - lambda * Q.center[d];
      r2 += x[d] * x[d];
    }
    double q = -2 * al * U[k] / (nu2 + r2);
    for (int d = 0; d < g.N; ++d) kc.translations[d][k] = q * x[d];
    kc.psi[k] = q * r2;
    kc.dilation[k] = al * U[k] * (nu2 - r2) / (nu2 + r2);
  }
  return kc;
}

// |L+ phi| / |W phi| for each candidate: translations first, dilation last.
inline std::vector<double> candidate_residuals(const LinearizedOperator& Lp, const KernelCandidates& kc) {
  std::vector<double> out;
  for (auto& phi : kc.all()) {
    auto r = Lp.apply(phi);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      num += r[i] * r[i];
      den += std::pow(Lp.W()[i] * phi[i], 2);
    }
    out.push_back(std::sqrt(num / den));
  }
  return out;
}

// ---- spectrum reports ------------------------------------------------------------

struct SpectrumReport {
  std::vector<double> eigenvalues;   // ascending
  std::vector<double> eig_residuals; // solver residuals, same order
  int kernel_dim = 0;
  double tol_gap = 1e-3;
  double scale = 1;
  double cluster_max = 0;    // largest |lambda| inside the cluster
  double next_abs = 0;       // smallest |lambda| outside it
  bool conclusive = false;   // next_abs >= 10 tol scale
  int negative_count = 0;    // eigenvalues below -tol scale among those computed
  std::vector<double> correlations;  // canonical cosines kernel vs candidates
  double min_correlation = 0;
  std::string method;
  int iterations = 0;
  Eigen::MatrixXd kernel_vectors;  // in W^{1/2}-weighted coordinates
  Eigen::MatrixXd vectors;         // all computed, same coordinates, ascending order
};

inline void classify_cluster(SpectrumReport& r) {
  r.kernel_dim = 0;
  r.cluster_max = 0;
  r.next_abs = INFINITY;
  r.negative_count = 0;
  const double thr = r.tol_gap * r.scale;
  for (double v : r.eigenvalues) {
    if (std::abs(v) < thr) {
      ++r.kernel_dim;
      r.cluster_max = std::max(r.cluster_max, std::abs(v));
    } else {
      r.next_abs = std::min(r.next_abs, std::abs(v));
      if (v < 0) ++r.negative_count;
    }
  }
  r.conclusive = r.next_abs >= 10 * thr;
}

// Plain symmetric matrix (identity weight): scale = max(|lambda_min|, lambda_max).
inline SpectrumReport matrix_near_kernel(const Eigen::MatrixXd& A, double tol_gap, int k) {
  SymEig se = sym_eig(A);
  SpectrumReport r;
  r.tol_gap = tol_gap;
  r.scale = std::max(std::abs(se.values(0)), se.values(se.values.size() - 1));
  std::vector<int> ord(se.values.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return std::abs(se.values(a)) < std::abs(se.values(b)); });
  k = std::min<int>(k, int(ord.size()));
  std::vector<int> pick(ord.begin(), ord.begin() + k);
  std::sort(pick.begin(), pick.end(), [&](int a, int b) { return se.values(a) < se.values(b); });
  for (int i : pick) r.eigenvalues.push_back(se.values(i)), r.eig_residuals.push_back(0);
  r.method = "dense";
  classify_cluster(r);
  return r;
}

// Lowest k pencil eigenvalues from the dominant eigenpairs of T.
inline SpectrumReport pencil_report(const EigPairs& ep, double tol_gap, int k) {
  SpectrumReport r;
  r.tol_gap = tol_gap;
  r.scale = 1;  // pencil eigenvalues are dimensionless
  r.method = ep.method;
  r.iterations = ep.iterations;
  std::vector<int> ord(ep.values.size());
  std::iota(ord.begin(), ord.end(), 0);
  auto lam = [&](int j) { return 1 / ep.values(j) - 1; };
  std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return lam(a) < lam(b); });
  k = std::min<int>(k, int(ord.size()));
  r.vectors.resize(ep.vectors.rows(), k);
  for (int j = 0; j < k; ++j) {
    r.eigenvalues.push_back(lam(ord[j]));
    // residual of T translated to the pencil value
    r.eig_residuals.push_back(ep.residuals(ord[j]) / (ep.values(ord[j]) * ep.values(ord[j])));
    r.vectors.col(j) = ep.vectors.col(ord[j]);
  }
  classify_cluster(r);
  return r;
}

inline void correlate_kernel(SpectrumReport& r, const Eigen::MatrixXd& candidates) {
  r.kernel_vectors.resize(r.vectors.rows(), r.kernel_dim);
  int j = 0;
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
    if (std::abs(r.eigenvalues[i]) < r.tol_gap * r.scale) r.kernel_vectors.col(j++) = r.vectors.col(Eigen::Index(i));
  Eigen::VectorXd cc = canonical_correlations(r.kernel_vectors, candidates);
  r.correlations.assign(cc.data(), cc.data() + cc.size());
  r.min_correlation = r.correlations.empty() ? 0 : *std::min_element(r.correlations.begin(), r.correlations.end());
  if (r.kernel_dim != candidates.cols()) r.min_correlation = std::min(r.min_correlation, 0.0);
}

struct NearKernelOptions {
  double tol_gap = 1e-3;
  int count = 0;        // 0 -> 2N+4
  unsigned seed = 1;
  std::size_t dense_limit = 4096;
};

// Near-kernel of the pencil (L+, W), correlated against the analytic candidates in the
// W-weighted product.
inline SpectrumReport near_kernel(const LinearizedOperator& Lp, const KernelCandidates& kc,
                                  const NearKernelOptions& opt = {}) {
  const int N = Lp.params().N;
  const int k = opt.count > 0 ? opt.count : 2 * N + 4;
  SymOperator T = Lp.resolvent();
  EigPairs ep = Lp.size() <= opt.dense_limit ? dense_dominant_eigenpairs(T, k)
                                             : dominant_eigenpairs(T, k, k + 8, opt.seed);
  SpectrumReport r = pencil_report(ep, opt.tol_gap, k);
  auto cands = kc.all();
  Eigen::MatrixXd C(Eigen::Index(Lp.size()), Eigen::Index(cands.size()));
  for (std::size_t j = 0; j < cands.size(); ++j)
    for (std::size_t i = 0; i < Lp.size(); ++i) C(Eigen::Index(i), Eigen::Index(j)) = Lp.sqrtW()[i] * cands[j][i];
  correlate_kernel(r, C);
  return r;
}

// Pencil eigenvalue carried by U itself: L+ U = [(1-p) + 2(c-a)/c] U^p and W U = p U^p.
inline double predicted_u_mode(int N, double s, double a, double c) {
  double p = critical_exponents(N, s).power();
  return ((1 - p) + 2 * (c - a) / c) / p;
}

// ---- identities ------------------------------------------------------------------

struct IdentityReport {
  double self_adjoint_gap = 0;   // max over random v, relative
  double pohozaev_lhs = 0, pohozaev_rhs = 0, pohozaev_gap = 0;
  double multiplier = 0, multiplier_margin = 0;
  double e0_orthogonality = 0;   // |<e0, U>_D| / (|e0|_D |U|_D)
  double c = 0;
};

// <u, (-Delta)^s v> with the symmetric square root on each side, periodic multiplier.
inline double half_form(const BoxGrid& g, double s, const std::vector<double>& u, const std::vector<double>& v) {
  BoxLaplacian half(g, s, ZeroMode::periodic);
  auto hu = half.apply(u, 0.5), hv = half.apply(v, 0.5);
  return dot_box(g, hu, hv);
}

inline IdentityReport verify_linearization_identities(const ProblemParams& p, const BoxGrid& g, const SpectralField& U,
                                               const KernelCandidates& kc, ZeroMode zm = ZeroMode::free_space,
                                               unsigned seed = 1) {
  p.validate();
  check_on_grid(g, U);
  IdentityReport r;
  BoxLaplacian K(g, p.s, zm);
  auto KU = K.apply(U.values);
  double semi = dot_box(g, U.values, KU);
  r.c = p.a + p.b * semi;

  // (i) <v, (-Delta)^s U> = <(-Delta)^{s/2} U, (-Delta)^{s/2} v> on band-limited v
  BoxLaplacian Kp(g, p.s, ZeroMode::periodic);
  auto KpU = Kp.apply(U.values);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  int idx[3];
  for (int t = 0; t < 10; ++t) {
    std::vector<double> v(g.size(), 0.0);
    for (int term = 0; term < 4; ++term) {
      double amp = nd(rng), ph = nd(rng);
      int kv[3] = {0, 0, 0};
      for (int d = 0; d < g.N; ++d) kv[d] = int(rng() % 9) - 4;
      for (std::size_t k = 0; k < v.size(); ++k) {
        g.unravel(k, idx);
        double arg = ph;
        for (int d = 0; d < g.N; ++d) arg += M_PI * kv[d] * g.coord(idx[d]) / g.L;
        v[k] += amp * std::cos(arg);
      }
    }
    double lhs = dot_box(g, v, KpU), rhs = half_form(g, p.s, U.values, v);
    double scale = std::sqrt(dot_box(g, KpU, KpU) * dot_box(g, v, v));
    r.self_adjoint_gap = std::max(r.self_adjoint_gap, std::abs(lhs - rhs) / scale);
  }

  // (ii) int psi (-Delta)^s U = (2s-N)/2 |U|_D^2
  r.pohozaev_lhs = dot_box(g, kc.psi, KU);
  r.pohozaev_rhs = 0.5 * (2 * p.s - p.N) * semi;
  r.pohozaev_gap = std::abs(r.pohozaev_lhs - r.pohozaev_rhs) / std::abs(r.pohozaev_rhs);

  // (iii) the sigma_v fixed-point multiplier
  r.multiplier = -(r.c - p.a) * (2 * p.s - p.N) / (2 * p.s * r.c);
  r.multiplier_margin = 1 - r.multiplier;

  // (iv) e0 against U in the D-form
  auto Ke0 = K.apply(kc.dilation);
  double e0U = dot_box(g, kc.dilation, KU), e0e0 = dot_box(g, kc.dilation, Ke0);
  r.e0_orthogonality = std::abs(e0U) / std::sqrt(std::abs(e0e0) * semi);
  return r;
}

// Pohozaev identity on the mean-zero localized field u = (N - r^2) e^{-r^2/2} / 2 = -Delta(e^{-r^2/2}) / 2.
// Its transform is (2 pi)^{N/2} k^2/2 e^{-k^2/2}, so |u|_D^2 = |S| G(s+2+N/2) / 8 in closed form.
// Zero mean removes the leading periodic-image error of the box.
struct TestFieldPohozaev {
  double lhs = 0, rhs = 0, gap = 0;
  double seminorm_gap = 0;
};

inline TestFieldPohozaev pohozaev_test_field(const BoxGrid& g, double s) {
  check_order(s);
  const int N = g.N;
  std::vector<double> u(g.size()), psi(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double r2 = g.radius_sq(k), e = std::exp(-0.5 * r2);
    u[k] = 0.5 * (N - r2) * e;
    psi[k] = (0.5 * r2 * r2 - (1 + 0.5 * N) * r2) * e;
  }
  BoxLaplacian K(g, s, ZeroMode::free_space);
  auto Ku = K.apply(u);
  const double semi = sphere_area(N) / 8 * std::tgamma(s + 2 + 0.5 * N);
  TestFieldPohozaev r;
  r.lhs = dot_box(g, psi, Ku);
  r.rhs = 0.5 * (2 * s - N) * semi;
  r.gap = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
  r.seminorm_gap = std::abs(dot_box(g, u, Ku) - semi) / semi;
  return r;
}

}  // namespace fkirch
