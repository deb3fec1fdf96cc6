#pragma once
// Fractional Laplacian: Fourier multiplier on the periodic box, spectral calculus of
// the finite-volume radial operator -Delta_l on the half-line.
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "dense_eig.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "grids.hpp"
#include "zeta.hpp"

namespace fkirch {

enum class Meaning { function, frac_half_laplacian_of, frac_laplacian_of };

struct SpectralField {
  std::string grid_id;
  std::vector<double> values;
  Meaning meaning = Meaning::function;
};

template <class Grid>
SpectralField make_field(const Grid& g, std::vector<double> values,
                         Meaning meaning = Meaning::function) {
  require(values.size() == g.size(), "field length does not match grid " + g.id());
  for (double v : values) require(std::isfinite(v), "field has non-finite values");
  return SpectralField{g.id(), std::move(values), meaning};
}

template <class Grid>
void check_on_grid(const Grid& g, const SpectralField& u) {
  require(u.grid_id == g.id() && u.values.size() == g.size(),
          "grid mismatch: field on '" + u.grid_id + "', operator on '" + g.id() + "'");
}

inline void check_order(double s) { require(s > 0 && s < 1, "fractional order s outside (0,1)"); }

// periodic: the zero mode is annihilated (torus operator).
// free_space: the zero mode gets a negative symbol chosen so that the inverse
// multiplier reproduces the whole-space Riesz potential; removes the O(L^{-N})
// offset the torus operator otherwise imposes on slowly decaying fields.
enum class ZeroMode { periodic, free_space };

inline const char* to_string(ZeroMode z) { return z == ZeroMode::periodic ? "periodic" : "free_space"; }

class BoxLaplacian {
 public:
  BoxLaplacian(const BoxGrid& g, double s, ZeroMode zm = ZeroMode::periodic)
      : g_(g), s_(s), zm_(zm), fft_(std::make_shared<RealFft>(g.N, g.m)) {
    check_order(s);
    const int m = g.m, mh = m / 2 + 1;
    const double k0 = std::numbers::pi / g.L;
    sym_.resize(fft_->cplx_size());
    wt_.resize(fft_->cplx_size());
    int idx[3] = {0, 0, 0};
    for (std::size_t k = 0; k < sym_.size(); ++k) {
      std::size_t r = k;
      idx[g.N - 1] = int(r % std::size_t(mh));
      r /= std::size_t(mh);
      for (int d = g.N - 2; d >= 0; --d) {
        idx[d] = int(r % std::size_t(m));
        r /= std::size_t(m);
      }
      double xi2 = 0;
      for (int d = 0; d < g.N; ++d) {
        int j = idx[d] <= m / 2 ? idx[d] : idx[d] - m;
        xi2 += double(j) * j;
      }
      sym_[k] = std::pow(k0 * k0 * xi2, s);
      int jl = idx[g.N - 1];
      wt_[k] = (jl == 0 || jl == m / 2) ? 1.0 : 2.0;
    }
    sym0_ = zm == ZeroMode::periodic ? 0.0 : free_space_zero_symbol(g.N, s, g.L);
    sym_[0] = sym0_;
  }

  const BoxGrid& grid() const { return g_; }
  double order() const { return s_; }
  ZeroMode zero_mode() const { return zm_; }
  double zero_symbol() const { return sym0_; }

  // out = (symbol)^power applied to u. power = -1 needs a nonzero zero-mode symbol.
  void apply(const double* u, double* out, double power = 1.0) const {
    CplxBuf c = fft_->cplx_buffer();
    fft_->forward(u, c.get());
    const double inv = 1.0 / double(fft_->real_size());
    for (std::size_t k = 0; k < sym_.size(); ++k) {
      double f = mult(k, power) * inv;
      c[k][0] *= f;
      c[k][1] *= f;
    }
    fft_->backward(c.get(), out);
  }
  std::vector<double> apply(const std::vector<double>& u, double power = 1.0) const {
    require(u.size() == g_.size(), "BoxLaplacian::apply: length mismatch");
    std::vector<double> out(u.size());
    apply(u.data(), out.data(), power);
    return out;
  }

  // Parseval form sum_k symbol |u_k|^2, scaled to the continuum integral.
  double seminorm_sq(const std::vector<double>& u) const {
    require(u.size() == g_.size(), "seminorm_sq: length mismatch");
    CplxBuf c = fft_->cplx_buffer();
    fft_->forward(u.data(), c.get());
    double acc = 0;
    for (std::size_t k = 0; k < sym_.size(); ++k)
      acc += wt_[k] * sym_[k] * (c[k][0] * c[k][0] + c[k][1] * c[k][1]);
    return acc * g_.cell_volume() / double(fft_->real_size());
  }

 private:
  double mult(std::size_t k, double power) const {
    if (power == 1.0) return sym_[k];
    if (k == 0) {
      if (sym0_ == 0) {
        require(power > 0, "inverse of the periodic fractional Laplacian is undefined on the zero mode");
        return 0.0;
      }
      require(sym0_ > 0 || power == std::round(power),
              "fractional power of a negative zero-mode symbol is undefined");
      return std::pow(sym0_, power);
    }
    return std::pow(sym_[k], power);
  }

  BoxGrid g_;
  double s_;
  ZeroMode zm_;
  std::shared_ptr<RealFft> fft_;
  std::vector<double> sym_, wt_;
  double sym0_ = 0;
};

inline SpectralField apply_frac_laplacian_box(const BoxGrid& g, double s, const SpectralField& u,
                                              ZeroMode zm = ZeroMode::periodic) {
  check_order(s);
  check_on_grid(g, u);
  BoxLaplacian op(g, s, zm);
  return SpectralField{g.id(), op.apply(u.values), Meaning::frac_laplacian_of};
}

inline double seminorm_sq(const BoxGrid& g, double s, const SpectralField& u,
                          ZeroMode zm = ZeroMode::periodic) {
  check_order(s);
  check_on_grid(g, u);
  return BoxLaplacian(g, s, zm).seminorm_sq(u.values);
}

// ---- dense operators -------------------------------------------------------

enum class OpKind : std::uint32_t {
  frac_laplacian = 1,
  sector_laplacian = 2,
  base_A = 3,
  L_plus = 4,
  L_plus_sector = 5,
};

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::frac_laplacian: return "frac_laplacian";
    case OpKind::sector_laplacian: return "sector_laplacian";
    case OpKind::base_A: return "base_A";
    case OpKind::L_plus: return "L_plus";
    case OpKind::L_plus_sector: return "L_plus_sector";
  }
  return "?";
}

struct DiscreteOperator {
  Eigen::MatrixXd matrix;
  std::string grid_ref;
  OpKind kind = OpKind::frac_laplacian;
  int l = -1;  // angular index for sector kinds
  double s = 0;

  double symmetry_defect() const {
    double n = matrix.norm();
    return n == 0 ? 0 : (matrix - matrix.transpose()).norm() / n;
  }
  double min_eigenvalue() const { return sym_eig(matrix).values(0); }
  // kind tag on disk: low byte = kind, next bytes = l + 1 (0 when not a sector kind)
  std::uint64_t tag() const { return std::uint64_t(kind) | (std::uint64_t(l + 1) << 8); }
};

// Row-major little-endian doubles after a 16-byte header (dimension, kind tag).
inline void dump_operator(const DiscreteOperator& op, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open " + path + " for writing");
  std::uint64_t hdr[2] = {std::uint64_t(op.matrix.rows()), op.tag()};
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = op.matrix;
  os.write(reinterpret_cast<const char*>(rm.data()), std::streamsize(sizeof(double) * rm.size()));
  if (!os) throw NumericalFailure("short write to " + path);
}

inline DiscreteOperator load_operator(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "cannot open " + path);
  std::uint64_t hdr[2];
  is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  require(bool(is) && hdr[0] < (1u << 20), "bad operator header in " + path);
  const auto n = Eigen::Index(hdr[0]);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
  is.read(reinterpret_cast<char*>(rm.data()), std::streamsize(sizeof(double) * rm.size()));
  require(bool(is), "truncated operator file " + path);
  DiscreteOperator op;
  op.matrix = rm;
  op.kind = OpKind(hdr[1] & 0xff);
  op.l = int(hdr[1] >> 8) - 1;
  op.grid_ref = path;
  return op;
}

// Dense matrix of the box multiplier, by columns; only for small grids.
inline DiscreteOperator box_frac_laplacian_matrix(const BoxGrid& g, double s,
                                                  ZeroMode zm = ZeroMode::periodic) {
  require(g.size() <= 4096, "dense box operator limited to 4096 unknowns");
  BoxLaplacian op(g, s, zm);
  const auto n = Eigen::Index(g.size());
  DiscreteOperator D;
  D.matrix.resize(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1;
    op.apply(e.data(), col.data());
    e[j] = 0;
    for (Eigen::Index i = 0; i < n; ++i) D.matrix(i, j) = col[i];
  }
  D.matrix = 0.5 * (D.matrix + D.matrix.transpose()).eval();
  D.grid_ref = g.id();
  D.kind = OpKind::frac_laplacian;
  D.s = s;
  return D;
}

// ---- radial sectors --------------------------------------------------------

// Outer condition at R_max. robin imposes the algebraic decay f' = -(N-2s+l) f / r
// expected of fields decaying like the bubble.
enum class OuterBC { dirichlet, robin };

inline const char* to_string(OuterBC b) { return b == OuterBC::dirichlet ? "dirichlet" : "robin"; }

// Symmetric stiffness S with <f, -Delta_l f>_w = f^T S f (cell-centred finite volumes).
// l = 0: no flux through r = 0; l >= 1: f(0) = 0.
inline Eigen::MatrixXd sector_stiffness(const RadialGrid& g, int l, double s, OuterBC bc) {
  require(l >= 0, "negative angular index l");
  const int M = int(g.size()), N = g.N;
  const auto& r = g.nodes;
  const auto& f = g.faces;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(M, M);
  for (int i = 0; i + 1 < M; ++i) {
    double k = std::pow(f[i + 1], N - 1) / (r[i + 1] - r[i]);
    S(i, i) += k;
    S(i + 1, i + 1) += k;
    S(i, i + 1) -= k;
    S(i + 1, i) -= k;
  }
  if (l >= 1) S(0, 0) += std::pow(0.5 * r[0], N - 1) / r[0];
  const double R = g.R_max;
  if (bc == OuterBC::dirichlet)
    S(M - 1, M - 1) += std::pow(R, N - 1) / (R - r[M - 1]);
  else
    S(M - 1, M - 1) += (N - 2 * s + l) * std::pow(R, N - 2);
  const double cf = double(l) * (l + N - 2);
  if (cf != 0)
    for (int i = 0; i < M; ++i) S(i, i) += g.weights[i] * cf / (r[i] * r[i]);
  return S;
}

// -Delta_l in symmetric coordinates y = sqrt(w) f: H = W^{-1/2} S W^{-1/2}.
struct SectorLaplacian {
  RadialGrid grid;
  int l = 0;
  double s = 0;
  OuterBC bc = OuterBC::dirichlet;
  Eigen::MatrixXd H;        // symmetric form of -Delta_l
  SymEig eig;               // of H, eigenvalues clamped at 0
  Eigen::VectorXd sqrtw;
  DiscreteOperator op;      // H^s

  // H^t by spectral calculus
  Eigen::MatrixXd power_matrix(double t) const {
    Eigen::VectorXd d = eig.values.array().pow(t);
    return eig.vectors * d.asDiagonal() * eig.vectors.transpose();
  }
  // (-Delta_l)^t f for samples f at the nodes
  std::vector<double> apply(const std::vector<double>& fv, double t) const {
    require(fv.size() == grid.size(), "sector apply: length mismatch");
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(fv.data(), Eigen::Index(fv.size()));
    y = y.cwiseProduct(sqrtw);
    Eigen::VectorXd c = eig.vectors.transpose() * y;
    c = c.cwiseProduct(eig.values.array().pow(t).matrix());
    Eigen::VectorXd z = (eig.vectors * c).cwiseQuotient(sqrtw);
    return std::vector<double>(z.data(), z.data() + z.size());
  }
};

// materialize = false skips the dense H^s (an O(M^3) product); apply() still works.
inline SectorLaplacian assemble_sector_laplacian(const RadialGrid& g, int N, int l, double s,
                                                 OuterBC bc = OuterBC::dirichlet, bool materialize = true) {
  require(N == g.N, "assemble_sector_laplacian: dimension does not match grid");
  require(l >= 0, "negative angular index l");
  require(s > 0 && s <= 1, "fractional order s outside (0,1]");
  SectorLaplacian sl;
  sl.grid = g;
  sl.l = l;
  sl.s = s;
  sl.bc = bc;
  const int M = int(g.size());
  sl.sqrtw.resize(M);
  for (int i = 0; i < M; ++i) sl.sqrtw(i) = std::sqrt(g.weights[i]);
  Eigen::MatrixXd S = sector_stiffness(g, l, s, bc);
  Eigen::VectorXd iw = sl.sqrtw.cwiseInverse();
  sl.H = iw.asDiagonal() * S * iw.asDiagonal();
  // H is tridiagonal and strongly graded near the origin
  Eigen::VectorXd dd = sl.H.diagonal(), ee = sl.H.diagonal(1);
  sl.eig = sym_tridiag_eig(dd, ee);
  if (!sl.eig.values.allFinite()) throw NumericalFailure("sector diagonalization produced non-finite values");
  sl.eig.values = sl.eig.values.cwiseMax(0.0);
  if (materialize) sl.op.matrix = sl.power_matrix(s);
  sl.op.grid_ref = g.id();
  sl.op.kind = OpKind::sector_laplacian;
  sl.op.l = l;
  sl.op.s = s;
  return sl;
}

// Radial seminorm: |S^{N-1}| <f, (-Delta_0)^s f>_w.
inline double seminorm_sq(const RadialGrid& g, double s, const SpectralField& u,
                          OuterBC bc = OuterBC::robin) {
  check_order(s);
  check_on_grid(g, u);
  SectorLaplacian sl = assemble_sector_laplacian(g, g.N, 0, s, bc);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(u.values.data(), Eigen::Index(u.values.size()))
                          .cwiseProduct(sl.sqrtw);
  Eigen::VectorXd c = sl.eig.vectors.transpose() * y;
  double acc = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) acc += std::pow(sl.eig.values(i), s) * c(i) * c(i);
  return sphere_area(g.N) * acc;
}

}  // namespace fkirch
