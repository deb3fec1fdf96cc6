#pragma once
// The explicit bubble Q = C (mu / (mu^2 + |x - xi|^2))^{(N-2s)/2}, its normalization,
// and the critical Sobolev quotient.
#include <array>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grids.hpp"
#include "spectral.hpp"

namespace fkirch {

// 2s < N < 4s: needed for the critical exponent and for theta in (0,1).
inline void check_window(int N, double s) {
  require(N >= 1 && N <= 3, "dimension N must be 1, 2 or 3");
  require(s > 0 && s < 1, "order s must lie in (0,1)");
  require(2 * s < N && N < 4 * s, "parameters outside the admissible window 2s < N < 4s (N=" +
                                       std::to_string(N) + ", s=" + std::to_string(s) + ")");
}

struct CriticalExponents {
  double two_star = 0;  // 2N/(N-2s)
  double theta = 0;     // (N-2s)/(2s)
  double p_lin = 0;     // 2* - 2, the power in the linearized potential
  double power() const { return two_star - 1; }  // nonlinearity u^{2*-1}
};

inline CriticalExponents critical_exponents(int N, double s) {
  check_window(N, s);
  CriticalExponents e;
  e.two_star = 2.0 * N / (N - 2 * s);
  e.theta = (N - 2 * s) / (2 * s);
  e.p_lin = e.two_star - 2;
  return e;
}

struct BubbleProfile {
  double mu = 1;
  std::array<double, 3> center{0, 0, 0};
  double C = 1;
  int N = 1;
  double s = 0.5;

  double alpha() const { return 0.5 * (N - 2 * s); }
  void validate() const {
    check_window(N, s);
    require(mu > 0, "bubble scale mu must be positive");
    require(C > 0, "bubble constant C must be positive");
  }
};

inline double eval_bubble(const BubbleProfile& b, const double* x) {
  double r2 = 0;
  for (int d = 0; d < b.N; ++d) r2 += (x[d] - b.center[d]) * (x[d] - b.center[d]);
  return b.C * std::pow(b.mu / (b.mu * b.mu + r2), b.alpha());
}

// Samples of x -> Q(x / lambda) on the box.
inline std::vector<double> sample_bubble(const BoxGrid& g, const BubbleProfile& b, double lambda = 1.0) {
  b.validate();
  std::vector<double> v(g.size());
  int idx[3];
  double x[3] = {0, 0, 0};
  for (std::size_t k = 0; k < v.size(); ++k) {
    g.unravel(k, idx);
    for (int d = 0; d < g.N; ++d) x[d] = g.coord(idx[d]) / lambda;
    v[k] = eval_bubble(b, x);
  }
  return v;
}

inline std::vector<double> sample_bubble(const RadialGrid& g, const BubbleProfile& b, double lambda = 1.0) {
  b.validate();
  std::vector<double> v(g.size());
  double x[3] = {0, 0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    x[0] = b.center[0] + g.nodes[i] / lambda;
    x[1] = b.center[1];
    x[2] = b.center[2];
    v[i] = eval_bubble(b, x);
  }
  return v;
}

// Whole-space value of C: C^{4s/(N-2s)} = 4^s Gamma((N+2s)/2) / Gamma((N-2s)/2).
// Cross-check only; the pipeline calibrates C on the grid.
inline double bubble_constant_exact(int N, double s) {
  check_window(N, s);
  double lam = std::pow(4.0, s) * std::tgamma(0.5 * (N + 2 * s)) / std::tgamma(0.5 * (N - 2 * s));
  return std::pow(lam, (N - 2 * s) / (4 * s));
}

// Whole-space kappa = |(-Delta)^{s/2} Q|^2 = int Q^{2*} for mu = 1 and the exact C.
inline double bubble_kappa_exact(int N, double s) {
  auto e = critical_exponents(N, s);
  double C = bubble_constant_exact(N, s);
  return std::pow(C, e.two_star) * std::pow(M_PI, 0.5 * N) * std::tgamma(0.5 * N) / std::tgamma(double(N));
}

struct Calibration {
  int N = 0;
  double s = 0;
  double C = 0;
  double residual = 0;  // relative, at C
  double norm_A2 = 0, dot_AB = 0, norm_B2 = 0;  // A = (-Delta)^s Q_1, B = Q_1^{2*-1}
  std::string resolution;  // "m@L"

  // relative residual |(-Delta)^s Q_C - Q_C^{2*-1}| / |Q_C^{2*-1}|
  double residual_at(double C_) const {
    double t = std::pow(C_, critical_exponents(N, s).power() - 1);
    double num = norm_A2 - 2 * t * dot_AB + t * t * norm_B2;
    return std::sqrt(std::max(num, 0.0)) / (t * std::sqrt(norm_B2));
  }
};

// Residual-minimizing C on the box (mu = 1, xi = 0). The residual is scale-free, so the
// search is one-dimensional in log C.
inline Calibration calibrate_normalization(int N, double s, const BoxGrid& g,
                                           ZeroMode zm = ZeroMode::free_space,
                                           double min_points_per_mu = 2.0) {
  auto ex = critical_exponents(N, s);
  require(g.N == N, "calibrate_normalization: grid dimension mismatch");
  require(1.0 / g.dx() >= min_points_per_mu,
          "grid does not resolve the bubble: mu/dx = " + std::to_string(1.0 / g.dx()));
  BubbleProfile b;
  b.N = N;
  b.s = s;
  auto Q = sample_bubble(g, b);
  BoxLaplacian op(g, s, zm);
  auto A = op.apply(Q);
  Calibration cal;
  cal.N = N;
  cal.s = s;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    double B = std::pow(Q[i], ex.power());
    cal.norm_A2 += A[i] * A[i];
    cal.dot_AB += A[i] * B;
    cal.norm_B2 += B * B;
  }
  char res[64];
  std::snprintf(res, sizeof res, "%d@%.17g", g.m, g.L);
  cal.resolution = res;
  if (!(cal.dot_AB > 0)) throw NumericalFailure("no positive minimizer bracketed: <A,B> <= 0 (grid too coarse or box too small)");
  const double lo = std::log(1e-3), hi = std::log(1e3);
  auto obj = [&](double lc) { return cal.residual_at(std::exp(lc)); };
  auto [lc, fmin] = boost::math::tools::brent_find_minima(obj, lo, hi, 60);
  if (lc - lo < 1e-6 || hi - lc < 1e-6)
    throw NumericalFailure("no positive minimizer bracketed for C (grid too coarse or box too small)");
  cal.C = std::exp(lc);
  cal.residual = fmin;
  return cal;
}

// J(u) = |(-Delta)^{s/2}u|^{2*} / int |u|^{2*}; the L^2 factor drops out at the critical power.
inline double sobolev_quotient(const BoxGrid& g, double s, const SpectralField& u,
                               ZeroMode zm = ZeroMode::periodic) {
  check_on_grid(g, u);
  double ts = 2.0 * g.N / (g.N - 2 * s);
  double den = 0;
  for (double v : u.values) den += std::pow(std::abs(v), ts);
  den *= g.cell_volume();
  require(den > 0, "sobolev_quotient: zero field");
  return std::pow(seminorm_sq(g, s, u, zm), 0.5 * ts) / den;
}

inline double sobolev_quotient(const RadialGrid& g, double s, const SpectralField& u,
                               OuterBC bc = OuterBC::robin) {
  check_on_grid(g, u);
  double ts = 2.0 * g.N / (g.N - 2 * s);
  std::vector<double> p(u.values.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::pow(std::abs(u.values[i]), ts);
  double den = integrate_radial(g, p, true);
  require(den > 0, "sobolev_quotient: zero field");
  return std::pow(seminorm_sq(g, s, u, bc), 0.5 * ts) / den;
}

// ---- plain-text constants cache: lines "N s C residual resolution" ----------

struct CacheEntry {
  int N = 0;
  double s = 0, C = 0, residual = 0;
  std::string resolution;
};

inline std::string format_cache_line(const CacheEntry& e) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.6e %s", e.N, e.s, e.C, e.residual, e.resolution.c_str());
  return buf;
}

inline std::vector<CacheEntry> read_cache(const std::string& path) {
  std::vector<CacheEntry> out;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CacheEntry e;
    if (ls >> e.N >> e.s >> e.C >> e.residual >> e.resolution) out.push_back(e);
  }
  return out;
}

// Replaces any entry with the same (N, s) and resolution.
inline void update_cache(const std::string& path, const CacheEntry& e) {
  auto all = read_cache(path);
  std::erase_if(all, [&](const CacheEntry& x) {
    return x.N == e.N && x.s == e.s && x.resolution == e.resolution;
  });
  all.push_back(e);
  std::ofstream os(path);
  require(bool(os), "cannot write cache " + path);
  os << "# N s C residual resolution(m@L)\n";
  for (auto& x : all) os << format_cache_line(x) << '\n';
}

}  // namespace fkirch
