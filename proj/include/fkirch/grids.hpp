#pragma once
// Radial half-line and periodic box discretizations.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fkirch {

enum class Stretch { uniform, algebraic };

inline const char* to_string(Stretch s) { return s == Stretch::uniform ? "uniform" : "algebraic"; }

// |S^{N-1}|; for N=1 the "sphere" is two points.
inline double sphere_area(int N) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N);
}

struct RadialGrid {
  int N = 0;
  int M = 0;
  double R_max = 0;
  Stretch stretch = Stretch::algebraic;
  double exponent = 1;         // r = R t^q, q = exponent (1 for uniform)
  std::vector<double> nodes;   // cell centres
  std::vector<double> faces;   // M+1 cell faces, faces[0] = 0
  std::vector<double> weights; // includes r^{N-1} and the Jacobian

  std::size_t size() const { return nodes.size(); }
  std::string id() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "radial:N=%d,M=%d,R=%.17g,%s,q=%.17g", N, M, R_max,
                  to_string(stretch), exponent);
    return buf;
  }
};

// Midpoint rule in t on r = R t^q with the Jacobian folded into the weights.
// q = 3 keeps the pulled-back integrand even at t = 0 for integrands smooth in r^2,
// so odd-derivative endpoint terms vanish there.
inline RadialGrid make_radial_grid(int N, int M, double R_max, Stretch stretch,
                                   double exponent = 3.0) {
  require(N >= 1 && N <= 3, "invalid dimension N=" + std::to_string(N));
  require(M >= 32, "radial point count M=" + std::to_string(M) + " below minimum 32");
  require(R_max > 0 && std::isfinite(R_max), "non-positive R_max");
  double q = stretch == Stretch::uniform ? 1.0 : exponent;
  require(q >= 1, "stretch exponent must be >= 1");
  RadialGrid g;
  g.N = N;
  g.M = M;
  g.R_max = R_max;
  g.stretch = stretch;
  g.exponent = q;
  g.nodes.resize(M);
  g.weights.resize(M);
  g.faces.resize(M + 1);
  for (int i = 0; i <= M; ++i) g.faces[i] = R_max * std::pow(double(i) / M, q);
  for (int i = 0; i < M; ++i) {
    double t = (i + 0.5) / M;
    double r = R_max * std::pow(t, q);
    g.nodes[i] = r;
    g.weights[i] = q * R_max * std::pow(t, q - 1) / M * std::pow(r, N - 1);
  }
  return g;
}

// Sum w_i f_i ~ int_0^R f r^{N-1} dr; full_space multiplies by |S^{N-1}|.
inline double integrate_radial(const RadialGrid& g, const std::vector<double>& f,
                               bool full_space = false) {
  require(f.size() == g.size(), "integrate_radial: length mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += g.weights[i] * f[i];
  return full_space ? acc * sphere_area(g.N) : acc;
}

inline constexpr std::size_t default_box_budget = std::size_t(1) << 24;

struct BoxGrid {
  int N = 0;
  double L = 0;  // box is [-L, L)^N
  int m = 0;     // points per axis

  double dx() const { return 2 * L / m; }
  double cell_volume() const { return std::pow(dx(), N); }
  std::size_t size() const {
    std::size_t n = 1;
    for (int d = 0; d < N; ++d) n *= std::size_t(m);
    return n;
  }
  double coord(int j) const { return -L + j * dx(); }
  BoxGrid scaled(double factor) const { return BoxGrid{N, L * factor, m}; }
  std::string id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "box:N=%d,L=%.17g,m=%d", N, L, m);
    return buf;
  }
  // Flat index -> multi-index, row-major with the last axis fastest.
  void unravel(std::size_t k, int* idx) const {
    for (int d = N - 1; d >= 0; --d) {
      idx[d] = int(k % std::size_t(m));
      k /= std::size_t(m);
    }
  }
  double radius_sq(std::size_t k) const {
    int idx[3];
    unravel(k, idx);
    double r2 = 0;
    for (int d = 0; d < N; ++d) r2 += coord(idx[d]) * coord(idx[d]);
    return r2;
  }
};

inline BoxGrid make_box_grid(int N, double L, int m, std::size_t budget = default_box_budget) {
  require(N >= 1 && N <= 3, "invalid dimension N=" + std::to_string(N));
  require(L > 0 && std::isfinite(L), "box half-width L must be positive");
  require(m >= 16, "box points per axis m=" + std::to_string(m) + " below minimum 16");
  require((m & (m - 1)) == 0, "box points per axis m=" + std::to_string(m) + " is not a power of two");
  BoxGrid g{N, L, m};
  require(g.size() <= budget, "box point count " + std::to_string(g.size()) +
                                  " exceeds budget " + std::to_string(budget));
  return g;
}

// Discrete integral over the box.
inline double integrate_box(const BoxGrid& g, const std::vector<double>& f) {
  require(f.size() == g.size(), "integrate_box: length mismatch");
  double acc = 0;
  for (double v : f) acc += v;
  return acc * g.cell_volume();
}

inline double dot_box(const BoxGrid& g, const std::vector<double>& u, const std::vector<double>& v) {
  require(u.size() == g.size() && v.size() == g.size(), "dot_box: length mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc * g.cell_volume();
}

}  // namespace fkirch
