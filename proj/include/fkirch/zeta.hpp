#pragma once
// Epstein zeta of the integer lattice, used for the zero-mode correction of the
// periodic fractional Laplacian.
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace fkirch {

// Upper incomplete gamma Gamma(a, x) for x > 0 and any real a != 0, -1, -2, ...
inline double upper_gamma(double a, double x) {
  if (a > 0) return boost::math::tgamma(a, x);
  require(a != std::round(a), "upper_gamma: non-positive integer order");
  // Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a
  return (upper_gamma(a + 1, x) - std::pow(x, a) * std::exp(-x)) / a;
}

// Z_N(sigma) = sum'_{k in Z^N} |k|^{-sigma}, analytically continued; valid for sigma != 0, N.
// Ewald splitting at the self-dual point; terms decay like exp(-pi |k|^2).
inline double epstein_zeta(int N, double sigma, int K = 5) {
  require(N >= 1 && N <= 3, "epstein_zeta: N must be 1, 2 or 3");
  require(sigma > 0 && sigma != N, "epstein_zeta: sigma must be positive and != N");
  const double pi = std::numbers::pi;
  double a1 = 0.5 * sigma, a2 = 0.5 * (N - sigma);
  double acc = 2.0 / (sigma - N) - 2.0 / sigma;
  int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int d = 0; d < N; ++d) lo[d] = -K, hi[d] = K;
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        int n2 = i * i + j * j + k * k;
        if (n2 == 0) continue;
        double x = pi * n2;
        double t1 = upper_gamma(a1, x) * std::pow(x, -a1);
        double t2 = upper_gamma(a2, x) * std::pow(x, -a2);
        acc += t1 + t2;
      }
  return acc * std::pow(pi, a1) / std::tgamma(a1);
}

// Zero-mode symbol for (-Delta)^s on [-L, L)^N that makes the inverse multiplier
// match the free-space Riesz potential up to O(L^{-2}) near the origin.
inline double free_space_zero_symbol(int N, double s, double L) {
  require(2 * s < N, "free-space zero mode needs 2s < N");
  double Z = epstein_zeta(N, 2 * s);
  return -std::pow(std::numbers::pi / L, 2 * s) / Z;
}

}  // namespace fkirch
