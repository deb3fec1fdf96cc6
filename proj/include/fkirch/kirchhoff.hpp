#pragma once
// Scalar root E0 of f(E) = E - a - b kappa E^theta, the rescaled ground state
// U(x) = Q(E0^{-1/(2s)} x), and the inverse map U -> (E0, x0).
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bubble.hpp"
#include "errors.hpp"
#include "grids.hpp"
#include "spectral.hpp"

namespace fkirch {

struct ProblemParams {
  int N = 2;
  double s = 0.75;
  double a = 1;
  double b = 1;

  // b = 0 is accepted: it is the pure limit equation used as a control.
  void validate() const {
    check_window(N, s);
    require(a > 0 && std::isfinite(a), "parameter a must be positive");
    require(b >= 0 && std::isfinite(b), "parameter b must be non-negative");
  }
};

struct ScalingCertificate {
  double E0 = 0;
  double kappa = 0;
  double theta = 0;
  double f_residual = 0;
  double df_at_root = 0;
  double bracket_lo = 0, bracket_hi = 0;
  double consistency_gap = NAN;  // filled once U is known
  double f_at_a = 0;
  bool convex_at_samples = false;
  int iterations = 0;

  double lambda(double s) const { return std::pow(E0, 1 / (2 * s)); }
};

struct RootFunction {
  double a, b, kappa, theta;
  double f(double E) const { return E - a - b * kappa * std::pow(E, theta); }
  double df(double E) const { return 1 - b * kappa * theta * std::pow(E, theta - 1); }
  double d2f(double E) const { return -b * kappa * theta * (theta - 1) * std::pow(E, theta - 2); }
};

// Bracket + safeguarded Newton. f is convex with f(a) < 0, so there is exactly one
// root in (a, inf), on the increasing branch.
inline ScalingCertificate solve_E0(const ProblemParams& p, double kappa,
                                   std::optional<double> theta_override = std::nullopt) {
  p.validate();
  require(kappa > 0 && std::isfinite(kappa), "kappa must be positive");
  const double theta = theta_override ? *theta_override : (p.N - 2 * p.s) / (2 * p.s);
  require(theta > 0 && theta < 1, "theta must lie in (0,1)");
  RootFunction rf{p.a, p.b, kappa, theta};

  ScalingCertificate c;
  c.kappa = kappa;
  c.theta = theta;
  c.f_at_a = rf.f(p.a);
  double lo = p.a, hi = 2 * std::max(p.a, 1.0);
  if (p.b == 0) {
    lo = hi = p.a;
  } else {
    int k = 0;
    while (!(rf.f(hi) > 0)) {
      lo = hi;
      hi *= 2;
      if (++k > 2000) throw NumericalFailure("solve_E0: bracket expansion failed");
    }
  }
  double E = hi;
  int it = 0;
  if (p.b > 0) {
    for (; it < 500; ++it) {
      double fv = rf.f(E);
      if (fv < 0) lo = E;
      else hi = E;
      if (std::abs(fv) < 1e-12 * std::max(1.0, E) && it > 0) {
        // two more Newton steps to land on round-off
        for (int j = 0; j < 2; ++j) {
          double d = rf.df(E);
          double En = E - rf.f(E) / d;
          if (En > lo && En < hi && std::abs(rf.f(En)) <= std::abs(rf.f(E))) E = En;
        }
        break;
      }
      double d = rf.df(E);
      double En = d > 0 ? E - fv / d : NAN;
      if (!(En > lo && En < hi)) En = 0.5 * (lo + hi);
      E = En;
    }
    if (it == 500) throw NumericalFailure("solve_E0: no convergence");
  }
  c.E0 = E;
  c.iterations = it;
  c.bracket_lo = lo;
  c.bracket_hi = hi;
  c.f_residual = std::abs(rf.f(E));
  c.df_at_root = rf.df(E);
  // with b = 0 f is linear and there is nothing to certify
  c.convex_at_samples = p.b > 0;
  for (int i = 0; i < 10 && p.b > 0; ++i) {
    double Es = p.a * std::pow(10.0 * E / p.a, i / 9.0);
    if (!(rf.d2f(Es) > 0)) c.convex_at_samples = false;
  }
  return c;
}

// Sign changes of f and convexity on a log-spaced mesh over (a, hi].
struct RootScan {
  int sign_changes = 0;
  bool convex_everywhere = true;
  int points = 0;
};

inline RootScan scan_root_function(const ProblemParams& p, double kappa, double theta, double hi,
                                   int points = 4000) {
  RootFunction rf{p.a, p.b, kappa, theta};
  RootScan sc;
  sc.points = points;
  double prev = rf.f(p.a * (1 + 1e-12));
  for (int i = 1; i <= points; ++i) {
    double E = p.a * std::pow(hi / p.a, double(i) / points);
    double v = rf.f(E);
    if ((prev < 0) != (v < 0)) ++sc.sign_changes;
    if (!(rf.d2f(E) > 0)) sc.convex_everywhere = false;
    prev = v;
  }
  return sc;
}

// ---- construction -------------------------------------------------------------

inline double kirchhoff_residual(const ProblemParams& p, const BoxGrid& g, const std::vector<double>& U,
                                 double semi, const BoxLaplacian& op) {
  const double pw = critical_exponents(p.N, p.s).power();
  auto KU = op.apply(U);
  const double c = p.a + p.b * semi;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    double rhs = std::pow(U[i], pw);
    num += std::pow(c * KU[i] - rhs, 2);
    den += rhs * rhs;
  }
  (void)g;
  return std::sqrt(num / den);
}

// U(x) = Q(E0^{-1/(2s)} x), evaluated analytically.
inline SpectralField construct_ground_state(const ProblemParams& p, const BubbleProfile& Q,
                                            const ScalingCertificate& cert, const BoxGrid& g,
                                            double min_points_per_mu = 2.0) {
  p.validate();
  Q.validate();
  require(Q.N == p.N && Q.s == p.s && g.N == p.N, "construct_ground_state: dimension/order mismatch");
  require(cert.E0 > 0, "construct_ground_state: invalid certificate");
  double lam = cert.lambda(p.s);
  require(lam * Q.mu / g.dx() >= min_points_per_mu,
          "grid does not resolve the rescaled bubble: lambda*mu/dx = " + std::to_string(lam * Q.mu / g.dx()));
  return make_field(g, sample_bubble(g, Q, lam));
}

// Everything the later stages need about U on one box.
struct GroundState {
  ProblemParams params;
  BoxGrid grid;
  ZeroMode zero_mode = ZeroMode::free_space;
  Calibration calibration;  // on the pulled-back box grid/lambda
  BubbleProfile Q;
  ScalingCertificate cert;
  SpectralField U;
  double semi_U = 0;
  double residual = 0;
  double kappa_closed_form = 0;
  int fixed_point_iterations = 0;
  double lambda() const { return cert.lambda(params.s); }
};

// kappa is measured on the pulled-back box g/lambda, where U's samples are exactly
// those of Q; lambda depends on kappa, hence the fixed point. Scale covariance of the
// multiplier then makes E0 = a + b |U|^2 hold to round-off.
inline GroundState build_ground_state(const ProblemParams& p, const BoxGrid& g,
                                      ZeroMode zm = ZeroMode::free_space,
                                      double min_points_per_mu = 2.0) {
  p.validate();
  require(g.N == p.N, "build_ground_state: grid dimension mismatch");
  GroundState gs;
  gs.params = p;
  gs.grid = g;
  gs.zero_mode = zm;
  gs.Q.N = p.N;
  gs.Q.s = p.s;
  // start from the whole-space kappa; the box value differs only by the tail
  double lam = solve_E0(p, bubble_kappa_exact(p.N, p.s)).lambda(p.s);
  for (int it = 0; it < 40; ++it) {
    BoxGrid gq = g.scaled(1 / lam);
    // resolution is enforced on the final lambda by construct_ground_state
    gs.calibration = calibrate_normalization(p.N, p.s, gq, zm, 0.0);
    gs.Q.C = gs.calibration.C;
    double kappa = BoxLaplacian(gq, p.s, zm).seminorm_sq(sample_bubble(gq, gs.Q));
    gs.cert = solve_E0(p, kappa);
    double next = gs.cert.lambda(p.s);
    gs.fixed_point_iterations = it + 1;
    bool done = std::abs(next / lam - 1) < 1e-12;
    lam = next;
    if (done) break;
  }
  gs.U = construct_ground_state(p, gs.Q, gs.cert, g, min_points_per_mu);
  BoxLaplacian op(g, p.s, zm);
  gs.semi_U = op.seminorm_sq(gs.U.values);
  gs.cert.consistency_gap = std::abs(gs.cert.E0 - p.a - p.b * gs.semi_U) / gs.cert.E0;
  gs.residual = kirchhoff_residual(p, g, gs.U.values, gs.semi_U, op);
  gs.kappa_closed_form = bubble_kappa_exact(p.N, p.s);
  return gs;
}

// ---- inversion ---------------------------------------------------------------

struct Inversion {
  double E0 = 0;
  std::array<double, 3> x0{0, 0, 0};
  double nu = 0;       // fitted width of U (= lambda mu)
  double mu = 0;       // width pulled back by lambda = E0^{1/(2s)}
  double C = 0;        // bubble constant pulled back
  double fit_residual = 0;  // max |U - fit| / max U
  bool ground_state = false;
};

// Fits a bubble to U using y = U^{-1/alpha}, which is exactly quadratic in x for a bubble:
// the vertex gives x0, the half-height radius gives the width.
inline Inversion invert_ground_state(const ProblemParams& p, const BoxGrid& g, const SpectralField& U,
                                     ZeroMode zm = ZeroMode::free_space, double threshold = 1e-2) {
  p.validate();
  check_on_grid(g, U);
  for (double v : U.values) require(v > 0, "invert_ground_state: field is not positive");
  Inversion inv;
  BoxLaplacian op(g, p.s, zm);
  inv.E0 = p.a + p.b * op.seminorm_sq(U.values);

  const double al = 0.5 * (p.N - 2 * p.s);
  std::size_t kmax = 0;
  for (std::size_t k = 1; k < U.values.size(); ++k)
    if (U.values[k] > U.values[kmax]) kmax = k;
  int idx[3];
  g.unravel(kmax, idx);
  std::size_t stride[3];
  stride[g.N - 1] = 1;
  for (int d = g.N - 2; d >= 0; --d) stride[d] = stride[d + 1] * std::size_t(g.m);
  auto at = [&](int d, int j) {
    std::size_t k = kmax - std::size_t(idx[d]) * stride[d] + std::size_t((j + g.m) % g.m) * stride[d];
    return std::pow(U.values[k], -1 / al);
  };
  double h = g.dx();
  for (int d = 0; d < g.N; ++d) {
    double ym = at(d, idx[d] - 1), y0 = at(d, idx[d]), yp = at(d, idx[d] + 1);
    double curv = ym - 2 * y0 + yp;
    double shift = curv > 0 ? 0.5 * h * (ym - yp) / curv : 0.0;
    inv.x0[d] = g.coord(idx[d]) + shift;
  }
  // half-height radius along axis 0 through the peak, interpolating y linearly in r^2
  double peak_y = at(0, idx[0]);
  double peak = std::pow(peak_y, -al);
  double target = peak_y * std::pow(2.0, 1 / al);
  double r_half = NAN;
  for (int j = idx[0] + 1; j < idx[0] + g.m / 2; ++j) {
    double y1 = at(0, j - 1), y2 = at(0, j);
    if (y2 >= target) {
      double r1 = g.coord(idx[0]) + (j - 1 - idx[0]) * h - inv.x0[0];
      double r2 = r1 + h;
      double q1 = r1 * r1, q2 = r2 * r2;
      double q = q1 + (target - y1) * (q2 - q1) / (y2 - y1);
      r_half = std::sqrt(std::max(q, 0.0));
      break;
    }
  }
  if (!std::isfinite(r_half)) {
    inv.fit_residual = INFINITY;
    return inv;
  }
  inv.nu = r_half / std::sqrt(std::pow(2.0, 1 / al) - 1);
  double A = peak * std::pow(inv.nu, al);
  double lam = std::pow(inv.E0, 1 / (2 * p.s));
  inv.mu = inv.nu / lam;
  inv.C = A / std::pow(lam, al);
  double err = 0, top = 0;
  double x[3];
  for (std::size_t k = 0; k < U.values.size(); ++k) {
    g.unravel(k, idx);
    double r2 = 0;
    for (int d = 0; d < g.N; ++d) {
      x[d] = g.coord(idx[d]) - inv.x0[d];
      r2 += x[d] * x[d];
    }
    double fit = A * std::pow(inv.nu / (inv.nu * inv.nu + r2), al);
    err = std::max(err, std::abs(U.values[k] - fit));
    top = std::max(top, U.values[k]);
  }
  inv.fit_residual = err / top;
  inv.ground_state = inv.fit_residual <= threshold;
  return inv;
}

}  // namespace fkirch
