#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "fkirch/spectral.hpp"

using namespace fkirch;

namespace {

std::vector<double> sample(const BoxGrid& g, auto&& f) {
  std::vector<double> v(g.size());
  int idx[3];
  double x[3];
  for (std::size_t k = 0; k < v.size(); ++k) {
    g.unravel(k, idx);
    for (int d = 0; d < g.N; ++d) x[d] = g.coord(idx[d]);
    v[k] = f(x);
  }
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double frac_const(int N, double s) {
  return s * std::pow(4.0, s) * std::tgamma(0.5 * N + s) /
         (std::pow(M_PI, 0.5 * N) * std::tgamma(1 - s));
}

// (-Delta)^t exp(-|x|^2) in closed form; valid for t > -N/2
double gauss_frac(int N, double t, double r) {
  return std::pow(4.0, t) * std::tgamma(0.5 * N + t) / std::tgamma(0.5 * N) *
         boost::math::hypergeometric_1F1(0.5 * N + t, 0.5 * N, -r * r);
}

// band-limited random field made of a few low modes
std::vector<double> random_modes(const BoxGrid& g, std::mt19937_64& rng, int kmax = 4) {
  std::normal_distribution<double> nd;
  std::vector<double> v(g.size(), 0.0);
  for (int t = 0; t < 6; ++t) {
    double a = nd(rng), ph = nd(rng);
    int kv[3] = {0, 0, 0};
    for (int d = 0; d < g.N; ++d) kv[d] = int(rng() % (2 * kmax + 1)) - kmax;
    auto w = sample(g, [&](const double* x) {
      double arg = ph;
      for (int d = 0; d < g.N; ++d) arg += M_PI * kv[d] * x[d] / g.L;
      return a * std::cos(arg);
    });
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
  }
  return v;
}

}  // namespace

TEST(BoxFracLaplacian, SingleModeIsEigenfunction) {
  auto g = make_box_grid(1, 3.0, 64);
  for (double s : {0.2, 0.5, 0.9}) {
    auto u = make_field(g, sample(g, [&](const double* x) { return std::cos(M_PI * x[0] / g.L); }));
    auto r = apply_frac_laplacian_box(g, s, u);
    EXPECT_EQ(r.meaning, Meaning::frac_laplacian_of);
    double lam = std::pow(M_PI / g.L, 2 * s);
    double err = 0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(r.values[i] - lam * u.values[i]));
    EXPECT_LT(err / lam, 1e-10);
  }
}

TEST(BoxFracLaplacian, ConstantMapsToZero) {
  auto g = make_box_grid(2, 5.0, 32);
  auto r = apply_frac_laplacian_box(g, 0.6, make_field(g, std::vector<double>(g.size(), 1.0)));
  for (double v : r.values) EXPECT_NEAR(v, 0.0, 1e-13);
}

TEST(BoxFracLaplacian, Preconditions) {
  auto g = make_box_grid(1, 5.0, 32);
  auto h = make_box_grid(1, 5.0, 64);
  auto u = make_field(g, std::vector<double>(32, 1.0));
  EXPECT_THROW(apply_frac_laplacian_box(g, 1.2, u), InvalidInput);
  EXPECT_THROW(apply_frac_laplacian_box(g, 0.0, u), InvalidInput);
  EXPECT_THROW(apply_frac_laplacian_box(h, 0.5, u), InvalidInput);
}

TEST(BoxFracLaplacian, PeriodizedGaussianMatchesSingularIntegral) {
  const double s = 0.4, L = 10.0;
  auto g = make_box_grid(1, L, 256);
  // periodized Gaussian and its 2nd/4th derivatives
  auto per = [&](double x, auto&& f) {
    double acc = 0;
    for (int n = -3; n <= 3; ++n) acc += f(x + 2 * n * L);
    return acc;
  };
  auto u_fn = [&](double x) { return per(x, [](double y) { return std::exp(-y * y); }); };
  auto u2 = [&](double x) { return per(x, [](double y) { return (4 * y * y - 2) * std::exp(-y * y); }); };
  auto u4 = [&](double x) {
    return per(x, [](double y) { return (16 * y * y * y * y - 48 * y * y + 12) * std::exp(-y * y); });
  };
  auto u = make_field(g, sample(g, [&](const double* x) { return u_fn(x[0]); }));
  auto r = apply_frac_laplacian_box(g, s, u);

  // periodic images of the kernel |z|^{-1-2s}, without the n = 0 term
  auto k_images = [&](double z) {
    const int nmax = 2000;
    double acc = 0;
    for (int n = 1; n <= nmax; ++n)
      acc += std::pow(2 * n * L + z, -1 - 2 * s) + std::pow(2 * n * L - z, -1 - 2 * s);
    double a = 2 * L * (nmax + 0.5);
    acc += (std::pow(a + z, -2 * s) + std::pow(a - z, -2 * s)) / (2 * L * 2 * s);
    return acc;
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double C = frac_const(1, s);
  double peak = std::abs(r.values[g.m / 2]);
  for (int j : {128, 132, 140, 150, 170, 200}) {
    double x = g.coord(j);
    auto sing = [&](double z) { return (2 * u_fn(x) - u_fn(x + z) - u_fn(x - z)) * std::pow(z, -1 - 2 * s); };
    // Taylor expansion on [0, d] avoids cancellation near the singularity
    const double d = 1e-2;
    double I0 = -u2(x) * std::pow(d, 2 - 2 * s) / (2 - 2 * s) -
                u4(x) / 12 * std::pow(d, 4 - 2 * s) / (4 - 2 * s);
    double I1 = I0 + GK::integrate(sing, d, 1.0, 20, 1e-14) + GK::integrate(sing, 1.0, L, 20, 1e-14);
    auto smooth = [&](double z) { return (u_fn(x) - u_fn(x + z)) * k_images(z); };
    double I2 = GK::integrate(smooth, -L, L, 20, 1e-13);
    double oracle = C * (I1 + I2);
    EXPECT_LT(std::abs(r.values[j] - oracle) / peak, 1e-4) << "x=" << x;
  }
}

TEST(Seminorm, Examples) {
  auto g = make_box_grid(1, 4.0, 64);
  const double s = 0.35;
  EXPECT_EQ(seminorm_sq(g, s, make_field(g, std::vector<double>(64, 0.0))), 0.0);
  auto c = make_field(g, sample(g, [&](const double* x) { return std::cos(M_PI * x[0] / g.L); }));
  EXPECT_LT(rel(seminorm_sq(g, s, c), std::pow(M_PI / g.L, 2 * s) * g.L), 1e-12);
}

TEST(Seminorm, BubbleMatchesQuadraticForm) {
  auto g = make_box_grid(2, 20.0, 128);
  const double s = 0.75, al = 0.5 * (2 - 2 * s);
  auto Q = make_field(g, sample(g, [&](const double* x) {
                        return std::pow(1.0 / (1 + x[0] * x[0] + x[1] * x[1]), al);
                      }));
  for (auto zm : {ZeroMode::periodic, ZeroMode::free_space}) {
    double semi = seminorm_sq(g, s, Q, zm);
    double form = dot_box(g, Q.values, apply_frac_laplacian_box(g, s, Q, zm).values);
    EXPECT_LT(rel(semi, form), 1e-8);
  }
}

TEST(BoxFracLaplacian, SelfAdjointOnRandomFields) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int N = 1; N <= 3; ++N) {
    auto g = make_box_grid(N, 6.0, N == 3 ? 16 : 64);
    for (auto zm : {ZeroMode::periodic, ZeroMode::free_space}) {
      const double s = N == 1 ? 0.4 : 0.6;
      BoxLaplacian op(g, s, zm);
      std::vector<double> u(g.size()), v(g.size());
      for (auto& x : u) x = nd(rng);
      for (auto& x : v) x = nd(rng);
      double a = dot_box(g, op.apply(u), v), b = dot_box(g, u, op.apply(v));
      double scale = std::sqrt(dot_box(g, op.apply(u), op.apply(u)) * dot_box(g, v, v));
      EXPECT_LT(std::abs(a - b) / scale, 1e-9);
    }
  }
}

TEST(BoxFracLaplacian, CompositionOfOrders) {
  std::mt19937_64 rng(11);
  for (int N = 1; N <= 2; ++N) {
    auto g = make_box_grid(N, 3.0, 32);
    auto u = make_field(g, random_modes(g, rng));
    for (double s : {0.1, 0.3, 0.45}) {
      auto twice = apply_frac_laplacian_box(g, s, make_field(g, apply_frac_laplacian_box(g, s, u).values));
      auto once = apply_frac_laplacian_box(g, 2 * s, u);
      double num = 0, den = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        num += std::pow(twice.values[i] - once.values[i], 2);
        den += once.values[i] * once.values[i];
      }
      EXPECT_LT(std::sqrt(num / den), 1e-8);
    }
  }
}

TEST(BoxFracLaplacian, ScalingCovariance) {
  for (int N = 1; N <= 3; ++N) {
    auto g = make_box_grid(N, 8.0, N == 3 ? 32 : 128);
    auto vals = sample(g, [&](const double* x) {
      double r2 = 0;
      for (int d = 0; d < N; ++d) r2 += x[d] * x[d];
      return std::pow(1 + r2, -0.7);
    });
    const double lam = 2.7, s = N == 1 ? 0.3 : 0.8;
    auto gl = g.scaled(1 / lam);
    for (auto zm : {ZeroMode::periodic, ZeroMode::free_space}) {
      double a = seminorm_sq(gl, s, make_field(gl, vals), zm);
      double b = seminorm_sq(g, s, make_field(g, vals), zm);
      EXPECT_LT(rel(a, std::pow(lam, 2 * s - N) * b), 1e-8);
    }
  }
}

TEST(BoxFracLaplacian, DenseMatrixIsSymmetricPositive) {
  auto g = make_box_grid(2, 4.0, 16);
  auto D = box_frac_laplacian_matrix(g, 0.7);
  EXPECT_LT(D.symmetry_defect(), 1e-10);
  EXPECT_GE(D.min_eigenvalue(), -1e-8 * D.matrix.norm());
  EXPECT_EQ(D.kind, OpKind::frac_laplacian);
}

TEST(BoxFracLaplacian, GaussianAgainstClosedForm) {
  const int N = 2;
  const double s = 0.75;
  auto g = make_box_grid(N, 12.0, 128);
  auto u = make_field(g, sample(g, [](const double* x) { return std::exp(-x[0] * x[0] - x[1] * x[1]); }));
  auto r = apply_frac_laplacian_box(g, s, u);
  double err = 0;
  for (int j : {64, 66, 70, 80}) {
    std::size_t k = std::size_t(64) * g.m + j;
    err = std::max(err, std::abs(r.values[k] - gauss_frac(N, s, g.coord(j))));
  }
  EXPECT_LT(err / gauss_frac(N, s, 0), 1e-4);
  double semi = std::pow(M_PI, N) * sphere_area(N) * std::pow(2.0, s + 0.5 * N - 1) *
                std::tgamma(s + 0.5 * N) / std::pow(2 * M_PI, N);
  // |xi|^{2s} is not smooth at 0, so the lattice sum converges like L^{-(N+2s)}
  double e1 = rel(seminorm_sq(g, s, u), semi);
  auto g2 = make_box_grid(N, 24.0, 256);
  auto u2 = make_field(g2, sample(g2, [](const double* x) { return std::exp(-x[0] * x[0] - x[1] * x[1]); }));
  double e2 = rel(seminorm_sq(g2, s, u2), semi);
  EXPECT_LT(e1, 1e-4);
  EXPECT_GT(e1 / e2, 0.7 * std::pow(2.0, N + 2 * s));
  EXPECT_LT(e1 / e2, 1.3 * std::pow(2.0, N + 2 * s));
}

TEST(BoxFracLaplacian, FreeSpaceInverseReproducesRieszPotential) {
  // the periodic inverse does not exist; the corrected one tracks the whole-space potential
  const int N = 2;
  const double s = 0.75;
  double prev = 1;
  for (double L : {12.0, 24.0, 48.0}) {
    auto g = make_box_grid(N, L, int(16 * L / 3));
    auto u = sample(g, [](const double* x) { return std::exp(-x[0] * x[0] - x[1] * x[1]); });
    BoxLaplacian op(g, s, ZeroMode::free_space);
    auto r = op.apply(u, -1.0);
    double err = 0;
    const int c = g.m / 2;
    for (int j = c; g.coord(j) <= 2.0; ++j)
      err = std::max(err, std::abs(r[std::size_t(c) * g.m + j] - gauss_frac(N, -s, g.coord(j))));
    err /= gauss_frac(N, -s, 0);
    EXPECT_LT(err, 0.3 * prev) << "L=" << L;
    prev = err;
    if (L == 12.0) {
      BoxLaplacian per(g, s, ZeroMode::periodic);
      EXPECT_THROW(per.apply(u, -1.0), InvalidInput);
    }
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(OperatorDump, RoundTrip) {
  auto g = make_box_grid(1, 2.0, 16);
  auto D = box_frac_laplacian_matrix(g, 0.4);
  auto path = (std::filesystem::temp_directory_path() / "fkirch_dump_test.bin").string();
  dump_operator(D, path);
  EXPECT_EQ(std::filesystem::file_size(path), 16u + 8u * 256u);
  auto E = load_operator(path);
  EXPECT_EQ(E.kind, OpKind::frac_laplacian);
  EXPECT_EQ((D.matrix - E.matrix).norm(), 0.0);
  std::filesystem::remove(path);
}

// ---- radial ----

TEST(SectorLaplacian, PowerOneIsTheOperator) {
  auto g = make_radial_grid(2, 128, 50.0, Stretch::algebraic);
  auto sl = assemble_sector_laplacian(g, 2, 0, 1.0);
  EXPECT_LT((sl.op.matrix - sl.H).norm() / sl.H.norm(), 1e-8);
}

TEST(SectorLaplacian, EigenvaluesArePowers) {
  auto g = make_radial_grid(3, 96, 30.0, Stretch::algebraic);
  for (int l : {0, 1, 3}) {
    auto sl = assemble_sector_laplacian(g, 3, l, 0.8);
    auto ev = sym_eig(sl.op.matrix).values;
    double top = ev.maxCoeff();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      EXPECT_NEAR(ev(i), std::pow(sl.eig.values(i), 0.8), 1e-9 * top);
    EXPECT_GE(ev(0), -1e-8 * top);
    EXPECT_LT(sl.op.symmetry_defect(), 1e-10);
    EXPECT_EQ(sl.op.kind, OpKind::sector_laplacian);
    EXPECT_EQ(sl.op.l, l);
  }
  EXPECT_THROW(assemble_sector_laplacian(g, 3, -1, 0.5), InvalidInput);
}

TEST(SectorLaplacian, SelfAdjointInWeightedProduct) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int N = 1; N <= 3; ++N) {
    auto g = make_radial_grid(N, 128, 40.0, Stretch::algebraic);
    for (auto bc : {OuterBC::dirichlet, OuterBC::robin}) {
      auto sl = assemble_sector_laplacian(g, N, 1, 0.55, bc);
      std::vector<double> u(g.size()), v(g.size());
      for (auto& x : u) x = nd(rng) * std::exp(-0.01 * (&x - u.data()));
      for (auto& x : v) x = nd(rng) * std::exp(-0.01 * (&x - v.data()));
      auto Au = sl.apply(u, 0.55), Av = sl.apply(v, 0.55);
      double a = 0, b = 0, nu = 0, nv = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        a += g.weights[i] * Au[i] * v[i];
        b += g.weights[i] * u[i] * Av[i];
        nu += g.weights[i] * Au[i] * Au[i];
        nv += g.weights[i] * v[i] * v[i];
      }
      EXPECT_LT(std::abs(a - b) / std::sqrt(nu * nv), 1e-9);
    }
  }
}

TEST(SectorLaplacian, GaussianAgainstClosedForm) {
  for (int N = 1; N <= 3; ++N) {
    const double s = N == 1 ? 0.3 : 0.8;
    auto g = make_radial_grid(N, 512, 200.0, Stretch::algebraic);
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(-g.nodes[i] * g.nodes[i]);
    auto sl = assemble_sector_laplacian(g, N, 0, s, OuterBC::robin);
    auto r = sl.apply(u, s);
    // pointwise values in the first, very thin cells are not meaningful; the form is
    double err = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.nodes[i] > 0.05 && g.nodes[i] < 3) err = std::max(err, std::abs(r[i] - gauss_frac(N, s, g.nodes[i])));
    EXPECT_LT(err / gauss_frac(N, s, 0), 1e-2) << "N=" << N;

    double semi = std::pow(M_PI, N) * sphere_area(N) * std::pow(2.0, s + 0.5 * N - 1) *
                  std::tgamma(s + 0.5 * N) / std::pow(2 * M_PI, N);
    EXPECT_LT(rel(seminorm_sq(g, s, make_field(g, u)), semi), 2e-3) << "N=" << N;
  }
}
