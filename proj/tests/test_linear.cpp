#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "epd/linear.hpp"
#include "support/reference.hpp"

using namespace epd;

namespace {
std::vector<SpacetimePoint> random_points(int count, unsigned seed, double tmax = 5.0,
                                          double rmax = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.05, tmax), ur(0.05, rmax);
  std::vector<SpacetimePoint> pts;
  for (int i = 0; i < count; ++i) pts.push_back({ut(rng), ur(rng)});
  return pts;
}
}  // namespace

TEST_CASE("polynomial oracles across dimensions") {
  // u = t solves the homogeneous problem with data (0, 1); u = 1 with (1, 0);
  // u = r^2 + A t^2 with (r^2, 0); u = t^2/2 is pure-source with F = 1.
  const auto one = profiles::one();
  const auto rsq = profiles::r_squared();
  const auto srcone = profiles::source_by_name("one");
  QuadratureConfig cfg;
  cfg.target_rel_tol = 1e-9;
  for (double A : {2.0, 2.5, 3.0, 3.2, 4.0}) {
    const KernelEvaluator K(A, cfg);
    for (const auto& pt : random_points(6, 42)) {
      const double ug = solve_g(one, A, pt, cfg, &K);
      CHECK(ug == Catch::Approx(pt.t).epsilon(2e-6));
      const double uf1 = solve_f(one, A, pt, cfg, &K);
      CHECK(uf1 == Catch::Approx(1.0).epsilon(2e-6));
      const double ufr = solve_f(rsq, A, pt, cfg, &K);
      CHECK(ufr == Catch::Approx(pt.r * pt.r + A * pt.t * pt.t).epsilon(1e-5));
    }
    for (const auto& pt : random_points(3, 43, 3.0, 3.0)) {
      const double uF = duhamel(srcone, A, pt, cfg, &K);
      CHECK(uF == Catch::Approx(0.5 * pt.t * pt.t).epsilon(1e-4));
    }
  }
}

TEST_CASE("quadratic source oracle") {
  // F = rho^2 with zero data: u = r^2 t^2 / 2 + A t^4 / 12
  const auto src = profiles::source_by_name("rho_squared");
  QuadratureConfig cfg;
  for (double A : {2.5, 3.0}) {
    for (const auto& pt : random_points(3, 7, 2.5, 2.5)) {
      const double expect = 0.5 * pt.r * pt.r * pt.t * pt.t + A * std::pow(pt.t, 4) / 12.0;
      CHECK(duhamel(src, A, pt, cfg) == Catch::Approx(expect).epsilon(2e-4));
    }
  }
}

TEST_CASE("superposition") {
  const auto rsq = profiles::r_squared();
  const auto one = profiles::one();
  const auto srcone = profiles::source_by_name("one");
  const double A = 2.5;
  QuadratureConfig cfg;
  for (const auto& pt : random_points(4, 11, 3.0, 3.0)) {
    const double u = solve_linear_at(rsq, one, &srcone, A, pt, cfg);
    const double expect = pt.r * pt.r + A * pt.t * pt.t + pt.t + 0.5 * pt.t * pt.t;
    CHECK(u == Catch::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("zero source and zero data") {
  const auto zero = profiles::zero();
  const auto srczero = profiles::source_by_name("zero");
  CHECK(solve_linear_at(zero, zero, &srczero, 2.5, {1.0, 1.0}) == 0.0);
  CHECK(solve_g(zero, 2.5, {2.0, 0.5}) == 0.0);
}

TEST_CASE("initial conditions are recovered") {
  const auto f = profiles::bump();
  const auto g = profiles::bump();
  QuadratureConfig cfg;
  const double A = 2.5;
  // u(0, r) = f(r) by the t = 0 branch, and u(delta, r) -> f(r)
  CHECK(solve_f(f, A, {0.0, 0.3}) == Catch::Approx(f(0.3)));
  double prev = kInf;
  for (double delta : {0.1, 0.05, 0.025}) {
    const double err = std::fabs(solve_f(f, A, {delta, 0.3}, cfg) - f(0.3));
    CHECK(err < prev);
    prev = err;
  }
  // u_t(0, r) = g(r): forward difference of the g-propagator
  for (double r : {0.2, 0.6}) {
    const double delta = 1e-3;
    const double ut = solve_g(g, A, {delta, r}, cfg) / delta;
    CHECK(ut == Catch::Approx(g(r)).margin(5e-3));
  }
  // t = 0 of the g-part vanishes
  CHECK(solve_g(g, A, {0.0, 0.4}) == 0.0);
}

TEST_CASE("finite speed of propagation") {
  const auto f = profiles::bump();
  const auto g = profiles::bump();
  QuadratureConfig cfg;
  for (double A : {2.5, 3.0, 4.0}) {
    for (double t : {0.5, 1.5, 3.0}) {
      const double r = t + 1.0 + 0.05;  // support radius 1
      const double u = solve_linear_at(f, g, nullptr, A, {t, r}, cfg);
      CHECK(std::fabs(u) < 1e-12);
    }
  }
}

TEST_CASE("A = 3 equivalence with classical closed forms") {
  const auto f = profiles::bump();
  const auto g = profiles::bump();
  QuadratureConfig cfg;
  cfg.target_rel_tol = 1e-10;
  const KernelEvaluator K(3.0, cfg);
  double vmax = 0.0, emax_g = 0.0, emax_f = 0.0;
  for (const auto& pt : random_points(40, 314, 4.0, 4.0)) {
    // keep clear of the kink manifold |t - r| = 1 where the finite-difference
    // u_f path momentarily loses an order
    if (std::fabs(std::fabs(pt.t - pt.r) - 1.0) < 0.03) continue;
    const double g_exact = ref::a3_ug_bump(pt.t, pt.r);
    const double f_exact = ref::a3_uf_bump(pt.t, pt.r);
    emax_g = std::max(emax_g, std::fabs(solve_g(g, 3.0, pt, cfg, &K) - g_exact));
    emax_f = std::max(emax_f, std::fabs(solve_f(f, 3.0, pt, cfg, &K) - f_exact));
    vmax = std::max({vmax, std::fabs(g_exact), std::fabs(f_exact)});
  }
  CHECK(emax_g <= 1e-6 * vmax);
  CHECK(emax_f <= 1e-6 * vmax);
}

TEST_CASE("smooth-path cross check for u_f in the k = 0 slab") {
  const auto f = profiles::bump();
  QuadratureConfig cfg;
  for (double A : {2.0, 2.5, 2.9}) {
    for (const auto& pt : random_points(4, 5, 2.0, 2.0)) {
      const double fd = solve_f(f, A, pt, cfg);
      const double smooth = solve_f_smooth(f, A, pt, 28);
      CHECK(fd == Catch::Approx(smooth).margin(1e-5).epsilon(1e-4));
    }
  }
}

TEST_CASE("characteristic march agrees with the kernel path at A = 3") {
  const auto f = profiles::scaled(profiles::bump(), 0.7);
  const auto g = profiles::bump();
  // source: smooth compactly supported lump that expands with the cone
  const auto F = SourceField::analytic_cone(
      [](double s, double rho) {
        const double q = 1.0 - rho * rho / ((1.0 + s) * (1.0 + s));
        return q > 0.0 ? q * q * std::exp(-s) : 0.0;
      },
      1.0);
  const double dx = 1.0 / 32.0;
  const size_t nt = 64;   // T = 2
  const size_t nr = 160;  // covers T + support + margin
  const SolutionField field = march_characteristics_a3(
      f, g, [&](double s, double rho) { return F(s, rho); }, dx, nt, nr);

  QuadratureConfig cfg;
  const KernelEvaluator K(3.0, cfg);
  double emax = 0.0, vmax = 0.0;
  for (size_t m : {size_t(16), size_t(40), size_t(64)}) {
    for (size_t j : {size_t(4), size_t(20), size_t(60), size_t(100)}) {
      const SpacetimePoint pt{field.t[m], field.r[j]};
      const double direct = solve_linear_at(f, g, &F, 3.0, pt, cfg, &K);
      emax = std::max(emax, std::fabs(direct - field.at(m, j)));
      vmax = std::max(vmax, std::fabs(direct));
    }
  }
  CHECK(emax <= 2e-4 * std::max(vmax, 1.0));

  // homogeneous march against the closed forms, at machine-like accuracy
  const SolutionField hom = march_characteristics_a3(f, g, {}, dx, nt, nr);
  double emax2 = 0.0;
  for (size_t m : {size_t(10), size_t(32), size_t(64)})
    for (size_t j = 0; j < nr; j += 7) {
      const double want =
          0.7 * ref::a3_uf_bump(hom.t[m], hom.r[j]) + ref::a3_ug_bump(hom.t[m], hom.r[j]);
      emax2 = std::max(emax2, std::fabs(hom.at(m, j) - want));
    }
  CHECK(emax2 < 1e-10);
}

TEST_CASE("field assembly, energy and decay") {
  const auto g = profiles::bump();
  const auto zero = profiles::zero();
  const double A = 2.5;
  QuadratureConfig cfg;
  cfg.target_rel_tol = 1e-8;

  // assemble a small field: t in [0.5, 2.5], r in (0, 3.6]
  std::vector<double> tg, rg;
  for (int i = 0; i <= 16; ++i) tg.push_back(0.5 + i * 0.125);
  for (int j = 1; j <= 36; ++j) rg.push_back(j * 0.1);
  const SolutionField u =
      solve_linear(zero, g, nullptr, A, tg, rg, cfg, AssemblyStrategy::KernelPointwise);
  for (double v : u.values) CHECK(std::isfinite(v));

  // energy drift of the conserved quantity over [1, 2]
  const double e1 = energy(u, A, 1.0);
  const double e2 = energy(u, A, 2.0);
  CHECK(e1 > 0.0);
  CHECK(std::fabs(e2 - e1) <= 2e-2 * e1);

  // decay weights: W stays bounded by a small multiple of its early max
  const DecayReport rep = decay_check(u, A, 1.0, 3.0);
  CHECK(rep.pass);

  // u = 0 gives W = 0
  SolutionField zf;
  zf.A = A;
  zf.t = {0.0, 1.0};
  zf.r = {0.5, 1.0};
  zf.values = {0, 0, 0, 0};
  const DecayReport zrep = decay_check(zf, A);
  CHECK(zrep.early_max == 0.0);
  CHECK(zrep.late_max == 0.0);
}
