#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "epd/semilinear.hpp"

using namespace epd;

namespace {
SemilinearProblem bump_problem(double n, double V, double p, double eps, double t_max,
                               int ppu = 16) {
  GridSpec gs;
  gs.t_max = t_max;
  gs.points_per_unit = ppu;
  return SemilinearProblem(ProblemParams(n, V, p, eps), profiles::bump(), profiles::bump(), gs);
}
}  // namespace

TEST_CASE("weight functions") {
  for (int k : {1, 2, 3}) {
    WeightFunctions w{k, 2.5, 4.0, 1.8};
    // positivity and the bracket floor <a> >= 2
    CHECK(w.omega(0.0, 0.0) > 0.0);
    CHECK(bracket(0.0) == Catch::Approx(2.0));

    // beta_k(xi) ~ beta_k(eta) for comparable arguments: bounded ratio
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ux(2.001, 50.0), uf(0.51, 1.99);
    const double C = 8.0;
    for (int i = 0; i < 200; ++i) {
      const double xi = ux(rng);
      const double eta = std::min(49.9, std::max(2.001, xi * uf(rng)));
      const double ratio = w.beta(xi) / w.beta(eta);
      CHECK(ratio < C);
      CHECK(ratio > 1.0 / C);
    }
    // monotone comparability: beta_k(eta1) <= C beta_k(eta2) for eta1 < eta2
    for (int i = 0; i < 200; ++i) {
      double e1 = ux(rng), e2 = ux(rng);
      if (e1 > e2) std::swap(e1, e2);
      CHECK(w.beta(e1) <= 2.0 * w.beta(e2));
    }
  }
  CHECK_THROWS_AS((WeightFunctions{4, 3, 3, 2}.beta(1.0)), std::invalid_argument);

  // case table: k = 3 at p = p_t, k = 2 on the subcritical band, else 1
  const ExponentSet e = exponent_set(4.0, 2.5);
  CHECK(auto_weight_k(e.p_t, 4.0, 2.5) == 3);
  CHECK(auto_weight_k(0.5 * (e.p_m + std::min(e.p_S, e.p_t)), 4.0, 2.5) == 2);
  CHECK(auto_weight_k(1.05 * e.p_S, 4.0, 2.5) == 1);
  CHECK(auto_weight_k(2.0, 3.0, 4.0) == 1);  // outside A in [2,3]: monitoring only
}

TEST_CASE("data norm") {
  CHECK(data_norm_psi(profiles::zero(), profiles::zero(), 3, 3) == 0.0);
  // n = A: Psi = ||r U0'|| + ||U0|| with bump U0; max of 8 r^2 (1-r^2)^3 is 27/32
  const double psi = data_norm_psi(profiles::bump(), profiles::zero(), 3, 3);
  CHECK(psi == Catch::Approx(27.0 / 32.0 + 1.0).epsilon(1e-4));
  // homogeneity
  const double psi2 =
      data_norm_psi(profiles::scaled(profiles::bump(), 2.0), profiles::zero(), 3, 3);
  CHECK(psi2 == Catch::Approx(2.0 * psi).epsilon(1e-12));
}

TEST_CASE("source transform") {
  SolutionField u;
  u.A = 3;
  u.t = {0.0, 1.0};
  u.r = {0.5, 1.5};
  u.values = {0.2, -0.4, 0.6, 0.8};

  // n = A: plain |u|^p
  const SourceField F = source_transform(u, 3, 3, 2.0);
  CHECK(F(0.0, 0.5) == Catch::Approx(0.04));
  CHECK(F(1.0, 1.5) == Catch::Approx(0.64));

  // n = 3, A = 2, p = 2: weight rho^{((2-3)2+3-2)/2} = rho^{-1/2}
  const SourceField Fw = source_transform(u, 3, 2, 2.0);
  CHECK(Fw(0.0, 0.5) == Catch::Approx(std::pow(0.5, -0.5) * 0.04));

  // zero field maps to zero source
  SolutionField z = u;
  z.values = {0, 0, 0, 0};
  const SourceField Fz = source_transform(z, 3, 3, 2.0);
  CHECK(Fz(0.5, 1.0) == 0.0);

  // overflow guard clamps and flags
  auto flag = std::make_shared<std::atomic<bool>>(false);
  SolutionField big = u;
  big.values = {1e9, 0, 0, 0};
  const SourceField Fb = source_transform(big, 3, 3, 2.0, 1e6, flag);
  CHECK(Fb(0.0, 0.5) <= 1e12 * 1.0001);
  CHECK(flag->load());
}

TEST_CASE("picard iteration basics") {
  // eps = 0: fixed point immediately
  {
    auto prob = bump_problem(3, 0, 3, 1e-12, 2.0);
    prob.params.epsilon = 0.0;  // constructor requires > 0; relax by hand
    const IterateResult res = iterate(prob);
    CHECK(res.status == IterateStatus::Converged);
    CHECK(res.history.size() == 1);
    CHECK(sdetail::weighted_sup_norm(res.field, res.weights) == 0.0);
  }

  // small-data global regime (p > p_S at A = 3): converges with ratio <= 1/2
  {
    const auto prob = bump_problem(3, 0, 3, 0.05, 4.0);
    const IterateResult res = iterate(prob);
    REQUIRE(res.status == IterateStatus::Converged);
    CHECK(res.weights.k == 3);  // p = 3 = p_t at (n, A) = (3, 3)
    for (size_t i = 2; i < res.history.size(); ++i)
      CHECK(res.history[i].contraction_ratio <= 0.5);

    // fixed point: one extra step moves the weighted norm by <= tol scale
    PicardOptions opt;
    const SolutionField extra = picard_step(prob, &res.field, opt);
    const double drift = sdetail::weighted_diff_norm(extra, res.field, res.weights);
    const double sup = sdetail::weighted_sup_norm(res.field, res.weights);
    CHECK(drift <= 3.0 * opt.tol * sup);
  }

  // eps-linearity at leading order: weighted_sup / eps stable as eps -> 0
  {
    std::vector<double> ratios;
    for (double eps : {0.1, 0.05, 0.025}) {
      const IterateResult res = iterate(bump_problem(3, 0, 3, eps, 3.0));
      REQUIRE(res.status == IterateStatus::Converged);
      ratios.push_back(sdetail::weighted_sup_norm(res.field, res.weights) / eps);
    }
    CHECK(std::fabs(ratios[1] / ratios[0] - 1.0) < 0.05);
    CHECK(std::fabs(ratios[2] / ratios[1] - 1.0) < 0.05);
  }

  // large data below the Strauss exponent on a long horizon: divergence
  {
    const auto prob = bump_problem(3, 0, 2, 0.8, 24.0);
    const IterateResult res = iterate(prob);
    CHECK(res.status == IterateStatus::Diverged);
    CHECK((res.criterion == "contraction_lost" || res.criterion == "norm_blowup"));
  }
}

TEST_CASE("generic-dimension picard via the kernel path") {
  GridSpec gs;
  gs.t_max = 0.75;
  gs.points_per_unit = 6;
  SemilinearProblem prob(ProblemParams(3, potential_for_dimension(3, 2.5), 2.5, 0.05),
                         profiles::bump(), profiles::bump(), gs);
  PicardOptions opt;
  opt.tol = 1e-4;
  opt.quad.target_rel_tol = 1e-4;
  opt.quad.nodes_per_panel = 6;
  opt.max_iter = 8;
  const IterateResult res = iterate(prob, opt);
  CHECK(res.status == IterateStatus::Converged);
  CHECK(res.history.size() >= 2);
  CHECK(sdetail::weighted_sup_norm(res.field, res.weights) > 0.0);
}

TEST_CASE("weak residual") {
  const auto fns = builtin_test_functions(3.0, 4.0);
  REQUIRE(fns.size() == 5);

  // trivial zero solution
  const double r0 = weak_residual([](double, double) { return 0.0; }, {}, profiles::zero(),
                                  profiles::zero(), 3.0, 3.0, 4.0, fns);
  CHECK(r0 == 0.0);

  // exact linear oracle u = r^2 + A t^2 with data (r^2, 0), F = 0, at A = 3
  const double A = 3.0;
  const double r1 = weak_residual([A](double t, double r) { return r * r + A * t * t; }, {},
                                  profiles::r_squared(), profiles::zero(), A, 3.0, 4.0, fns, 8, 6);
  CHECK(r1 <= 1e-6);

  // converged semilinear run: residual at default resolution
  const auto prob = bump_problem(3, 0, 3, 0.05, 4.0);
  const IterateResult res = iterate(prob);
  REQUIRE(res.status == IterateStatus::Converged);
  const SolutionField& u = res.field;
  const auto uf = [&u](double t, double r) { return u(t, r); };
  const auto F = source_transform(u, 3, 3, 3);
  const auto Ff = [&F](double t, double r) { return F(t, r); };
  const double r2 = weak_residual(uf, Ff, prob.data_f(), prob.data_g(), 3.0, u.t.back(),
                                  u.r.back(), fns);
  CHECK(r2 <= 1e-3);
}

TEST_CASE("numerical lifespan") {
  LifespanOptions opt;
  opt.T0 = 2.0;
  opt.T_max = 64.0;
  opt.bisections = 4;

  // subcritical p = 2 at (n, A) = (3, 3): finite lifespan, monotone in eps
  auto prob = bump_problem(3, 0, 2, 0.4, 2.0, 12);
  const LifespanEstimate e1 = estimate_lifespan(prob, opt);
  CHECK(e1.T_num > 0.0);
  CHECK(e1.T_num < opt.T_max);
  CHECK((e1.criterion == "contraction_lost" || e1.criterion == "norm_blowup"));

  prob.params.epsilon = 0.2;
  const LifespanEstimate e2 = estimate_lifespan(prob, opt);
  CHECK(e2.T_num >= e1.T_num);

  // global regime: horizon cap reached
  auto gprob = bump_problem(3, 0, 3, 0.05, 2.0, 12);
  LifespanOptions gopt;
  gopt.T0 = 2.0;
  gopt.T_max = 16.0;
  const LifespanEstimate e3 = estimate_lifespan(gprob, gopt);
  CHECK(e3.criterion == "T_max_reached");
  CHECK(e3.T_num == gopt.T_max);
}

TEST_CASE("recovered-variable diagnostics") {
  // q arithmetic: n = 3, p = 2.5 -> q = 3
  {
    SolutionField zu;
    zu.A = 3;
    zu.t = {0, 1, 2};
    zu.r = {0.5, 1.0, 1.5};
    zu.values.assign(9, 0.0);
    const M2NormReport rep = theorem_m2_norms(zu, 3, 2.5);
    CHECK(rep.q == Catch::Approx(3.0));
    CHECK(rep.sup_weighted_full == 0.0);
    CHECK(rep.cum_full == 0.0);
  }

  // recover_original: U = r^{(A-n)/2} u
  {
    SolutionField u;
    u.A = 2;
    u.t = {0, 1};
    u.r = {1.0, 4.0};
    u.values = {1.0, 2.0, 3.0, 4.0};
    const SolutionField U = recover_original(u, 3, 2);  // U = r^{-1/2} u
    CHECK(U.at(1, 1) == Catch::Approx(4.0 / 2.0));
    const SolutionField back = recover_original(U, 2, 3);  // inverse exponent
    for (size_t i = 0; i < u.values.size(); ++i)
      CHECK(back.values[i] == Catch::Approx(u.values[i]).epsilon(1e-14));
    // n = A: identity
    const SolutionField same = recover_original(u, 2, 2);
    CHECK(same.values == u.values);
  }

  // boundedness of the weighted slice norm on a global run
  {
    const auto prob = bump_problem(3, 0, 3, 0.05, 8.0);
    const IterateResult res = iterate(prob);
    REQUIRE(res.status == IterateStatus::Converged);
    const SolutionField U = recover_original(res.field, 3, 3);
    const M2NormReport rep = theorem_m2_norms(U, 3, 3);
    CHECK(rep.finite);
    CHECK(rep.sup_weighted_full > 0.0);
    CHECK(rep.sup_weighted_full <= 1.10 * rep.sup_weighted_half);
  }
}
