#pragma once

// Picard iteration for the semilinear problem
//
//   u_tt - Delta_A u = r^{((A-n)p + n - A)/2} |u|^p,
//   u(0) = eps r^{(n-A)/2} U0,  u_t(0) = eps r^{(n-A)/2} U1,
//
// which is the radial inverse-square-potential equation after the
// dimension-shift substitution u = r^{(n-A)/2} U.  Successive iterates solve
// the linear problem with the source frozen at the previous iterate; the
// weighted sup norms that control the contraction use
//   omega_k(t,r) = <t+r>^{(A-1)/2} beta_k(t-r),  <a> = sqrt(a^2+4),
// with beta_1 = <t-r>^{(A-1)/2}, beta_2 = <t-r>^{((n-1)p-n-1)/2} and
// beta_3 = <t-r>^{(A-1)/2} / ln<t-r>.
//
// The numerical lifespan proxy T_num is the largest horizon at which the
// iteration still contracts at fixed grid density.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epd/exponents.hpp"
#include "epd/linear.hpp"
#include "epd/profile.hpp"

namespace epd {

struct WeightFunctions {
  int k = 1;
  double A = 3, n = 3, p = 2;

  double beta(double tmr) const {
    const double br = bracket(tmr);
    switch (k) {
      case 1: return std::pow(br, 0.5 * (A - 1.0));
      case 2: return std::pow(br, 0.5 * ((n - 1.0) * p - n - 1.0));
      case 3: return std::pow(br, 0.5 * (A - 1.0)) / std::log(br);
      default: throw std::invalid_argument("WeightFunctions: k must be 1, 2 or 3");
    }
  }
  double omega(double t, double r) const {
    return std::pow(bracket(t + r), 0.5 * (A - 1.0)) * beta(t - r);
  }
};

// k = 3 at p = p_t, k = 2 on the subcritical band p_m < p < min(p_S, p_t)
// inside A in [2,3]; k = 1 (monitoring) everywhere else.
inline int auto_weight_k(double p, double n, double A) {
  if (!(A >= 2.0 && A <= 3.0)) return 1;
  const ExponentSet e = exponent_set(n, A);
  if (std::fabs(p - e.p_t) <= 1e-9) return 3;
  if (p > e.p_m && p < e.p_t && p < e.p_S) return 2;
  return 1;
}

struct GridSpec {
  double t_max = 4.0;
  int points_per_unit = 16;
  double r_margin = 0.25;  // radial room beyond t_max + data support
};

struct SemilinearProblem {
  ProblemParams params;
  RadialProfile U0, U1;  // original-variable data
  GridSpec grid;

  SemilinearProblem(ProblemParams pp, RadialProfile u0, RadialProfile u1, GridSpec gs = {})
      : params(pp), U0(std::move(u0)), U1(std::move(u1)), grid(gs) {}

  double data_support() const {
    const double s = std::max(U0.support_radius(), U1.support_radius());
    return std::isfinite(s) ? s : 1.0;
  }

  // transformed data f = eps r^{(n-A)/2} U0 (regenerated exactly on demand)
  RadialProfile data_f() const { return transform(U0); }
  RadialProfile data_g() const { return transform(U1); }

 private:
  RadialProfile transform(const RadialProfile& U) const {
    const double expo = 0.5 * (params.n - params.A);
    const double eps = params.epsilon;
    auto base = U;
    return RadialProfile::analytic(
        [base, expo, eps](double r) { return eps * std::pow(r, expo) * base(r); },
        [base, expo, eps](double r) {
          return eps * (expo * std::pow(r, expo - 1.0) * base(r) +
                        std::pow(r, expo) * base.derivative(r));
        },
        U.support_radius(), U.smoothness());
  }
};

// Psi = ||r^{(n-A+2)/2} U0'||_inf + ||r^{(n-A)/2} U0||_inf + ||r^{(n-A+2)/2} U1||_inf
// over the data support, by dense sampling.
inline double data_norm_psi(const RadialProfile& U0, const RadialProfile& U1, double n, double A,
                            int samples = 8192) {
  double R = std::max(U0.support_radius(), U1.support_radius());
  if (!std::isfinite(R)) R = 8.0;
  if (R <= 0.0) return 0.0;
  const double e0 = 0.5 * (n - A), e1 = 0.5 * (n - A + 2.0);
  double s_d = 0.0, s_0 = 0.0, s_1 = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double r = R * i / samples;
    s_d = std::max(s_d, std::pow(r, e1) * std::fabs(U0.derivative(r)));
    s_0 = std::max(s_0, std::pow(r, e0) * std::fabs(U0(r)));
    s_1 = std::max(s_1, std::pow(r, e1) * std::fabs(U1(r)));
  }
  return s_d + s_0 + s_1;
}

// F(s, rho) = rho^{((A-n)p + n - A)/2} |u(s, rho)|^p from a computed field.
// Values beyond `blowup_threshold` set the shared flag and are clamped so the
// caller sees a divergence verdict instead of infinities.  When the field
// came from compactly supported data, pass its support radius so the source
// carries the light-cone bound rho <= data_support + s.
inline SourceField source_transform(const SolutionField& u, double n, double A, double p,
                                    double blowup_threshold = kInf,
                                    std::shared_ptr<std::atomic<bool>> overflow = nullptr,
                                    double data_support = kInf) {
  const double w = 0.5 * ((A - n) * p + n - A);
  auto field = std::make_shared<SolutionField>(u);
  const double rmax = field->r.back();
  auto value = [field, w, p, blowup_threshold, overflow, rmax](double s, double rho) {
    if (rho > rmax) return 0.0;
    double v = std::fabs((*field)(s, rho));
    if (!(v < blowup_threshold)) {
      if (overflow) overflow->store(true);
      v = blowup_threshold;
    }
    const double weight = w == 0.0 ? 1.0 : std::pow(rho, w);
    return weight * std::pow(v, p);
  };
  if (std::isfinite(data_support)) return SourceField::analytic_cone(std::move(value), data_support);
  return SourceField::analytic(std::move(value), rmax);
}

struct IterationRecord {
  int j = 0;
  double weighted_sup = 0;
  double diff_norm = 0;
  double contraction_ratio = 0;  // diff_j / diff_{j-1}, 0 when undefined
};

enum class IterateStatus { Converged, Diverged, Indeterminate };

inline const char* to_string(IterateStatus s) {
  switch (s) {
    case IterateStatus::Converged: return "converged";
    case IterateStatus::Diverged: return "diverged";
    case IterateStatus::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct PicardOptions {
  double tol = 1e-6;
  int max_iter = 30;
  int weight_k = 0;  // 0 = auto per the theorem's case table
  AssemblyStrategy strategy = AssemblyStrategy::Auto;
  double blowup_factor = 1e6;  // threshold multiple of eps * Psi
  QuadratureConfig quad{};
};

struct IterateResult {
  IterateStatus status = IterateStatus::Indeterminate;
  std::string criterion;  // "contraction_lost" | "norm_blowup" | "" when converged
  SolutionField field;
  std::vector<IterationRecord> history;
  double epsilon_psi = 0;
  WeightFunctions weights;
};

namespace sdetail {

inline void make_grids(const SemilinearProblem& prob, std::vector<double>& tg,
                       std::vector<double>& rg) {
  const double dx = 1.0 / prob.grid.points_per_unit;
  const size_t nt = static_cast<size_t>(std::ceil(prob.grid.t_max / dx - 1e-9));
  const double r_extent = prob.grid.t_max + prob.data_support() + prob.grid.r_margin;
  const size_t nr = static_cast<size_t>(std::ceil(r_extent / dx)) + 2;
  tg.resize(nt + 1);
  rg.resize(nr);
  for (size_t i = 0; i <= nt; ++i) tg[i] = i * dx;
  for (size_t j = 0; j < nr; ++j) rg[j] = (j + 0.5) * dx;
}

inline double weighted_sup_norm(const SolutionField& u, const WeightFunctions& w) {
  double s = 0.0;
  for (size_t m = 0; m < u.nt(); ++m)
    for (size_t j = 0; j < u.nr(); ++j)
      s = std::max(s, w.omega(u.t[m], u.r[j]) * std::fabs(u.at(m, j)));
  return s;
}

inline double weighted_diff_norm(const SolutionField& a, const SolutionField& b,
                                 const WeightFunctions& w) {
  double s = 0.0;
  for (size_t m = 0; m < a.nt(); ++m)
    for (size_t j = 0; j < a.nr(); ++j)
      s = std::max(s, w.omega(a.t[m], a.r[j]) * std::fabs(a.at(m, j) - b.at(m, j)));
  return s;
}

}  // namespace sdetail

// One linear solve with the source frozen at `prev` (null for the first
// iterate, whose source is |u_{-1}|^p = 0).
inline SolutionField picard_step(const SemilinearProblem& prob, const SolutionField* prev,
                                 const PicardOptions& opt,
                                 std::shared_ptr<std::atomic<bool>> overflow = nullptr) {
  std::vector<double> tg, rg;
  sdetail::make_grids(prob, tg, rg);
  const RadialProfile f = prob.data_f();
  const RadialProfile g = prob.data_g();
  std::optional<SourceField> F;
  if (prev && !prev->empty()) {
    const double psi = data_norm_psi(prob.U0, prob.U1, prob.params.n, prob.params.A);
    const double cap = opt.blowup_factor * std::max(prob.params.epsilon * psi, 1e-12) * 1e3;
    F = source_transform(*prev, prob.params.n, prob.params.A, prob.params.p, cap, overflow,
                         prob.data_support());
  }
  return solve_linear(f, g, F ? &*F : nullptr, prob.params.A, tg, rg, opt.quad, opt.strategy,
                      prev ? &prev->t : nullptr);
}

inline IterateResult iterate(const SemilinearProblem& prob, const PicardOptions& opt = {}) {
  IterateResult res;
  const double psi = data_norm_psi(prob.U0, prob.U1, prob.params.n, prob.params.A);
  res.epsilon_psi = prob.params.epsilon * psi;
  res.weights.k = opt.weight_k > 0 ? opt.weight_k
                                   : auto_weight_k(prob.params.p, prob.params.n, prob.params.A);
  res.weights.A = prob.params.A;
  res.weights.n = prob.params.n;
  res.weights.p = prob.params.p;

  auto overflow = std::make_shared<std::atomic<bool>>(false);
  SolutionField prev;
  double prev_diff = -1.0;
  int rising = 0;
  for (int j = 0; j < opt.max_iter; ++j) {
    SolutionField next = picard_step(prob, j == 0 ? nullptr : &prev, opt, overflow);
    const double sup = sdetail::weighted_sup_norm(next, res.weights);
    IterationRecord rec;
    rec.j = j;
    rec.weighted_sup = sup;
    if (j > 0) {
      rec.diff_norm = sdetail::weighted_diff_norm(next, prev, res.weights);
    } else {
      rec.diff_norm = sup;
    }
    if (prev_diff > 0.0 && rec.diff_norm > 0.0) rec.contraction_ratio = rec.diff_norm / prev_diff;
    res.history.push_back(rec);

    const bool blown = overflow->load() || !std::isfinite(sup) ||
                       sup > opt.blowup_factor * std::max(res.epsilon_psi, 1e-300);
    if (blown) {
      res.status = IterateStatus::Diverged;
      res.criterion = "norm_blowup";
      res.field = std::move(next);
      return res;
    }
    if (rec.contraction_ratio >= 1.0 && rec.diff_norm > 1e-14 * std::max(1.0, sup)) {
      if (++rising >= 2) {
        res.status = IterateStatus::Diverged;
        res.criterion = "contraction_lost";
        res.field = std::move(next);
        return res;
      }
    } else {
      rising = 0;
    }
    if (j > 0 && rec.diff_norm <= opt.tol * std::max(sup, 1e-300)) {
      res.status = IterateStatus::Converged;
      res.field = std::move(next);
      return res;
    }
    if (j == 0 && sup == 0.0) {  // zero data: fixed point reached immediately
      res.status = IterateStatus::Converged;
      res.field = std::move(next);
      return res;
    }
    prev_diff = rec.diff_norm;
    prev = std::move(next);
  }
  res.status = IterateStatus::Indeterminate;
  res.criterion = "max_iter_exhausted";
  res.field = std::move(prev);
  return res;
}

// ---- weak-solution residual -------------------------------------------------

// phi(t, r) = chi(t) psi(r^2) with polynomial bumps: compactly supported in
// t < T and r < sqrt(R2), even in r (all odd r-derivatives vanish at the axis).
struct TestFunctionPoly {
  double T = 4.0;
  double R2 = 16.0;
  int m = 4;           // chi power
  int l = 4;           // psi power
  double alpha = 0.5;  // tilt making d_t phi(0) nonzero

  double chi(double t) const {
    const double x = t / T;
    const double q = 1.0 - x * x;
    return q > 0.0 ? std::pow(q, m) * (1.0 + alpha * x) : 0.0;
  }
  double chi_t(double t) const {
    const double x = t / T;
    const double q = 1.0 - x * x;
    if (q <= 0.0) return 0.0;
    return (-2.0 * m * x * std::pow(q, m - 1) * (1.0 + alpha * x) + std::pow(q, m) * alpha) / T;
  }
  double chi_tt(double t) const {
    const double x = t / T;
    const double q = 1.0 - x * x;
    if (q <= 0.0) return 0.0;
    const double d2 = 4.0 * m * (m - 1) * x * x * std::pow(q, m - 2) - 2.0 * m * std::pow(q, m - 1);
    return (d2 * (1.0 + alpha * x) - 4.0 * m * x * std::pow(q, m - 1) * alpha) / (T * T);
  }
  double psi(double q) const {
    const double y = 1.0 - q / R2;
    return y > 0.0 ? std::pow(y, l) : 0.0;
  }
  double psi_q(double q) const {
    const double y = 1.0 - q / R2;
    return y > 0.0 ? -l * std::pow(y, l - 1) / R2 : 0.0;
  }
  double psi_qq(double q) const {
    const double y = 1.0 - q / R2;
    return y > 0.0 ? l * (l - 1) * std::pow(y, l - 2) / (R2 * R2) : 0.0;
  }

  double phi(double t, double r) const { return chi(t) * psi(r * r); }
  double dt_phi(double t, double r) const { return chi_t(t) * psi(r * r); }
  // (d_tt - Delta_A) phi with Delta_A phi = chi (4 q psi'' + 2 A psi'), q = r^2
  double wave_op(double t, double r, double A) const {
    const double q = r * r;
    return chi_tt(t) * psi(q) - chi(t) * (4.0 * q * psi_qq(q) + 2.0 * A * psi_q(q));
  }
};

inline std::vector<TestFunctionPoly> builtin_test_functions(double T, double R) {
  std::vector<TestFunctionPoly> fns;
  fns.push_back({T, R * R, 4, 4, 0.5});
  fns.push_back({0.8 * T, 0.49 * R * R, 5, 4, -0.7});
  fns.push_back({0.6 * T, 0.81 * R * R, 4, 5, 1.0});
  fns.push_back({0.9 * T, 0.25 * R * R, 6, 6, 0.0});
  fns.push_back({0.5 * T, 0.64 * R * R, 5, 5, 0.3});
  return fns;
}

// max over test functions of
//   | II F phi r^{A-1} - II u (d_tt - Delta_A) phi r^{A-1}
//     + I (g phi(0) - f d_t phi(0)) r^{A-1} |  /  max term magnitude.
inline double weak_residual(const std::function<double(double, double)>& u,
                            const std::function<double(double, double)>& F,
                            const RadialProfile& f, const RadialProfile& g, double A, double Tdom,
                            double Rdom, std::span<const TestFunctionPoly> fns,
                            int cells_per_unit = 8, int nodes = 4) {
  const auto& leg = ldetail::cached_legendre(nodes);
  double worst = 0.0;
  for (const TestFunctionPoly& fn : fns) {
    const double Tend = std::min(Tdom, fn.T);
    const double Rend = std::min(Rdom, std::sqrt(fn.R2));
    const int nt = std::max(2, static_cast<int>(std::ceil(Tend * cells_per_unit)));
    const int nr = std::max(2, static_cast<int>(std::ceil(Rend * cells_per_unit)));
    const double dt = Tend / nt, dr = Rend / nr;
    double t_source = 0.0, t_wave = 0.0, a_source = 0.0, a_wave = 0.0;
    for (int a = 0; a < nt; ++a)
      for (int i = 0; i < leg.n(); ++i) {
        const double t = (a + leg.x[i]) * dt;
        double row_src = 0.0, row_wave = 0.0, row_asrc = 0.0, row_awave = 0.0;
        for (int b = 0; b < nr; ++b)
          for (int jn = 0; jn < leg.n(); ++jn) {
            const double r = (b + leg.x[jn]) * dr;
            const double watt = leg.w[jn] * std::pow(r, A - 1.0);
            if (F) {
              const double q = F(t, r) * fn.phi(t, r);
              row_src += watt * q;
              row_asrc += watt * std::fabs(q);
            }
            const double q = u(t, r) * fn.wave_op(t, r, A);
            row_wave += watt * q;
            row_awave += watt * std::fabs(q);
          }
        t_source += leg.w[i] * row_src;
        t_wave += leg.w[i] * row_wave;
        a_source += leg.w[i] * row_asrc;
        a_wave += leg.w[i] * row_awave;
      }
    t_source *= dt * dr;
    t_wave *= dt * dr;
    a_source *= dt * dr;
    a_wave *= dt * dr;
    double t_data = 0.0, a_data = 0.0;
    for (int b = 0; b < nr; ++b)
      for (int jn = 0; jn < leg.n(); ++jn) {
        const double r = (b + leg.x[jn]) * dr;
        const double q = std::pow(r, A - 1.0) * (g(r) * fn.phi(0.0, r) - f(r) * fn.dt_phi(0.0, r));
        t_data += leg.w[jn] * q;
        a_data += leg.w[jn] * std::fabs(q);
      }
    t_data *= dr;
    a_data *= dr;
    // scale by absolute-integrand magnitudes so that exact cancellations
    // (all three terms zero) do not read as order-one residuals
    const double scale = std::max({a_source, a_wave, a_data, 1e-300});
    worst = std::max(worst, std::fabs(t_source - t_wave + t_data) / scale);
  }
  return worst;
}

// ---- numerical lifespan -----------------------------------------------------

struct LifespanOptions {
  double T0 = 1.0;
  double T_max = 256.0;
  int bisections = 6;
  PicardOptions picard{};
};

struct LifespanEstimate {
  double T_num = 0;
  double epsilon = 0;
  std::string criterion;  // triggering verdict: contraction_lost | norm_blowup | T_max_reached
  std::vector<std::pair<double, bool>> probes;  // (T, converged)
};

// Doubling-then-bisection on the horizon: the largest T at which the Picard
// iteration converges at fixed points-per-unit grid density.
inline LifespanEstimate estimate_lifespan(const SemilinearProblem& base, const LifespanOptions& opt = {}) {
  LifespanEstimate est;
  est.epsilon = base.params.epsilon;
  std::string last_fail_criterion;
  const auto probe = [&](double T) {
    SemilinearProblem prob = base;
    prob.grid.t_max = T;
    const IterateResult res = iterate(prob, opt.picard);
    const bool ok = res.status == IterateStatus::Converged;
    if (!ok)
      last_fail_criterion = res.criterion.empty() ? to_string(res.status) : res.criterion;
    est.probes.emplace_back(T, ok);
    return ok;
  };

  const double t_min = 4.0 / base.grid.points_per_unit;
  double lo = 0.0, hi = 0.0, T = std::max(opt.T0, t_min);
  if (probe(T)) {
    lo = T;
    while (lo < opt.T_max) {
      T = std::min(2.0 * T, opt.T_max);
      if (probe(T)) {
        lo = T;
        if (T >= opt.T_max) break;
      } else {
        hi = T;
        break;
      }
    }
    if (hi == 0.0) {
      est.T_num = opt.T_max;
      est.criterion = "T_max_reached";
      return est;
    }
  } else {
    hi = T;
    while (T > t_min) {
      T = 0.5 * T;
      if (probe(T)) {
        lo = T;
        break;
      }
      hi = T;
    }
    if (lo == 0.0) {
      est.T_num = 0.0;
      est.criterion = last_fail_criterion;
      return est;
    }
  }
  for (int i = 0; i < opt.bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid - lo < t_min * 0.5) break;
    (probe(mid) ? lo : hi) = mid;
  }
  est.T_num = lo;
  est.criterion = last_fail_criterion;
  return est;
}

// ---- diagnostics ------------------------------------------------------------

struct M2NormReport {
  double q = 0;  // 2(p-1) / ((n+3) - (n-1)p)
  double sup_weighted_half = 0, sup_weighted_full = 0;  // L_t^inf of the weighted slice norm
  double cum_half = 0, cum_full = 0;                    // L_t^{pq} L_r^p cumulative norm
  bool finite = true;
};

// Weighted mixed norms of the recovered original field U on the run horizon:
// the slice norm (1+t)^{((n-1)p-n-1)/(2p)} || r^{(n+1)/(2p)} U ||_{L^p_r},
// its running sup over the first and full halves, and the cumulative
// space-time norm || r^{(n+1)/(2p)} U ||_{L_t^{pq} L_r^p}.
inline M2NormReport theorem_m2_norms(const SolutionField& U, double n, double p) {
  M2NormReport rep;
  const double denom = (n + 3.0) - (n - 1.0) * p;
  rep.q = denom != 0.0 ? 2.0 * (p - 1.0) / denom : kInf;
  const double a = 0.5 * ((n - 1.0) * p - n - 1.0) / p;
  std::vector<double> slice(U.nt(), 0.0);
  for (size_t m = 0; m < U.nt(); ++m) {
    double acc = 0.0;
    for (size_t j = 0; j + 1 < U.nr(); ++j) {
      const double r0 = U.r[j], r1 = U.r[j + 1];
      const double f0 = std::pow(r0, 0.5 * (n + 1.0)) * std::pow(std::fabs(U.at(m, j)), p);
      const double f1 = std::pow(r1, 0.5 * (n + 1.0)) * std::pow(std::fabs(U.at(m, j + 1)), p);
      acc += 0.5 * (f0 + f1) * (r1 - r0);
    }
    slice[m] = std::pow(acc, 1.0 / p);
    if (!std::isfinite(slice[m])) rep.finite = false;
  }
  const double Tfull = U.t.back();
  double cum = 0.0;
  for (size_t m = 0; m < U.nt(); ++m) {
    const double t = U.t[m];
    const double weighted = std::pow(1.0 + t, a) * slice[m];
    if (t <= 0.5 * Tfull) rep.sup_weighted_half = std::max(rep.sup_weighted_half, weighted);
    rep.sup_weighted_full = std::max(rep.sup_weighted_full, weighted);
    if (m + 1 < U.nt() && std::isfinite(rep.q) && rep.q > 0.0) {
      const double dt = U.t[m + 1] - U.t[m];
      cum += std::pow(slice[m], p * rep.q) * dt;
      if (t <= 0.5 * Tfull) rep.cum_half = std::pow(cum, 1.0 / (p * rep.q));
    }
  }
  rep.cum_full = (std::isfinite(rep.q) && rep.q > 0.0) ? std::pow(cum, 1.0 / (p * rep.q)) : 0.0;
  return rep;
}

// U = r^{(A-n)/2} u pointwise.
inline SolutionField recover_original(const SolutionField& u, double n, double A) {
  SolutionField U = u;
  const double expo = 0.5 * (A - n);
  for (size_t m = 0; m < U.nt(); ++m)
    for (size_t j = 0; j < U.nr(); ++j) U.at(m, j) = std::pow(U.r[j], expo) * u.at(m, j);
  return U;
}

}  // namespace epd
