#pragma once

// Linear solves for  u_tt - Delta_A u = F,  u(0) = f,  u_t(0) = g  with
// Delta_A = d_rr + (A-1) r^{-1} d_r, via the kernel representation
//
//   u_g(t,r)  = r^{(1-A)/2} \int_{max(0,r-t)}^{t+r} rho^{(A-1)/2} g(rho) I_A(mu) d rho,
//   u_f       = d_t [ u_{g=f} ],
//   u_F(t,r)  = r^{(1-A)/2} \int_0^t \int rho^{(A-1)/2} F(s,rho) I_A(mu) d rho d s,
//   mu        = (r^2 + rho^2 - (t-s)^2) / (2 r rho).
//
// The rho-integral is split at rho = |t-r| (where mu passes through -1 or 1)
// with geometric panel grading into the kernel's log singularity.  For A = 3
// an exact characteristic-diamond march for v = r u provides an O(N^2)
// whole-field assembler for compactly supported data; it is cross-validated
// against the kernel path by the tests.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <vector>

#include "epd/exponents.hpp"
#include "epd/kernel.hpp"
#include "epd/profile.hpp"
#include "epd/quadrature.hpp"

namespace epd {

struct SpacetimePoint {
  double t = 0;
  double r = 0;
};

// smoothed absolute value <a> = sqrt(a^2 + 4) used by all spacetime weights
inline double bracket(double a) { return std::hypot(a, 2.0); }

struct SolutionField {
  std::vector<double> t;
  std::vector<double> r;
  std::vector<double> values;  // row-major, values[it * r.size() + ir]
  double A = 0;
  double max_error_estimate = 0;

  size_t nt() const { return t.size(); }
  size_t nr() const { return r.size(); }
  double& at(size_t it, size_t ir) { return values[it * r.size() + ir]; }
  double at(size_t it, size_t ir) const { return values[it * r.size() + ir]; }

  bool empty() const { return values.empty(); }

  // bilinear interpolation, clamped to the grid box
  double operator()(double tt, double rr) const {
    if (t.size() < 2 || r.size() < 2) throw std::invalid_argument("SolutionField: grid too small");
    size_t it_, ir;
    double wt, wr;
    locate(t, tt, it_, wt);
    locate(r, rr, ir, wr);
    return (1 - wt) * ((1 - wr) * at(it_, ir) + wr * at(it_, ir + 1)) +
           wt * ((1 - wr) * at(it_ + 1, ir) + wr * at(it_ + 1, ir + 1));
  }

  // 4x4 tensor Lagrange interpolation (third order); falls back to bilinear
  // on grids too small for the stencil
  double interp_cubic(double tt, double rr) const {
    if (t.size() < 4 || r.size() < 4) return (*this)(tt, rr);
    size_t it_, ir;
    double wt, wr;
    locate(t, tt, it_, wt);
    locate(r, rr, ir, wr);
    const size_t i0 = it_ == 0 ? 0 : std::min(it_ - 1, t.size() - 4);
    const size_t j0 = ir == 0 ? 0 : std::min(ir - 1, r.size() - 4);
    double lt[4], lr[4];
    for (int a = 0; a < 4; ++a) {
      double pt = 1.0, pr = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b == a) continue;
        pt *= (tt - t[i0 + b]) / (t[i0 + a] - t[i0 + b]);
        pr *= (rr - r[j0 + b]) / (r[j0 + a] - r[j0 + b]);
      }
      lt[a] = pt;
      lr[a] = pr;
    }
    double s = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s += lt[a] * lr[b] * at(i0 + a, j0 + b);
    return s;
  }

 private:
  static void locate(const std::vector<double>& g, double x, size_t& i, double& w) {
    if (x <= g.front()) { i = 0; w = 0.0; return; }
    if (x >= g.back()) { i = g.size() - 2; w = 1.0; return; }
    const auto it = std::upper_bound(g.begin(), g.end(), x);
    i = static_cast<size_t>(it - g.begin()) - 1;
    w = (x - g[i]) / (g[i + 1] - g[i]);
  }
};

namespace ldetail {

// Deterministic parallel map over [0, n): each worker writes only its own
// slots, so results are independent of scheduling.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("EPD_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) hw = static_cast<unsigned>(v);
  }
  const unsigned workers = std::max(1u, std::min<unsigned>(hw, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Cached Gauss-Legendre rules (node generation is not cheap enough for the
// inner loops).  Entries are never removed, so returned references are stable.
inline const qdetail::Rule& cached_legendre(int n) {
  static std::map<int, std::unique_ptr<qdetail::Rule>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<qdetail::Rule>(qdetail::legendre01(n))).first;
  return *it->second;
}

// Shared per-(A, cfg) kernel evaluators; evaluators are immutable once built.
inline std::shared_ptr<const KernelEvaluator> kernel_for(double A, const QuadratureConfig& cfg) {
  struct Key {
    double A, tol, thr;
    int nodes;
    bool operator<(const Key& o) const {
      return std::tie(A, tol, thr, nodes) < std::tie(o.A, o.tol, o.thr, o.nodes);
    }
  };
  static std::map<Key, std::shared_ptr<const KernelEvaluator>> cache;
  static std::mutex mu;
  const Key key{A, cfg.target_rel_tol, cfg.near_singular_threshold, cfg.nodes_per_panel};
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ev = std::make_shared<const KernelEvaluator>(A, cfg);
  cache.emplace(key, ev);
  return ev;
}

struct Segment {
  double lo = 0, hi = 0;
  int levels_lo = 0, levels_hi = 0;  // geometric grading depth per end
};

// Composite integral over graded panels of one segment.
template <class F>
double integrate_segment(const qdetail::Rule& leg, F&& f, const Segment& seg) {
  if (!(seg.hi > seg.lo)) return 0.0;
  const double mid = 0.5 * (seg.lo + seg.hi);
  double total = 0.0;
  if (seg.levels_lo > 0) {
    const auto brk = qdetail::graded_breaks_from_left(seg.lo, mid, seg.levels_lo);
    for (size_t i = 0; i + 1 < brk.size(); ++i) total += qdetail::panel(leg, f, brk[i], brk[i + 1]);
  } else {
    total += qdetail::panel(leg, f, seg.lo, mid);
  }
  if (seg.levels_hi > 0) {
    const auto brk = qdetail::graded_breaks_from_right(mid, seg.hi, seg.levels_hi);
    for (size_t i = 0; i + 1 < brk.size(); ++i) total += qdetail::panel(leg, f, brk[i], brk[i + 1]);
  } else {
    total += qdetail::panel(leg, f, mid, seg.hi);
  }
  return total;
}

inline int deep_levels(const QuadratureConfig& cfg) {
  const int L = static_cast<int>(std::ceil(std::log2(1.0 / cfg.target_rel_tol))) + 6;
  return std::min(44, std::max(14, L));
}

// One rho-integral  r^{(1-A)/2} \int rho^{(A-1)/2} data(rho) I_A(mu) d rho
// at time offset tau = t - s.  `data` must vanish beyond its support radius.
template <class Data>
double radial_cone_integral(const KernelEvaluator& K, const Data& data, double support, double A,
                            double tau, double r, const QuadratureConfig& cfg, double* err_out) {
  if (!(tau > 0.0)) return 0.0;
  const double half = 0.5 * (A - 1.0);
  const auto integrand = [&](double rho) {
    const double gval = rho <= support ? data(rho) : 0.0;
    if (gval == 0.0) return 0.0;
    // stable offsets: 1+mu and 1-mu in factored form
    const double inv = 1.0 / (2.0 * r * rho);
    const double one_plus = (rho + r - tau) * (rho + r + tau) * inv;
    const double one_minus = (tau + r - rho) * (tau - r + rho) * inv;
    const double mu = (r * r + rho * rho - tau * tau) * inv;
    return std::pow(rho, half) * gval * K.eval(mu, one_plus, one_minus);
  };

  const double hi_all = std::min(tau + r, support);
  std::vector<Segment> segs;
  const int deep = deep_levels(cfg);
  const int mild = 8;
  if (r >= tau) {
    // mu stays in (-1, 1]; endpoints touch mu = 1 only
    const double lo = r - tau;
    if (hi_all > lo) segs.push_back({lo, hi_all, mild, mild});
  } else {
    const double split = tau - r;  // mu = -1: kernel log point for non-odd A
    // odd A: no contribution from mu < -1
    if (!K.params().is_odd && std::min(split, support) > 0.0)
      segs.push_back({0.0, std::min(split, support), mild, deep});
    if (hi_all > split) segs.push_back({split, hi_all, K.params().is_odd ? mild : deep, mild});
  }

  double coarse = 0.0, fine = 0.0;
  for (const Segment& s : segs) coarse += integrate_segment(cached_legendre(cfg.nodes_per_panel), integrand, s);
  for (const Segment& s : segs) fine += integrate_segment(cached_legendre(cfg.nodes_per_panel + 6), integrand, s);
  double scale = std::max({std::fabs(fine), std::fabs(coarse), 1e-300});
  double err = std::fabs(fine - coarse) / scale;
  if (err > cfg.target_rel_tol * 10.0) {
    // one deeper pass
    std::vector<Segment> segs2 = segs;
    for (Segment& s : segs2) {
      s.levels_lo = s.levels_lo ? s.levels_lo + 8 : 0;
      s.levels_hi = s.levels_hi ? s.levels_hi + 8 : 0;
    }
    double finer = 0.0;
    for (const Segment& s : segs2) finer += integrate_segment(cached_legendre(cfg.nodes_per_panel + 12), integrand, s);
    scale = std::max({std::fabs(finer), std::fabs(fine), 1e-300});
    err = std::fabs(finer - fine) / scale;
    fine = finer;
  }
  if (err_out) *err_out = err;
  return std::pow(r, -half) * fine;
}

inline double clamp_radius(double t, double r) { return std::max(r, 1e-6 * std::max(1.0, t)); }

}  // namespace ldetail

// u with data (0, g): the g-propagator evaluated at one spacetime point.
inline double solve_g(const RadialProfile& g, double A, SpacetimePoint pt, const QuadratureConfig& cfg = {},
                      const KernelEvaluator* kernel = nullptr, double* err_out = nullptr) {
  if (!(A >= 2.0 - kOddTolerance)) throw std::invalid_argument("solve_g: requires A >= 2");
  if (!(pt.t >= 0.0)) throw std::invalid_argument("solve_g: requires t >= 0");
  if (pt.t == 0.0) return 0.0;
  const double r = ldetail::clamp_radius(pt.t, pt.r);
  std::shared_ptr<const KernelEvaluator> hold;
  if (!kernel) {
    hold = ldetail::kernel_for(A, cfg);
    kernel = hold.get();
  }
  return ldetail::radial_cone_integral(*kernel, g, g.support_radius(), A, pt.t, r, cfg, err_out);
}

// u with data (f, 0) = d_t[u_{g=f}], by Richardson-extrapolated central
// differences in t (one-sided near t = 0).
inline double solve_f(const RadialProfile& f, double A, SpacetimePoint pt, const QuadratureConfig& cfg = {},
                      const KernelEvaluator* kernel = nullptr) {
  if (pt.t == 0.0) return f(std::max(pt.r, 0.0));
  std::shared_ptr<const KernelEvaluator> hold;
  if (!kernel) {
    hold = ldetail::kernel_for(A, cfg);
    kernel = hold.get();
  }
  const auto ug = [&](double tt) { return solve_g(f, A, {tt, pt.r}, cfg, kernel); };
  double h = std::min(0.01, 0.2 * std::max(pt.t, 0.05));
  if (pt.t < 2.0 * h) {
    // one-sided second-order stencil at two step sizes, Richardson combined
    const auto oneside = [&](double hh) {
      return (-3.0 * ug(pt.t) + 4.0 * ug(pt.t + hh) - ug(pt.t + 2.0 * hh)) / (2.0 * hh);
    };
    const double d1 = oneside(h), d2 = oneside(0.5 * h);
    return (4.0 * d2 - d1) / 3.0;
  }
  const auto central = [&](double hh) { return (ug(pt.t + hh) - ug(pt.t - hh)) / (2.0 * hh); };
  const double d1 = central(h), d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

// Cross-validation path for A in [2,3): u_f by differentiating the smooth
// double-integral form
//   u_{g=f}(t,r) = c_A t \int_0^1 \int_{-1}^1 f(X) (1-s^2)^{-th} s^{A-1}
//                  (1-l^2)^{(A-3)/2} dl ds,   X = sqrt(r^2 + t^2 s^2 - 2 r t s l),
// under the integral sign (valid since k = 0 there).
inline double solve_f_smooth(const RadialProfile& f, double A, SpacetimePoint pt, int nodes = 24) {
  if (!(A >= 2.0 && A < 3.0)) throw std::invalid_argument("solve_f_smooth: requires A in [2,3)");
  const double th = 0.5 * (A - 1.0);
  const double t = pt.t, r = std::max(pt.r, 1e-12);
  const auto sig_rule = qdetail::jacobi01(nodes, -th, 0.0);         // (1-s)^{-th} on [0,1]
  const auto lam_rule = qdetail::jacobi01(nodes, 0.5 * (A - 3.0), 0.5 * (A - 3.0));
  double val = 0.0, dval = 0.0;
  for (int i = 0; i < sig_rule.n(); ++i) {
    const double s = sig_rule.x[i];
    const double ws = sig_rule.w[i] * std::pow(1.0 + s, -th) * std::pow(s, A - 1.0);
    for (int j = 0; j < lam_rule.n(); ++j) {
      const double l = 2.0 * lam_rule.x[j] - 1.0;
      // both-endpoint Jacobi rule on [0,1] with exponents (A-3)/2 maps to
      // (1-l^2)^{(A-3)/2} on [-1,1] up to the factor 2^{1+A-3}
      const double wl = lam_rule.w[j] * std::pow(2.0, A - 2.0);
      const double X2 = r * r + t * t * s * s - 2.0 * r * t * s * l;
      const double X = std::sqrt(std::max(X2, 0.0));
      val += ws * wl * f(X);
      if (X > 1e-14) dval += ws * wl * f.derivative(X) * (t * s * s - r * s * l) / X;
    }
  }
  const double cA = 1.0 / (std::tgamma(th) * std::tgamma(1.0 - th));
  return cA * (val + t * dval);
}

// Duhamel term: nested quadrature; the inner rho-integral reuses the solve_g
// machinery at time offset tau = t - s, the outer s-integral refines toward
// s = t and splits where the inner singular point crosses the axis.
inline double duhamel(const SourceField& F, double A, SpacetimePoint pt, const QuadratureConfig& cfg = {},
                      const KernelEvaluator* kernel = nullptr,
                      const std::vector<double>* s_breaks = nullptr) {
  if (!(A >= 2.0 - kOddTolerance)) throw std::invalid_argument("duhamel: requires A >= 2");
  if (!F.valid() || pt.t <= 0.0) return 0.0;
  const double r = ldetail::clamp_radius(pt.t, pt.r);
  std::shared_ptr<const KernelEvaluator> hold;
  if (!kernel) {
    hold = ldetail::kernel_for(A, cfg);
    kernel = hold.get();
  }
  const auto inner = [&](double s) {
    const double tau = pt.t - s;
    double err = 0.0;
    const auto slice = [&](double rho) { return F(s, rho); };
    return ldetail::radial_cone_integral(*kernel, slice, F.support_radius(s), A, tau, r, cfg, &err);
  };

  std::vector<double> brk{0.0, pt.t};
  if (pt.t > r) brk.push_back(pt.t - r);  // inner singular point reaches the axis
  if (s_breaks)
    for (double s : *s_breaks)
      if (s > 0.0 && s < pt.t) brk.push_back(s);
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

  const auto& leg = ldetail::cached_legendre(cfg.nodes_per_panel);
  double total = 0.0;
  for (size_t i = 0; i + 1 < brk.size(); ++i) {
    ldetail::Segment seg{brk[i], brk[i + 1], 0, 0};
    // refine into the cone tip where the inner integral loses smoothness
    if (i + 2 == brk.size()) seg.levels_hi = 10;
    total += ldetail::integrate_segment(leg, inner, seg);
  }
  return total;
}

inline double solve_linear_at(const RadialProfile& f, const RadialProfile& g, const SourceField* F,
                              double A, SpacetimePoint pt, const QuadratureConfig& cfg = {},
                              const KernelEvaluator* kernel = nullptr,
                              const std::vector<double>* s_breaks = nullptr) {
  std::shared_ptr<const KernelEvaluator> hold;
  if (!kernel) {
    hold = ldetail::kernel_for(A, cfg);
    kernel = hold.get();
  }
  double u = 0.0;
  if (f.valid() && f.support_radius() > 0.0) u += solve_f(f, A, pt, cfg, kernel);
  if (g.valid() && g.support_radius() > 0.0) u += solve_g(g, A, pt, cfg, kernel);
  if (F && F->valid()) u += duhamel(*F, A, pt, cfg, kernel, s_breaks);
  return u;
}

enum class AssemblyStrategy { Auto, KernelPointwise, CharacteristicMarch };

// Exact characteristic-diamond march for A = 3 on the staggered grid
// r_j = (j + 1/2) dx, t_m = m dx.  Uses v = r u, which satisfies the 1-D wave
// equation v_tt - v_rr = h with h(s,rho) = rho F(s,rho), the odd reflection
// v(s,-rho) = -v(s,rho) at the axis, and the exact update
//   v(t+dx, r) = v(t, r-dx) + v(t, r+dx) - v(t-dx, r) + (1/2) \iint_D h,
// with D the characteristic diamond centered at (t, r).
// Requires compactly supported data with support covered by the grid.
inline SolutionField march_characteristics_a3(const RadialProfile& f, const RadialProfile& g,
                                              const std::function<double(double, double)>& source,
                                              double dx, size_t nt, size_t nr) {
  SolutionField out;
  out.A = 3.0;
  out.t.resize(nt + 1);
  out.r.resize(nr);
  for (size_t m = 0; m <= nt; ++m) out.t[m] = m * dx;
  for (size_t j = 0; j < nr; ++j) out.r[j] = (j + 0.5) * dx;
  out.values.assign((nt + 1) * nr, 0.0);

  const auto nu0 = [&](double x) { return x * f(std::fabs(x)); };
  const auto nu1 = [&](double x) { return x * g(std::fabs(x)); };
  const auto h = [&](double s, double rho) {
    if (!source) return 0.0;
    const double a = std::fabs(rho);
    const double v = source(s, a);
    return rho >= 0.0 ? a * v : -a * v;  // odd extension of rho * F
  };

  std::vector<double> prev(nr), cur(nr), next(nr);
  const auto& leg4 = ldetail::cached_legendre(4);
  const auto& leg6 = ldetail::cached_legendre(6);

  // piecewise-smooth breakpoints of the odd-extended data
  std::vector<double> kinks{0.0};
  for (double R : {f.support_radius(), g.support_radius()})
    if (std::isfinite(R) && R > 0.0) {
      kinks.push_back(R);
      kinks.push_back(-R);
    }
  const auto integrate_nu1 = [&](double a, double b) {
    std::vector<double> brk{a, b};
    for (double c : kinks)
      if (c > a && c < b) brk.push_back(c);
    std::sort(brk.begin(), brk.end());
    double s = 0.0;
    for (size_t i = 0; i + 1 < brk.size(); ++i) s += qdetail::panel(leg6, nu1, brk[i], brk[i + 1]);
    return s;
  };

  // layer 0
  for (size_t j = 0; j < nr; ++j) prev[j] = nu0(out.r[j]);

  // layer 1 by the exact half-line d'Alembert formula
  for (size_t j = 0; j < nr; ++j) {
    const double rj = out.r[j];
    double v = 0.5 * (nu0(rj + dx) + nu0(rj - dx));
    v += 0.5 * integrate_nu1(rj - dx, rj + dx);
    if (source) {
      // triangle {0 < s < dx, |rho - rj| < dx - s}
      double tri = 0.0;
      for (int a = 0; a < leg4.n(); ++a) {
        const double s = dx * leg4.x[a];
        const double hw = dx - s;
        double row = 0.0;
        for (int b = 0; b < leg4.n(); ++b)
          row += leg4.w[b] * h(s, rj - hw + 2.0 * hw * leg4.x[b]);
        tri += leg4.w[a] * row * 2.0 * hw;
      }
      v += 0.5 * tri * dx;
    }
    cur[j] = v;
  }

  for (size_t j = 0; j < nr; ++j) {
    out.at(0, j) = prev[j] / out.r[j];
    if (nt >= 1) out.at(1, j) = cur[j] / out.r[j];
  }

  const auto& leg2 = ldetail::cached_legendre(2);
  for (size_t m = 1; m < nt; ++m) {
    const double tm = out.t[m];
    for (size_t j = 0; j < nr; ++j) {
      const double rj = out.r[j];
      const double vl = (j == 0) ? -cur[0] : cur[j - 1];  // odd ghost across the axis
      const double vr = (j + 1 < nr) ? cur[j + 1] : 0.0;  // beyond support
      double q = 0.0;
      if (source) {
        // diamond = rectangle in characteristic coordinates (xi, eta)
        const double xi_c = tm + rj, eta_c = tm - rj;
        for (int a = 0; a < leg2.n(); ++a) {
          const double xi = xi_c - dx + 2.0 * dx * leg2.x[a];
          for (int b = 0; b < leg2.n(); ++b) {
            const double eta = eta_c - dx + 2.0 * dx * leg2.x[b];
            const double s = 0.5 * (xi + eta);
            const double rho = 0.5 * (xi - eta);
            if (s >= 0.0) q += leg2.w[a] * leg2.w[b] * h(s, rho);
          }
        }
        q *= 0.5 * (2.0 * dx) * (2.0 * dx) * 0.5;  // Jacobian 1/2, area weights
      }
      next[j] = vl + vr - prev[j] + q;
    }
    std::swap(prev, cur);
    std::swap(cur, next);
    for (size_t j = 0; j < nr; ++j) out.at(m + 1, j) = cur[j] / out.r[j];
  }
  return out;
}

// Whole-field assembly.  Auto picks the characteristic march when A = 3, the
// grid is march-native (uniform, dt = dr, staggered r) and the data are
// compactly supported inside it; otherwise evaluates the kernel
// representation pointwise (in parallel).
inline SolutionField solve_linear(const RadialProfile& f, const RadialProfile& g, const SourceField* F,
                                  double A, std::vector<double> tgrid, std::vector<double> rgrid,
                                  const QuadratureConfig& cfg = {},
                                  AssemblyStrategy strategy = AssemblyStrategy::Auto,
                                  const std::vector<double>* s_breaks = nullptr) {
  const bool odd3 = KernelParams::from_dimension(A).is_odd && KernelParams::from_dimension(A).k == 1;
  bool native = odd3 && tgrid.size() >= 2 && rgrid.size() >= 2;
  if (native) {
    const double dx = tgrid[1] - tgrid[0];
    for (size_t i = 0; i + 1 < tgrid.size() && native; ++i)
      native = std::fabs(tgrid[i + 1] - tgrid[i] - dx) < 1e-12;
    for (size_t j = 0; j + 1 < rgrid.size() && native; ++j)
      native = std::fabs(rgrid[j + 1] - rgrid[j] - dx) < 1e-12;
    native = native && std::fabs(tgrid[0]) < 1e-12 && std::fabs(rgrid[0] - 0.5 * dx) < 1e-12;
    double data_reach = std::max(f.support_radius(), g.support_radius());
    if (F && F->valid()) data_reach = std::max(data_reach, F->support_radius(0.0));
    native = native && tgrid.back() + data_reach <= rgrid.back() + dx;
  }
  if (strategy == AssemblyStrategy::CharacteristicMarch && !native)
    throw std::invalid_argument("solve_linear: characteristic march needs A = 3, a staggered uniform grid "
                                "with dt = dr, and compact data inside it");
  const bool march = strategy == AssemblyStrategy::CharacteristicMarch ||
                     (strategy == AssemblyStrategy::Auto && native);

  if (march) {
    std::function<double(double, double)> src;
    if (F && F->valid()) src = [F](double s, double rho) { return (*F)(s, rho); };
    return march_characteristics_a3(f, g, src, tgrid[1] - tgrid[0], tgrid.size() - 1, rgrid.size());
  }

  SolutionField out;
  out.A = A;
  out.t = std::move(tgrid);
  out.r = std::move(rgrid);
  out.values.assign(out.t.size() * out.r.size(), 0.0);
  auto kernel = ldetail::kernel_for(A, cfg);
  std::atomic<double> max_err{0.0};
  ldetail::parallel_for(out.values.size(), [&](size_t idx) {
    const size_t it = idx / out.r.size(), ir = idx % out.r.size();
    const SpacetimePoint pt{out.t[it], out.r[ir]};
    if (pt.t == 0.0) {
      out.values[idx] = f.valid() ? f(pt.r) : 0.0;
      return;
    }
    out.values[idx] = solve_linear_at(f, g, F, A, pt, cfg, kernel.get(), s_breaks);
  });
  out.max_error_estimate = max_err.load();
  return out;
}

// E(t) = 1/2 \int r^{A-1} (u_t^2 + u_r^2) dr by centered differences on the
// field grid and the trapezoid rule.  t must be an interior grid row.
inline double energy(const SolutionField& u, double A, double t) {
  if (u.nt() < 3 || u.nr() < 3) throw std::invalid_argument("energy: grid too coarse");
  size_t m = 0;
  double best = kInf;
  for (size_t i = 0; i < u.nt(); ++i)
    if (std::fabs(u.t[i] - t) < best) {
      best = std::fabs(u.t[i] - t);
      m = i;
    }
  if (m == 0 || m + 1 >= u.nt())
    throw std::invalid_argument("energy: t must be an interior grid row");
  std::vector<double> dens(u.nr(), 0.0);
  for (size_t j = 0; j < u.nr(); ++j) {
    const double ut = (u.at(m + 1, j) - u.at(m - 1, j)) / (u.t[m + 1] - u.t[m - 1]);
    double ur;
    if (j == 0)
      ur = (u.at(m, 1) - u.at(m, 0)) / (u.r[1] - u.r[0]);
    else if (j + 1 == u.nr())
      ur = (u.at(m, j) - u.at(m, j - 1)) / (u.r[j] - u.r[j - 1]);
    else
      ur = (u.at(m, j + 1) - u.at(m, j - 1)) / (u.r[j + 1] - u.r[j - 1]);
    dens[j] = std::pow(u.r[j], A - 1.0) * (ut * ut + ur * ur);
  }
  double e = 0.0;
  for (size_t j = 0; j + 1 < u.nr(); ++j)
    e += 0.5 * (dens[j] + dens[j + 1]) * (u.r[j + 1] - u.r[j]);
  return 0.5 * e;
}

struct DecayReport {
  std::vector<std::pair<double, double>> weighted_sup;  // (t, W(t))
  double early_max = 0.0;                               // max over t <= window
  double late_max = 0.0;                                // max over t > window
  double ratio = 0.0;
  bool pass = false;
};

// W(t) = max_j <t+r_j>^{(A-1)/2} <t-r_j>^{(A-1)/2} |u(t, r_j)|; passes when
// the late-time sup stays below `factor` times its early maximum.
inline DecayReport decay_check(const SolutionField& u, double A, double window = 4.0,
                               double factor = 3.0) {
  DecayReport rep;
  const double half = 0.5 * (A - 1.0);
  for (size_t m = 0; m < u.nt(); ++m) {
    double w = 0.0;
    for (size_t j = 0; j < u.nr(); ++j) {
      const double t = u.t[m], r = u.r[j];
      w = std::max(w, std::pow(bracket(t + r), half) * std::pow(bracket(t - r), half) *
                          std::fabs(u.at(m, j)));
    }
    rep.weighted_sup.emplace_back(u.t[m], w);
    (u.t[m] <= window ? rep.early_max : rep.late_max) = std::max(
        u.t[m] <= window ? rep.early_max : rep.late_max, w);
  }
  rep.ratio = rep.early_max > 0.0 ? rep.late_max / rep.early_max : 0.0;
  rep.pass = rep.late_max <= factor * rep.early_max;
  return rep;
}

}  // namespace epd
