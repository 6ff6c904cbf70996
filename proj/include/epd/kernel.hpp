#pragma once

// The fractional-dimension radial wave kernel
//
//   I_A(mu) = 2^{(1-A)/2} / Gamma((A-1)/2) *
//             \int_{-1}^{1} X_+^{(1-A)/2}(lambda - mu) (1 - lambda^2)^{(A-3)/2} d lambda,
//
// where X_+^a is the homogeneous distribution equal to x^a / Gamma(a+1) on
// x > 0.  Writing A = 1 + 2k + 2theta with k a nonnegative integer and
// theta in (0,1), integration by parts gives on -1 <= mu < 1
//
//   I_A(mu) = 2^{-k-theta} / (Gamma(k+theta) Gamma(1-theta)) *
//             \int_mu^1 (lambda-mu)^{-theta} (-d/dlambda)^k (1-lambda^2)^{k+theta-1} d lambda,
//
// with the derivative expanded into the finite sum  sum_j C_j lambda^{k-2j}
// (1-lambda^2)^{j+theta-1}.  For mu < -1 the defining integral is regular and
// evaluated directly; for odd A (theta -> 0) the kernel collapses to a
// polynomial in mu and vanishes for mu < -1.
//
// Branch facts exercised by the tests: I_A(mu) = 0 for mu > 1, the one-sided
// limit I_A(1-) = 1/2, a log singularity at mu = -1 for non-odd A, and
// |I_A(mu)| ~ (1-mu)^{(1-A)/2} as mu -> -infinity.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "epd/quadrature.hpp"

namespace epd {

inline constexpr double kOddTolerance = 1e-12;  // distance of (A-1)/2 to an integer

struct KernelParams {
  double A = 0;
  int k = 0;         // A = 1 + 2k + 2theta
  double theta = 0;  // in (0,1) on the non-odd branch; 0 when odd
  bool is_odd = false;

  static KernelParams from_dimension(double A) {
    if (!(A > 1.0)) throw std::invalid_argument("KernelParams: requires A > 1");
    KernelParams kp;
    kp.A = A;
    const double half = 0.5 * (A - 1.0);
    const double nearest = std::round(half);
    if (std::fabs(half - nearest) <= 0.5 * kOddTolerance && nearest >= 1.0) {
      kp.is_odd = true;
      kp.k = static_cast<int>(nearest);
      kp.theta = 0.0;
    } else {
      kp.k = static_cast<int>(std::floor(half));
      kp.theta = half - kp.k;
    }
    return kp;
  }
};

// A finite sum  sum coeff * lambda^power * (1-lambda^2)^{weight_exponent}.
// Tables are produced by repeatedly applying -d/dlambda via
//   d/dlambda [ l^a (1-l^2)^b ] = a l^{a-1} (1-l^2)^b - 2b l^{a+1} (1-l^2)^{b-1}.
struct CoefficientTable {
  struct Term {
    int power;               // a
    double weight_exponent;  // b
    double coeff;
  };
  std::vector<Term> terms;
  double min_weight_exponent = 0.0;  // smallest b (equals theta-1 for the ibp table)

  double evaluate(double lambda, double one_minus_lambda_sq) const {
    double s = 0.0;
    for (const Term& t : terms)
      s += t.coeff * std::pow(lambda, t.power) * std::pow(one_minus_lambda_sq, t.weight_exponent);
    return s;
  }

  // index j such that weight_exponent = min_weight_exponent + j
  int group_of(const Term& t) const {
    return static_cast<int>(std::llround(t.weight_exponent - min_weight_exponent));
  }

  int max_group() const {
    int m = 0;
    for (const Term& t : terms) m = std::max(m, group_of(t));
    return m;
  }

  // sum over terms with group j of coeff * lambda^a
  double evaluate_group(int j, double lambda) const {
    double s = 0.0;
    for (const Term& t : terms)
      if (group_of(t) == j) s += t.coeff * std::pow(lambda, t.power);
    return s;
  }

  // coefficient of the highest power of lambda
  double leading_coefficient() const {
    int amax = -1;
    double c = 0.0;
    for (const Term& t : terms)
      if (t.power > amax) {
        amax = t.power;
        c = t.coeff;
      }
    return c;
  }
};

namespace kdetail {

// Applies (-d/dlambda) `applications` times to (1-lambda^2)^{seed_b}.
inline CoefficientTable fold_derivatives(int applications, double seed_b) {
  const double frac = seed_b - std::floor(seed_b);
  std::map<std::pair<int, long long>, double> acc;  // key: (power, integer offset of b)
  acc[{0, static_cast<long long>(std::llround(seed_b - frac))}] = 1.0;
  for (int step = 0; step < applications; ++step) {
    std::map<std::pair<int, long long>, double> next;
    for (const auto& [key, c] : acc) {
      const auto [a, jb] = key;
      const double b = static_cast<double>(jb) + frac;
      if (a >= 1) next[{a - 1, jb}] += -c * a;             // -(a l^{a-1} (1-l^2)^b)
      if (b != 0.0) next[{a + 1, jb - 1}] += c * 2.0 * b;  // +2b l^{a+1} (1-l^2)^{b-1}
    }
    acc = std::move(next);
  }
  CoefficientTable table;
  long long jb_min = 0;
  bool first = true;
  for (const auto& [key, c] : acc) {
    if (c == 0.0) continue;
    const auto [a, jb] = key;
    table.terms.push_back({a, static_cast<double>(jb) + frac, c});
    if (first || jb < jb_min) jb_min = key.second;
    first = false;
  }
  table.min_weight_exponent = static_cast<double>(jb_min) + frac;
  return table;
}

// 2^k (k+theta-1)(k+theta-2)...theta for k > 0, and 1 for k = 0.
inline double leading_coefficient_reference(int k, double theta) {
  if (k == 0) return 1.0;
  double prod = 1.0;
  for (int i = 0; i < k; ++i) prod *= theta + i;
  return std::ldexp(prod, k);
}

}  // namespace kdetail

// Expansion of (-d/dlambda)^k (1-lambda^2)^{k+theta-1} for non-odd A.
inline CoefficientTable build_coefficients(double A) {
  const KernelParams kp = KernelParams::from_dimension(A);
  if (kp.is_odd) throw std::invalid_argument("build_coefficients: odd A uses the polynomial closed form");
  return kdetail::fold_derivatives(kp.k, kp.k + kp.theta - 1.0);
}

// Evaluates I_A(mu) on all branches.  Immutable after construction; safe to
// share across threads.
class KernelEvaluator {
 public:
  explicit KernelEvaluator(double A, QuadratureConfig cfg = {})
      : p_(KernelParams::from_dimension(A)), cfg_(cfg) {
    cfg_.validate();
    const int n1 = cfg_.nodes_per_panel;
    const int n2 = (3 * n1) / 2 + 2;
    const int n3 = 2 * n1 + 8;
    const int nodes[3] = {n1, n2, n3};
    for (int i = 0; i < 3; ++i) leg_[i] = qdetail::legendre01(nodes[i]);
    if (p_.is_odd) {
      poly_ = kdetail::fold_derivatives(p_.k - 1, static_cast<double>(p_.k - 1));
      scale_poly_ = std::ldexp(1.0, -p_.k) / std::tgamma(static_cast<double>(p_.k));
    } else {
      table_ = kdetail::fold_derivatives(p_.k, p_.k + p_.theta - 1.0);
      scale_ibp_ = std::pow(2.0, -(p_.k + p_.theta)) /
                   (std::tgamma(p_.k + p_.theta) * std::tgamma(1.0 - p_.theta));
      scale_direct_ = std::pow(2.0, 0.5 * (1.0 - p_.A)) /
                      (std::tgamma(0.5 * (p_.A - 1.0)) * std::tgamma(0.5 * (3.0 - p_.A)));
      const double edge = 0.5 * (p_.A - 3.0);
      for (int i = 0; i < 3; ++i) {
        const int n = nodes[i];
        jac_onset_[i] = qdetail::jacobi01(n, 0.0, -p_.theta);
        jac_edge_[i] = qdetail::jacobi01(n, 0.0, edge);
        jac_edge_both_[i] = qdetail::jacobi01(n, edge, edge);
        for (int j = 0; j <= table_.max_group(); ++j)
          jac_tail_[i].push_back(qdetail::jacobi01(n, 0.0, j + p_.theta - 1.0));
      }
    }
  }

  const KernelParams& params() const { return p_; }
  const CoefficientTable& coefficients() const { return p_.is_odd ? poly_ : table_; }
  const QuadratureConfig& config() const { return cfg_; }
  double last_error_estimate() const { return last_err_.load(std::memory_order_relaxed); }

  double operator()(double mu) const { return eval(mu, 1.0 + mu, 1.0 - mu); }

  // Callers that know mu only through cancellation-prone expressions can pass
  // the offsets 1+mu and 1-mu computed in factored form.
  double eval(double mu, double one_plus_mu, double one_minus_mu) const {
    if (one_minus_mu < 0.0) return 0.0;   // mu > 1: empty support
    if (one_minus_mu == 0.0) return 0.5;  // one-sided limit I_A(1-)
    if (p_.is_odd) {
      if (one_plus_mu < 0.0) return 0.0;  // odd A: no tail below mu = -1
      return scale_poly_ * poly_.evaluate(mu, one_plus_mu * one_minus_mu);
    }
    if (one_plus_mu < 0.0) return eval_direct(mu, one_plus_mu);
    // mu = -1 exactly is a logarithmic point for non-odd A; report the
    // one-sided scale just inside.
    if (one_plus_mu == 0.0) return eval_ibp(-1.0 + 1e-12, 1e-12, 2.0 - 1e-12);
    return eval_ibp(mu, one_plus_mu, one_minus_mu);
  }

 private:
  template <class Pass>
  double settle(double scale, Pass&& pass, const char* what) const {
    double prev = 0.0;
    for (int lvl = 0; lvl < 3; ++lvl) {
      const double val = scale * pass(lvl);
      if (lvl > 0) {
        // floor the denominator at the kernel's natural O(1) scale so that
        // isolated zeros of I_A do not read as non-convergence
        const double denom = std::max({std::fabs(val), std::fabs(prev), 0.05});
        const double err = std::fabs(val - prev) / denom;
        last_err_.store(err, std::memory_order_relaxed);
        if (err <= cfg_.target_rel_tol * 10.0 || lvl == 2) {
          if (lvl == 2 && err > std::max(1e-6, cfg_.target_rel_tol * 1e3))
            throw quadrature_error(what, err, cfg_.target_rel_tol);
          return val;
        }
      }
      prev = val;
    }
    return prev;
  }

  // non-odd A, -1 < mu < 1: integration-by-parts form over [mu, 1]
  double eval_ibp(double mu, double one_plus_mu, double one_minus_mu) const {
    return settle(scale_ibp_,
                  [&](int lvl) { return ibp_pass(mu, one_plus_mu, one_minus_mu, lvl); },
                  "kernel quadrature did not settle (ibp branch)");
  }

  // All panel geometry lives in offset coordinates (xi = lambda - mu on the
  // left half, eta = 1 - lambda on the right half) so that graded breakpoints
  // remain exact when mu sits within a few ulps of +-1.
  double ibp_pass(double mu, double one_plus_mu, double one_minus_mu, int lvl) const {
    const double len = one_minus_mu;
    const double half_len = 0.5 * len;
    double total = 0.0;

    // xi in [0, half_len]: weight xi^{-theta}; geometric panels toward 0 keep
    // the (1+lambda)^{theta-1} factor resolved down to the scale 1+mu.
    {
      const int levels = grading_levels(half_len, one_plus_mu, lvl);
      const auto smooth = [&](double xi) {
        const double omls = (len - xi) * (one_plus_mu + xi);  // 1 - lambda^2
        return table_.evaluate(mu + xi, omls);
      };
      const std::vector<double> brk = qdetail::graded_breaks_from_left(0.0, half_len, levels);
      total += qdetail::panel_left_weight(
          jac_onset_[lvl], [&](double, double xi) { return smooth(xi); }, 0.0, brk[1]);
      for (size_t i = 1; i + 1 < brk.size(); ++i)
        total += qdetail::panel(
            leg_[lvl], [&](double xi) { return std::pow(xi, -p_.theta) * smooth(xi); }, brk[i],
            brk[i + 1]);
    }

    // eta in [0, half_len]: per-group weight eta^{j+theta-1}; the rest smooth.
    for (int j = 0; j <= table_.max_group(); ++j) {
      const double b = j + p_.theta - 1.0;
      total += qdetail::panel_left_weight(
          jac_tail_[lvl][j],
          [&](double, double eta) {
            const double lam = 1.0 - eta;
            return std::pow(len - eta, -p_.theta) * std::pow(2.0 - eta, b) *
                   table_.evaluate_group(j, lam);
          },
          0.0, half_len);
    }
    return total;
  }

  // non-odd A, mu < -1: direct integral of the defining function form,
  //   scale * \int_{-1}^1 (lambda-mu)^{(1-A)/2} (1-lambda^2)^{(A-3)/2} dlambda.
  double eval_direct(double mu, double one_plus_mu) const {
    return settle(scale_direct_, [&](int lvl) { return direct_pass(mu, one_plus_mu, lvl); },
                  "kernel quadrature did not settle (direct branch)");
  }

  double direct_pass(double mu, double one_plus_mu, int lvl) const {
    const double expo = 0.5 * (1.0 - p_.A);
    const double edge = 0.5 * (p_.A - 3.0);
    const double gap = -one_plus_mu;  // distance of the branch point to the interval
    if (gap >= 1.0) {
      return qdetail::panel_both_weights(
          jac_edge_both_[lvl], [&](double lam, double, double) { return std::pow(lam - mu, expo); },
          -1.0, 1.0);
    }
    double total = 0.0;
    // zeta = 1 + lambda in [0, 1]: edge weight zeta^{(A-3)/2}, graded toward 0
    // where (lambda-mu)^{(1-A)/2} = (zeta+gap)^{(1-A)/2} steepens as mu -> -1^-
    {
      const int levels = grading_levels(1.0, gap, lvl);
      const std::vector<double> brk = qdetail::graded_breaks_from_left(0.0, 1.0, levels);
      total += qdetail::panel_left_weight(
          jac_edge_[lvl],
          [&](double, double zeta) {
            return std::pow(zeta + gap, expo) * std::pow(2.0 - zeta, edge);
          },
          0.0, brk[1]);
      for (size_t i = 1; i + 1 < brk.size(); ++i)
        total += qdetail::panel(
            leg_[lvl],
            [&](double zeta) {
              return std::pow(zeta, edge) * std::pow(zeta + gap, expo) * std::pow(2.0 - zeta, edge);
            },
            brk[i], brk[i + 1]);
    }
    // eta = 1 - lambda in [0, 1]: edge weight eta^{(A-3)/2}, rest smooth
    total += qdetail::panel_left_weight(
        jac_edge_[lvl],
        [&](double, double eta) {
          return std::pow((2.0 - eta) + gap, expo) * std::pow(2.0 - eta, edge);
        },
        0.0, 1.0);
    return total;
  }

  int grading_levels(double length, double resolve_to, int lvl) const {
    const double ratio = length / std::max(resolve_to * 0.25, 1e-300);
    int L = 6 + lvl * 4;
    if (ratio > 1.0)
      L = std::max(L, static_cast<int>(std::ceil(std::log2(ratio))) + 6 + lvl * 4);
    return std::min(L, std::max(8, cfg_.max_panels / 4));
  }

  KernelParams p_;
  QuadratureConfig cfg_;
  CoefficientTable table_;  // non-odd expansion
  CoefficientTable poly_;   // odd closed form
  double scale_ibp_ = 0.0, scale_direct_ = 0.0, scale_poly_ = 0.0;
  qdetail::Rule leg_[3];
  qdetail::Rule jac_onset_[3];              // offset weight x^{-theta}
  qdetail::Rule jac_edge_[3];               // offset weight x^{(A-3)/2}
  qdetail::Rule jac_edge_both_[3];          // both endpoints, on [-1,1] directly
  std::vector<qdetail::Rule> jac_tail_[3];  // offset weight x^{j+theta-1} per group
  mutable std::atomic<double> last_err_{0.0};
};

// One-shot evaluation (prefer a shared KernelEvaluator in loops).
inline double eval_kernel(double A, double mu, const QuadratureConfig& cfg = {}) {
  if (!(A >= 2.0 - kOddTolerance)) throw std::invalid_argument("eval_kernel: artifact scope is A >= 2");
  return KernelEvaluator(A, cfg)(mu);
}

struct KernelAsymptotics {
  // far field (mu <= -2): samples of |I_A(mu)| (1-mu)^{(A-1)/2}
  std::vector<std::pair<double, double>> far_samples;
  double far_tail_drift = 0.0;  // relative change across the last two samples
  // log region: raw samples of I_A(mu) / ln|1+mu| near mu = -1 (converge to
  // the log coefficient like 1/|ln d| because of the O(1) remainder)
  std::vector<std::pair<double, double>> log_samples;
  // the same coefficient extracted as the slope of I_A against ln|1+mu|
  // between consecutive offsets, which kills the O(1) term
  std::vector<double> log_slopes_above;
  std::vector<double> log_slopes_below;
  double log_tail_drift = 0.0;  // relative change across the last two slopes
  double log_side_gap = 0.0;    // relative gap between one-sided slopes
};

// Report-only numerical check of the decay and log-blowup behavior of I_A.
// `log_offsets` must be decreasing distances to -1.
inline KernelAsymptotics kernel_asymptotics_check(double A, std::span<const double> far_mu,
                                                  std::span<const double> log_offsets,
                                                  const QuadratureConfig& cfg = {}) {
  const KernelEvaluator K(A, cfg);
  KernelAsymptotics rep;
  for (double mu : far_mu) {
    const double v = std::fabs(K(mu)) * std::pow(1.0 - mu, 0.5 * (A - 1.0));
    rep.far_samples.emplace_back(mu, v);
  }
  if (rep.far_samples.size() >= 2) {
    const double a = rep.far_samples[rep.far_samples.size() - 2].second;
    const double b = rep.far_samples.back().second;
    rep.far_tail_drift = std::fabs(b - a) / std::max({std::fabs(a), std::fabs(b), 1e-300});
  }
  if (!K.params().is_odd) {
    std::vector<double> above, below, lnd;
    for (double d : log_offsets) {
      above.push_back(K.eval(-1.0 + d, d, 2.0 - d));
      below.push_back(K.eval(-1.0 - d, -d, 2.0 + d));
      lnd.push_back(std::log(d));
      rep.log_samples.emplace_back(d, above.back() / lnd.back());
      rep.log_samples.emplace_back(-d, below.back() / lnd.back());
    }
    for (size_t i = 0; i + 1 < lnd.size(); ++i) {
      rep.log_slopes_above.push_back((above[i + 1] - above[i]) / (lnd[i + 1] - lnd[i]));
      rep.log_slopes_below.push_back((below[i + 1] - below[i]) / (lnd[i + 1] - lnd[i]));
    }
    if (rep.log_slopes_above.size() >= 2) {
      const double s1 = rep.log_slopes_above[rep.log_slopes_above.size() - 2];
      const double s2 = rep.log_slopes_above.back();
      rep.log_tail_drift = std::fabs(s2 - s1) / std::max({std::fabs(s1), std::fabs(s2), 1e-300});
    }
    if (!rep.log_slopes_above.empty()) {
      const double sa = rep.log_slopes_above.back();
      const double sb = rep.log_slopes_below.back();
      rep.log_side_gap = std::fabs(sa - sb) / std::max({std::fabs(sa), std::fabs(sb), 1e-300});
    }
  }
  return rep;
}

}  // namespace epd
