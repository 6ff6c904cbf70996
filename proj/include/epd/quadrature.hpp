#pragma once

// Panel quadrature with endpoint-weight (Jacobi-type) rules.
//
// Rules are generated once through GSL's fixed-point Gauss machinery on the
// reference interval [0,1] and rescaled affinely.  A rule with weight
// (1-x)^alpha x^beta absorbs an algebraic endpoint singularity exactly, so a
// smooth remaining factor converges spectrally.  Geometric panel grading
// toward an endpoint handles near-singular factors whose scale is set by a
// parameter outside the integration interval.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace epd {

struct QuadratureConfig {
  int nodes_per_panel = 12;
  int max_panels = 4000;
  double target_rel_tol = 1e-9;
  // mu-distance to -1 below which kernel quadrature switches to deep
  // geometric subdivision toward the singular endpoint
  double near_singular_threshold = 1e-3;

  void validate() const {
    if (nodes_per_panel < 4) throw std::invalid_argument("QuadratureConfig: nodes_per_panel must be >= 4");
    if (target_rel_tol <= 0) throw std::invalid_argument("QuadratureConfig: target_rel_tol must be > 0");
    if (max_panels < 1) throw std::invalid_argument("QuadratureConfig: max_panels must be >= 1");
  }
};

class quadrature_error : public std::runtime_error {
 public:
  quadrature_error(const std::string& what, double achieved, double requested)
      : std::runtime_error(what + " (achieved rel. error estimate " + std::to_string(achieved) +
                           ", requested " + std::to_string(requested) + ")"),
        achieved_error(achieved),
        requested_tol(requested) {}
  double achieved_error;
  double requested_tol;
};

namespace qdetail {

inline void gsl_quiet() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

// Nodes/weights on [0,1].  For Jacobi rules the endpoint weight
// (1-x)^alpha x^beta is folded into the weights.
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  double alpha = 0.0;  // exponent at the right endpoint
  double beta = 0.0;   // exponent at the left endpoint
  int n() const { return static_cast<int>(x.size()); }
};

inline Rule make_rule(const gsl_integration_fixed_type* type, int n, double alpha, double beta) {
  gsl_quiet();
  gsl_integration_fixed_workspace* ws =
      gsl_integration_fixed_alloc(type, static_cast<size_t>(n), 0.0, 1.0, alpha, beta);
  if (!ws) throw std::runtime_error("quadrature: failed to build fixed rule (n=" + std::to_string(n) + ")");
  Rule r;
  r.alpha = alpha;
  r.beta = beta;
  r.x.assign(gsl_integration_fixed_nodes(ws), gsl_integration_fixed_nodes(ws) + n);
  r.w.assign(gsl_integration_fixed_weights(ws), gsl_integration_fixed_weights(ws) + n);
  gsl_integration_fixed_free(ws);
  return r;
}

inline Rule legendre01(int n) { return make_rule(gsl_integration_fixed_legendre, n, 0.0, 0.0); }

// ∫_0^1 f(x) (1-x)^alpha x^beta dx ≈ Σ w_i f(x_i),  alpha, beta > -1
inline Rule jacobi01(int n, double alpha, double beta) {
  if (alpha <= -1.0 || beta <= -1.0) throw std::invalid_argument("jacobi rule requires exponents > -1");
  if (alpha == 0.0 && beta == 0.0) return legendre01(n);
  return make_rule(gsl_integration_fixed_jacobi, n, alpha, beta);
}

// Plain panel: ∫_a^b f
template <class F>
double panel(const Rule& leg, F&& f, double a, double b) {
  const double len = b - a;
  double s = 0.0;
  for (int i = 0; i < leg.n(); ++i) s += leg.w[i] * f(a + len * leg.x[i]);
  return len * s;
}

// ∫_a^b (x-a)^beta f(x) dx with a Jacobi rule built as jacobi01(n, 0, beta).
// f receives (x, x-a) so callers can use the exact offset.
template <class F>
double panel_left_weight(const Rule& jac, F&& f, double a, double b) {
  const double len = b - a;
  const double scale = std::pow(len, 1.0 + jac.beta);
  double s = 0.0;
  for (int i = 0; i < jac.n(); ++i) {
    const double off = len * jac.x[i];
    s += jac.w[i] * f(a + off, off);
  }
  return scale * s;
}

// ∫_a^b (b-x)^alpha f(x) dx with a Jacobi rule built as jacobi01(n, alpha, 0).
// f receives (x, b-x).
template <class F>
double panel_right_weight(const Rule& jac, F&& f, double a, double b) {
  const double len = b - a;
  const double scale = std::pow(len, 1.0 + jac.alpha);
  double s = 0.0;
  for (int i = 0; i < jac.n(); ++i) {
    const double off = len * (1.0 - jac.x[i]);
    s += jac.w[i] * f(b - off, off);
  }
  return scale * s;
}

// ∫_a^b (b-x)^alpha (x-a)^beta f(x) dx; f receives (x, x-a, b-x).
template <class F>
double panel_both_weights(const Rule& jac, F&& f, double a, double b) {
  const double len = b - a;
  const double scale = std::pow(len, 1.0 + jac.alpha + jac.beta);
  double s = 0.0;
  for (int i = 0; i < jac.n(); ++i) {
    const double dl = len * jac.x[i];
    const double dr = len * (1.0 - jac.x[i]);
    s += jac.w[i] * f(a + dl, dl, dr);
  }
  return scale * s;
}

// Breakpoints a = c_0 < c_1 < ... < c_L = b with widths growing geometrically
// (ratio 2) away from a.  The first panel has width (b-a)*2^{-(L-1)}.
inline std::vector<double> graded_breaks_from_left(double a, double b, int levels) {
  std::vector<double> c;
  c.reserve(static_cast<size_t>(levels) + 1);
  c.push_back(a);
  const double len = b - a;
  for (int i = levels - 1; i >= 1; --i) c.push_back(a + len * std::ldexp(1.0, -i));
  c.push_back(b);
  return c;
}

inline std::vector<double> graded_breaks_from_right(double a, double b, int levels) {
  std::vector<double> c;
  c.reserve(static_cast<size_t>(levels) + 1);
  c.push_back(a);
  const double len = b - a;
  for (int i = 1; i <= levels - 1; ++i) c.push_back(b - len * std::ldexp(1.0, -i));
  c.push_back(b);
  return c;
}

// Composite Gauss-Legendre over [a,b] with geometric grading toward one or
// both endpoints.  Suitable for integrands with integrable (e.g. log)
// endpoint singularities: the innermost panel is simply truncated at width
// (b-a)*2^{-(levels-1)}, which for ~40 levels puts the omitted mass far below
// double-precision targets.
template <class F>
double graded_legendre(const Rule& leg, F&& f, double a, double b, bool toward_a, bool toward_b,
                       int levels) {
  if (!(b > a)) return 0.0;
  if (!toward_a && !toward_b) return panel(leg, f, a, b);
  double total = 0.0;
  if (toward_a && toward_b) {
    const double m = 0.5 * (a + b);
    total += graded_legendre(leg, f, a, m, true, false, levels);
    total += graded_legendre(leg, f, m, b, false, true, levels);
    return total;
  }
  const std::vector<double> c = toward_a ? graded_breaks_from_left(a, b, levels)
                                         : graded_breaks_from_right(a, b, levels);
  for (size_t i = 0; i + 1 < c.size(); ++i) total += panel(leg, f, c[i], c[i + 1]);
  return total;
}

}  // namespace qdetail
}  // namespace epd
