#pragma once

// Critical exponents, regime classification and lifespan laws for the radial
// semilinear wave equation with an inverse-square potential V r^{-2}.
//
// The substitution u = r^{(n-A)/2} U turns the potential problem into a wave
// equation in the effective (possibly fractional) spatial dimension
//   A = 2 + sqrt((n-2)^2 + 4V),
// whose radial Laplacian is the Euler-Poisson-Darboux operator
//   Delta_A = d_rr + (A-1) r^{-1} d_r.
// Everything in this header is closed-form algebra on (n, A, p, epsilon).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace epd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// h_S(p; n) = (n-1) p^2 - (n+1) p - 2; its positive root is the Strauss
// exponent p_S(n).
inline double h_strauss(double p, double n) { return (n - 1.0) * p * p - (n + 1.0) * p - 2.0; }

// h_F(p; m) = m p - (m + 2); its root is the Fujita exponent p_F(m).
inline double h_fujita(double p, double m) { return m * p - (m + 2.0); }

inline double hardy_threshold(double n) { return -0.25 * (n - 2.0) * (n - 2.0); }

// A = 2 + sqrt((n-2)^2 + 4V).  V below the Hardy threshold -(n-2)^2/4 makes
// the operator unbounded below and is rejected.
inline double dimension_shift(double n, double V) {
  if (!(n >= 2.0)) throw std::invalid_argument("dimension_shift: spatial dimension n must be >= 2");
  const double vmin = hardy_threshold(n);
  if (V < vmin - 1e-12 * std::max(1.0, std::fabs(vmin)))
    throw std::invalid_argument("dimension_shift: V=" + std::to_string(V) +
                                " lies below the Hardy threshold -(n-2)^2/4 = " + std::to_string(vmin));
  const double disc = std::max(0.0, (n - 2.0) * (n - 2.0) + 4.0 * V);
  return 2.0 + std::sqrt(disc);
}

// Inverse of dimension_shift: the potential that produces effective dimension A.
inline double potential_for_dimension(double n, double A) {
  if (!(A >= 2.0)) throw std::invalid_argument("potential_for_dimension: A must be >= 2");
  return 0.25 * ((A - 2.0) * (A - 2.0) - (n - 2.0) * (n - 2.0));
}

struct ProblemParams {
  double n;        // spatial dimension, >= 2
  double V;        // potential coefficient, >= -(n-2)^2/4
  double p;        // nonlinearity power, > 1
  double epsilon;  // data amplitude, > 0
  double A;        // derived effective dimension

  ProblemParams(double n_, double V_, double p_, double epsilon_)
      : n(n_), V(V_), p(p_), epsilon(epsilon_), A(dimension_shift(n_, V_)) {
    if (!(p > 1.0)) throw std::invalid_argument("ProblemParams: p must be > 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("ProblemParams: epsilon must be > 0");
  }
};

// Positive root of h_S(.; n).
inline double strauss_exponent(double n) {
  if (!(n > 1.0)) throw std::invalid_argument("strauss_exponent: requires n > 1");
  const double a = n - 1.0, b = -(n + 1.0), c = -2.0;
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

struct ExponentSet {
  double p_S;     // Strauss exponent, root of h_S(.; n)
  double p_F;     // Fujita exponent at shifted dimension (n+A-2)/2, = (n+A+2)/(n+A-2)
  double p_d;     // 2/(A-1), where Strauss and Fujita effects exchange dominance
  double p_m;     // (n+1)/(n-1)
  double p_M;     // (n+1)/(n-A) for n > A, +inf otherwise
  double p_t;     // (n+A)/(n-1)
  double p_conf;  // conformal exponent (n+3)/(n-1)
};

// All exponents are valid for A > 1; the PDE-side scope is A >= 2 but the
// borderline manifold below dips to smaller A for small n.
inline ExponentSet exponent_set(double n, double A) {
  if (!(n >= 2.0)) throw std::invalid_argument("exponent_set: n must be >= 2");
  if (!(A > 1.0)) throw std::invalid_argument("exponent_set: A must be > 1");
  ExponentSet e{};
  e.p_S = strauss_exponent(n);
  e.p_F = (n + A + 2.0) / (n + A - 2.0);
  e.p_d = 2.0 / (A - 1.0);
  e.p_m = (n + 1.0) / (n - 1.0);
  e.p_M = (n > A) ? (n + 1.0) / (n - A) : kInf;
  e.p_t = (n + A) / (n - 1.0);
  e.p_conf = (n + 3.0) / (n - 1.0);
  return e;
}

// p_F evaluated at dimension (n+A-2)/2 coincides with the Glassey exponent
// (m+1)/(m-1) at m = (n+A)/2.  Holds identically; exposed as a sanity check.
inline bool glassey_identity_check(double n, double A, double tol = 1e-12) {
  if (!(n + A > 2.0)) throw std::invalid_argument("glassey_identity_check: requires n + A > 2");
  const double lhs = (n + A + 2.0) / (n + A - 2.0);
  const double m = 0.5 * (n + A);
  const double rhs = (m + 1.0) / (m - 1.0);
  return std::fabs(lhs - rhs) <= tol * std::max(1.0, std::fabs(lhs));
}

enum class RegimeTag { StraussDominant, Borderline, FujitaDominant };

inline const char* to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::StraussDominant: return "StraussDominant";
    case RegimeTag::Borderline: return "Borderline";
    case RegimeTag::FujitaDominant: return "FujitaDominant";
  }
  return "?";
}

struct Regime {
  RegimeTag tag;
  double discriminant;  // (3-A)(A+n+2) - 8
};

// Negative discriminant: p_d < p_F < p_S (Strauss effect decides the lifespan).
// Zero: all three coincide.  Positive: p_d > p_F > p_S (Fujita effect decides).
inline Regime classify_regime(double n, double A, double tol = 1e-12) {
  if (!(n >= 2.0) || !(A > 1.0)) throw std::invalid_argument("classify_regime: requires n >= 2, A > 1");
  const double d = (3.0 - A) * (A + n + 2.0) - 8.0;
  RegimeTag tag = RegimeTag::Borderline;
  if (d < -tol) tag = RegimeTag::StraussDominant;
  else if (d > tol) tag = RegimeTag::FujitaDominant;
  return Regime{tag, d};
}

// The A solving (3-A)(A+n+2) = 8, i.e. the positive root of
// A^2 + (n-1)A - (3n-2) = 0.  On this curve p_d = p_F = p_S.
inline double borderline_dimension(double n) {
  const double b = n - 1.0, c = -(3.0 * n - 2.0);
  return 0.5 * (-b + std::sqrt(b * b - 4.0 * c));
}

enum class LifespanForm { Power, PowerLog, ExpPower, Infinite, NotCovered };

inline const char* to_string(LifespanForm f) {
  switch (f) {
    case LifespanForm::Power: return "Power";
    case LifespanForm::PowerLog: return "PowerLog";
    case LifespanForm::ExpPower: return "ExpPower";
    case LifespanForm::Infinite: return "Infinite";
    case LifespanForm::NotCovered: return "NotCovered";
  }
  return "?";
}

// T*(eps) up to an undetermined constant c:
//   Power:    T* = c eps^{exponent_of_epsilon}
//   PowerLog: T* = c eps^{exponent_of_epsilon} |ln eps|^{log_exponent}
//   ExpPower: T* = exp(c eps^{inner_exponent})
//   Infinite: global existence
//   NotCovered: p outside the theorem hypotheses; no extrapolation offered
struct LifespanLaw {
  LifespanForm form = LifespanForm::NotCovered;
  double exponent_of_epsilon = 0.0;
  double log_exponent = 0.0;
  double inner_exponent = 0.0;
};

// Hypotheses under which the lifespan tables apply: p_m < p < p_M when
// A in [2,3], 1 < p < p_conf when A >= 3 (the union at A = 3 exactly).
inline bool lifespan_covered(double p, double n, double A) {
  if (!(p > 1.0)) return false;
  const ExponentSet e = exponent_set(n, A);
  const bool narrow = (A >= 2.0 && A <= 3.0) && (p > e.p_m && p < e.p_M);
  const bool high = (A >= 3.0) && (p < e.p_conf);
  return narrow || high;
}

namespace edetail {
inline bool close(double a, double b, double tol = 1e-9) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}
}  // namespace edetail

// The piecewise lifespan law for admissible (p, n, A).  Finite-form exponent
// signs always make T* -> infinity as eps -> 0+.
inline LifespanLaw lifespan_law(double p, double n, double A) {
  if (!lifespan_covered(p, n, A)) return LifespanLaw{LifespanForm::NotCovered, 0, 0, 0};
  const ExponentSet e = exponent_set(n, A);
  const Regime reg = classify_regime(n, A);
  const double m = 0.5 * (n + A - 2.0);
  const double hF = h_fujita(p, m);
  const double hS = h_strauss(p, n);

  LifespanLaw law{};
  if (reg.tag == RegimeTag::StraussDominant) {
    // p_d < p_F < p_S (for A >= 3 additionally p_d <= 1 < p, so only the
    // Strauss branches are reachable there)
    if (p < e.p_d && !edetail::close(p, e.p_d)) {
      law = {LifespanForm::Power, (p - 1.0) / hF, 0, 0};
    } else if (edetail::close(p, e.p_d)) {
      law = {LifespanForm::PowerLog, (p - 1.0) / hF, 1.0 / hF, 0};
    } else if (p < e.p_S && !edetail::close(p, e.p_S)) {
      law = {LifespanForm::Power, 2.0 * p * (p - 1.0) / hS, 0, 0};
    } else if (edetail::close(p, e.p_S)) {
      law = {LifespanForm::ExpPower, 0, 0, p * (1.0 - p)};
    } else {
      law = {LifespanForm::Infinite, 0, 0, 0};
    }
  } else if (reg.tag == RegimeTag::Borderline) {
    // p_d = p_F = p_S
    if (p < e.p_d && !edetail::close(p, e.p_d)) {
      law = {LifespanForm::Power, (p - 1.0) / hF, 0, 0};
    } else if (edetail::close(p, e.p_d)) {
      law = {LifespanForm::ExpPower, 0, 0, 0.5 * (1.0 - p)};
    } else {
      law = {LifespanForm::Infinite, 0, 0, 0};
    }
  } else {
    // Fujita dominant: p_d > p_F > p_S
    if (p < e.p_F && !edetail::close(p, e.p_F)) {
      law = {LifespanForm::Power, (p - 1.0) / hF, 0, 0};
    } else if (edetail::close(p, e.p_F)) {
      law = {LifespanForm::ExpPower, 0, 0, 1.0 - p};
    } else {
      law = {LifespanForm::Infinite, 0, 0, 0};
    }
  }
  return law;
}

// A lifespan magnitude kept in log space; ExpPower values overflow doubles
// for small epsilon.
struct LifespanValue {
  bool infinite = false;
  double log_T = 0.0;
  double value() const { return infinite ? kInf : std::exp(log_T); }
};

inline LifespanValue lifespan_value(const LifespanLaw& law, double epsilon, double c = 1.0) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("lifespan_value: epsilon must be in (0,1)");
  if (!(c > 0.0)) throw std::invalid_argument("lifespan_value: c must be > 0");
  const double le = std::log(epsilon);
  switch (law.form) {
    case LifespanForm::Power:
      return {false, std::log(c) + law.exponent_of_epsilon * le};
    case LifespanForm::PowerLog:
      return {false, std::log(c) + law.exponent_of_epsilon * le + law.log_exponent * std::log(-le)};
    case LifespanForm::ExpPower:
      return {false, c * std::pow(epsilon, law.inner_exponent)};
    case LifespanForm::Infinite:
      return {true, kInf};
    case LifespanForm::NotCovered:
      break;
  }
  throw std::invalid_argument("lifespan_value: law is NotCovered");
}

// log-derivative d ln T* / d ln eps of a Power-form law.
inline double lifespan_slope(double p, double n, double A) {
  const LifespanLaw law = lifespan_law(p, n, A);
  if (law.form != LifespanForm::Power)
    throw std::invalid_argument(std::string("lifespan_slope: law form is ") + to_string(law.form) +
                                ", slope defined only for Power");
  return law.exponent_of_epsilon;
}

// Solves  eps^{p-1} T^{-h_F/2} ln T = a  for T >= 3 (the implicit equation
// behind the p = p_d lifespan), bisecting in ln T to relative tolerance 1e-10.
// Requires h_F(p; (n+A-2)/2) < 0 so the left side grows in T.  Asymptotically
// T ~ const * eps^{2(p-1)/h_F} |ln eps|^{2/h_F}.
inline double lifespan_implicit_log(double p, double n, double A, double epsilon, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("lifespan_implicit: a must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("lifespan_implicit: epsilon must be in (0,1)");
  const double m = 0.5 * (n + A - 2.0);
  const double hF = h_fujita(p, m);
  if (!(hF < 0.0))
    throw std::invalid_argument("lifespan_implicit: requires h_F < 0 (p below the shifted Fujita exponent)");
  const double x = -0.5 * hF;  // positive growth exponent of T
  // g(lnT) = (p-1) ln eps + x lnT + ln lnT - ln a, strictly increasing
  const auto g = [&](double lt) { return (p - 1.0) * std::log(epsilon) + x * lt + std::log(lt) - std::log(a); };
  double lo = std::log(3.0);
  if (g(lo) > 0.0)
    throw std::domain_error("lifespan_implicit: no root with T >= 3 (epsilon too large for amplitude a)");
  double hi = lo + 1.0;
  while (g(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw std::domain_error("lifespan_implicit: bracketing failed");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double lifespan_implicit(double p, double n, double A, double epsilon, double a) {
  return std::exp(lifespan_implicit_log(p, n, A, epsilon, a));
}

}  // namespace epd
