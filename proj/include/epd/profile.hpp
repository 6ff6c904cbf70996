#pragma once

// Radial data profiles and spacetime source fields.  A profile is either an
// analytic closure or a sampled grid with local polynomial interpolation
// (cubic for smoothness hint >= 2, linear otherwise).  Evaluation returns 0
// beyond the declared support radius.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epd {

class RadialProfile {
 public:
  RadialProfile() = default;

  static RadialProfile analytic(std::function<double(double)> value,
                                std::function<double(double)> derivative = {},
                                double support_radius = std::numeric_limits<double>::infinity(),
                                int smoothness = 2) {
    RadialProfile p;
    p.value_ = std::move(value);
    p.derivative_ = std::move(derivative);
    p.support_ = support_radius;
    p.smoothness_ = smoothness;
    return p;
  }

  static RadialProfile sampled(std::vector<double> grid, std::vector<double> values,
                               int smoothness = 2) {
    if (grid.size() != values.size() || grid.size() < 2)
      throw std::invalid_argument("RadialProfile: grid/value size mismatch or too short");
    if (grid.front() != 0.0) throw std::invalid_argument("RadialProfile: sampled grid must start at r = 0");
    for (size_t i = 0; i + 1 < grid.size(); ++i)
      if (!(grid[i] < grid[i + 1]))
        throw std::invalid_argument("RadialProfile: sampled grid must be strictly increasing");
    RadialProfile p;
    p.grid_ = std::move(grid);
    p.values_ = std::move(values);
    p.support_ = p.grid_.back();
    p.smoothness_ = smoothness;
    return p;
  }

  bool valid() const { return static_cast<bool>(value_) || !grid_.empty(); }
  double support_radius() const { return support_; }
  int smoothness() const { return smoothness_; }

  double operator()(double r) const {
    if (r > support_) return 0.0;
    if (value_) return value_(r);
    return interpolate(r);
  }

  double derivative(double r) const {
    if (r > support_) return 0.0;
    if (derivative_) return derivative_(r);
    // centered difference, one-sided at the axis
    const double h = std::max(1e-6, 1e-6 * std::fabs(r));
    const double lo = std::max(0.0, r - h);
    return ((*this)(r + h) - (*this)(lo)) / (r + h - lo);
  }

 private:
  double interpolate(double r) const {
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), r);
    size_t hi = static_cast<size_t>(it - grid_.begin());
    if (hi == 0) hi = 1;
    if (hi >= grid_.size()) hi = grid_.size() - 1;
    const size_t lo = hi - 1;
    if (smoothness_ < 2 || grid_.size() < 4) {
      const double w = (r - grid_[lo]) / (grid_[hi] - grid_[lo]);
      return (1.0 - w) * values_[lo] + w * values_[hi];
    }
    // 4-point Lagrange on the stencil around [lo, hi]
    size_t i0 = lo == 0 ? 0 : lo - 1;
    if (i0 + 3 >= grid_.size()) i0 = grid_.size() - 4;
    double s = 0.0;
    for (size_t i = i0; i < i0 + 4; ++i) {
      double li = 1.0;
      for (size_t j = i0; j < i0 + 4; ++j)
        if (j != i) li *= (r - grid_[j]) / (grid_[i] - grid_[j]);
      s += li * values_[i];
    }
    return s;
  }

  std::function<double(double)> value_;
  std::function<double(double)> derivative_;
  std::vector<double> grid_;
  std::vector<double> values_;
  double support_ = std::numeric_limits<double>::infinity();
  int smoothness_ = 2;
};

// A source F(s, rho) on s >= 0, rho >= 0, evaluable at arbitrary points.
class SourceField {
 public:
  SourceField() = default;

  static SourceField analytic(std::function<double(double, double)> value,
                              double support_radius = std::numeric_limits<double>::infinity()) {
    SourceField f;
    f.value_ = std::move(value);
    f.support_ = support_radius;
    return f;
  }

  // support_radius(s) = light-cone bound radius0 + s when expanding=true
  static SourceField analytic_cone(std::function<double(double, double)> value, double radius0) {
    SourceField f;
    f.value_ = std::move(value);
    f.support_ = radius0;
    f.expanding_ = true;
    return f;
  }

  bool valid() const { return static_cast<bool>(value_); }

  double operator()(double s, double rho) const {
    if (rho > support_radius(s)) return 0.0;
    return value_(s, rho);
  }

  double support_radius(double s) const { return expanding_ ? support_ + s : support_; }

 private:
  std::function<double(double, double)> value_;
  double support_ = std::numeric_limits<double>::infinity();
  bool expanding_ = false;
};

namespace profiles {

// (1 - r^2)_+^4: supported in [0, 1), vanishes with three derivatives at 1
inline RadialProfile bump() {
  return RadialProfile::analytic(
      [](double r) {
        const double q = 1.0 - r * r;
        return q > 0.0 ? q * q * q * q : 0.0;
      },
      [](double r) {
        const double q = 1.0 - r * r;
        return q > 0.0 ? -8.0 * r * q * q * q : 0.0;
      },
      1.0, 3);
}

inline RadialProfile zero() {
  return RadialProfile::analytic([](double) { return 0.0; }, [](double) { return 0.0; }, 0.0, 99);
}

inline RadialProfile one() {
  return RadialProfile::analytic([](double) { return 1.0; }, [](double) { return 0.0; },
                                 std::numeric_limits<double>::infinity(), 99);
}

inline RadialProfile r_squared() {
  return RadialProfile::analytic([](double r) { return r * r; }, [](double r) { return 2.0 * r; },
                                 std::numeric_limits<double>::infinity(), 99);
}

inline RadialProfile scaled(const RadialProfile& p, double c) {
  auto base = p;
  return RadialProfile::analytic([base, c](double r) { return c * base(r); },
                                 [base, c](double r) { return c * base.derivative(r); },
                                 p.support_radius(), p.smoothness());
}

inline RadialProfile by_name(const std::string& name) {
  if (name == "bump") return bump();
  if (name == "zero") return zero();
  if (name == "one") return one();
  if (name == "r_squared") return r_squared();
  throw std::invalid_argument("unknown profile name: " + name);
}

inline SourceField source_by_name(const std::string& name) {
  if (name == "zero") return SourceField::analytic([](double, double) { return 0.0; }, 0.0);
  if (name == "one") return SourceField::analytic([](double, double) { return 1.0; });
  if (name == "rho_squared") return SourceField::analytic([](double, double rho) { return rho * rho; });
  throw std::invalid_argument("unknown source name: " + name);
}

}  // namespace profiles
}  // namespace epd
