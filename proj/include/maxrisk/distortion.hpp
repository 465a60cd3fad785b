#pragma once

// Distortion functions g : [0,1] -> [0,1], concavity certification,
// vanishing-order search, and exact distorted expectations of nonnegative
// discrete random variables.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "maxrisk/numeric.hpp"
#include "maxrisk/space.hpp"

namespace maxrisk {

inline constexpr double kDistortionTol = 1e-10;

class Distortion {
 public:
  /// g(x) = x^(1/p), p >= 1.
  static Distortion power(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("power distortion: p must be >= 1");
    return Distortion(Power{p}, 1.0);
  }
  static Distortion identity() { return power(1.0); }
  /// g(x) = min(c x, 1), c >= 1.
  static Distortion capped(double c) {
    if (!(c >= 1.0) || !std::isfinite(c)) throw std::invalid_argument("capped distortion: c must be >= 1");
    return Distortion(Capped{c}, 1.0);
  }
  /// Piecewise-linear interpolant of knots (x, g(x)); must start at (0,0) and end at (1,1).
  static Distortion table(std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2) throw std::invalid_argument("table distortion: need at least two knots");
    std::sort(knots.begin(), knots.end());
    if (knots.front().first != 0.0 || knots.back().first != 1.0)
      throw std::invalid_argument("table distortion: knots must span [0,1]");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (knots[i].first == knots[i - 1].first)
        throw std::invalid_argument("table distortion: duplicate knot abscissa");
    return Distortion(Table{std::move(knots)}, 1.0);
  }
  /// Arbitrary closed form; `concave` is an optional analytic certificate.
  static Distortion custom(std::string label, std::function<double(double)> g,
                           std::optional<bool> concave = std::nullopt) {
    return Distortion(Custom{std::move(label), std::move(g), concave}, 1.0);
  }

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double b = base(x);
    return exponent_ == 1.0 ? b : std::pow(b, exponent_);
  }

  /// log g(exp(log_x)), accurate for very small arguments.
  double log_at(double log_x) const {
    if (log_x >= 0.0) return 0.0;
    if (log_x == -kInf) return -kInf;
    double lb = std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Power>) {
            return log_x / fam.p;
          } else if constexpr (std::is_same_v<T, Capped>) {
            return std::min(0.0, std::log(fam.c) + log_x);
          } else {
            return std::log(base(std::exp(log_x)));
          }
        },
        family_);
    return exponent_ * lb;
  }

  /// h = g^q.
  Distortion raised(double q) const {
    if (!(q > 0.0)) throw std::invalid_argument("Distortion::raised: exponent must be > 0");
    Distortion d = *this;
    d.exponent_ *= q;
    return d;
  }

  /// Analytic concavity, when the family admits one.
  std::optional<bool> analytic_concavity() const {
    return std::visit(
        [&](const auto& fam) -> std::optional<bool> {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Power>) {
            return exponent_ / fam.p <= 1.0;
          } else if constexpr (std::is_same_v<T, Capped>) {
            return exponent_ <= 1.0;
          } else if constexpr (std::is_same_v<T, Custom>) {
            if (exponent_ == 1.0) return fam.concave;
            return std::nullopt;
          } else {
            return std::nullopt;
          }
        },
        family_);
  }

  std::string label() const {
    std::string base_label = std::visit(
        [](const auto& fam) -> std::string {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Power>) return "power(p=" + std::to_string(fam.p) + ")";
          else if constexpr (std::is_same_v<T, Capped>) return "capped(c=" + std::to_string(fam.c) + ")";
          else if constexpr (std::is_same_v<T, Table>) return "table(" + std::to_string(fam.knots.size()) + " knots)";
          else return fam.label;
        },
        family_);
    return exponent_ == 1.0 ? base_label : base_label + "^" + std::to_string(exponent_);
  }

 private:
  struct Power {
    double p;
  };
  struct Capped {
    double c;
  };
  struct Table {
    std::vector<std::pair<double, double>> knots;
  };
  struct Custom {
    std::string label;
    std::function<double(double)> g;
    std::optional<bool> concave;
  };
  using Family = std::variant<Power, Capped, Table, Custom>;

  Distortion(Family f, double exponent) : family_(std::move(f)), exponent_(exponent) { validate(); }

  double base(double x) const {
    return std::visit(
        [x](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Power>) {
            return std::pow(x, 1.0 / fam.p);
          } else if constexpr (std::is_same_v<T, Capped>) {
            return std::min(fam.c * x, 1.0);
          } else if constexpr (std::is_same_v<T, Table>) {
            auto it = std::upper_bound(fam.knots.begin(), fam.knots.end(), x,
                                       [](double v, const auto& k) { return v < k.first; });
            if (it == fam.knots.end()) return fam.knots.back().second;
            auto prev = std::prev(it);
            double t = (x - prev->first) / (it->first - prev->first);
            return prev->second + t * (it->second - prev->second);
          } else {
            return fam.g(x);
          }
        },
        family_);
  }

  void validate() const {
    auto raw = [&](double x) { return base(x); };
    if (std::abs(raw(0.0)) > kDistortionTol || std::abs(raw(1.0) - 1.0) > kDistortionTol)
      throw std::invalid_argument("distortion must satisfy g(0)=0 and g(1)=1");
    constexpr int kSamples = 1000;
    double prev = raw(0.0);
    for (int i = 1; i <= kSamples; ++i) {
      double v = raw(static_cast<double>(i) / kSamples);
      if (!std::isfinite(v) || v < -kDistortionTol || v > 1.0 + kDistortionTol)
        throw std::invalid_argument("distortion must map [0,1] into [0,1]");
      if (v < prev - kDistortionTol) throw std::invalid_argument("distortion must be nondecreasing");
      prev = v;
    }
  }

  Family family_;
  double exponent_ = 1.0;
};

struct ConcavityReport {
  bool concave = false;
  /// Largest violation of g((x+y)/2) >= (g(x)+g(y))/2 over grid pairs.
  double midpoint_residual = 0.0;
  /// Largest increase of g(x)/x between consecutive grid points.
  double ratio_residual = 0.0;
  /// Midpoint concavity implies the monotone-ratio criterion; false flags a
  /// numerical inconsistency between the two tests.
  bool criteria_agree = true;
  bool analytic = false;
};

/// Numerical concavity certificate on a uniform grid of [0,1]; an analytic
/// family flag, when present, decides the verdict.
inline ConcavityReport is_concave(const Distortion& g, int grid_size = 201) {
  if (grid_size < 3) throw std::invalid_argument("is_concave: grid_size must be >= 3");
  std::vector<double> x(grid_size), v(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    x[i] = static_cast<double>(i) / (grid_size - 1);
    v[i] = g(x[i]);
  }
  ConcavityReport rep;
  for (int i = 0; i < grid_size; ++i)
    for (int j = i + 2; j < grid_size; j += 2) {
      int mid = (i + j) / 2;
      rep.midpoint_residual = std::max(rep.midpoint_residual, 0.5 * (v[i] + v[j]) - v[mid]);
    }
  for (int i = 2; i < grid_size; ++i) {
    double r_prev = v[i - 1] / x[i - 1];
    double r = v[i] / x[i];
    rep.ratio_residual = std::max(rep.ratio_residual, r - r_prev);
  }
  const bool midpoint_ok = rep.midpoint_residual <= kDistortionTol;
  const bool ratio_ok = rep.ratio_residual <= kDistortionTol;
  rep.criteria_agree = !midpoint_ok || ratio_ok;
  if (auto a = g.analytic_concavity()) {
    rep.analytic = true;
    rep.concave = *a;
  } else {
    rep.concave = midpoint_ok && ratio_ok;
  }
  return rep;
}

struct VanishingOrderReport {
  double p = 0.0;
  /// lim g(x)/x^(1/p) = h'_+(0)^(1/p).
  double limit = 0.0;
  double right_derivative = 0.0;
  double concavity_residual = 0.0;
};

/// 1.0, 1.25, ..., 8.0.
inline std::vector<double> default_p_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 28; ++i) g.push_back(1.0 + 0.25 * i);
  return g;
}

/// 10^-2, ..., 10^-8.
inline std::vector<double> default_probe_points() {
  std::vector<double> g;
  for (int k = 2; k <= 8; ++k) g.push_back(std::pow(10.0, -k));
  return g;
}

/// Smallest p in the grid such that h = g^p is concave and h(x)/x settles
/// to a finite value at the probe points (the last three ratios agree to a
/// relative 1e-4).
inline VanishingOrderReport vanishing_order(const Distortion& g, std::span<const double> p_grid,
                                            std::span<const double> probe_points, int grid_size = 201) {
  if (probe_points.size() < 3) throw std::invalid_argument("vanishing_order: need at least three probe points");
  for (std::size_t i = 1; i < probe_points.size(); ++i)
    if (!(probe_points[i] < probe_points[i - 1]) || !(probe_points[i] > 0.0))
      throw std::invalid_argument("vanishing_order: probe points must decrease to 0");
  for (double p : p_grid) {
    if (!(p >= 1.0)) throw std::invalid_argument("vanishing_order: p grid values must be >= 1");
    Distortion h = g.raised(p);
    auto conc = is_concave(h, grid_size);
    if (!conc.concave) continue;
    const std::size_t m = probe_points.size();
    double r[3];
    for (int k = 0; k < 3; ++k) {
      double x = probe_points[m - 3 + k];
      r[k] = std::exp(h.log_at(std::log(x)) - std::log(x));
    }
    double hi = std::max({r[0], r[1], r[2]});
    double lo = std::min({r[0], r[1], r[2]});
    if (!std::isfinite(hi) || lo <= 0.0 || (hi - lo) > 1e-4 * lo) continue;
    double deriv = r[2];
    return {p, std::pow(deriv, 1.0 / p), deriv, conc.midpoint_residual};
  }
  throw std::runtime_error("vanishing_order: order not found in grid");
}

inline VanishingOrderReport vanishing_order(const Distortion& g) {
  auto p = default_p_grid();
  auto probes = default_probe_points();
  return vanishing_order(g, p, probes);
}

/// Exact distorted expectation of Y >= 0 under weights nu:
/// sum_j (y_j - y_{j-1}) g(nu(Y > y_{j-1})) over the sorted distinct values with y_0 = 0.
inline double distorted_expectation(std::span<const double> nu, const Distortion& g, const Field& y) {
  if (nu.size() != y.size()) throw std::invalid_argument("distorted_expectation: weight length mismatch");
  std::vector<std::pair<double, double>> vals;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(nu[i] >= 0.0)) throw std::invalid_argument("distorted_expectation: weights must be >= 0");
    if (nu[i] == 0.0) continue;
    if (!y[i].is_finite() || y[i] < 0.0)
      throw std::invalid_argument("distorted_expectation: Y must be finite and >= 0 where nu > 0");
    vals.emplace_back(y[i].value(), nu[i]);
    total += nu[i];
  }
  if (std::abs(total - 1.0) > kWeightSumTol) throw std::invalid_argument("distorted_expectation: weights must sum to 1");
  std::sort(vals.begin(), vals.end());
  // Survival after each distinct value, accumulated from the top.
  std::vector<double> values;
  std::vector<double> masses;
  for (const auto& [v, w] : vals) {
    if (!values.empty() && values.back() == v)
      masses.back() += w;
    else {
      values.push_back(v);
      masses.push_back(w);
    }
  }
  // Mass sitting at 0 never contributes: the first interval starts at the
  // smallest positive value.
  const std::size_t start = !values.empty() && values.front() == 0.0 ? 1 : 0;
  std::vector<double> tail(values.size() + 1, 0.0);
  for (std::size_t j = values.size(); j-- > 0;) tail[j] = tail[j + 1] + masses[j];
  double prev = 0.0;
  double out = 0.0;
  for (std::size_t j = start; j < values.size(); ++j) {
    out += (values[j] - prev) * g(std::min(tail[j], 1.0));
    prev = values[j];
  }
  return out;
}

/// log of the distorted expectation of exp(s) where s takes the given
/// ascending values with the given log-masses; stays finite when exp(s)
/// overflows or the masses underflow.
inline double log_distorted_expectation_of_exp_log(std::span<const double> sorted_s,
                                                   std::span<const double> log_masses, const Distortion& g) {
  if (sorted_s.size() != log_masses.size() || sorted_s.empty())
    throw std::invalid_argument("log_distorted_expectation_of_exp: size mismatch");
  std::vector<double> log_tail(log_masses.size() + 1, -kInf);
  for (std::size_t j = log_masses.size(); j-- > 0;) log_tail[j] = log_add_exp(log_tail[j + 1], log_masses[j]);
  std::vector<double> terms;
  terms.reserve(sorted_s.size());
  // First step: [0, e^{s_0}) has survival 1 (all mass is above 0).
  terms.push_back(sorted_s[0]);
  for (std::size_t j = 1; j < sorted_s.size(); ++j) {
    if (!(sorted_s[j] > sorted_s[j - 1]))
      throw std::invalid_argument("log_distorted_expectation_of_exp: values must increase");
    const double lg = g.log_at(std::min(log_tail[j], 0.0));
    if (lg == -kInf) continue;
    terms.push_back(sorted_s[j] + log1mexp(sorted_s[j - 1] - sorted_s[j]) + lg);
  }
  return log_sum_exp(terms);
}

inline double log_distorted_expectation_of_exp(std::span<const double> sorted_s, std::span<const double> masses,
                                               const Distortion& g) {
  std::vector<double> lm(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (!(masses[i] >= 0.0)) throw std::invalid_argument("log_distorted_expectation_of_exp: masses must be >= 0");
    lm[i] = masses[i] > 0.0 ? std::log(masses[i]) : -kInf;
  }
  return log_distorted_expectation_of_exp_log(sorted_s, lm, g);
}

}  // namespace maxrisk
