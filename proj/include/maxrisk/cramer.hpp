#pragma once

// Log-moment generating functions and their numerical Legendre transforms
// in one dimension.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maxrisk/ext_real.hpp"
#include "maxrisk/numeric.hpp"

namespace maxrisk {

/// log sum_i nu_i exp(t y_i).
inline double log_mgf(std::span<const double> values, std::span<const double> weights, double t) {
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("log_mgf: values and weights must be non-empty and of equal length");
  std::vector<double> terms;
  terms.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("log_mgf: weights must be >= 0");
    if (weights[i] > 0.0) terms.push_back(t * values[i] + std::log(weights[i]));
  }
  return log_sum_exp(terms);
}

class LogMgf {
 public:
  static LogMgf gaussian(double m, double var) {
    if (!(var > 0.0)) throw std::invalid_argument("gaussian log-mgf: variance must be > 0");
    return {"gaussian", [m, var](double t) { return m * t + 0.5 * var * t * t; }, m, std::nullopt};
  }
  static LogMgf point_mass(double c) { return {"pointmass", [c](double t) { return c * t; }, c, std::make_pair(c, c)}; }
  static LogMgf bernoulli(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("bernoulli log-mgf: q must lie in (0,1)");
    return {"bernoulli",
            [q](double t) {
              // log(1 - q + q e^t), evaluated without overflow for large |t|.
              return t > 0.0 ? t + std::log(q + (1.0 - q) * std::exp(-t)) : std::log1p(q * std::expm1(t));
            },
            q, std::make_pair(0.0, 1.0)};
  }
  static LogMgf discrete(std::vector<double> values, std::vector<double> weights) {
    double sum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      sum += weights[i];
      mean += weights[i] * values.at(i);
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("discrete log-mgf: weights must sum to 1");
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (weights[i] > 0.0) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
      }
    auto eval = [values = std::move(values), weights = std::move(weights)](double t) {
      return log_mgf(values, weights, t);
    };
    return {"discrete", std::move(eval), mean, std::make_pair(lo, hi)};
  }

  double operator()(double t) const { return eval_(t); }
  const std::string& family() const { return family_; }
  double mean() const { return mean_; }
  /// Convex hull of the support for bounded families.
  std::optional<std::pair<double, double>> support_hull() const { return hull_; }

  /// Lambda(0) = 0 and midpoint convexity on a symmetric probe grid.
  bool check_invariants(double t_max = 20.0, int points = 81, double tol = 1e-9) const {
    if (std::abs(eval_(0.0)) > tol) return false;
    double h = 2.0 * t_max / (points - 1);
    for (int i = 0; i + 2 < points; ++i) {
      double a = -t_max + i * h;
      if (eval_(a + h) > 0.5 * (eval_(a) + eval_(a + 2 * h)) + tol * (1.0 + std::abs(eval_(a + h)))) return false;
    }
    return true;
  }

 private:
  LogMgf(std::string family, std::function<double(double)> eval, double mean,
         std::optional<std::pair<double, double>> hull)
      : family_(std::move(family)), eval_(std::move(eval)), mean_(mean), hull_(hull) {}

  std::string family_;
  std::function<double(double)> eval_;
  double mean_;
  std::optional<std::pair<double, double>> hull_;
};

enum class ConjugateStatus { interior, boundary, infinite };

inline const char* to_string(ConjugateStatus s) {
  switch (s) {
    case ConjugateStatus::interior: return "interior";
    case ConjugateStatus::boundary: return "boundary";
    case ConjugateStatus::infinite: return "infinite";
  }
  return "?";
}

struct ConjugateResult {
  double x = 0.0;
  ExtReal value = 0.0;
  double argmax = 0.0;
  ConjugateStatus status = ConjugateStatus::interior;
  /// min over probed t of value - (x t - Lambda(t)); nonnegative up to
  /// rounding when the Fenchel inequality holds at every probe.
  double certificate_gap = 0.0;
  int probes = 0;
};

struct LegendreSearch {
  double t_lo = -64.0;
  double t_hi = 64.0;
  double tol = 1e-10;
  /// Bracket expansion stops once |t| exceeds this limit.
  double t_limit = 1e6;
};

/// Lambda*(x) = sup_t { x t - Lambda(t) } by golden-section search on a
/// bracket that doubles outward while the maximizer sits on its edge.
inline ConjugateResult legendre(const LogMgf& lambda, double x, const LegendreSearch& search = {}) {
  if (!(search.t_lo < search.t_hi)) throw std::invalid_argument("legendre: empty bracket");
  double lo = search.t_lo, hi = search.t_hi;
  std::vector<std::pair<double, double>> probed;
  auto objective = [&](double t) {
    double l = lambda(t);
    if (!std::isfinite(l)) throw std::domain_error("legendre: Lambda is not finite inside the bracket");
    return x * t - l;
  };
  auto record = [&](double t, double v) { probed.emplace_back(t, v); };

  GoldenResult best{};
  ConjugateStatus status = ConjugateStatus::interior;
  double prev_best = -kInf;
  for (;;) {
    best = golden_section_max(objective, lo, hi, search.tol, record);
    const double width = hi - lo;
    const bool at_lo = best.x - lo <= 1e-6 * width;
    const bool at_hi = hi - best.x <= 1e-6 * width;
    if (!at_lo && !at_hi) {
      // A maximizer inside a plateau that reaches the bracket edge is not attained.
      const double flat = 1e-15 * (1.0 + std::abs(best.fx));
      const double v_lo = objective(lo), v_hi = objective(hi);
      record(lo, v_lo);
      record(hi, v_hi);
      status = v_lo >= best.fx - flat || v_hi >= best.fx - flat ? ConjugateStatus::boundary : ConjugateStatus::interior;
      break;
    }
    // Objective flat to rounding at the edge: the sup is approached at infinity but is finite.
    if (prev_best > -kInf && best.fx - prev_best <= 1e-15 * (1.0 + std::abs(best.fx))) {
      status = ConjugateStatus::boundary;
      break;
    }
    if (std::max(std::abs(lo), std::abs(hi)) > search.t_limit) {
      status = ConjugateStatus::infinite;
      break;
    }
    prev_best = best.fx;
    if (at_lo) lo = lo < 0 ? lo * 2.0 : lo - width;
    if (at_hi) hi = hi > 0 ? hi * 2.0 : hi + width;
  }

  ConjugateResult out;
  out.x = x;
  out.argmax = best.x;
  out.status = status;
  out.value = status == ConjugateStatus::infinite ? ExtReal::pos_inf() : ExtReal(best.fx);
  out.probes = static_cast<int>(probed.size());
  if (status != ConjugateStatus::infinite) {
    double gap = kInf;
    for (const auto& [t, v] : probed) gap = std::min(gap, best.fx - v);
    out.certificate_gap = gap;
  }
  return out;
}

/// sup over the grid of t x - Lambda*(x); approaches Lambda(t) from below.
inline double biconjugate_on_grid(std::span<const double> x_grid, std::span<const ExtReal> conjugate, double t) {
  if (x_grid.size() != conjugate.size()) throw std::invalid_argument("biconjugate_on_grid: size mismatch");
  double best = -kInf;
  for (std::size_t i = 0; i < x_grid.size(); ++i)
    if (conjugate[i].is_finite()) best = std::max(best, t * x_grid[i] - conjugate[i].value());
  return best;
}

}  // namespace maxrisk
