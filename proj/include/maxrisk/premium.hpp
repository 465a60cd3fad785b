#pragma once

// Exponential and distortion-exponential premium principles, pooled
// per-contract premiums for homogeneous portfolios, and their limits.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "maxrisk/cramer.hpp"
#include "maxrisk/distortion.hpp"
#include "maxrisk/ext_real.hpp"
#include "maxrisk/largedev.hpp"
#include "maxrisk/numeric.hpp"
#include "maxrisk/space.hpp"

namespace maxrisk {

/// Law of a lattice-supported sum: values base + step*k with log masses.
struct LatticeLaw {
  double base = 0.0;
  double step = 1.0;
  std::vector<double> log_mass;
};

class ClaimModel {
 public:
  struct Gaussian {
    double m;
    double var;
  };
  struct Discrete {
    std::vector<double> values;
    std::vector<double> weights;
  };

  static ClaimModel gaussian(double m, double var) {
    if (!(var > 0.0)) throw std::invalid_argument("gaussian claim: variance must be > 0");
    return ClaimModel(Gaussian{m, var});
  }
  static ClaimModel discrete(std::vector<double> values, std::vector<double> weights) {
    if (values.empty() || values.size() != weights.size())
      throw std::invalid_argument("discrete claim: values and weights must be non-empty and of equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0)) throw std::invalid_argument("discrete claim: weights must be >= 0");
      if (!std::isfinite(values[i])) throw std::invalid_argument("discrete claim: values must be finite");
      total += weights[i];
    }
    if (std::abs(total - 1.0) > kWeightSumTol) throw std::invalid_argument("discrete claim: weights must sum to 1");
    // Merge equal values and drop null ones, sorted ascending.
    std::vector<std::pair<double, double>> vw;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (weights[i] > 0.0) vw.emplace_back(values[i], weights[i]);
    std::sort(vw.begin(), vw.end());
    Discrete d;
    for (const auto& [v, w] : vw) {
      if (!d.values.empty() && d.values.back() == v) {
        d.weights.back() += w;
      } else {
        d.values.push_back(v);
        d.weights.push_back(w);
      }
    }
    return ClaimModel(std::move(d));
  }

  bool is_gaussian() const { return std::holds_alternative<Gaussian>(model_); }
  const Gaussian& as_gaussian() const { return std::get<Gaussian>(model_); }
  const Discrete& as_discrete() const { return std::get<Discrete>(model_); }

  LogMgf log_mgf() const {
    if (is_gaussian()) return LogMgf::gaussian(as_gaussian().m, as_gaussian().var);
    return LogMgf::discrete(as_discrete().values, as_discrete().weights);
  }

  /// Common lattice of a discrete support, or nullopt when the values do not
  /// sit on base + step*k for integers k up to `max_index`.
  std::optional<LatticeLaw> lattice(long max_index = 2'000'000) const {
    const auto& d = as_discrete();
    LatticeLaw law;
    law.base = d.values.front();
    if (d.values.size() == 1) {
      law.log_mass = {0.0};
      return law;
    }
    const double span = d.values.back() - law.base;
    const double tol = 1e-9 * std::max(1.0, std::abs(span));
    // Approximate gcd of the offsets by the Euclidean algorithm.
    double step = 0.0;
    for (double v : d.values) {
      double a = v - law.base;
      double b = step;
      while (b > tol) {
        double r = std::fmod(a, b);
        a = b;
        b = r > b - tol ? 0.0 : r;
      }
      step = a;
    }
    if (!(step > tol)) return std::nullopt;
    if (span / step > static_cast<double>(max_index)) return std::nullopt;
    law.step = step;
    law.log_mass.assign(static_cast<std::size_t>(std::lround(span / step)) + 1, -kInf);
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      const double k = (d.values[i] - law.base) / step;
      if (std::abs(k - std::round(k)) * step > tol) return std::nullopt;
      law.log_mass[static_cast<std::size_t>(std::lround(k))] = std::log(d.weights[i]);
    }
    return law;
  }

 private:
  explicit ClaimModel(std::variant<Gaussian, Discrete> m) : model_(std::move(m)) {}
  std::variant<Gaussian, Discrete> model_;
};

/// Pi_gamma(xi) = (1/gamma) log E exp(gamma xi).
inline double exponential_premium(const ClaimModel& claim, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("exponential_premium: gamma must be > 0");
  if (claim.is_gaussian()) {
    const auto& g = claim.as_gaussian();
    return g.m + 0.5 * gamma * g.var;
  }
  const auto& d = claim.as_discrete();
  const double l = log_mgf(d.values, d.weights, gamma);
  if (!std::isfinite(l)) throw std::domain_error("exponential_premium: mgf is infinite at gamma");
  return l / gamma;
}

struct PremiumValue {
  double value = 0.0;
  double rel_error = 0.0;
  double truncation_bound = 0.0;
};

namespace detail {

/// log of the distorted expectation of exp(gamma S), S ~ N(mean, var), by
/// quadrature over z = (u - mean)/sd after the substitution x = exp(gamma u).
/// The range is cut where the log-integrand has dropped 60 below its peak;
/// the peak sits near z = p gamma sd for distortions of vanishing order p.
inline LogIntegral log_distorted_exp_gaussian(double mean, double var, double gamma, const Distortion& g) {
  const double sd = std::sqrt(var);
  auto log_integrand = [&](double z) {
    const double lg = g.log_at(log_normal_sf(z));
    if (lg == -kInf) return -kInf;
    return std::log(gamma) + std::log(sd) + gamma * (mean + sd * z) + lg;
  };
  LogQuadOptions opt;
  opt.scan_lo = -40.0;
  opt.scan_hi = 40.0 + 16.0 * gamma * sd;
  opt.scan_points = 8001;
  return log_integrate(log_integrand, -kInf, kInf, opt);
}

/// Incremental log-space convolution of a lattice law with itself.
class LatticeSums {
 public:
  LatticeSums(LatticeLaw one, std::size_t cap) : one_(std::move(one)), cur_{0.0}, cap_(cap) {}

  /// Law of the n-fold sum; n must not decrease between calls.
  const std::vector<double>& advance_to(long n) {
    if (n < count_) throw std::invalid_argument("LatticeSums: n must not decrease");
    const std::size_t width = one_.log_mass.size();
    const std::size_t final_size = static_cast<std::size_t>(n) * (width - 1) + 1;
    if (final_size > cap_)
      throw std::length_error("convolution size cap exceeded: " + std::to_string(final_size) + " > " +
                              std::to_string(cap_) + " atoms");
    std::vector<double> terms;
    while (count_ < n) {
      std::vector<double> next(cur_.size() + width - 1, -kInf);
      for (std::size_t k = 0; k < next.size(); ++k) {
        terms.clear();
        const std::size_t i_lo = k + 1 > cur_.size() ? k + 1 - cur_.size() : 0;
        const std::size_t i_hi = std::min(k, width - 1);
        for (std::size_t i = i_lo; i <= i_hi; ++i)
          if (one_.log_mass[i] > -kInf && cur_[k - i] > -kInf) terms.push_back(one_.log_mass[i] + cur_[k - i]);
        next[k] = log_sum_exp(terms);
      }
      cur_ = std::move(next);
      ++count_;
    }
    return cur_;
  }
  long count() const { return count_; }

 private:
  LatticeLaw one_;
  std::vector<double> cur_;
  std::size_t cap_;
  long count_ = 0;
};

/// (1/gamma) log of the distorted expectation of exp(gamma S) for S on the lattice.
inline double lattice_premium(const std::vector<double>& log_mass, double base, double step, double gamma,
                              const Distortion& g) {
  std::vector<double> s, lm;
  for (std::size_t k = 0; k < log_mass.size(); ++k)
    if (log_mass[k] > -kInf) {
      s.push_back(gamma * (base + step * static_cast<double>(k)));
      lm.push_back(log_mass[k]);
    }
  return log_distorted_expectation_of_exp_log(s, lm, g) / gamma;
}

}  // namespace detail

/// Pi_{g,gamma}(xi) = (1/gamma) log E_g exp(gamma xi).
inline PremiumValue distortion_exponential_premium(const ClaimModel& claim, const Distortion& g, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("distortion_exponential_premium: gamma must be > 0");
  if (claim.is_gaussian()) {
    const auto& c = claim.as_gaussian();
    auto li = detail::log_distorted_exp_gaussian(c.m, c.var, gamma, g);
    if (!std::isfinite(li.log_value)) throw NumericalError("distortion_exponential_premium: quadrature failed", kInf);
    return {li.log_value / gamma, li.rel_error, li.truncation_bound};
  }
  const auto& d = claim.as_discrete();
  std::vector<double> s(d.values.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = gamma * d.values[i];
  return {log_distorted_expectation_of_exp(s, d.weights, g) / gamma, 0.0, 0.0};
}

struct PremiumRow {
  long n = 0;
  double pi = 0.0;
  double rel_error = 0.0;
  double truncation_bound = 0.0;
  /// (1/n) Pi_{g,gamma}(t S_n) at the growth probe t.
  double growth = 0.0;
};

struct PremiumPath {
  std::vector<PremiumRow> rows;
  std::optional<LimitEstimate> limit;
  double limit_candidate = 0.0;
  double growth_t = 1.1;
  bool growth_finite = true;
};

struct PremiumOptions {
  std::size_t convolution_cap = 2'000'000;
  double growth_t = 1.1;
  LimitOptions limit{};
};

/// pi_n = (1/n) Pi_{g,gamma}(xi_1 + ... + xi_n) along n_grid, with the
/// growth probe (1/n) Pi_{g,gamma}(t S_n) at t = growth_t.
inline PremiumPath pooled_premium_path(const ClaimModel& claim, const Distortion& g, double gamma,
                                       std::span<const long> n_grid, const PremiumOptions& opt = {}) {
  if (!(gamma > 0.0)) throw std::invalid_argument("pooled_premium_path: gamma must be > 0");
  if (n_grid.empty()) throw std::invalid_argument("pooled_premium_path: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i)
    if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1]))
      throw std::invalid_argument("pooled_premium_path: n grid must be positive and increasing");

  PremiumPath path;
  path.growth_t = opt.growth_t;
  if (claim.is_gaussian()) {
    const auto& c = claim.as_gaussian();
    for (long n : n_grid) {
      const double nd = static_cast<double>(n);
      auto li = detail::log_distorted_exp_gaussian(nd * c.m, nd * c.var, gamma, g);
      auto lg = detail::log_distorted_exp_gaussian(nd * c.m, nd * c.var, gamma * opt.growth_t, g);
      if (!std::isfinite(li.log_value)) throw NumericalError("pooled_premium_path: quadrature failed", kInf);
      PremiumRow row{n, li.log_value / (gamma * nd), li.rel_error, li.truncation_bound,
                     lg.log_value / (gamma * nd)};
      path.rows.push_back(row);
    }
  } else {
    auto law = claim.lattice(static_cast<long>(opt.convolution_cap));
    if (!law) throw std::invalid_argument("pooled_premium_path: discrete claim support is not a lattice");
    detail::LatticeSums sums(*law, opt.convolution_cap);
    for (long n : n_grid) {
      const auto& lm = sums.advance_to(n);
      const double nd = static_cast<double>(n);
      const double base = nd * law->base;
      PremiumRow row;
      row.n = n;
      row.pi = detail::lattice_premium(lm, base, law->step, gamma, g) / nd;
      // Pi_{g,gamma}(t S) = t Pi_{g,gamma t}(S).
      row.growth = opt.growth_t * detail::lattice_premium(lm, base, law->step, gamma * opt.growth_t, g) / nd;
      path.rows.push_back(row);
    }
  }
  for (const auto& r : path.rows) {
    if (!std::isfinite(r.pi)) throw NumericalError("pooled_premium_path: non-finite premium", r.pi);
    path.growth_finite = path.growth_finite && std::isfinite(r.growth);
  }
  if (path.rows.size() >= 6) {
    std::vector<std::pair<long, double>> v;
    for (const auto& r : path.rows) v.emplace_back(r.n, r.pi);
    path.limit = limit_estimate(v, opt.limit);
  }
  // The fitted intercept only stands in for the limit once the fit has settled.
  path.limit_candidate = path.limit && path.limit->status == LimitStatus::converged && path.limit->estimate->is_finite()
                             ? path.limit->estimate->value()
                             : path.rows.back().pi;
  return path;
}

/// ess.sup over the atoms of x - I(x)/(p gamma).
inline ExtReal asymptotic_premium(const Field& rate, double p, double gamma) {
  if (!(p >= 1.0)) throw std::invalid_argument("asymptotic_premium: p must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("asymptotic_premium: gamma must be > 0");
  if (rate.space()->dim() != 1) throw std::invalid_argument("asymptotic_premium: rate must live on a 1-D space");
  const double scale = 1.0 / (p * gamma);
  Field x = Field::from_function(rate.space(), [](std::span<const double> a) { return a[0]; });
  return ess_sup(difference(x, rate * scale));
}

/// Lambda(p gamma)/(p gamma).
inline double iid_limit_premium(const LogMgf& lambda, double p, double gamma) {
  const double t = p * gamma;
  if (!(t > 0.0)) throw std::invalid_argument("iid_limit_premium: p gamma must be > 0");
  const double l = lambda(t);
  if (!std::isfinite(l)) throw std::domain_error("iid_limit_premium: Lambda is infinite at p gamma");
  return l / t;
}

}  // namespace maxrisk
