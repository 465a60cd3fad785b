#pragma once

// Numerical helpers shared by the modules: stable log-domain arithmetic,
// normal tail functions, golden-section search and a peak-aware adaptive
// quadrature for integrands given by their logarithm.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace maxrisk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when an iterative numerical routine fails to reach its tolerance.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

/// log(sum exp(x_i)); returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) {
  double m = -kInf;
  for (double x : xs) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// log(1 - exp(x)) for x <= 0.
inline double log1mexp(double x) {
  if (x > 0.0) throw std::domain_error("log1mexp: argument must be <= 0");
  if (x == 0.0) return -kInf;
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

/// log of the standard normal survival function P(Z > z).
inline double log_normal_sf(double z) {
  if (z < -1.0) return std::log1p(-0.5 * std::erfc(-z / std::numbers::sqrt2));
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  // Mills-ratio expansion; relative error below 1e-12 for z >= 30.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) +
                        105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// log P(za < Z <= zb) for a standard normal Z.
inline double log_normal_interval(double za, double zb) {
  if (!(za < zb)) return -kInf;
  if (za >= 0.0) {
    const double la = log_normal_sf(za);
    return la + log1mexp(log_normal_sf(zb) - la);
  }
  if (zb <= 0.0) {
    const double lb = log_normal_sf(-zb);
    return lb + log1mexp(log_normal_sf(-za) - lb);
  }
  return std::log1p(-(std::exp(log_normal_sf(zb)) + std::exp(log_normal_sf(-za))));
}

inline double log_normal_pdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

struct GoldenResult {
  double x;
  double fx;
  int evaluations;
};

/// Maximizes a unimodal f on [a, b] until the bracket is narrower than tol.
inline GoldenResult golden_section_max(const std::function<double(double)>& f, double a, double b,
                                       double tol, const std::function<void(double, double)>& probe = {}) {
  constexpr double kInvPhi = 0.6180339887498948482;
  int evals = 0;
  auto eval = [&](double x) {
    ++evals;
    double v = f(x);
    if (probe) probe(x, v);
    return v;
  };
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
    // Golden section cannot shrink below the spacing of doubles.
    if (c >= d) break;
  }
  GoldenResult best{c, fc, evals};
  if (fd > fc) best = {d, fd, evals};
  for (double e : {a, b}) {
    double fe = eval(e);
    if (fe > best.fx) best = {e, fe, evals};
  }
  best.evaluations = evals;
  return best;
}

struct LogQuadOptions {
  /// Finite window scanned for the peak of the log-integrand.
  double scan_lo = -50.0;
  double scan_hi = 50.0;
  int scan_points = 4001;
  /// The integration range is cut where the log-integrand falls this far below its peak.
  double drop = 60.0;
  double rel_tol = 1e-12;
  /// Kept shallow: past this depth the Kronrod estimate measures rounding noise.
  unsigned max_depth = 12;
  /// Known kinks of the integrand, used as additional split points.
  std::vector<double> breakpoints;
};

struct LogIntegral {
  double log_value = -kInf;
  /// Kronrod error estimate relative to the integral.
  double rel_error = 0.0;
  /// Relative size of the integrand at the cut points times the range width,
  /// a heuristic for the mass lost to truncation.
  double truncation_bound = 0.0;
  double lower_cut = 0.0;
  double upper_cut = 0.0;
};

/// log of the integral of exp(log_f) over [a, b]; a and b may be infinite.
///
/// The integrand is assumed to have a single dominant peak inside the scan
/// window. The peak is located on a grid, refined by golden section, and the
/// range is cut where log_f has dropped by `drop`. The remaining finite range
/// is split at the peak and at the breakpoints and handed to an adaptive
/// Gauss-Kronrod rule on the shifted integrand exp(log_f - peak).
inline LogIntegral log_integrate(const std::function<double(double)>& log_f, double a, double b,
                                 const LogQuadOptions& opt = {}) {
  if (!(a < b)) return {};
  const double lo = std::max(a, opt.scan_lo);
  const double hi = std::min(b, opt.scan_hi);
  if (!(lo < hi)) throw std::invalid_argument("log_integrate: scan window misses the domain");

  const int m = std::max(opt.scan_points, 3);
  const double h = (hi - lo) / (m - 1);
  int best = -1;
  double best_v = -kInf;
  for (int i = 0; i < m; ++i) {
    double v = log_f(lo + i * h);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  if (best < 0) return {};
  if (best_v == kInf) return {kInf, 0.0, 0.0, lo, hi};

  auto refined = golden_section_max(log_f, std::max(lo, lo + (best - 1) * h),
                                    std::min(hi, lo + (best + 1) * h), h * 1e-9);
  double peak = refined.x;
  double peak_v = refined.fx;
  if (best_v > peak_v) {
    peak = lo + best * h;
    peak_v = best_v;
  }

  auto find_cut = [&](double dir, double limit) {
    double step = std::max(h * 1e-6, 1e-300);
    double x = peak;
    for (int i = 0; i < 2000; ++i) {
      double nx = peak + dir * step;
      if ((dir < 0 && nx <= limit) || (dir > 0 && nx >= limit)) return limit;
      x = nx;
      if (log_f(x) < peak_v - opt.drop) return x;
      step *= 2.0;
    }
    return x;
  };
  const double cl = find_cut(-1.0, a);
  const double cr = find_cut(+1.0, b);
  if (!std::isfinite(cl) || !std::isfinite(cr))
    throw NumericalError("log_integrate: integrand does not decay on an infinite range", kInf);

  std::vector<double> cuts{cl, cr};
  if (peak > cl && peak < cr) cuts.push_back(peak);
  for (double bp : opt.breakpoints)
    if (bp > cl && bp < cr) cuts.push_back(bp);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto shifted = [&](double x) {
    double v = log_f(x) - peak_v;
    return v < -745.0 ? 0.0 : std::exp(v);
  };
  double total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double e = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        shifted, cuts[i], cuts[i + 1], opt.max_depth, opt.rel_tol, &e);
    err += e;
  }
  LogIntegral out;
  out.lower_cut = cl;
  out.upper_cut = cr;
  if (total <= 0.0) return out;
  out.log_value = peak_v + std::log(total);
  out.rel_error = err / total;
  const double edge = std::max(cl > a ? shifted(cl) : 0.0, cr < b ? shifted(cr) : 0.0);
  out.truncation_bound = edge * (cr - cl) / total;
  return out;
}

}  // namespace maxrisk
