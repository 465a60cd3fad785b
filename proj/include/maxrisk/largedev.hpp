#pragma once

// Sequences of probability measures nu_n with closed-form densities, the
// finite-n Varadhan functional, finite-horizon limit estimation, and
// checkers for the sharp large deviation criterion and the Laplace principle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maxrisk/ext_real.hpp"
#include "maxrisk/numeric.hpp"
#include "maxrisk/riskcore.hpp"
#include "maxrisk/space.hpp"

namespace maxrisk {

/// Log-probabilities below this floor are read as log 0.
inline constexpr double kLogFloor = -1e12;

/// An interval of the real line; (lo, hi] by default.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_closed = false;
  bool hi_closed = true;

  bool contains(double x) const {
    return (lo_closed ? x >= lo : x > lo) && (hi_closed ? x <= hi : x < hi);
  }
  static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
  static Interval point(double x) { return closed(x, x); }
};

using Box = std::vector<Interval>;
/// Disjoint union of boxes.
using Region = std::vector<Box>;

inline bool box_contains(const Box& b, std::span<const double> x) {
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!b[i].contains(x[i])) return false;
  return true;
}

/// Complement of the box [lo,hi]^d inside [floor, inf)^d, as disjoint boxes:
/// {x_1 > hi}, {x_1 in B, x_2 > hi}, ...
inline Region complement_of_cube(std::size_t d, double floor, double hi) {
  Region r;
  for (std::size_t j = 0; j < d; ++j) {
    Box b(d, Interval{floor, kInf, true, true});
    for (std::size_t i = 0; i < j; ++i) b[i] = Interval::closed(floor, hi);
    b[j] = Interval{hi, kInf, false, true};
    r.push_back(std::move(b));
  }
  return r;
}

class MeasureSequence {
 public:
  virtual ~MeasureSequence() = default;
  virtual std::string family() const = 0;
  virtual std::size_t dim() const = 0;
  /// log of the density of nu_n: w.r.t. Lebesgue measure for continuous
  /// families, w.r.t. counting measure on the support for lattice families,
  /// w.r.t. the reference weights for tabulated families.
  virtual double log_density(long n, std::span<const double> x) const = 0;
  /// log nu_n(box), in closed form.
  virtual double log_prob(long n, const Box& box) const = 0;

  virtual bool lattice() const { return false; }
  /// Support points at n, for one-dimensional lattice families.
  virtual std::vector<double> lattice_points(long /*n*/) const {
    throw std::logic_error(family() + ": not a lattice family");
  }
  /// Support of a one-dimensional family.
  virtual Interval support_1d() const { return Interval::closed(-kInf, kInf); }
  /// Window (in x) that contains the mass of nu_n for peak search.
  virtual std::pair<double, double> scan_window(long /*n*/) const { return {-50.0, 50.0}; }

  double log_prob(long n, const Region& region) const {
    std::vector<double> terms;
    for (const auto& b : region) terms.push_back(log_prob(n, b));
    return log_sum_exp(terms);
  }
};

/// Multivariate Pareto law of the first kind on [1, inf)^d with shape n:
/// joint survival P(X > x) = (sum x_i - d + 1)^(-n).
class ParetoFirstKind final : public MeasureSequence {
 public:
  using MeasureSequence::log_prob;

  explicit ParetoFirstKind(std::size_t d) : d_(d) {
    if (d == 0) throw std::invalid_argument("ParetoFirstKind: d must be >= 1");
  }
  std::string family() const override { return "pareto"; }
  std::size_t dim() const override { return d_; }
  Interval support_1d() const override { return {1.0, kInf, true, true}; }
  std::pair<double, double> scan_window(long) const override { return {1.0, 1e12}; }

  double log_density(long n, std::span<const double> x) const override {
    double s = 0.0;
    for (double xi : x) {
      if (xi < 1.0) return -kInf;
      s += xi;
    }
    s = s - static_cast<double>(d_) + 1.0;
    double lc = 0.0;
    for (std::size_t j = 0; j < d_; ++j) lc += std::log(static_cast<double>(n) + static_cast<double>(j));
    return lc - (static_cast<double>(n) + static_cast<double>(d_)) * std::log(s);
  }

  /// log P(X > c) for a corner c; -inf when a coordinate is infinite.
  double log_survival(long n, std::span<const double> c) const {
    double s = 0.0;
    for (double ci : c) {
      if (ci == kInf) return -kInf;
      s += std::max(ci, 1.0);
    }
    return -static_cast<double>(n) * std::log(s - static_cast<double>(d_) + 1.0);
  }

  double log_prob(long n, const Box& box) const override {
    if (box.size() != d_) throw std::invalid_argument("pareto: box dimension mismatch");
    std::vector<double> a(d_), b(d_);
    for (std::size_t i = 0; i < d_; ++i) {
      a[i] = std::max(box[i].lo, 1.0);
      b[i] = box[i].hi;
      if (!(b[i] > a[i])) return -kInf;
    }
    const double l0 = log_survival(n, a);
    if (d_ == 1) return l0 + log1mexp(log_survival(n, b) - l0);
    // Inclusion-exclusion over the 2^d corners, relative to the lower corner.
    double sum = 0.0;
    std::vector<double> c(d_);
    for (unsigned eps = 0; eps < (1U << d_); ++eps) {
      int sign = 1;
      for (std::size_t i = 0; i < d_; ++i) {
        bool upper = eps >> i & 1U;
        c[i] = upper ? b[i] : a[i];
        if (upper) sign = -sign;
      }
      double ls = log_survival(n, c);
      if (ls > -kInf) sum += sign * std::exp(ls - l0);
    }
    return sum > 0.0 ? l0 + std::log(sum) : -kInf;
  }

 private:
  std::size_t d_;
};

/// Law of the mean of n i.i.d. N(m, var) variables: N(m, var/n).
class GaussianSampleMean final : public MeasureSequence {
 public:
  using MeasureSequence::log_prob;

  GaussianSampleMean(double m, double var) : m_(m), var_(var) {
    if (!(var > 0.0)) throw std::invalid_argument("GaussianSampleMean: variance must be > 0");
  }
  std::string family() const override { return "gaussian_mean"; }
  std::size_t dim() const override { return 1; }
  double mean() const { return m_; }
  double variance() const { return var_; }
  std::pair<double, double> scan_window(long) const override {
    double s = std::sqrt(var_);
    return {m_ - 60.0 * s, m_ + 60.0 * s};
  }
  double log_density(long n, std::span<const double> x) const override {
    return log_normal_pdf(x[0], m_, var_ / static_cast<double>(n));
  }
  double log_prob(long n, const Box& box) const override {
    if (box.size() != 1) throw std::invalid_argument("gaussian_mean: box dimension mismatch");
    const double s = std::sqrt(var_ / static_cast<double>(n));
    return log_normal_interval((box[0].lo - m_) / s, (box[0].hi - m_) / s);
  }

 private:
  double m_;
  double var_;
};

/// Law of the mean of n i.i.d. Bernoulli(q) variables on {0, 1/n, ..., 1}.
class BernoulliSampleMean final : public MeasureSequence {
 public:
  using MeasureSequence::log_prob;

  explicit BernoulliSampleMean(double q = 0.5) : q_(q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("BernoulliSampleMean: q must lie in (0,1)");
  }
  std::string family() const override { return q_ == 0.5 ? "bernoulli_half" : "bernoulli"; }
  std::size_t dim() const override { return 1; }
  bool lattice() const override { return true; }
  Interval support_1d() const override { return Interval::closed(0.0, 1.0); }
  std::vector<double> lattice_points(long n) const override {
    std::vector<double> p(static_cast<std::size_t>(n) + 1);
    for (long j = 0; j <= n; ++j) p[j] = static_cast<double>(j) / static_cast<double>(n);
    return p;
  }

  double log_pmf(long n, long j) const {
    if (j < 0 || j > n) return -kInf;
    const double nd = static_cast<double>(n), jd = static_cast<double>(j);
    return std::lgamma(nd + 1.0) - std::lgamma(jd + 1.0) - std::lgamma(nd - jd + 1.0) + jd * std::log(q_) +
           (nd - jd) * std::log1p(-q_);
  }

  double log_density(long n, std::span<const double> x) const override {
    const double scaled = x[0] * static_cast<double>(n);
    const double j = std::round(scaled);
    if (std::abs(scaled - j) > 1e-9) return -kInf;
    return log_pmf(n, static_cast<long>(j));
  }

  double log_prob(long n, const Box& box) const override {
    if (box.size() != 1) throw std::invalid_argument("bernoulli: box dimension mismatch");
    const auto& iv = box[0];
    const double nd = static_cast<double>(n);
    constexpr double eps = 1e-9;
    double jlo = iv.lo == -kInf ? 0.0 : iv.lo * nd;
    double jhi = iv.hi == kInf ? nd : iv.hi * nd;
    long first = iv.lo_closed ? static_cast<long>(std::ceil(jlo - eps)) : static_cast<long>(std::floor(jlo + eps)) + 1;
    long last = iv.hi_closed ? static_cast<long>(std::floor(jhi + eps)) : static_cast<long>(std::ceil(jhi - eps)) - 1;
    first = std::max(first, 0L);
    last = std::min(last, n);
    std::vector<double> terms;
    for (long j = first; j <= last; ++j) terms.push_back(log_pmf(n, j));
    return log_sum_exp(terms);
  }

 private:
  double q_;
};

/// Densities d nu_n / d mu tabulated on the atoms of a DiscreteSpace.
class TabulatedDensities final : public MeasureSequence {
 public:
  using MeasureSequence::log_prob;

  TabulatedDensities(SpacePtr space, std::map<long, std::vector<double>> densities)
      : space_(std::move(space)), densities_(std::move(densities)) {
    for (const auto& [n, dens] : densities_) {
      if (dens.size() != space_->size()) throw std::invalid_argument("TabulatedDensities: density length mismatch");
      double total = 0.0;
      for (std::size_t i = 0; i < dens.size(); ++i) {
        if (!(dens[i] >= 0.0)) throw std::invalid_argument("TabulatedDensities: densities must be >= 0");
        total += dens[i] * space_->weight(i);
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("TabulatedDensities: nu_" + std::to_string(n) + " has total mass " +
                                    std::to_string(total));
    }
  }
  std::string family() const override { return "table"; }
  std::size_t dim() const override { return space_->dim(); }
  const SpacePtr& space() const { return space_; }

  const std::vector<double>& at(long n) const {
    auto it = densities_.find(n);
    if (it == densities_.end()) throw std::out_of_range("TabulatedDensities: no densities for n=" + std::to_string(n));
    return it->second;
  }
  double log_density(long n, std::span<const double> x) const override {
    const auto& dens = at(n);
    for (std::size_t i = 0; i < space_->size(); ++i) {
      auto a = space_->atom(i);
      if (std::equal(a.begin(), a.end(), x.begin(), x.end())) return std::log(dens[i]);
    }
    throw std::invalid_argument("TabulatedDensities: point is not an atom");
  }
  double log_prob(long n, const Box& box) const override {
    const auto& dens = at(n);
    std::vector<double> terms;
    for (std::size_t i = 0; i < space_->size(); ++i)
      if (dens[i] > 0.0 && space_->positive(i) && box_contains(box, space_->atom(i)))
        terms.push_back(std::log(dens[i]) + std::log(space_->weight(i)));
    return log_sum_exp(terms);
  }

 private:
  SpacePtr space_;
  std::map<long, std::vector<double>> densities_;
};

// --- atom grids ------------------------------------------------------------

enum class EvalMode { quadrature, atom_grid };

/// A DiscreteSpace whose atoms stand for cells of a partition of the
/// support. Cell masses of nu_n are exact closed forms, so set
/// probabilities of unions of cells are exact in either mode. Unbounded
/// cells are null atoms of the reference weights: they carry nu_n tail mass
/// but lie outside the truncated box on which "almost surely" is read.
struct AtomGrid {
  SpacePtr space;
  /// One cell per atom; empty for tabulated sequences, whose atoms are native.
  std::vector<Box> cells;

  static AtomGrid native(SpacePtr s) { return {std::move(s), {}}; }

  /// Product grid from per-dimension edges e_0 < ... < e_N (end edges may be
  /// infinite). Atoms sit at the lower end of each cell.
  static AtomGrid product(const std::vector<std::vector<double>>& edges) {
    const std::size_t d = edges.size();
    if (d == 0) throw std::invalid_argument("AtomGrid: no dimensions");
    std::vector<std::vector<Interval>> cells_1d(d);
    std::vector<std::vector<double>> anchor_1d(d), weight_1d(d);
    for (std::size_t k = 0; k < d; ++k) {
      const auto& e = edges[k];
      if (e.size() < 2) throw std::invalid_argument("AtomGrid: need at least two edges per dimension");
      for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        if (!(e[i + 1] > e[i])) throw std::invalid_argument("AtomGrid: edges must increase");
        Interval iv{e[i], e[i + 1], i == 0, true};
        cells_1d[k].push_back(iv);
        // A cell unbounded below is anchored one neighbouring width under its upper end.
        double anchor = e[i];
        if (!std::isfinite(anchor))
          anchor = i + 2 < e.size() && std::isfinite(e[i + 2]) ? 2.0 * e[i + 1] - e[i + 2] : e[i + 1] - 1.0;
        anchor_1d[k].push_back(anchor);
        const double len = e[i + 1] - e[i];
        weight_1d[k].push_back(std::isfinite(len) ? len : 0.0);
      }
    }
    std::vector<std::vector<double>> atoms;
    std::vector<double> weights;
    std::vector<Box> cells;
    std::vector<std::size_t> idx(d, 0);
    for (;;) {
      std::vector<double> atom(d);
      Box box(d);
      double w = 1.0;
      for (std::size_t k = 0; k < d; ++k) {
        atom[k] = anchor_1d[k][idx[k]];
        box[k] = cells_1d[k][idx[k]];
        w *= weight_1d[k][idx[k]];
      }
      atoms.push_back(std::move(atom));
      cells.push_back(std::move(box));
      weights.push_back(w);
      std::size_t k = 0;
      while (k < d && ++idx[k] == cells_1d[k].size()) idx[k++] = 0;
      if (k == d) break;
    }
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("AtomGrid: no bounded cells");
    for (double& w : weights) w /= total;
    return {DiscreteSpace::make(std::move(atoms), std::move(weights)), std::move(cells)};
  }

  /// Uniform one-dimensional grid on [lo, hi] with `step`, optionally with
  /// unbounded tail cells on either side.
  static AtomGrid uniform_1d(double lo, double hi, double step, bool tail_below, bool tail_above) {
    std::vector<double> e;
    if (tail_below) e.push_back(-kInf);
    const long count = std::lround((hi - lo) / step);
    for (long i = 0; i <= count; ++i) e.push_back(lo + static_cast<double>(i) * step);
    if (tail_above) e.push_back(kInf);
    return product({e});
  }

  /// Atoms whose cell lies inside the box (native grids: atoms inside the box).
  MeasurableSet cells_inside(const Box& b) const {
    std::vector<bool> mask(space->size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (cells.empty()) {
        mask[i] = box_contains(b, space->atom(i));
        continue;
      }
      bool inside = true;
      for (std::size_t k = 0; k < b.size() && inside; ++k) {
        const auto& c = cells[i][k];
        inside = c.lo >= b[k].lo && c.hi <= b[k].hi && !(c.lo == b[k].lo && c.lo_closed && !b[k].lo_closed) &&
                 !(c.hi == b[k].hi && c.hi_closed && !b[k].hi_closed);
      }
      mask[i] = inside;
    }
    return {space, std::move(mask)};
  }
};

/// log nu_n(cell) for every atom of the grid.
inline std::vector<double> log_cell_masses(const MeasureSequence& seq, const AtomGrid& grid, long n) {
  std::vector<double> out(grid.space->size());
  if (grid.cells.empty()) {
    auto* tab = dynamic_cast<const TabulatedDensities*>(&seq);
    if (!tab) throw std::invalid_argument("log_cell_masses: native grids need tabulated densities");
    require_same_space(tab->space(), grid.space, "log_cell_masses");
    const auto& dens = tab->at(n);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = dens[i] > 0.0 && grid.space->weight(i) > 0.0 ? std::log(dens[i] * grid.space->weight(i)) : -kInf;
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = seq.log_prob(n, grid.cells[i]);
  return out;
}

/// log of d nu_n / d mu at atom i: the closed-form density at the atom in
/// quadrature mode, cell mass over cell weight in atom-grid mode.
inline double log_density_at(const MeasureSequence& seq, const AtomGrid& grid, long n, std::size_t i,
                             EvalMode mode, const std::vector<double>* masses = nullptr) {
  if (grid.cells.empty() || mode == EvalMode::quadrature) return seq.log_density(n, grid.space->atom(i));
  const double lm = masses ? (*masses)[i] : seq.log_prob(n, grid.cells[i]);
  return lm - std::log(grid.space->weight(i));
}

inline double log_prob(const MeasureSequence& seq, const AtomGrid& grid, long n, const MeasurableSet& a) {
  require_same_space(grid.space, a.space(), "log_prob");
  auto lm = log_cell_masses(seq, grid, n);
  std::vector<double> terms;
  for (std::size_t i = 0; i < lm.size(); ++i)
    if (a.contains(i)) terms.push_back(lm[i]);
  return log_sum_exp(terms);
}

// --- Varadhan functional -------------------------------------------------

inline double floor_to_neg_inf(double v) { return v < kLogFloor ? -kInf : v; }

/// (1/n) log sum_atoms exp(n f) nu_n(cell), in log-sum-exp form.
inline double varadhan_value(const MeasureSequence& seq, const AtomGrid& grid, const Field& f, long n) {
  if (n < 1) throw std::invalid_argument("varadhan_value: n must be >= 1");
  require_same_space(grid.space, f.space(), "varadhan_value");
  auto lm = log_cell_masses(seq, grid, n);
  std::vector<double> terms;
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (lm[i] == -kInf || f[i].is_neg_inf()) continue;
    if (f[i].is_pos_inf()) return kInf;
    terms.push_back(static_cast<double>(n) * f[i].value() + lm[i]);
  }
  return floor_to_neg_inf(log_sum_exp(terms) / static_cast<double>(n));
}

struct VaradhanQuadrature {
  double value = 0.0;
  double rel_error = 0.0;
  double truncation_bound = 0.0;
};

/// (1/n) log integral exp(n f) d nu_n for a one-dimensional family, by
/// adaptive quadrature against the closed-form density (exact summation for
/// lattice families). Half-line supports are integrated in t = log(x - lo + 1).
inline VaradhanQuadrature varadhan_value_quadrature(const MeasureSequence& seq, const std::function<double(double)>& f,
                                                    long n, std::vector<double> breakpoints = {}) {
  if (n < 1) throw std::invalid_argument("varadhan_value: n must be >= 1");
  if (seq.dim() != 1) throw std::invalid_argument("varadhan_value: quadrature mode is one-dimensional");
  const double nd = static_cast<double>(n);
  if (seq.lattice()) {
    auto pts = seq.lattice_points(n);
    std::vector<double> terms;
    for (double x : pts) {
      double lp = seq.log_density(n, std::span<const double>(&x, 1));
      double fx = f(x);
      if (lp == -kInf || fx == -kInf) continue;
      terms.push_back(nd * fx + lp);
    }
    return {floor_to_neg_inf(log_sum_exp(terms) / nd), 0.0, 0.0};
  }
  const Interval sup = seq.support_1d();
  auto [w_lo, w_hi] = seq.scan_window(n);
  LogQuadOptions opt;
  LogIntegral li;
  if (std::isfinite(sup.lo) && sup.hi == kInf) {
    const double lo = sup.lo;
    auto to_x = [lo](double t) { return lo + std::expm1(t); };
    auto log_integrand = [&](double t) {
      double x = to_x(t);
      double fx = f(x);
      if (fx == -kInf) return -kInf;
      return nd * fx + seq.log_density(n, std::span<const double>(&x, 1)) + t;
    };
    opt.scan_lo = 0.0;
    opt.scan_hi = std::log1p(std::max(w_hi - lo, 1.0));
    for (double b : breakpoints)
      if (b > lo) opt.breakpoints.push_back(std::log1p(b - lo));
    li = log_integrate(log_integrand, 0.0, kInf, opt);
  } else {
    auto log_integrand = [&](double x) {
      double fx = f(x);
      if (fx == -kInf) return -kInf;
      return nd * fx + seq.log_density(n, std::span<const double>(&x, 1));
    };
    opt.scan_lo = std::max(w_lo, sup.lo);
    opt.scan_hi = std::min(w_hi, sup.hi);
    opt.breakpoints = std::move(breakpoints);
    li = log_integrate(log_integrand, sup.lo, sup.hi, opt);
  }
  return {floor_to_neg_inf(li.log_value / nd), li.rel_error, li.truncation_bound};
}

// --- limit estimation ------------------------------------------------------

enum class LimitStatus { converged, oscillating, diverging_down, not_converged };

inline const char* to_string(LimitStatus s) {
  switch (s) {
    case LimitStatus::converged: return "converged";
    case LimitStatus::oscillating: return "oscillating";
    case LimitStatus::diverging_down: return "diverging_down";
    case LimitStatus::not_converged: return "not_converged";
  }
  return "?";
}

struct LimitOptions {
  std::size_t window = 8;
  double tol = 1e-6;
  double floor = kLogFloor;
};

struct LimitEstimate {
  std::optional<ExtReal> estimate;
  LimitStatus status = LimitStatus::not_converged;
  /// Sub-fits over the even- and odd-indexed entries of the window.
  std::optional<ExtReal> even_estimate;
  std::optional<ExtReal> odd_estimate;
  double residual = 0.0;
};

namespace detail {

struct LineFit {
  double intercept;
  double slope;
  double rms;
};

/// Least-squares fit v = L + c/n.
inline LineFit fit_inverse_n(const std::vector<std::pair<long, double>>& pts) {
  const double m = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, v] : pts) {
    const double x = 1.0 / static_cast<double>(n);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  const double den = m * sxx - sx * sx;
  const double slope = pts.size() > 1 && den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  const double intercept = (sy - slope * sx) / m;
  double ss = 0.0;
  for (const auto& [n, v] : pts) {
    const double r = v - (intercept + slope / static_cast<double>(n));
    ss += r * r;
  }
  return {intercept, slope, std::sqrt(ss / m)};
}

}  // namespace detail

/// Finite-horizon surrogate for the limit of v_n: fits v_n = L + c/n on the
/// last window and compares the fits over even- and odd-indexed entries.
/// Entries below the floor count as -inf.
inline LimitEstimate limit_estimate(const std::vector<std::pair<long, double>>& values, const LimitOptions& opt = {}) {
  if (values.size() < 6) throw std::invalid_argument("limit_estimate: need at least 6 entries");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i].first > values[i - 1].first))
      throw std::invalid_argument("limit_estimate: n must be strictly increasing");

  const std::size_t w = std::min(std::max<std::size_t>(opt.window, 4), values.size());
  const std::size_t start = values.size() - w;
  std::vector<std::pair<long, double>> all, even, odd;
  bool even_inf = false, odd_inf = false, even_fin = false, odd_fin = false;
  for (std::size_t i = start; i < values.size(); ++i) {
    const bool is_even = i % 2 == 0;
    const bool neg_inf = !(values[i].second >= opt.floor);
    (is_even ? (neg_inf ? even_inf : even_fin) : (neg_inf ? odd_inf : odd_fin)) = true;
    if (!neg_inf) {
      all.push_back(values[i]);
      (is_even ? even : odd).push_back(values[i]);
    }
  }

  LimitEstimate out;
  if (all.empty()) {
    out.status = LimitStatus::diverging_down;
    out.estimate = ExtReal::neg_inf();
    out.even_estimate = out.odd_estimate = ExtReal::neg_inf();
    return out;
  }
  auto sub = [](const std::vector<std::pair<long, double>>& pts, bool has_inf) -> std::optional<ExtReal> {
    if (pts.empty()) return has_inf ? std::optional<ExtReal>(ExtReal::neg_inf()) : std::nullopt;
    return ExtReal(detail::fit_inverse_n(pts).intercept);
  };
  out.even_estimate = sub(even, even_inf);
  out.odd_estimate = sub(odd, odd_inf);
  if (even_inf || odd_inf) {
    // Some entries vanish and others do not: a parity split or erratic underflow.
    out.status = LimitStatus::oscillating;
    return out;
  }
  const auto fit = detail::fit_inverse_n(all);
  const double scale = opt.tol * (1.0 + std::abs(fit.intercept));
  out.residual = fit.rms;
  if (!even.empty() && !odd.empty()) {
    const auto fe = detail::fit_inverse_n(even);
    const auto fo = detail::fit_inverse_n(odd);
    const double gap = std::abs(fe.intercept - fo.intercept);
    // Oscillation means each parity class is well explained on its own while
    // the two disagree; a smooth sequence the model fits poorly leaves both
    // sub-fits with residuals comparable to their disagreement.
    if (gap > scale && gap > 2.0 * std::max(fe.rms, fo.rms)) {
      out.status = LimitStatus::oscillating;
      return out;
    }
  }
  out.estimate = ExtReal(fit.intercept);
  out.status = fit.rms <= scale ? LimitStatus::converged : LimitStatus::not_converged;
  return out;
}

/// {2, 3, 4, 5, 8, 9, ..., 2^14, 2^14 + 1}: powers of two with odd companions.
inline std::vector<long> default_n_grid(int max_power = 14) {
  std::vector<long> g;
  for (int k = 1; k <= max_power; ++k) {
    long n = 1L << k;
    g.push_back(n);
    g.push_back(n + 1);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

/// (n, (1/n) log nu_n(A)) for a set of atoms of the grid.
inline std::vector<std::pair<long, double>> concentration_sequence(const MeasureSequence& seq, const AtomGrid& grid,
                                                                   const MeasurableSet& a,
                                                                   std::span<const long> n_grid) {
  if (n_grid.empty()) throw std::invalid_argument("concentration_sequence: empty n grid");
  std::vector<std::pair<long, double>> out;
  for (long n : n_grid) out.emplace_back(n, floor_to_neg_inf(log_prob(seq, grid, n, a) / static_cast<double>(n)));
  return out;
}

/// (n, (1/n) log nu_n(R)) for a region given as disjoint boxes.
inline std::vector<std::pair<long, double>> concentration_sequence(const MeasureSequence& seq, const Region& region,
                                                                   std::span<const long> n_grid) {
  if (n_grid.empty()) throw std::invalid_argument("concentration_sequence: empty n grid");
  std::vector<std::pair<long, double>> out;
  for (long n : n_grid) out.emplace_back(n, floor_to_neg_inf(seq.log_prob(n, region) / static_cast<double>(n)));
  return out;
}

/// log nu_n(interval) by adaptive quadrature of the closed-form density, for
/// one-dimensional continuous families. Independent of log_prob.
inline double log_prob_by_quadrature(const MeasureSequence& seq, long n, const Interval& iv) {
  if (seq.dim() != 1 || seq.lattice()) throw std::invalid_argument("log_prob_by_quadrature: 1-D continuous only");
  const Interval sup = seq.support_1d();
  const double a = std::max(iv.lo, sup.lo);
  const double b = std::min(iv.hi, sup.hi);
  if (!(a < b)) return -kInf;
  auto dens = [&](double x) { return seq.log_density(n, std::span<const double>(&x, 1)); };
  auto [w_lo, w_hi] = seq.scan_window(n);
  LogQuadOptions opt;
  if (std::isfinite(a) && b == kInf) {
    // t = log(x - a + 1) keeps power-law tails well resolved.
    auto g = [&](double t) { return dens(a + std::expm1(t)) + t; };
    opt.scan_lo = 0.0;
    opt.scan_hi = std::log1p(std::max(w_hi - a, 1.0));
    return log_integrate(g, 0.0, kInf, opt).log_value;
  }
  opt.scan_lo = std::max(a, w_lo);
  opt.scan_hi = std::min(b, w_hi);
  if (!(opt.scan_lo < opt.scan_hi)) {
    opt.scan_lo = a;
    opt.scan_hi = b;
  }
  return log_integrate(dens, a, b, opt).log_value;
}

// --- sharp LDP criterion -----------------------------------------------

struct EvidenceRow {
  std::size_t k = 0;
  long n = 0;
  double value = 0.0;
  double residual = 0.0;
};

struct ConditionVerdict {
  bool pass = false;
  std::string note;
  std::vector<EvidenceRow> evidence;
};

struct LdpOptions {
  EvalMode mode = EvalMode::quadrature;
  /// Condition 3: sup residual at the largest n must fall below this.
  double uniform_tol = 1e-3;
  /// Condition 2: the last tail limit must fall below this.
  double tail_threshold = -2.0;
  LimitOptions limit{};
};

struct LdpReport {
  ConditionVerdict coverage;
  ConditionVerdict tail_decay;
  ConditionVerdict uniform_convergence;
  std::vector<LimitEstimate> tail_limits;
  bool overall() const { return coverage.pass && tail_decay.pass && uniform_convergence.pass; }
};

/// Checks the three conditions of the sharp LDP criterion for (nu_n) with
/// candidate rate I and exhaustion A_1, A_2, ... of {I < inf}.
inline LdpReport sharp_ldp_check(const MeasureSequence& seq, const AtomGrid& grid, const Field& rate,
                                 const std::vector<MeasurableSet>& exhaustion, std::span<const long> n_grid,
                                 const LdpOptions& opt = {}) {
  require_same_space(grid.space, rate.space(), "sharp_ldp_check");
  if (exhaustion.empty()) throw std::invalid_argument("sharp_ldp_check: empty exhaustion");
  for (std::size_t i = 0; i < rate.size(); ++i)
    if (rate[i] < 0.0) throw std::invalid_argument("sharp_ldp_check: rate must be >= 0");
  const auto& space = grid.space;
  LdpReport rep;

  // (1) {I < inf} = union A_k at positive atoms.
  {
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < space->size(); ++i) {
      if (!space->positive(i)) continue;
      bool covered = false;
      for (const auto& a : exhaustion) covered = covered || a.contains(i);
      if (covered != rate[i].is_finite()) ++mismatches;
    }
    rep.coverage.pass = mismatches == 0;
    rep.coverage.note = std::to_string(mismatches) + " positive atoms where {I<inf} and the union of A_k disagree";
  }

  // (2) limits of (1/n) log nu_n(A_k^c) decrease in k and fall below the threshold.
  {
    bool ok = true;
    ExtReal prev = ExtReal::pos_inf();
    for (std::size_t k = 0; k < exhaustion.size(); ++k) {
      auto seqv = concentration_sequence(seq, grid, exhaustion[k].complement(), n_grid);
      auto lim = limit_estimate(seqv, opt.limit);
      for (const auto& [n, v] : seqv) {
        double r = lim.estimate && lim.estimate->is_finite() && std::isfinite(v) ? v - lim.estimate->value() : 0.0;
        rep.tail_decay.evidence.push_back({k, n, v, r});
      }
      const bool settled = lim.status == LimitStatus::converged || lim.status == LimitStatus::diverging_down;
      const ExtReal j = settled ? *lim.estimate : ExtReal::pos_inf();
      if (!settled) ok = false;
      if (!(j < prev || (j.is_neg_inf() && prev.is_neg_inf()))) ok = false;
      prev = j;
      rep.tail_limits.push_back(lim);
    }
    ok = ok && prev < opt.tail_threshold;
    rep.tail_decay.pass = ok;
    rep.tail_decay.note = "last tail limit " + std::string(prev.is_neg_inf() ? "-inf" : std::to_string(prev.value())) +
                          ", threshold " + std::to_string(opt.tail_threshold);
  }

  // (3) (1/n) log d nu_n/d mu -> -I uniformly on each A_k.
  {
    bool ok = true;
    double worst_last = 0.0;
    for (std::size_t k = 0; k < exhaustion.size(); ++k) {
      double first = -1.0, last = 0.0;
      for (long n : n_grid) {
        std::vector<double> masses;
        if (opt.mode == EvalMode::atom_grid) masses = log_cell_masses(seq, grid, n);
        double sup = 0.0;
        for (std::size_t i = 0; i < space->size(); ++i) {
          if (!space->positive(i) || !exhaustion[k].contains(i)) continue;
          if (!rate[i].is_finite()) {
            sup = kInf;
            continue;
          }
          double ld = log_density_at(seq, grid, n, i, opt.mode, masses.empty() ? nullptr : &masses);
          double r = ld == -kInf ? kInf : std::abs(ld / static_cast<double>(n) + rate[i].value());
          sup = std::max(sup, r);
        }
        if (first < 0.0) first = sup;
        last = sup;
        rep.uniform_convergence.evidence.push_back({k, n, sup, sup - opt.uniform_tol});
      }
      if (!(last <= opt.uniform_tol) || !(last <= first)) ok = false;
      worst_last = std::max(worst_last, last);
    }
    rep.uniform_convergence.pass = ok;
    rep.uniform_convergence.note = "worst residual at the largest n: " + std::to_string(worst_last) +
                                   ", tolerance " + std::to_string(opt.uniform_tol);
  }
  return rep;
}

// --- Laplace principle ---------------------------------------------------

struct TestFunction {
  std::string label;
  std::function<double(double)> fn;
  /// Kinks of fn, passed to the quadrature as split points.
  std::vector<double> breakpoints;
};

struct LaplaceEntry {
  std::string label;
  bool skipped = false;
  std::string note;
  std::vector<std::pair<long, double>> values;
  LimitEstimate limit;
  ExtReal target = 0.0;
  double gap = 0.0;
  bool pass = false;
};

struct LaplaceReport {
  std::vector<LaplaceEntry> entries;
  bool passed() const {
    for (const auto& e : entries)
      if (!e.skipped && !e.pass) return false;
    return true;
  }
};

struct LaplaceOptions {
  double tol = 1e-6;
  LimitOptions limit{};
};

namespace detail {

inline void finish_laplace_entry(LaplaceEntry& e, const Field& f_on_grid, const Field& rate,
                                 const LaplaceOptions& opt) {
  e.limit = limit_estimate(e.values, opt.limit);
  e.target = ess_sup(difference(f_on_grid, rate));
  e.gap = e.limit.estimate ? residual(*e.limit.estimate, e.target) : kInf;
  e.pass = e.limit.status == LimitStatus::converged && e.gap <= opt.tol;
}

}  // namespace detail

/// Laplace principle on the atom grid: the limit of the Varadhan values of
/// each test field must equal ess.sup (f - I).
inline LaplaceReport laplace_check(const MeasureSequence& seq, const AtomGrid& grid, const Field& rate,
                                   const std::vector<std::pair<std::string, Field>>& fields,
                                   std::span<const long> n_grid, const LaplaceOptions& opt = {}) {
  LaplaceReport rep;
  const long n_max = n_grid.empty() ? 1 : n_grid.back();
  for (const auto& [label, f] : fields) {
    LaplaceEntry e;
    e.label = label;
    auto proxy = [&](const Field& g) { return ExtReal(varadhan_value(seq, grid, g, n_max)); };
    bool member = false;
    for (double t : {2.0, 1.5, 1.1}) member = member || std::isfinite(proxy(f * t).value());
    if (!member) {
      e.skipped = true;
      e.note = "not in L^phi: phi(t f) infinite for t in {2, 1.5, 1.1}";
      rep.entries.push_back(std::move(e));
      continue;
    }
    for (long n : n_grid) e.values.emplace_back(n, varadhan_value(seq, grid, f, n));
    detail::finish_laplace_entry(e, f, rate, opt);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

/// Laplace principle in quadrature mode for one-dimensional families; the
/// target ess.sup (f - I) is read on the atoms of the grid.
inline LaplaceReport laplace_check_quadrature(const MeasureSequence& seq, const AtomGrid& grid, const Field& rate,
                                              const std::vector<TestFunction>& fns, std::span<const long> n_grid,
                                              const LaplaceOptions& opt = {}) {
  LaplaceReport rep;
  const long n_max = n_grid.empty() ? 1 : n_grid.back();
  for (const auto& tf : fns) {
    LaplaceEntry e;
    e.label = tf.label;
    bool member = false;
    for (double t : {2.0, 1.5, 1.1}) {
      auto scaled = [&](double x) { return t * tf.fn(x); };
      try {
        member = member || std::isfinite(varadhan_value_quadrature(seq, scaled, n_max, tf.breakpoints).value);
      } catch (const NumericalError&) {
        // The integrand does not decay: phi(t f) is infinite.
      }
    }
    if (!member) {
      e.skipped = true;
      e.note = "not in L^phi: phi(t f) infinite for t in {2, 1.5, 1.1}";
      rep.entries.push_back(std::move(e));
      continue;
    }
    for (long n : n_grid) e.values.emplace_back(n, varadhan_value_quadrature(seq, tf.fn, n, tf.breakpoints).value);
    Field on_grid = Field::from_function(grid.space, [&](std::span<const double> x) { return tf.fn(x[0]); });
    detail::finish_laplace_entry(e, on_grid, rate, opt);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

/// Rate recovered through the concentration of singletons: the limit of
/// (1/n) log nu_n({x}) at every positive atom, negated through minimal_penalty.
inline Field recovered_rate(const MeasureSequence& seq, const AtomGrid& grid, std::span<const long> n_grid,
                            const LimitOptions& opt = {}) {
  ConcentrationTable table(grid.space);
  for (std::size_t i = 0; i < grid.space->size(); ++i) {
    if (!grid.space->positive(i)) continue;
    auto a = MeasurableSet::singleton(grid.space, i);
    auto lim = limit_estimate(concentration_sequence(seq, grid, a, n_grid), opt);
    if (!lim.estimate) throw std::runtime_error("recovered_rate: no limit at atom " + std::to_string(i));
    table.set(a, min(*lim.estimate, 0.0));
  }
  return minimal_penalty(table);
}

}  // namespace maxrisk
