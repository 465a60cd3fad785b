#pragma once

// Monetary risk measures on a DiscreteSpace: maximum loss, penalized maximum
// loss, VaR and AVaR, the concentration functional J, the minimal penalty
// recovered from J, and checkers for maxitivity and for the penalized
// maximum loss representation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxrisk/ext_real.hpp"
#include "maxrisk/space.hpp"

namespace maxrisk {

/// A functional Field -> ExtReal that is normalized at the zero field.
///
/// Normalization is checked on construction; monotonicity and translation
/// invariance are left to the property suites.
class RiskMeasure {
 public:
  using Evaluator = std::function<ExtReal(const Field&)>;

  RiskMeasure(std::string label, SpacePtr space, Evaluator eval)
      : label_(std::move(label)), space_(std::move(space)), eval_(std::move(eval)) {
    ExtReal at_zero = eval_(Field::constant(space_, 0.0));
    if (residual(at_zero, 0.0) > 1e-12)
      throw std::invalid_argument("RiskMeasure '" + label_ + "': phi(0) must be 0");
  }

  ExtReal operator()(const Field& f) const {
    require_same_space(space_, f.space(), "RiskMeasure");
    return eval_(f);
  }
  const std::string& label() const { return label_; }
  const SpacePtr& space() const { return space_; }

 private:
  std::string label_;
  SpacePtr space_;
  Evaluator eval_;
};

/// A penalty I : X -> [0, inf] with ess.inf I = 0.
class Penalty {
 public:
  explicit Penalty(Field values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (values_[i] < 0.0) throw std::invalid_argument("Penalty: values must be >= 0");
    if (ess_inf(values_) != 0.0) throw std::invalid_argument("Penalty: ess.inf must be 0");
  }
  const Field& field() const { return values_; }
  const SpacePtr& space() const { return values_.space(); }
  ExtReal operator[](std::size_t i) const { return values_[i]; }

 private:
  Field values_;
};

inline ExtReal ml(const Field& f) { return ess_sup(f); }

/// ess.sup (f - I); (f - I) is -inf where I = +inf and f < +inf.
inline ExtReal ml_penalized(const Field& f, const Penalty& penalty) {
  require_same_space(f.space(), penalty.space(), "ml_penalized");
  ExtReal m = ExtReal::neg_inf();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f.space()->positive(i)) continue;
    m = max(m, f[i] - penalty[i]);  // throws on inf - inf
  }
  return m;
}

namespace detail {

struct Step {
  double value;
  double mass;
};

/// Distribution of f under nu as ascending (value, mass) steps.
inline std::vector<Step> distribution_steps(const Field& f, std::span<const double> nu, const char* where) {
  if (nu.size() != f.size()) throw std::invalid_argument(std::string(where) + ": weight length mismatch");
  double sum = 0.0;
  for (double w : nu) {
    if (!(w >= 0.0)) throw std::invalid_argument(std::string(where) + ": weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTol)
    throw std::invalid_argument(std::string(where) + ": weights must sum to 1");
  std::vector<Step> steps;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (nu[i] <= 0.0) continue;
    if (!f[i].is_finite())
      throw std::invalid_argument(std::string(where) + ": field is not bounded under the weights");
    steps.push_back({f[i].value(), nu[i] / sum});
  }
  std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.value < b.value; });
  std::vector<Step> merged;
  for (const auto& s : steps) {
    if (!merged.empty() && merged.back().value == s.value)
      merged.back().mass += s.mass;
    else
      merged.push_back(s);
  }
  return merged;
}

inline void check_level(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument(std::string(where) + ": level must lie in (0,1)");
}

}  // namespace detail

/// Left alpha-quantile inf{m : nu(f <= m) >= alpha}.
inline double var(const Field& f, std::span<const double> nu, double alpha) {
  detail::check_level(alpha, "var");
  auto steps = detail::distribution_steps(f, nu, "var");
  double cum = 0.0;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    cum += steps[j].mass;
    if (cum >= alpha || j + 1 == steps.size()) return steps[j].value;
  }
  return steps.back().value;
}

/// (1/(1-alpha)) * integral_alpha^1 VaR_s(f) ds, summed exactly over the
/// steps of the quantile function.
inline double avar(const Field& f, std::span<const double> nu, double alpha) {
  detail::check_level(alpha, "avar");
  auto steps = detail::distribution_steps(f, nu, "avar");
  double lower = 0.0;
  double integral = 0.0;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    // The top step ends at exactly 1 so the level-1 tail is never lost to rounding.
    double upper = j + 1 == steps.size() ? 1.0 : lower + steps[j].mass;
    double from = std::max(lower, alpha);
    double to = std::min(upper, 1.0);
    if (to > from) integral += (to - from) * steps[j].value;
    lower = upper;
  }
  return integral / (1.0 - alpha);
}

// --- standard functionals as RiskMeasure objects --------------------------

inline RiskMeasure make_ml(SpacePtr space) {
  return {"ml", std::move(space), [](const Field& f) { return ml(f); }};
}

inline RiskMeasure make_ml_penalized(const Penalty& penalty) {
  return {"ml_penalized", penalty.space(), [penalty](const Field& f) { return ml_penalized(f, penalty); }};
}

/// Plain expectation under the reference weights; monetary but not maxitive.
inline RiskMeasure make_expectation(SpacePtr space) {
  return {"expectation", space, [](const Field& f) {
            ExtReal s = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i)
              if (f.space()->positive(i)) s += f[i] * f.space()->weight(i);
            return s;
          }};
}

inline RiskMeasure make_avar(SpacePtr space, double alpha) {
  detail::check_level(alpha, "make_avar");
  return {"avar", space, [alpha](const Field& f) {
            auto w = f.space()->weights();
            return ExtReal(avar(f, w, alpha));
          }};
}

// --- concentration ------------------------------------------------------

struct ConcentrationOptions {
  /// Values below this floor are read as -inf.
  double floor = -1e12;
  double tol = 1e-9;
};

/// r = -2^k for k = 0..40.
inline std::vector<double> default_r_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 40; ++k) g.push_back(-std::ldexp(1.0, k));
  return g;
}

struct ConcentrationValue {
  ExtReal value;
  bool converged;
};

/// J_A = inf_{r<0} phi(r 1_{A^c}), evaluated on a decreasing grid of r.
inline ConcentrationValue concentration(const RiskMeasure& phi, const MeasurableSet& a,
                                        std::span<const double> r_grid,
                                        const ConcentrationOptions& opt = {}) {
  if (r_grid.empty()) throw std::invalid_argument("concentration: empty r grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] < 0.0)) throw std::invalid_argument("concentration: r grid must be negative");
    if (i > 0 && !(r_grid[i] < r_grid[i - 1]))
      throw std::invalid_argument("concentration: r grid must be strictly decreasing");
  }
  ExtReal best = ExtReal::pos_inf();
  ExtReal prev = ExtReal::pos_inf();
  ExtReal last = ExtReal::pos_inf();
  for (double r : r_grid) {
    prev = last;
    last = phi(Field::scaled_indicator_of_complement(a, r));
    best = min(best, last);
  }
  if (best < opt.floor) return {ExtReal::neg_inf(), true};
  bool converged = r_grid.size() == 1 || residual(prev, last) <= opt.tol * (1.0 + std::abs(best.value()));
  return {best, converged};
}

/// J restricted to a finite collection of sets.
class ConcentrationTable {
 public:
  explicit ConcentrationTable(SpacePtr space) : space_(std::move(space)) {}

  void set(const MeasurableSet& a, ExtReal j) {
    require_same_space(space_, a.space(), "ConcentrationTable");
    if (j > 0.0) throw std::invalid_argument("ConcentrationTable: entries must be <= 0");
    entries_[a.mask()] = j;
  }
  std::optional<ExtReal> get(const MeasurableSet& a) const {
    auto it = entries_.find(a.mask());
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::vector<bool>, ExtReal>& entries() const { return entries_; }

  /// Pairs (A, B) with A a subset of B but J_A > J_B.
  std::vector<std::pair<std::vector<bool>, std::vector<bool>>> monotonicity_violations(double tol = 0.0) const {
    std::vector<std::pair<std::vector<bool>, std::vector<bool>>> out;
    for (const auto& [a, ja] : entries_)
      for (const auto& [b, jb] : entries_) {
        bool sub = true;
        for (std::size_t i = 0; i < a.size() && sub; ++i) sub = !a[i] || b[i];
        if (sub && ja > jb && residual(ja, jb) > tol) out.emplace_back(a, b);
      }
    return out;
  }

 private:
  SpacePtr space_;
  std::map<std::vector<bool>, ExtReal> entries_;
};

/// Table of J over every singleton of a positive-weight atom.
inline ConcentrationTable singleton_concentrations(const RiskMeasure& phi,
                                                   std::span<const double> r_grid,
                                                   const ConcentrationOptions& opt = {}) {
  ConcentrationTable t(phi.space());
  for (std::size_t i = 0; i < phi.space()->size(); ++i) {
    if (!phi.space()->positive(i)) continue;
    auto a = MeasurableSet::singleton(phi.space(), i);
    t.set(a, concentration(phi, a, r_grid, opt).value);
  }
  return t;
}

/// I_min(x) = -J_{{x}} at positive-weight atoms. Zero-weight atoms get +inf.
inline Field minimal_penalty(const ConcentrationTable& table) {
  const auto& space = table.space();
  std::vector<ExtReal> v(space->size(), ExtReal::pos_inf());
  for (std::size_t i = 0; i < space->size(); ++i) {
    if (!space->positive(i)) continue;
    auto j = table.get(MeasurableSet::singleton(space, i));
    if (!j) throw std::invalid_argument("minimal_penalty: missing singleton entry for atom " + std::to_string(i));
    v[i] = -*j;
  }
  return {space, std::move(v)};
}

/// Smallest t in {2, 1.5, 1.1} with phi(t f) finite, if any.
inline std::optional<double> l_phi_witness(const RiskMeasure& phi, const Field& f) {
  for (double t : {2.0, 1.5, 1.1})
    if (phi(f * t).is_finite()) return t;
  return std::nullopt;
}

// --- checkers ------------------------------------------------------------

struct Violation {
  nlohmann::json input;
  ExtReal lhs;
  ExtReal rhs;
};

struct CheckReport {
  std::string check;
  std::vector<Violation> violations;
  double max_residual = 0.0;
  bool passed() const { return violations.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : violations)
      v.push_back({{"input", x.input}, {"lhs", ext_real_to_json(x.lhs)}, {"rhs", ext_real_to_json(x.rhs)}});
    return {{"check", check}, {"violations", v}, {"max_residual", ext_real_to_json(max_residual)}};
  }
};

inline void record(CheckReport& rep, nlohmann::json input, ExtReal lhs, ExtReal rhs, double tol) {
  double r = residual(lhs, rhs);
  rep.max_residual = std::max(rep.max_residual, r);
  if (r > tol) rep.violations.push_back({std::move(input), lhs, rhs});
}

/// phi(f v g) against phi(f) v phi(g) on each pair.
inline CheckReport check_maxitive(const RiskMeasure& phi, const std::vector<std::pair<Field, Field>>& trials,
                                  double tol = 0.0) {
  CheckReport rep{"maxitive:" + phi.label(), {}, 0.0};
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto& [f, g] = trials[k];
    record(rep, {{"pair", k}, {"f", field_to_json(f)}, {"g", field_to_json(g)}}, phi(pointwise_max(f, g)),
           max(phi(f), phi(g)), tol);
  }
  return rep;
}

/// phi(f) against phi(g) for pairs with the same law under the reference weights.
/// Only a falsifier: agreement on finitely many pairs proves nothing.
inline CheckReport check_law_invariance(const RiskMeasure& phi, const std::vector<std::pair<Field, Field>>& pairs,
                                        double tol = 1e-12) {
  CheckReport rep{"law_invariance:" + phi.label(), {}, 0.0};
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [f, g] = pairs[k];
    auto w = f.space()->weights();
    auto df = detail::distribution_steps(f, w, "check_law_invariance");
    auto dg = detail::distribution_steps(g, w, "check_law_invariance");
    bool same = df.size() == dg.size();
    for (std::size_t i = 0; same && i < df.size(); ++i)
      same = df[i].value == dg[i].value && std::abs(df[i].mass - dg[i].mass) <= tol;
    if (!same) throw std::invalid_argument("check_law_invariance: pair " + std::to_string(k) + " differs in law");
    record(rep, {{"pair", k}}, phi(f), phi(g), tol);
  }
  return rep;
}

struct RepresentationOptions {
  std::size_t atom_cap = 16;
  double tol = 1e-9;
  std::vector<double> r_grid = default_r_grid();
  ConcentrationOptions concentration{};
};

struct RepresentationReport {
  /// J_A = -ess.inf_A I over every subset A of the positive-weight atoms.
  CheckReport sets;
  /// phi(f) = ML_I(f) on the test fields.
  CheckReport fields;
  std::size_t sets_checked = 0;
  bool passed() const { return sets.passed() && fields.passed(); }
};

/// Checks that phi is the penalized maximum loss with penalty I, through the
/// concentration identity on the full power set and through direct
/// evaluation on test fields.
inline RepresentationReport check_representation(const RiskMeasure& phi, const Penalty& penalty,
                                                 const std::vector<Field>& test_fields,
                                                 const RepresentationOptions& opt = {}) {
  require_same_space(phi.space(), penalty.space(), "check_representation");
  const auto& space = phi.space();
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < space->size(); ++i)
    if (space->positive(i)) pos.push_back(i);
  if (pos.size() > opt.atom_cap)
    throw std::invalid_argument("check_representation: " + std::to_string(pos.size()) +
                                " positive atoms exceed the power-set cap of " + std::to_string(opt.atom_cap));

  RepresentationReport rep{{"representation_sets:" + phi.label(), {}, 0.0},
                           {"representation_fields:" + phi.label(), {}, 0.0}, 0};
  const std::size_t count = std::size_t{1} << pos.size();
  for (std::size_t bits = 0; bits < count; ++bits) {
    std::vector<bool> mask(space->size(), false);
    for (std::size_t k = 0; k < pos.size(); ++k)
      if (bits >> k & 1U) mask[pos[k]] = true;
    MeasurableSet a(space, mask);
    auto j = concentration(phi, a, opt.r_grid, opt.concentration);
    nlohmann::json in = nlohmann::json::array();
    for (std::size_t k = 0; k < pos.size(); ++k)
      if (bits >> k & 1U) in.push_back(pos[k]);
    record(rep.sets, {{"set", in}, {"converged", j.converged}}, j.value, -ess_inf(penalty.field(), a), opt.tol);
    ++rep.sets_checked;
  }
  for (std::size_t k = 0; k < test_fields.size(); ++k)
    record(rep.fields, {{"field", k}}, phi(test_fields[k]), ml_penalized(test_fields[k], penalty), opt.tol);
  return rep;
}

}  // namespace maxrisk
