#pragma once

// Finite weighted sample spaces, measurable sets, extended-real fields and
// essential extrema. "Almost surely" on a DiscreteSpace means "at every atom
// of strictly positive weight"; zero-weight atoms are kept so the null-set
// conventions stay observable.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxrisk/ext_real.hpp"
#include "maxrisk/numeric.hpp"

namespace maxrisk {

inline constexpr double kWeightSumTol = 1e-12;

class DiscreteSpace;
using SpacePtr = std::shared_ptr<const DiscreteSpace>;

class DiscreteSpace {
 public:
  /// `atoms` holds one point of R^d per atom. Weights within kWeightSumTol
  /// of a unit sum are renormalized; anything else is rejected.
  static SpacePtr make(std::vector<std::vector<double>> atoms, std::vector<double> weights) {
    return SpacePtr(new DiscreteSpace(std::move(atoms), std::move(weights)));
  }

  /// Uniform weights on the given one-dimensional points.
  static SpacePtr uniform_1d(std::span<const double> points) {
    std::vector<std::vector<double>> atoms;
    atoms.reserve(points.size());
    for (double p : points) atoms.push_back({p});
    std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
    return make(std::move(atoms), std::move(w));
  }

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> atom(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  bool positive(std::size_t i) const { return weights_[i] > 0.0; }

  friend bool operator==(const DiscreteSpace& a, const DiscreteSpace& b) {
    return a.dim_ == b.dim_ && a.coords_ == b.coords_ && a.weights_ == b.weights_;
  }

 private:
  DiscreteSpace(std::vector<std::vector<double>> atoms, std::vector<double> weights) {
    if (atoms.empty()) throw std::invalid_argument("DiscreteSpace: no atoms");
    if (atoms.size() != weights.size())
      throw std::invalid_argument("DiscreteSpace: atom and weight counts differ");
    dim_ = atoms.front().size();
    if (dim_ == 0) throw std::invalid_argument("DiscreteSpace: atoms must have dimension >= 1");
    double sum = 0.0;
    bool any_positive = false;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("DiscreteSpace: weights must be finite and >= 0");
      sum += w;
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw std::invalid_argument("DiscreteSpace: all weights are zero");
    if (std::abs(sum - 1.0) > kWeightSumTol)
      throw std::invalid_argument("DiscreteSpace: weights sum to " + std::to_string(sum) + ", not 1");
    for (double& w : weights) w /= sum;

    coords_.reserve(atoms.size() * dim_);
    for (const auto& a : atoms) {
      if (a.size() != dim_) throw std::invalid_argument("DiscreteSpace: mixed atom dimensions");
      coords_.insert(coords_.end(), a.begin(), a.end());
    }
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return atoms[i] < atoms[j]; });
    for (std::size_t k = 1; k < order.size(); ++k)
      if (atoms[order[k]] == atoms[order[k - 1]])
        throw std::invalid_argument("DiscreteSpace: duplicate atom");
    weights_ = std::move(weights);
  }

  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

inline void require_same_space(const SpacePtr& a, const SpacePtr& b, const char* where) {
  if (a == b) return;
  if (!a || !b || !(*a == *b))
    throw std::invalid_argument(std::string(where) + ": arguments live on different spaces");
}

/// A subset of atoms, encoded as a membership mask.
class MeasurableSet {
 public:
  MeasurableSet(SpacePtr space, std::vector<bool> mask) : space_(std::move(space)), mask_(std::move(mask)) {
    if (!space_) throw std::invalid_argument("MeasurableSet: null space");
    if (mask_.size() != space_->size())
      throw std::invalid_argument("MeasurableSet: mask length differs from atom count");
  }
  static MeasurableSet all(SpacePtr s) {
    auto n = s->size();
    return {std::move(s), std::vector<bool>(n, true)};
  }
  static MeasurableSet none(SpacePtr s) {
    auto n = s->size();
    return {std::move(s), std::vector<bool>(n, false)};
  }
  static MeasurableSet singleton(SpacePtr s, std::size_t i) {
    auto m = none(std::move(s));
    m.mask_.at(i) = true;
    return m;
  }
  template <class Pred>
  static MeasurableSet where(SpacePtr s, Pred&& pred) {
    std::vector<bool> mask(s->size());
    for (std::size_t i = 0; i < s->size(); ++i) mask[i] = pred(s->atom(i));
    return {std::move(s), std::move(mask)};
  }

  const SpacePtr& space() const { return space_; }
  const std::vector<bool>& mask() const { return mask_; }
  bool contains(std::size_t i) const { return mask_[i]; }
  std::size_t size() const { return mask_.size(); }

  double measure() const {
    double m = 0.0;
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i]) m += space_->weight(i);
    return m;
  }
  MeasurableSet complement() const {
    std::vector<bool> m(mask_.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = !mask_[i];
    return {space_, std::move(m)};
  }
  bool subset_of(const MeasurableSet& o) const {
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i] && !o.mask_[i]) return false;
    return true;
  }
  friend bool operator==(const MeasurableSet& a, const MeasurableSet& b) { return a.mask_ == b.mask_; }

 private:
  SpacePtr space_;
  std::vector<bool> mask_;
};

/// A measurable [-inf, inf]-valued function, one value per atom.
class Field {
 public:
  Field(SpacePtr space, std::vector<ExtReal> values) : space_(std::move(space)), values_(std::move(values)) {
    if (!space_) throw std::invalid_argument("Field: null space");
    if (values_.size() != space_->size())
      throw std::invalid_argument("Field: value count differs from atom count");
  }
  Field(SpacePtr space, std::span<const double> values)
      : Field(space, std::vector<ExtReal>(values.begin(), values.end())) {}

  static Field constant(SpacePtr s, ExtReal c) {
    auto n = s->size();
    return {std::move(s), std::vector<ExtReal>(n, c)};
  }
  template <class Fn>
  static Field from_function(SpacePtr s, Fn&& fn) {
    std::vector<ExtReal> v;
    v.reserve(s->size());
    for (std::size_t i = 0; i < s->size(); ++i) v.emplace_back(fn(s->atom(i)));
    return {std::move(s), std::move(v)};
  }
  /// r on A^c and 0 on A.
  static Field scaled_indicator_of_complement(const MeasurableSet& a, double r) {
    std::vector<ExtReal> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.contains(i) ? 0.0 : r;
    return {a.space(), std::move(v)};
  }

  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return values_.size(); }
  ExtReal operator[](std::size_t i) const { return values_[i]; }
  const std::vector<ExtReal>& values() const { return values_; }

  /// All values at positive-weight atoms are finite.
  bool essentially_bounded() const {
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (space_->positive(i) && !values_[i].is_finite()) return false;
    return true;
  }

  template <class Fn>
  Field map(Fn&& fn) const {
    std::vector<ExtReal> v;
    v.reserve(values_.size());
    for (auto x : values_) v.emplace_back(fn(x));
    return {space_, std::move(v)};
  }

  Field operator-() const {
    return map([](ExtReal x) { return -x; });
  }
  Field operator+(ExtReal c) const {
    return map([c](ExtReal x) { return x + c; });
  }
  Field operator*(ExtReal c) const {
    return map([c](ExtReal x) { return x * c; });
  }

  friend bool operator==(const Field& a, const Field& b) { return a.values_ == b.values_; }

 private:
  SpacePtr space_;
  std::vector<ExtReal> values_;
};

/// Pointwise binary operation; `op` sees (value_f, value_g, atom index).
template <class Op>
Field combine(const Field& f, const Field& g, Op&& op) {
  require_same_space(f.space(), g.space(), "combine");
  std::vector<ExtReal> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(f[i], g[i], i);
  return {f.space(), std::move(v)};
}

inline Field pointwise_max(const Field& f, const Field& g) {
  return combine(f, g, [](ExtReal a, ExtReal b, std::size_t) { return max(a, b); });
}

/// f - g at positive-weight atoms; zero-weight atoms get -inf when the
/// difference is undefined there, since their value is not observable.
inline Field difference(const Field& f, const Field& g) {
  return combine(f, g, [&](ExtReal a, ExtReal b, std::size_t i) {
    if (!f.space()->positive(i) && ((a.is_pos_inf() && b.is_pos_inf()) || (a.is_neg_inf() && b.is_neg_inf())))
      return ExtReal::neg_inf();
    return a - b;
  });
}

inline ExtReal ess_sup(const Field& f, const MeasurableSet& a) {
  require_same_space(f.space(), a.space(), "ess_sup");
  ExtReal m = ExtReal::neg_inf();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (a.contains(i) && f.space()->positive(i)) m = max(m, f[i]);
  return m;
}

inline ExtReal ess_inf(const Field& f, const MeasurableSet& a) {
  require_same_space(f.space(), a.space(), "ess_inf");
  ExtReal m = ExtReal::pos_inf();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (a.contains(i) && f.space()->positive(i)) m = min(m, f[i]);
  return m;
}

inline ExtReal ess_sup(const Field& f) { return ess_sup(f, MeasurableSet::all(f.space())); }
inline ExtReal ess_inf(const Field& f) { return ess_inf(f, MeasurableSet::all(f.space())); }

/// Essential supremum of a family of fields. Values at zero-weight atoms are
/// not determined by the definition; the pointwise supremum is used there too.
inline Field ess_sup_family(const std::vector<Field>& family, const SpacePtr& space) {
  Field out = Field::constant(space, ExtReal::neg_inf());
  for (const auto& f : family) out = pointwise_max(out, f);
  return out;
}

/// (integral f^n dmu)^(1/n) for each n in the grid, for f >= 0 essentially bounded.
inline std::vector<std::pair<long, double>> lp_norm_limit(const Field& f, std::span<const long> n_grid) {
  if (!f.essentially_bounded()) throw std::invalid_argument("lp_norm_limit: field is not essentially bounded");
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.space()->positive(i) && f[i] < 0.0)
      throw std::invalid_argument("lp_norm_limit: field has negative values");
  std::vector<std::pair<long, double>> out;
  std::vector<double> terms;
  for (long n : n_grid) {
    if (n < 1) throw std::invalid_argument("lp_norm_limit: exponents must be >= 1");
    terms.clear();
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f.space()->positive(i)) continue;
      terms.push_back(static_cast<double>(n) * std::log(f[i].value()) + std::log(f.space()->weight(i)));
    }
    out.emplace_back(n, std::exp(log_sum_exp(terms) / static_cast<double>(n)));
  }
  return out;
}

// --- JSON ---------------------------------------------------------------

inline nlohmann::json ext_real_to_json(ExtReal x) {
  if (x.is_pos_inf()) return "inf";
  if (x.is_neg_inf()) return "-inf";
  return x.value();
}

inline ExtReal ext_real_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_ext_real(j.get<std::string>());
  if (j.is_number()) return ExtReal(j.get<double>());
  throw std::invalid_argument("expected a number or an \"inf\"/\"-inf\" sentinel");
}

inline nlohmann::json space_to_json(const DiscreteSpace& s) {
  nlohmann::json atoms = nlohmann::json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto a = s.atom(i);
    atoms.push_back(std::vector<double>(a.begin(), a.end()));
  }
  return {{"atoms", atoms}, {"weights", std::vector<double>(s.weights().begin(), s.weights().end())}};
}

inline SpacePtr space_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("space: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "atoms" && it.key() != "weights")
      throw std::invalid_argument("space: unknown key '" + it.key() + "'");
  std::vector<std::vector<double>> atoms;
  for (const auto& a : j.at("atoms")) {
    if (a.is_number())
      atoms.push_back({a.get<double>()});
    else
      atoms.push_back(a.get<std::vector<double>>());
  }
  return DiscreteSpace::make(std::move(atoms), j.at("weights").get<std::vector<double>>());
}

inline nlohmann::json field_to_json(const Field& f) {
  nlohmann::json vals = nlohmann::json::array();
  for (auto v : f.values()) vals.push_back(ext_real_to_json(v));
  return {{"values", vals}};
}

inline Field field_from_json(const nlohmann::json& j, SpacePtr space) {
  if (!j.is_object() || !j.contains("values")) throw std::invalid_argument("field: expected {\"values\": [...]}");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "values") throw std::invalid_argument("field: unknown key '" + it.key() + "'");
  std::vector<ExtReal> v;
  for (const auto& x : j.at("values")) v.push_back(ext_real_from_json(x));
  return {std::move(space), std::move(v)};
}

}  // namespace maxrisk
