#pragma once

// Config-driven experiments: each kind parses and validates its JSON config
// into a runnable closure that returns a verdict, a details object and CSV
// evidence tables.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxrisk/cramer.hpp"
#include "maxrisk/distortion.hpp"
#include "maxrisk/io/config.hpp"
#include "maxrisk/largedev.hpp"
#include "maxrisk/premium.hpp"
#include "maxrisk/riskcore.hpp"
#include "maxrisk/space.hpp"

namespace maxrisk {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct RunResult {
  bool pass = false;
  nlohmann::json details = nlohmann::json::object();
  /// (suffix, table); written as <name>.<suffix>.csv.
  std::vector<std::pair<std::string, io::CsvTable>> tables;
};

struct Experiment {
  nlohmann::json config;
  std::string name;
  std::string kind;
  std::string description;
  /// Which worked example of the theory the experiment reproduces.
  std::string anchor;
  std::string output_dir = ".";
  /// Expected outcome of the check; the verdict passes when it is observed.
  bool expect_pass = true;
  std::function<RunResult()> run;
};

namespace exp_detail {

using io::check_keys;
using io::ConfigError;
using io::format_double;
using io::get_number;
using io::get_string;
using nlohmann::json;

inline json ext(ExtReal x) { return ext_real_to_json(x); }
inline json opt_ext(const std::optional<ExtReal>& x) { return x ? ext(*x) : json(nullptr); }

inline json limit_json(const LimitEstimate& l) {
  return {{"estimate", opt_ext(l.estimate)},
          {"status", to_string(l.status)},
          {"even_estimate", opt_ext(l.even_estimate)},
          {"odd_estimate", opt_ext(l.odd_estimate)},
          {"residual", l.residual}};
}

// --- measure families --------------------------------------------------

struct Family {
  std::string name;
  std::size_t d = 1;
  double m = 0.0;
  double var = 1.0;
  double q = 0.5;

  std::unique_ptr<MeasureSequence> sequence() const {
    if (name == "pareto") return std::make_unique<ParetoFirstKind>(d);
    if (name == "gaussian_mean") return std::make_unique<GaussianSampleMean>(m, var);
    return std::make_unique<BernoulliSampleMean>(q);
  }
  /// Closed-form rate candidate.
  double rate(std::span<const double> x) const {
    if (name == "pareto") {
      double s = 0.0;
      for (double xi : x) {
        if (xi < 1.0) return kInf;
        s += xi;
      }
      return std::log(s - static_cast<double>(d) + 1.0);
    }
    if (name == "gaussian_mean") return (x[0] - m) * (x[0] - m) / (2.0 * var);
    const double y = x[0];
    if (y < 0.0 || y > 1.0) return kInf;
    auto term = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
    return term(y, q) + term(1.0 - y, 1.0 - q);
  }
  double center() const { return name == "pareto" ? 1.0 : name == "gaussian_mean" ? m : q; }
};

inline Family parse_family(const json& j) {
  const std::string where = "family";
  if (!j.is_object()) throw ConfigError("family: expected an object");
  Family f;
  f.name = get_string(j, "family", where);
  if (f.name == "pareto") {
    check_keys(j, {"family"}, {"d"}, where);
    const double d = get_number(j, "d", 1.0, where);
    if (d < 1 || d > 3 || d != std::floor(d)) throw ConfigError("family: pareto d must be 1, 2 or 3");
    f.d = static_cast<std::size_t>(d);
  } else if (f.name == "gaussian_mean") {
    check_keys(j, {"family", "m", "var"}, {}, where);
    f.m = get_number(j, "m", where);
    f.var = get_number(j, "var", where);
    if (!(f.var > 0.0)) throw ConfigError("family: var must be > 0");
  } else if (f.name == "bernoulli_half") {
    check_keys(j, {"family"}, {}, where);
  } else {
    throw ConfigError("family: unknown family '" + f.name + "' (pareto, gaussian_mean, bernoulli_half)");
  }
  return f;
}

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.1;
};

inline GridSpec parse_grid(const json& j) {
  check_keys(j, {"lo", "hi", "step"}, {}, "grid");
  GridSpec g{get_number(j, "lo", "grid"), get_number(j, "hi", "grid"), get_number(j, "step", "grid")};
  if (!(g.hi > g.lo) || !(g.step > 0.0)) throw ConfigError("grid: need lo < hi and step > 0");
  const double cells = (g.hi - g.lo) / g.step;
  if (std::abs(cells - std::round(cells)) > 1e-9 * cells) throw ConfigError("grid: step must divide hi - lo");
  if (cells > 1e6) throw ConfigError("grid: too many cells");
  return g;
}

/// Grid over the support of the family: tails above for Pareto, on both
/// sides for Gaussian means, none for Bernoulli means.
inline AtomGrid make_grid(const Family& f, const GridSpec& g) {
  if (f.name == "pareto") {
    if (g.lo != 1.0) throw ConfigError("grid: pareto grids start at 1");
    std::vector<double> e;
    const long count = std::lround((g.hi - g.lo) / g.step);
    for (long i = 0; i <= count; ++i) e.push_back(g.lo + static_cast<double>(i) * g.step);
    e.push_back(kInf);
    return AtomGrid::product(std::vector<std::vector<double>>(f.d, e));
  }
  if (f.name == "gaussian_mean") return AtomGrid::uniform_1d(g.lo, g.hi, g.step, true, true);
  if (g.lo < 0.0 || g.hi > 1.0) throw ConfigError("grid: bernoulli grids lie inside [0, 1]");
  return AtomGrid::uniform_1d(g.lo, g.hi, g.step, false, false);
}

/// A_k: [1,k]^d for Pareto, [c-k, c+k] around the mean otherwise.
inline Box exhaustion_box(const Family& f, double k) {
  if (f.name == "pareto") return Box(f.d, Interval::closed(1.0, k));
  return Box{Interval::closed(f.center() - k, f.center() + k)};
}

inline std::vector<long> n_grid_or_default(const json& cfg, const std::string& where) {
  return cfg.contains("n_grid") ? io::get_n_grid(cfg, "n_grid", where) : default_n_grid();
}

inline EvalMode parse_mode(const json& cfg, const std::string& where) {
  const std::string m = get_string(cfg, "mode", std::string("quadrature"), where);
  if (m == "quadrature") return EvalMode::quadrature;
  if (m == "atom_grid") return EvalMode::atom_grid;
  throw ConfigError(where + ": mode must be 'quadrature' or 'atom_grid'");
}

// --- test functions ----------------------------------------------------

inline TestFunction parse_test_function(const json& j) {
  const std::string where = "function";
  if (!j.is_object()) throw ConfigError("function: expected an object");
  const std::string type = get_string(j, "type", where);
  if (type == "neg_log") {
    check_keys(j, {"type", "a"}, {}, where);
    const double a = get_number(j, "a", where);
    return {"neg_log(a=" + format_double(a) + ")",
            [a](double x) { return x > 0.0 ? -a * std::log(x) : kInf; }, {}};
  }
  if (type == "linear") {
    check_keys(j, {"type"}, {"lo", "hi"}, where);
    const double lo = get_number(j, "lo", -kInf, where);
    const double hi = get_number(j, "hi", kInf, where);
    if (!(lo < hi)) throw ConfigError("function: need lo < hi");
    std::vector<double> bp;
    if (std::isfinite(lo)) bp.push_back(lo);
    if (std::isfinite(hi)) bp.push_back(hi);
    return {"linear(" + format_double(lo) + "," + format_double(hi) + ")",
            [lo, hi](double x) { return std::clamp(x, lo, hi); }, bp};
  }
  if (type == "constant") {
    check_keys(j, {"type", "c"}, {}, where);
    const double c = get_number(j, "c", where);
    return {"constant(" + format_double(c) + ")", [c](double) { return c; }, {}};
  }
  throw ConfigError("function: unknown type '" + type + "' (neg_log, linear, constant)");
}

// --- ldp-check -------------------------------------------------------------

inline std::function<RunResult()> parse_ldp(const json& cfg) {
  const std::string w = "ldp-check";
  check_keys(cfg, {"name", "kind", "family", "grid", "exhaustion"},
             {"description", "anchor", "output_dir", "expect", "mode", "n_grid", "uniform_tol", "tail_threshold", "limit_tol",
              "probes"},
             w);
  const Family fam = parse_family(cfg.at("family"));
  const GridSpec gs = parse_grid(cfg.at("grid"));
  check_keys(cfg.at("exhaustion"), {"k"}, {}, "exhaustion");
  const auto ks = io::get_numbers(cfg.at("exhaustion"), "k", "exhaustion");
  if (ks.empty()) throw ConfigError("exhaustion: k must be non-empty");
  const auto n_grid = n_grid_or_default(cfg, w);
  if (n_grid.size() < 6) throw ConfigError(w + ": n_grid needs at least 6 entries");
  LdpOptions opt;
  opt.mode = parse_mode(cfg, w);
  opt.uniform_tol = get_number(cfg, "uniform_tol", 1e-3, w);
  opt.tail_threshold = get_number(cfg, "tail_threshold", -2.0, w);
  opt.limit.tol = get_number(cfg, "limit_tol", 1e-4, w);
  std::vector<double> probes;
  if (cfg.contains("probes")) {
    probes = io::get_numbers(cfg, "probes", w);
    if (fam.d != 1) throw ConfigError(w + ": probes are one-dimensional points");
  }

  return [=]() {
    auto seq = fam.sequence();
    const AtomGrid grid = make_grid(fam, gs);
    Field rate = Field::from_function(grid.space, [&](std::span<const double> x) { return fam.rate(x); });
    std::vector<MeasurableSet> exhaustion;
    for (double k : ks) exhaustion.push_back(grid.cells_inside(exhaustion_box(fam, k)));
    auto rep = sharp_ldp_check(*seq, grid, rate, exhaustion, n_grid, opt);

    RunResult out;
    io::CsvTable tail({"k", "n", "value", "residual"}), uniform({"k", "n", "value", "residual"});
    for (const auto& r : rep.tail_decay.evidence)
      tail.add({format_double(ks[r.k]), std::to_string(r.n), format_double(r.value), format_double(r.residual)});
    for (const auto& r : rep.uniform_convergence.evidence)
      uniform.add({format_double(ks[r.k]), std::to_string(r.n), format_double(r.value), format_double(r.residual)});
    json limits = json::array();
    for (std::size_t i = 0; i < rep.tail_limits.size(); ++i) {
      auto l = limit_json(rep.tail_limits[i]);
      l["k"] = ks[i];
      limits.push_back(l);
    }
    out.details = {{"coverage", {{"pass", rep.coverage.pass}, {"note", rep.coverage.note}}},
                   {"tail_decay", {{"pass", rep.tail_decay.pass}, {"note", rep.tail_decay.note}, {"limits", limits}}},
                   {"uniform_convergence",
                    {{"pass", rep.uniform_convergence.pass}, {"note", rep.uniform_convergence.note}}},
                   {"overall", rep.overall()}};
    if (!probes.empty()) {
      io::CsvTable probe({"point", "n", "value"});
      json pj = json::array();
      for (double x : probes) {
        Region region{Box{Interval::point(x)}};
        auto cs = concentration_sequence(*seq, region, n_grid);
        for (const auto& [n, v] : cs) probe.add({format_double(x), std::to_string(n), format_double(v)});
        auto l = limit_json(limit_estimate(cs, opt.limit));
        l["point"] = x;
        pj.push_back(l);
      }
      out.details["probes"] = pj;
      out.tables.emplace_back("probe", std::move(probe));
    }
    out.pass = rep.overall();
    out.tables.emplace(out.tables.begin(), "uniform", std::move(uniform));
    out.tables.emplace(out.tables.begin(), "tail", std::move(tail));
    return out;
  };
}

// --- laplace -------------------------------------------------------------

inline json laplace_json(const LaplaceReport& rep, io::CsvTable& values) {
  json entries = json::array();
  for (const auto& e : rep.entries) {
    for (const auto& [n, v] : e.values) values.add({e.label, std::to_string(n), format_double(v)});
    json j = {{"function", e.label}, {"skipped", e.skipped}};
    if (e.skipped) {
      j["note"] = e.note;
    } else {
      j["limit"] = limit_json(e.limit);
      j["target"] = ext(e.target);
      j["gap"] = ext(e.gap);
      j["pass"] = e.pass;
    }
    entries.push_back(j);
  }
  return entries;
}

inline std::function<RunResult()> parse_laplace(const json& cfg) {
  const std::string w = "laplace";
  check_keys(cfg, {"name", "kind", "family", "grid", "functions"},
             {"description", "anchor", "output_dir", "expect", "mode", "n_grid", "tol", "limit_tol"}, w);
  const Family fam = parse_family(cfg.at("family"));
  if (fam.d != 1) throw ConfigError(w + ": one-dimensional families only");
  const GridSpec gs = parse_grid(cfg.at("grid"));
  if (!cfg.at("functions").is_array() || cfg.at("functions").empty())
    throw ConfigError(w + ": functions must be a non-empty array");
  std::vector<TestFunction> fns;
  for (const auto& f : cfg.at("functions")) fns.push_back(parse_test_function(f));
  const auto n_grid = n_grid_or_default(cfg, w);
  if (n_grid.size() < 6) throw ConfigError(w + ": n_grid needs at least 6 entries");
  const EvalMode mode = parse_mode(cfg, w);
  LaplaceOptions opt;
  opt.tol = get_number(cfg, "tol", 1e-6, w);
  opt.limit.tol = get_number(cfg, "limit_tol", 1e-6, w);

  return [=]() {
    auto seq = fam.sequence();
    const AtomGrid grid = make_grid(fam, gs);
    Field rate = Field::from_function(grid.space, [&](std::span<const double> x) { return fam.rate(x); });
    LaplaceReport rep;
    if (mode == EvalMode::quadrature) {
      rep = laplace_check_quadrature(*seq, grid, rate, fns, n_grid, opt);
    } else {
      std::vector<std::pair<std::string, Field>> fields;
      for (const auto& tf : fns)
        fields.emplace_back(tf.label,
                            Field::from_function(grid.space, [&](std::span<const double> x) { return tf.fn(x[0]); }));
      rep = laplace_check(*seq, grid, rate, fields, n_grid, opt);
    }
    RunResult out;
    io::CsvTable values({"function", "n", "value"});
    out.details = {{"entries", laplace_json(rep, values)}, {"overall", rep.passed()}};
    out.pass = rep.passed();
    out.tables.emplace_back("values", std::move(values));
    return out;
  };
}

// --- varadhan --------------------------------------------------------------

inline std::function<RunResult()> parse_varadhan(const json& cfg) {
  const std::string w = "varadhan";
  check_keys(cfg, {"name", "kind", "family", "function"},
             {"description", "anchor", "output_dir", "expect", "n_grid", "reference", "tol", "limit_tol"}, w);
  const Family fam = parse_family(cfg.at("family"));
  if (fam.d != 1) throw ConfigError(w + ": one-dimensional families only");
  const TestFunction tf = parse_test_function(cfg.at("function"));
  const auto n_grid = n_grid_or_default(cfg, w);
  std::optional<double> reference;
  if (cfg.contains("reference")) reference = get_number(cfg, "reference", w);
  const double tol = get_number(cfg, "tol", 1e-6, w);
  LimitOptions lopt;
  lopt.tol = get_number(cfg, "limit_tol", 1e-6, w);

  return [=]() {
    auto seq = fam.sequence();
    RunResult out;
    io::CsvTable values({"n", "value", "rel_error"});
    std::vector<std::pair<long, double>> v;
    bool finite = true;
    for (long n : n_grid) {
      auto q = varadhan_value_quadrature(*seq, tf.fn, n, tf.breakpoints);
      v.emplace_back(n, q.value);
      finite = finite && std::isfinite(q.value);
      values.add({std::to_string(n), format_double(q.value), format_double(q.rel_error)});
    }
    out.details = {{"function", tf.label}};
    out.pass = finite;
    if (v.size() >= 6) {
      auto l = limit_estimate(v, lopt);
      out.details["limit"] = limit_json(l);
      if (reference) {
        double gap = l.estimate ? residual(*l.estimate, *reference) : kInf;
        out.details["reference"] = *reference;
        out.details["gap"] = ext(gap);
        out.pass = out.pass && l.status == LimitStatus::converged && gap <= tol;
      }
    } else if (reference) {
      throw ConfigError(w + ": a reference needs at least 6 n values");
    }
    out.tables.emplace_back("values", std::move(values));
    return out;
  };
}

// --- avar-limit ------------------------------------------------------------

inline SpacePtr parse_points(const json& j, const std::string& where) {
  if (j.contains("space")) return space_from_json(j.at("space"));
  if (!j.contains("uniform")) throw ConfigError(where + ": need 'space' or 'uniform'");
  const auto& u = j.at("uniform");
  check_keys(u, {"lo", "hi", "count"}, {}, "uniform");
  const double lo = get_number(u, "lo", "uniform"), hi = get_number(u, "hi", "uniform");
  const double c = get_number(u, "count", "uniform");
  if (c < 2 || c != std::floor(c) || !(hi > lo)) throw ConfigError("uniform: need count >= 2 and lo < hi");
  const long count = static_cast<long>(c);
  std::vector<double> pts;
  for (long i = 0; i < count; ++i)
    pts.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return DiscreteSpace::uniform_1d(pts);
}

inline std::function<RunResult()> parse_avar(const json& cfg) {
  const std::string w = "avar-limit";
  check_keys(cfg, {"name", "kind"}, {"description", "anchor", "output_dir", "expect", "space", "uniform", "field", "n_grid"}, w);
  if (cfg.contains("space") == cfg.contains("uniform")) throw ConfigError(w + ": give exactly one of space, uniform");
  SpacePtr space = parse_points(cfg, w);
  std::optional<Field> field;
  if (cfg.contains("field")) field = field_from_json(cfg.at("field"), space);
  else if (space->dim() != 1) throw ConfigError(w + ": the identity field needs a 1-D space");
  std::vector<long> n_grid;
  if (cfg.contains("n_grid")) {
    n_grid = io::get_n_grid(cfg, "n_grid", w);
  } else {
    for (long n = 2; n <= 256; ++n) n_grid.push_back(n);
  }

  return [=]() {
    const Field f = field ? *field : Field::from_function(space, [](std::span<const double> x) { return x[0]; });
    if (!f.essentially_bounded()) throw std::invalid_argument("avar-limit: field must be essentially bounded");
    const ExtReal top = ess_sup(f);
    io::CsvTable path({"n", "alpha", "avar"});
    bool monotone = true;
    double prev = -kInf;
    double last = 0.0;
    for (long n : n_grid) {
      const double alpha = 1.0 - 1.0 / static_cast<double>(n);
      last = avar(f, space->weights(), alpha);
      monotone = monotone && last >= prev;
      prev = last;
      path.add({std::to_string(n), format_double(alpha), format_double(last)});
    }
    RunResult out;
    out.details = {{"ess_sup", ext(top)}, {"final", last}, {"nondecreasing", monotone},
                   {"final_equals_ess_sup", ExtReal(last) == top}};
    out.pass = monotone && ExtReal(last) == top;
    out.tables.emplace_back("path", std::move(path));
    return out;
  };
}

// --- premium-path ----------------------------------------------------------

inline ClaimModel parse_claim(const json& j) {
  const std::string where = "claim";
  const std::string c = get_string(j, "claim", where);
  if (c == "gaussian") {
    check_keys(j, {"claim", "m", "var"}, {}, where);
    const double var = get_number(j, "var", where);
    if (!(var > 0.0)) throw ConfigError("claim: var must be > 0");
    return ClaimModel::gaussian(get_number(j, "m", where), var);
  }
  if (c == "discrete") {
    check_keys(j, {"claim", "values", "weights"}, {}, where);
    return ClaimModel::discrete(io::get_numbers(j, "values", where), io::get_numbers(j, "weights", where));
  }
  throw ConfigError("claim: unknown claim '" + c + "' (gaussian, discrete)");
}

inline Distortion parse_distortion(const json& j) {
  const std::string where = "distortion";
  const std::string t = get_string(j, "type", where);
  if (t == "identity") {
    check_keys(j, {"type"}, {}, where);
    return Distortion::identity();
  }
  if (t == "power") {
    check_keys(j, {"type", "p"}, {}, where);
    return Distortion::power(get_number(j, "p", where));
  }
  if (t == "capped") {
    check_keys(j, {"type", "c"}, {}, where);
    return Distortion::capped(get_number(j, "c", where));
  }
  if (t == "table") {
    check_keys(j, {"type", "knots"}, {}, where);
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : j.at("knots")) {
      if (!k.is_array() || k.size() != 2) throw ConfigError("distortion: knots are [x, g(x)] pairs");
      knots.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    return Distortion::table(std::move(knots));
  }
  throw ConfigError("distortion: unknown type '" + t + "' (identity, power, capped, table)");
}

inline std::function<RunResult()> parse_premium(const json& cfg) {
  const std::string w = "premium-path";
  check_keys(cfg, {"name", "kind", "claim", "distortion", "gamma"},
             {"description", "anchor", "output_dir", "expect", "n_grid", "tol", "growth_t", "convolution_cap"}, w);
  const ClaimModel claim = parse_claim(cfg.at("claim"));
  const Distortion g = parse_distortion(cfg.at("distortion"));
  const double gamma = get_number(cfg, "gamma", w);
  if (!(gamma > 0.0)) throw ConfigError(w + ": gamma must be > 0");
  const std::vector<long> n_grid =
      cfg.contains("n_grid") ? io::get_n_grid(cfg, "n_grid", w) : std::vector<long>{1, 2, 5, 10, 20, 50, 100, 200};
  const double tol = get_number(cfg, "tol", 0.05, w);
  PremiumOptions popt;
  popt.growth_t = get_number(cfg, "growth_t", 1.1, w);
  const double cap = get_number(cfg, "convolution_cap", 2e6, w);
  if (!(cap >= 1.0)) throw ConfigError(w + ": convolution_cap must be >= 1");
  popt.convolution_cap = static_cast<std::size_t>(cap);

  return [=]() {
    auto order = vanishing_order(g);
    auto path = pooled_premium_path(claim, g, gamma, n_grid, popt);
    const double reference = iid_limit_premium(claim.log_mgf(), order.p, gamma);
    io::CsvTable t({"n", "pi_n", "rel_error", "truncation_bound", "growth"});
    for (const auto& r : path.rows)
      t.add({std::to_string(r.n), format_double(r.pi), format_double(r.rel_error), format_double(r.truncation_bound),
             format_double(r.growth)});
    const long n_max = path.rows.back().n;
    bool monotone = true;
    for (std::size_t i = 1; i < path.rows.size(); ++i)
      if (path.rows[i - 1].n * 10 >= n_max && path.rows[i].pi > path.rows[i - 1].pi) monotone = false;
    const double final_gap = std::abs(path.rows.back().pi - reference);
    RunResult out;
    out.details = {{"vanishing_order", {{"p", order.p}, {"limit", order.limit}}},
                   {"limit_candidate", path.limit_candidate},
                   {"reference_limit", reference},
                   {"gap", std::abs(path.limit_candidate - reference)},
                   {"final_pi", path.rows.back().pi},
                   {"final_gap", final_gap},
                   {"nonincreasing_last_decade", monotone},
                   {"growth", {{"t", path.growth_t}, {"finite", path.growth_finite}}}};
    if (path.limit) out.details["limit"] = limit_json(*path.limit);
    if (claim.is_gaussian()) {
      out.details["asserted"] = true;
      out.pass = final_gap < tol && monotone && path.growth_finite;
    } else {
      // Lattice sums fail the sharp LDP; the trend is reported, not asserted.
      out.details["asserted"] = false;
      out.pass = path.growth_finite;
    }
    out.tables.emplace_back("path", std::move(t));
    return out;
  };
}

// --- riskrep-check -------------------------------------------------------

inline std::function<RunResult()> parse_riskrep(const json& cfg) {
  const std::string w = "riskrep-check";
  check_keys(cfg, {"name", "kind", "space", "functional"},
             {"description", "anchor", "output_dir", "expect", "fields", "tol"}, w);
  SpacePtr space = space_from_json(cfg.at("space"));
  const auto& fj = cfg.at("functional");
  const std::string type = get_string(fj, "type", "functional");
  std::optional<Field> given;
  double alpha = 0.0;
  if (type == "ml_penalized") {
    check_keys(fj, {"type", "penalty"}, {}, "functional");
    given = field_from_json({{"values", fj.at("penalty")}}, space);
    Penalty check(*given);
  } else if (type == "avar") {
    check_keys(fj, {"type", "alpha"}, {}, "functional");
    alpha = get_number(fj, "alpha", "functional");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("functional: alpha must lie in [0,1)");
  } else if (type == "ml" || type == "expectation") {
    check_keys(fj, {"type"}, {}, "functional");
  } else {
    throw ConfigError("functional: unknown type '" + type + "' (ml, ml_penalized, expectation, avar)");
  }
  std::vector<Field> fields;
  if (cfg.contains("fields")) {
    if (!cfg.at("fields").is_array()) throw ConfigError(w + ": fields must be an array");
    for (const auto& f : cfg.at("fields")) fields.push_back(field_from_json({{"values", f}}, space));
  }
  RepresentationOptions ropt;
  ropt.tol = get_number(cfg, "tol", 1e-9, w);

  return [=]() {
    RiskMeasure phi = type == "ml_penalized" ? make_ml_penalized(Penalty(*given))
                      : type == "ml"         ? make_ml(space)
                      : type == "avar"       ? make_avar(space, alpha)
                                             : make_expectation(space);
    auto table = singleton_concentrations(phi, ropt.r_grid, ropt.concentration);
    Field i_min = minimal_penalty(table);
    RunResult out;
    io::CsvTable pt({"atom", "weight", "penalty", "i_min"});
    bool recovered = true;
    for (std::size_t i = 0; i < space->size(); ++i) {
      std::string coords;
      for (double c : space->atom(i)) coords += (coords.empty() ? "" : " ") + format_double(c);
      pt.add({coords, format_double(space->weight(i)), given ? format_double((*given)[i].value()) : "",
              format_double(i_min[i].value())});
      if (given && space->positive(i) && residual((*given)[i], i_min[i]) > ropt.tol) recovered = false;
    }
    out.details = {{"functional", phi.label()}};
    if (given) out.details["penalty_recovered"] = recovered;
    const ExtReal floor = ess_inf(i_min);
    if (floor != ExtReal(0.0)) {
      out.details["representable"] = false;
      out.details["note"] = "minimal penalty has essential infimum " +
                            (floor.is_finite() ? format_double(floor.value()) : std::string(floor.is_pos_inf() ? "inf" : "-inf")) +
                            ", not 0: no penalized maximum loss matches";
      out.pass = false;
    } else {
      auto rep = check_representation(phi, Penalty(i_min), fields, ropt);
      out.details["representable"] = rep.passed();
      out.details["sets_checked"] = rep.sets_checked;
      out.details["sets"] = rep.sets.to_json();
      out.details["fields"] = rep.fields.to_json();
      out.pass = rep.passed() && recovered;
    }
    out.tables.emplace_back("penalty", std::move(pt));
    return out;
  };
}

// --- legendre ----------------------------------------------------------------

struct LambdaSpec {
  LogMgf lambda;
  std::function<double(double)> closed_form;
};

inline LambdaSpec parse_lambda(const json& j) {
  const std::string where = "lambda";
  const std::string fam = get_string(j, "family", where);
  if (fam == "gaussian") {
    check_keys(j, {"family", "m", "var"}, {}, where);
    const double m = get_number(j, "m", where), var = get_number(j, "var", where);
    if (!(var > 0.0)) throw ConfigError("lambda: var must be > 0");
    return {LogMgf::gaussian(m, var), [m, var](double x) { return (x - m) * (x - m) / (2.0 * var); }};
  }
  if (fam == "bernoulli") {
    check_keys(j, {"family", "q"}, {}, where);
    const double q = get_number(j, "q", where);
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("lambda: q must lie in (0,1)");
    return {LogMgf::bernoulli(q), [q](double x) {
              if (x < 0.0 || x > 1.0) return kInf;
              auto term = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
              return term(x, q) + term(1.0 - x, 1.0 - q);
            }};
  }
  if (fam == "pointmass") {
    check_keys(j, {"family", "c"}, {}, where);
    const double c = get_number(j, "c", where);
    return {LogMgf::point_mass(c), [c](double x) { return x == c ? 0.0 : kInf; }};
  }
  if (fam == "discrete") {
    check_keys(j, {"family", "values", "weights"}, {}, where);
    return {LogMgf::discrete(io::get_numbers(j, "values", where), io::get_numbers(j, "weights", where)), nullptr};
  }
  throw ConfigError("lambda: unknown family '" + fam + "' (gaussian, bernoulli, pointmass, discrete)");
}

inline std::function<RunResult()> parse_legendre(const json& cfg) {
  const std::string w = "legendre";
  check_keys(cfg, {"name", "kind", "lambda", "x_grid"}, {"description", "anchor", "output_dir", "expect", "reference", "tol"}, w);
  const LambdaSpec spec = parse_lambda(cfg.at("lambda"));
  check_keys(cfg.at("x_grid"), {"lo", "hi", "count"}, {}, "x_grid");
  const double lo = get_number(cfg.at("x_grid"), "lo", "x_grid"), hi = get_number(cfg.at("x_grid"), "hi", "x_grid");
  const double count = get_number(cfg.at("x_grid"), "count", "x_grid");
  if (!(hi >= lo) || count < 1 || count != std::floor(count) || count > 1e6)
    throw ConfigError("x_grid: need lo <= hi and a positive integer count");
  const std::string reference = get_string(cfg, "reference", std::string("none"), w);
  if (reference != "none" && reference != "closed_form") throw ConfigError(w + ": reference must be none or closed_form");
  if (reference == "closed_form" && !spec.closed_form) throw ConfigError(w + ": no closed form for this family");
  const double tol = get_number(cfg, "tol", 1e-6, w);

  return [=]() {
    io::CsvTable t({"x", "value", "argmax", "status", "certificate_gap"});
    const long m = static_cast<long>(count);
    double worst = 0.0;
    double worst_certificate = 0.0;
    for (long i = 0; i < m; ++i) {
      const double x = m == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
      auto r = legendre(spec.lambda, x);
      t.add({format_double(x), r.value.is_finite() ? format_double(r.value.value()) : "inf",
             format_double(r.argmax), to_string(r.status), format_double(r.certificate_gap)});
      worst_certificate = std::min(worst_certificate, r.certificate_gap);
      if (reference == "closed_form") worst = std::max(worst, residual(r.value, ExtReal(spec.closed_form(x))));
    }
    RunResult out;
    out.details = {{"family", spec.lambda.family()}, {"points", m}, {"min_certificate_gap", worst_certificate}};
    out.pass = worst_certificate >= -1e-9;
    if (reference == "closed_form") {
      out.details["max_error"] = ext(worst);
      out.details["tol"] = tol;
      out.pass = out.pass && worst <= tol;
    }
    out.tables.emplace_back("conjugate", std::move(t));
    return out;
  };
}

}  // namespace exp_detail

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"ldp-check",    "laplace",       "varadhan", "avar-limit",
                                              "premium-path", "riskrep-check", "legendre"};
  return kinds;
}

/// Validates a config completely and returns the runnable experiment.
inline Experiment parse_experiment(const nlohmann::json& cfg) {
  using exp_detail::get_string;
  if (!cfg.is_object()) throw io::ConfigError("config: expected a JSON object");
  Experiment e;
  e.config = cfg;
  e.name = get_string(cfg, "name", "config");
  if (e.name.empty() || e.name.find_first_of("/\\ ") != std::string::npos)
    throw io::ConfigError("config: name must be non-empty without spaces or slashes");
  e.kind = get_string(cfg, "kind", "config");
  e.description = get_string(cfg, "description", std::string(), "config");
  e.anchor = get_string(cfg, "anchor", std::string(), "config");
  e.output_dir = get_string(cfg, "output_dir", std::string("."), "config");
  const std::string expect = get_string(cfg, "expect", std::string("pass"), "config");
  if (expect != "pass" && expect != "fail") throw io::ConfigError("config: expect must be 'pass' or 'fail'");
  e.expect_pass = expect == "pass";
  if (e.kind == "ldp-check") e.run = exp_detail::parse_ldp(cfg);
  else if (e.kind == "laplace") e.run = exp_detail::parse_laplace(cfg);
  else if (e.kind == "varadhan") e.run = exp_detail::parse_varadhan(cfg);
  else if (e.kind == "avar-limit") e.run = exp_detail::parse_avar(cfg);
  else if (e.kind == "premium-path") e.run = exp_detail::parse_premium(cfg);
  else if (e.kind == "riskrep-check") e.run = exp_detail::parse_riskrep(cfg);
  else if (e.kind == "legendre") e.run = exp_detail::parse_legendre(cfg);
  else throw io::ConfigError("config: unknown kind '" + e.kind + "'");
  return e;
}

struct RunRecord {
  bool verdict = false;
  bool observed_pass = false;
  nlohmann::json summary;
  std::vector<std::filesystem::path> artifacts;
  double wall_seconds = 0.0;
};

/// Runs the experiment and writes <name>.summary.json and <name>.<table>.csv
/// under out_dir. Wall time is returned but never written, so reruns
/// reproduce the files bit for bit.
inline RunRecord execute(const Experiment& e, const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res = e.run();
  RunRecord rec;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.observed_pass = res.pass;
  rec.verdict = res.pass == e.expect_pass;

  nlohmann::json files = nlohmann::json::array();
  for (const auto& [suffix, table] : res.tables) {
    auto p = out_dir / (e.name + "." + suffix + ".csv");
    io::write_atomic(p, table.str());
    rec.artifacts.push_back(p);
    files.push_back(p.filename().string());
  }
  auto summary_path = out_dir / (e.name + ".summary.json");
  files.push_back(summary_path.filename().string());
  rec.summary = {{"name", e.name},
                 {"kind", e.kind},
                 {"description", e.description},
                 {"anchor", e.anchor},
                 {"library_version", kLibraryVersion},
                 {"config", e.config},
                 {"expect", e.expect_pass ? "pass" : "fail"},
                 {"observed", res.pass ? "pass" : "fail"},
                 {"verdict", rec.verdict ? "pass" : "fail"},
                 {"details", res.details},
                 {"artifacts", files}};
  io::write_atomic(summary_path, rec.summary.dump(2) + "\n");
  rec.artifacts.push_back(summary_path);
  return rec;
}

}  // namespace maxrisk
