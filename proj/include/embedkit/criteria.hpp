#pragma once

// Embedding decision engine over weighted Besov / Triebel-Lizorkin /
// Bessel-potential / Sobolev-Slobodetskii scales.
//
// The core quantity is the discrete-cube term
//     T(nu, m) = 2^{-nu(s0-s1)} w0(Q_{nu,m})^{-1/p0} w1(Q_{nu,m})^{1/p1},
// whose boundedness over the whole lattice ("condition (C)") characterizes
// the F-scale (and Bessel/Slobodetskii-scale) embeddings for p0 <= p1, and
// whose ell^{q*}(ell^{p*}) norm drives the Besov criterion. The infinite
// lattice is probed by a finite dense window plus structured lines (level
// lines at singular anchors, fixed-position lines, geometric far-field
// ladders); fitted log2-slopes of the term along these lines converge to the
// closed-form inequality margins, so truncation plus slope extrapolation
// classifies the sup/series as Finite / Infinite / Boundary.
//
// Power-weight families admit closed-form answers (three-inequality tests);
// the window evaluator is cross-validated against them on parameter grids.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "embedkit/common.hpp"
#include "embedkit/dyadic.hpp"
#include "embedkit/weights.hpp"

namespace embedkit::criteria {

// ---------------------------------------------------------------------------
// Spaces and queries
// ---------------------------------------------------------------------------

enum class Scale { Besov, TriebelLizorkin, BesselPotential, SobolevSlobodetskii };

inline const char* to_string(Scale s) {
  switch (s) {
    case Scale::Besov: return "besov";
    case Scale::TriebelLizorkin: return "triebel_lizorkin";
    case Scale::BesselPotential: return "bessel_potential";
    case Scale::SobolevSlobodetskii: return "sobolev_slobodetskii";
  }
  return "besov";
}

struct SpaceSpec {
  Scale scale = Scale::TriebelLizorkin;
  double s = 0.0;
  double p = 2.0;
  double q = 2.0;  // microscopic parameter; ignored for H and W
  weights::Weight weight = weights::Weight::constant(1);

  int dim() const { return weight.dim(); }

  bool uses_q() const { return scale == Scale::Besov || scale == Scale::TriebelLizorkin; }

  void validate() const {
    if (!(p > 0.0)) throw InvalidSpec("SpaceSpec: p must be positive");
    switch (scale) {
      case Scale::Besov:
        if (!(q > 0.0)) throw InvalidSpec("SpaceSpec: q must be positive");
        break;
      case Scale::TriebelLizorkin:
        if (std::isinf(p))
          throw UnsupportedQuery("Triebel-Lizorkin scale with p = infinity is not supported");
        if (!(q > 0.0)) throw InvalidSpec("SpaceSpec: q must be positive");
        break;
      case Scale::BesselPotential:
        if (!(p > 1.0) || std::isinf(p))
          throw UnsupportedQuery("Bessel-potential scale requires 1 < p < infinity");
        break;
      case Scale::SobolevSlobodetskii:
        if (!(p > 1.0) || std::isinf(p))
          throw UnsupportedQuery("Sobolev-Slobodetskii scale requires 1 < p < infinity");
        if (s < 0.0) throw InvalidSpec("SpaceSpec: Slobodetskii smoothness must be >= 0");
        break;
    }
  }
};

struct EmbeddingQuery {
  SpaceSpec source;
  SpaceSpec target;

  int dim() const { return source.dim(); }

  void validate() const {
    source.validate();
    target.validate();
    if (source.dim() != target.dim()) throw InvalidSpec("EmbeddingQuery: dimension mismatch");
  }
};

struct DualExponents {
  double p_star = kInf;
  double q_star = kInf;
};

// 1/p* = (1/p1 - 1/p0)_+ and likewise for q; 1/inf = 0.
inline DualExponents star_exponents(double p0, double p1, double q0, double q1) {
  for (double v : {p0, p1, q0, q1})
    if (!(v > 0.0)) throw InvalidSpec("star_exponents: exponents must be positive");
  auto star = [](double a0, double a1) {
    double inv = std::max(reciprocal(a1) - reciprocal(a0), 0.0);
    return inv > 0.0 ? 1.0 / inv : kInf;
  };
  return {star(p0, p1), star(q0, q1)};
}

// ---------------------------------------------------------------------------
// Verdicts and evidence
// ---------------------------------------------------------------------------

enum class Outcome { Holds, Fails, Inconclusive };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Holds: return "holds";
    case Outcome::Fails: return "fails";
    case Outcome::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

enum class FormOutcome { Holds, Fails, Boundary };

inline const char* to_string(FormOutcome o) {
  switch (o) {
    case FormOutcome::Holds: return "holds";
    case FormOutcome::Fails: return "fails";
    case FormOutcome::Boundary: return "boundary";
  }
  return "boundary";
}

struct NamedFit {
  std::string name;
  dyadic::SlopeFit fit;
};

struct MarginItem {
  std::string name;
  double value = 0.0;
};

struct Evidence {
  double sup_value = 0.0;  // window sup of the term (or criterion value for series)
  double log2_sup = -kInf;
  std::optional<dyadic::Cube> witness;
  std::vector<NamedFit> slopes;
  std::vector<MarginItem> margins;
  std::vector<std::string> notes;
};

struct Verdict {
  Outcome outcome = Outcome::Inconclusive;
  std::string rule;
  Evidence evidence;
  bool condition_c = false;
  bool besov_criterion = false;
  bool closed_form = false;
  bool downward_rule = false;
};

struct ClosedFormVerdict {
  FormOutcome outcome = FormOutcome::Boundary;
  std::string rule;
  std::vector<MarginItem> margins;
  double min_margin = kNaN;
};

// ---------------------------------------------------------------------------
// Closed forms for the power-weight catalogs
// ---------------------------------------------------------------------------

namespace detail {

// The characterizing inequalities are non-strict, so a margin that is
// exactly zero still decides Holds. Boundary is reserved for margins that
// land inside the epsilon band without being exact: there the sign is
// numerically unreliable.
inline ClosedFormVerdict classify_margins(std::string rule, std::vector<MarginItem> margins,
                                          double band) {
  ClosedFormVerdict v;
  v.rule = std::move(rule);
  v.margins = std::move(margins);
  double lo = kInf;
  bool ambiguous = false;
  for (const auto& m : v.margins) {
    lo = std::min(lo, m.value);
    if (m.value != 0.0 && std::abs(m.value) <= band) ambiguous = true;
  }
  v.min_margin = lo;
  if (lo < -band)
    v.outcome = FormOutcome::Fails;
  else if (ambiguous)
    v.outcome = FormOutcome::Boundary;
  else
    v.outcome = FormOutcome::Holds;
  return v;
}

}  // namespace detail

// Radial power |x|^{alpha} near the origin, |x|^{beta} far: the embedding
// holds iff the near, unweighted, and far inequalities all hold (non-strict).
inline ClosedFormVerdict closed_form_radial(double s0, double p0, double alpha0, double beta0,
                                            double s1, double p1, double alpha1, double beta1,
                                            int d, double band = 1e-9) {
  double D = static_cast<double>(d);
  std::vector<MarginItem> m = {
      {"near", (s0 - (D + alpha0) * reciprocal(p0)) - (s1 - (D + alpha1) * reciprocal(p1))},
      {"unweighted", (s0 - D * reciprocal(p0)) - (s1 - D * reciprocal(p1))},
      {"far", beta0 * reciprocal(p0) - beta1 * reciprocal(p1)},
  };
  return detail::classify_margins("closed_form:radial_power", std::move(m), band);
}

// Partial radial power (radial in the first n coordinates): identical
// three-inequality test with the full dimension d = n + k.
inline ClosedFormVerdict closed_form_partial(int n, int k, double s0, double p0, double alpha0,
                                             double beta0, double s1, double p1, double alpha1,
                                             double beta1, double band = 1e-9) {
  if (n < 1 || k < 0) throw InvalidSpec("closed_form_partial: need n >= 1, k >= 0");
  ClosedFormVerdict v =
      closed_form_radial(s0, p0, alpha0, beta0, s1, p1, alpha1, beta1, n + k, band);
  v.rule = "closed_form:partial_radial_power";
  return v;
}

// Product of per-block powers: total-shift inequality plus one per-block
// exponent inequality. The plain unweighted inequality is implied (it equals
// the total margin plus the sum of block margins); it is reported as a
// consistency diagnostic, not tested.
inline ClosedFormVerdict closed_form_product(std::span<const int> dims,
                                             std::span<const double> alphas0,
                                             std::span<const double> alphas1, double s0, double p0,
                                             double s1, double p1, double band = 1e-9) {
  if (dims.size() != alphas0.size() || dims.size() != alphas1.size() || dims.empty())
    throw InvalidSpec("closed_form_product: mismatched block arrays");
  double d = 0.0, sum0 = 0.0, sum1 = 0.0;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    d += dims[j];
    sum0 += alphas0[j];
    sum1 += alphas1[j];
  }
  std::vector<MarginItem> m;
  m.push_back({"total", (s0 - (d + sum0) * reciprocal(p0)) - (s1 - (d + sum1) * reciprocal(p1))});
  for (std::size_t j = 0; j < dims.size(); ++j)
    m.push_back({"block_" + std::to_string(j),
                 alphas0[j] * reciprocal(p0) - alphas1[j] * reciprocal(p1)});
  ClosedFormVerdict v = detail::classify_margins("closed_form:product_power", std::move(m), band);
  v.margins.push_back(
      {"unweighted_implied", (s0 - d * reciprocal(p0)) - (s1 - d * reciprocal(p1))});
  return v;
}

// Distance power to a codimension-k manifold: surface-shift inequality plus
// the far exponent inequality.
inline ClosedFormVerdict closed_form_distance(int k, double gamma0, double gamma1, double s0,
                                              double p0, double s1, double p1, int d,
                                              double band = 1e-9) {
  if (k < 1 || k >= d) throw InvalidSpec("closed_form_distance: codimension out of range");
  double D = static_cast<double>(d);
  std::vector<MarginItem> m = {
      {"surface", (s0 - (D + gamma0) * reciprocal(p0)) - (s1 - (D + gamma1) * reciprocal(p1))},
      {"far", gamma0 * reciprocal(p0) - gamma1 * reciprocal(p1)},
  };
  return detail::classify_margins("closed_form:distance_power", std::move(m), band);
}

// Downward integrability drop (p1 < p0) on the Bessel-potential scale with
// pure powers |x|^{gamma_i}: both inequalities are strict, so equality means
// the embedding fails (never Holds at a zero margin).
inline ClosedFormVerdict closed_form_downward_h(double gamma0, double gamma1, double s0, double p0,
                                                double s1, double p1, int d, double band = 1e-9) {
  if (!(p1 < p0)) throw InvalidSpec("closed_form_downward_h: requires p1 < p0");
  double D = static_cast<double>(d);
  for (double p : {p0, p1})
    if (!(p > 1.0) || std::isinf(p))
      throw InvalidSpec("closed_form_downward_h: requires 1 < p < infinity");
  auto in_ap = [D](double g, double p) { return g > -D && g < D * (p - 1.0); };
  if (!in_ap(gamma0, p0) || !in_ap(gamma1, p1))
    throw InvalidSpec("closed_form_downward_h: exponents must satisfy the A_p range");
  ClosedFormVerdict v;
  v.rule = "closed_form:downward_pure_power";
  v.margins = {
      {"shift_strict", (s0 - (D + gamma0) / p0) - (s1 - (D + gamma1) / p1)},
      {"scale_strict", (D + gamma0) / p0 - (D + gamma1) / p1},
  };
  double lo = std::min(v.margins[0].value, v.margins[1].value);
  v.min_margin = lo;
  v.outcome = lo > band ? FormOutcome::Holds : FormOutcome::Fails;
  return v;
}

// ---------------------------------------------------------------------------
// Closed-form resolution for a query (catalog matcher)
// ---------------------------------------------------------------------------

namespace detail {

struct RadialParams {
  double alpha, beta;
};

inline std::optional<RadialParams> as_radial(const weights::Weight& w) {
  using weights::Family;
  if (w.family() == Family::Constant) return RadialParams{0.0, 0.0};
  if (w.family() == Family::RadialPower) {
    const auto& f = w.as<weights::RadialPowerW>();
    return RadialParams{f.alpha, f.beta};
  }
  return std::nullopt;
}

inline std::optional<RadialParams> as_partial(const weights::Weight& w, int n, int k) {
  using weights::Family;
  if (w.family() == Family::Constant) return RadialParams{0.0, 0.0};
  if (w.family() == Family::PartialRadialPower) {
    const auto& f = w.as<weights::PartialRadialPowerW>();
    if (f.n == n && f.k == k) return RadialParams{f.alpha, f.beta};
  }
  return std::nullopt;
}

inline std::optional<std::vector<double>> as_product(const weights::Weight& w,
                                                     std::span<const int> dims) {
  using weights::Family;
  if (w.family() == Family::Constant) return std::vector<double>(dims.size(), 0.0);
  if (w.family() == Family::ProductPower) {
    const auto& f = w.as<weights::ProductPowerW>();
    if (std::equal(f.dims.begin(), f.dims.end(), dims.begin(), dims.end())) return f.alphas;
  }
  return std::nullopt;
}

inline std::optional<double> as_distance(const weights::Weight& w,
                                         const weights::Manifold& manifold) {
  using weights::Family;
  if (w.family() == Family::Constant) return 0.0;
  if (w.family() == Family::DistancePower) {
    const auto& f = w.as<weights::DistancePowerW>();
    if (f.manifold.same_geometry(manifold)) return f.gamma;
  }
  return std::nullopt;
}

}  // namespace detail

// Matches the weight pair against one catalog family and evaluates the
// corresponding closed form. Scale-pair applicability is the caller's job.
inline std::optional<ClosedFormVerdict> closed_form_for(const weights::Weight& w0, double s0,
                                                        double p0, const weights::Weight& w1,
                                                        double s1, double p1, double band = 1e-9) {
  using weights::Family;
  const int d = w0.dim();

  // Prefer the structurally richer side when lifting a constant weight.
  auto lead = [&]() -> const weights::Weight& {
    return w0.family() == Family::Constant ? w1 : w0;
  }();

  switch (lead.family()) {
    case Family::Constant:
    case Family::RadialPower: {
      auto a = detail::as_radial(w0), b = detail::as_radial(w1);
      if (a && b)
        return closed_form_radial(s0, p0, a->alpha, a->beta, s1, p1, b->alpha, b->beta, d, band);
      return std::nullopt;
    }
    case Family::PartialRadialPower: {
      const auto& f = lead.as<weights::PartialRadialPowerW>();
      auto a = detail::as_partial(w0, f.n, f.k), b = detail::as_partial(w1, f.n, f.k);
      if (a && b)
        return closed_form_partial(f.n, f.k, s0, p0, a->alpha, a->beta, s1, p1, b->alpha, b->beta,
                                   band);
      return std::nullopt;
    }
    case Family::ProductPower: {
      const auto& f = lead.as<weights::ProductPowerW>();
      auto a = detail::as_product(w0, f.dims), b = detail::as_product(w1, f.dims);
      if (a && b) return closed_form_product(f.dims, *a, *b, s0, p0, s1, p1, band);
      return std::nullopt;
    }
    case Family::DistancePower: {
      const auto& f = lead.as<weights::DistancePowerW>();
      auto a = detail::as_distance(w0, f.manifold), b = detail::as_distance(w1, f.manifold);
      if (a && b)
        return closed_form_distance(f.manifold.codim(d), *a, *b, s0, p0, s1, p1, d, band);
      return std::nullopt;
    }
    case Family::Custom:
      return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Term evaluation
// ---------------------------------------------------------------------------

struct EvalPolicy {
  double slope_threshold = 0.02;  // |slope| below this counts as flat
  double residual_max = 0.25;     // RMS in log2 space above which a fit is noisy
  int min_samples = 4;
  int tail_points = 8;      // fit window (last points of each line)
  int line_nu_max = 12;     // probe lines extend to this level regardless of window
  int ladder_j_max = 20;    // far ladders reach |m| = 2^j
  double region_eps = 0.1;
  double boundary_band = 1e-9;
  quad::Options quad;
  int threads = 0;
};

struct TermParts {
  double value = 0.0;
  double log2_value = -kInf;
  // Factorization through weighted means: value =
  //   2^{level_exponent} * mean_factor, with level_exponent =
  //   -nu [(s0 - d/p0) - (s1 - d/p1)] and mean_factor =
  //   (avg_Q w0)^{-1/p0} (avg_Q w1)^{1/p1}.
  double level_exponent = 0.0;
  double mean_factor = 0.0;
};

namespace detail {

inline double log2_or_throw(double v, const char* what) {
  if (!(v > 0.0)) throw Error(std::string(what) + ": expected a positive value");
  return std::log2(v);
}

inline double clamp_exp2(double l2) {
  if (l2 > 1020.0) return kInf;
  if (l2 < -1020.0) return 0.0;
  return std::exp2(l2);
}

}  // namespace detail

// The displayed cube term, computed in the log2 domain from cube measures.
inline TermParts condition_c_term_parts(const EmbeddingQuery& q, const dyadic::Cube& cube,
                                        const quad::Options& opt = {}) {
  const double s0 = q.source.s, s1 = q.target.s;
  const double ip0 = reciprocal(q.source.p), ip1 = reciprocal(q.target.p);
  const int d = q.dim();
  Box box = dyadic::cube_box(cube);
  double l2w0 = detail::log2_or_throw(weights::cube_measure(q.source.weight, box, opt).value,
                                      "condition_c_term: source weight measure");
  double l2w1 = detail::log2_or_throw(weights::cube_measure(q.target.weight, box, opt).value,
                                      "condition_c_term: target weight measure");
  TermParts t;
  t.log2_value = -cube.nu * (s0 - s1) - ip0 * l2w0 + ip1 * l2w1;
  t.value = detail::clamp_exp2(t.log2_value);
  t.level_exponent = -cube.nu * ((s0 - d * ip0) - (s1 - d * ip1));
  // avg_Q w = w(Q) / |Q|; |Q| = 2^{-nu d}.
  double l2avg0 = l2w0 + cube.nu * d;
  double l2avg1 = l2w1 + cube.nu * d;
  t.mean_factor = detail::clamp_exp2(-ip0 * l2avg0 + ip1 * l2avg1);
  return t;
}

inline double condition_c_term(const EmbeddingQuery& q, const dyadic::Cube& cube,
                               const quad::Options& opt = {}) {
  return condition_c_term_parts(q, cube, opt).value;
}

// ---------------------------------------------------------------------------
// Window engine
// ---------------------------------------------------------------------------

// Precomputes cube measures for a weight pair over the dense window plus the
// probe lines, then answers condition-C and Besov-criterion queries for any
// (s, p, q) against those cached measures. Building the engine is the costly
// step; each evaluation is a cheap pass over precomputed log2 measures.
class ConditionEngine {
 public:
  ConditionEngine(weights::Weight w0, weights::Weight w1, dyadic::Window win = {},
                  EvalPolicy pol = {})
      : w0_(std::move(w0)), w1_(std::move(w1)), win_(win), pol_(pol), d_(w0_.dim()) {
    if (w0_.dim() != w1_.dim()) throw InvalidSpec("ConditionEngine: dimension mismatch");
    build_cubes();
    compute_measures();
  }

  const weights::Weight& source_weight() const { return w0_; }
  const weights::Weight& target_weight() const { return w1_; }
  std::size_t cube_count() const { return cubes_.size(); }

  // Boundedness of the term over the lattice (sup criterion). Requires
  // s0 >= s1 and p0 <= p1.
  Verdict condition_c(double s0, double p0, double s1, double p1) const {
    if (!(s0 >= s1)) throw InvalidSpec("condition_c: requires s0 >= s1");
    if (reciprocal(p0) < reciprocal(p1)) throw InvalidSpec("condition_c: requires p0 <= p1");
    Verdict v = sup_criterion(s0, p0, s1, p1);
    v.rule = "condition_c:window";
    v.condition_c = true;
    return v;
  }

  // ell^{q*}_nu ( ell^{p*}_m ) criterion; reduces to the sup criterion when
  // p* = q* = infinity (p0 <= p1 and q0 <= q1).
  Verdict besov(double s0, double p0, double q0, double s1, double p1, double q1) const {
    if (!(s0 >= s1)) throw InvalidSpec("besov criterion: requires s0 >= s1");
    DualExponents st = star_exponents(p0, p1, q0, q1);
    if (std::isinf(st.p_star) && std::isinf(st.q_star)) {
      Verdict v = sup_criterion(s0, p0, s1, p1);
      v.rule = "besov_criterion:window_sup";
      v.besov_criterion = true;
      return v;
    }
    Verdict v = series_criterion(s0, p0, s1, p1, st);
    v.rule = "besov_criterion:window_series";
    v.besov_criterion = true;
    return v;
  }

 private:
  struct Line {
    std::string name;
    std::vector<std::size_t> idx;
    std::vector<double> xs;
  };

  // --- construction -------------------------------------------------------

  std::size_t intern(dyadic::Cube c) {
    auto key = std::make_pair(c.nu, c.m);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    std::size_t id = cubes_.size();
    index_.emplace(std::move(key), id);
    cubes_.push_back(std::move(c));
    return id;
  }

  static std::string fmt_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(3);
    os << "(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << ")";
    return os.str();
  }

  void add_position_line(std::span<const double> x, const std::string& label) {
    Line line;
    line.name = label + fmt_point(x);
    for (int nu = 0; nu <= pol_.line_nu_max; ++nu) {
      dyadic::Cube c;
      c.nu = nu;
      c.m.resize(static_cast<std::size_t>(d_));
      for (int i = 0; i < d_; ++i)
        c.m[static_cast<std::size_t>(i)] =
            std::llround(std::ldexp(x[static_cast<std::size_t>(i)], nu));
      line.idx.push_back(intern(std::move(c)));
      line.xs.push_back(static_cast<double>(nu));
    }
    nu_lines_.push_back(std::move(line));
  }

  void build_cubes() {
    // Dense window (per-level rows, used for the sup witness and m-sums).
    auto dense = dyadic::enumerate_window(win_, d_);
    dense_rows_.assign(static_cast<std::size_t>(win_.nu_max) + 1, {});
    for (auto& c : dense) {
      int nu = c.nu;
      std::size_t id = intern(std::move(c));
      dense_rows_[static_cast<std::size_t>(nu)].push_back(id);
    }

    // Level lines at singular anchors (slope -> near margin) and generic
    // fixed positions (slope -> unweighted margin).
    std::vector<std::vector<double>> anchors;
    auto add_anchor = [&](std::vector<double> a) {
      for (const auto& e : anchors) {
        double dist = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) dist += std::abs(e[i] - a[i]);
        if (dist < 1e-12) return;
      }
      anchors.push_back(std::move(a));
    };
    for (const auto& a : w0_.singular_anchors()) add_anchor(a);
    for (const auto& a : w1_.singular_anchors()) add_anchor(a);
    for (const auto& a : anchors) add_position_line(a, "anchor");

    std::vector<std::vector<double>> generic;
    auto add_generic = [&](std::vector<double> x) {
      if (w0_.on_singular_locus(x, 1e-9) || w1_.on_singular_locus(x, 1e-9)) return;
      for (const auto& e : generic) {
        double dist = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) dist += std::abs(e[i] - x[i]);
        if (dist < 1e-12) return;
      }
      generic.push_back(std::move(x));
    };
    double u = 1.0 / std::sqrt(static_cast<double>(d_));
    auto scaled_u = [&](double r, std::span<const double> c) {
      std::vector<double> x(static_cast<std::size_t>(d_));
      for (int i = 0; i < d_; ++i)
        x[static_cast<std::size_t>(i)] = r * u + (c.empty() ? 0.0 : c[static_cast<std::size_t>(i)]);
      return x;
    };
    for (const weights::Weight* w : {&w0_, &w1_}) {
      if (w->family() == weights::Family::DistancePower) {
        const auto& m = w->as<weights::DistancePowerW>().manifold;
        add_generic(scaled_u(2.0 * m.radius, m.center));
        add_generic(scaled_u(0.55 * m.radius, m.center));
      } else {
        add_generic(scaled_u(2.0, {}));
        add_generic(scaled_u(0.55, {}));
      }
    }
    for (const auto& x : generic) add_position_line(x, "position");

    // Unit-offset level lines (centers ~ one cube off the anchor).
    for (int axis = 0; axis < d_; ++axis) {
      Line line;
      line.name = "near_axis" + std::to_string(axis);
      for (int nu = 0; nu <= pol_.line_nu_max; ++nu) {
        dyadic::Cube c;
        c.nu = nu;
        c.m.assign(static_cast<std::size_t>(d_), 0);
        c.m[static_cast<std::size_t>(axis)] = 1;
        line.idx.push_back(intern(std::move(c)));
        line.xs.push_back(static_cast<double>(nu));
      }
      nu_lines_.push_back(std::move(line));
    }

    // Far ladders m = 2^j e at coarse levels; fitted against j on the tail
    // j >= nu + 3 where the center norm dominates the cube size.
    std::vector<std::vector<std::int64_t>> dirs;
    for (int axis = 0; axis < d_; ++axis)
      for (int sgn : {+1, -1}) {
        std::vector<std::int64_t> e(static_cast<std::size_t>(d_), 0);
        e[static_cast<std::size_t>(axis)] = sgn;
        dirs.push_back(std::move(e));
      }
    if (d_ > 1) dirs.push_back(std::vector<std::int64_t>(static_cast<std::size_t>(d_), 1));
    for (int nu = 0; nu <= std::min(2, win_.nu_max); ++nu) {
      for (std::size_t di = 0; di < dirs.size(); ++di) {
        Line line;
        line.name = "far(nu=" + std::to_string(nu) + ",dir=" + std::to_string(di) + ")";
        for (int j = nu + 3; j <= pol_.ladder_j_max; ++j) {
          dyadic::Cube c;
          c.nu = nu;
          c.m.resize(static_cast<std::size_t>(d_));
          for (int i = 0; i < d_; ++i)
            c.m[static_cast<std::size_t>(i)] = dirs[di][static_cast<std::size_t>(i)]
                                               << static_cast<unsigned>(j);
          line.idx.push_back(intern(std::move(c)));
          line.xs.push_back(static_cast<double>(j));
        }
        ladder_lines_.push_back(std::move(line));
      }
    }
  }

  void compute_measures() {
    l2w0_.resize(cubes_.size());
    l2w1_.resize(cubes_.size());
    std::vector<Box> boxes;
    boxes.reserve(cubes_.size());
    for (const auto& c : cubes_) boxes.push_back(dyadic::cube_box(c));
    parallel_for(
        cubes_.size(),
        [&](std::size_t i) {
          l2w0_[i] = detail::log2_or_throw(
              weights::cube_measure(w0_, boxes[i], pol_.quad).value, "window measure (source)");
          l2w1_[i] = detail::log2_or_throw(
              weights::cube_measure(w1_, boxes[i], pol_.quad).value, "window measure (target)");
        },
        pol_.threads);
  }

  // --- shared term helpers --------------------------------------------------

  double log2_term(std::size_t i, double ds, double ip0, double ip1) const {
    return -cubes_[i].nu * ds - ip0 * l2w0_[i] + ip1 * l2w1_[i];
  }

  struct FitScan {
    std::vector<NamedFit> fits;
    bool growth = false;
    bool noisy = false;
    std::string growth_line, noisy_line;
  };

  void scan_line(FitScan& scan, const Line& line, std::span<const double> l2t) const {
    std::size_t n = line.idx.size();
    std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(pol_.tail_points));
    if (take < static_cast<std::size_t>(pol_.min_samples)) return;
    std::vector<double> xs(line.xs.end() - static_cast<std::ptrdiff_t>(take), line.xs.end());
    std::vector<double> ys(l2t.end() - static_cast<std::ptrdiff_t>(take), l2t.end());
    dyadic::SlopeFit fit = dyadic::fit_linear(xs, ys);
    if (fit.residual <= pol_.residual_max) {
      if (fit.slope > pol_.slope_threshold && !scan.growth) {
        scan.growth = true;
        scan.growth_line = line.name;
      }
    } else if (fit.slope > -pol_.slope_threshold && !scan.noisy) {
      scan.noisy = true;
      scan.noisy_line = line.name;
    }
    scan.fits.push_back({line.name, fit});
  }

  FitScan scan_all_lines(double ds, double ip0, double ip1) const {
    FitScan scan;
    std::vector<double> l2t;
    for (const auto* lines : {&nu_lines_, &ladder_lines_}) {
      for (const auto& line : *lines) {
        l2t.clear();
        for (std::size_t i : line.idx) l2t.push_back(log2_term(i, ds, ip0, ip1));
        scan_line(scan, line, l2t);
      }
    }
    return scan;
  }

  // Per-level max over the dense window (the running-sup profile).
  std::optional<NamedFit> envelope_fit(double ds, double ip0, double ip1,
                                       std::vector<double>* row_max_out = nullptr) const {
    std::vector<double> xs, ys;
    for (std::size_t nu = 0; nu < dense_rows_.size(); ++nu) {
      if (dense_rows_[nu].empty()) continue;
      double mx = -kInf;
      for (std::size_t i : dense_rows_[nu]) mx = std::max(mx, log2_term(i, ds, ip0, ip1));
      xs.push_back(static_cast<double>(nu));
      ys.push_back(mx);
    }
    if (row_max_out) *row_max_out = ys;
    std::size_t take = std::min<std::size_t>(xs.size(), static_cast<std::size_t>(pol_.tail_points));
    if (take < static_cast<std::size_t>(pol_.min_samples)) return std::nullopt;
    std::vector<double> txs(xs.end() - static_cast<std::ptrdiff_t>(take), xs.end());
    std::vector<double> tys(ys.end() - static_cast<std::ptrdiff_t>(take), ys.end());
    return NamedFit{"envelope", dyadic::fit_linear(txs, tys)};
  }

  void fill_sup(Evidence& ev, double ds, double ip0, double ip1) const {
    double best = -kInf;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < cubes_.size(); ++i) {
      double v = log2_term(i, ds, ip0, ip1);
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    ev.log2_sup = best;
    ev.sup_value = detail::clamp_exp2(best);
    ev.witness = cubes_[arg];
  }

  // --- sup criterion ---------------------------------------------------------

  Verdict sup_criterion(double s0, double p0, double s1, double p1) const {
    const double ds = s0 - s1, ip0 = reciprocal(p0), ip1 = reciprocal(p1);
    Verdict v;
    FitScan scan = scan_all_lines(ds, ip0, ip1);
    auto env = envelope_fit(ds, ip0, ip1);
    if (env) {
      if (env->fit.residual <= pol_.residual_max) {
        if (env->fit.slope > pol_.slope_threshold && !scan.growth) {
          scan.growth = true;
          scan.growth_line = env->name;
        }
      } else if (env->fit.slope > -pol_.slope_threshold && !scan.noisy) {
        scan.noisy = true;
        scan.noisy_line = env->name;
      }
      scan.fits.push_back(*env);
    }
    fill_sup(v.evidence, ds, ip0, ip1);
    v.evidence.slopes = std::move(scan.fits);
    if (scan.growth) {
      v.outcome = Outcome::Fails;
      v.evidence.notes.push_back("term grows along " + scan.growth_line);
    } else if (scan.noisy) {
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back("fit too noisy along " + scan.noisy_line);
    } else {
      v.outcome = Outcome::Holds;
      v.evidence.notes.push_back("all probe lines flat or decaying; window sup is the bound");
    }
    return v;
  }

  // --- series criterion -------------------------------------------------------

  // log2 of sum of exp2 of the inputs (stable log-sum-exp).
  static double log2_sum(std::span<const double> l2xs) {
    double M = -kInf;
    for (double v : l2xs) M = std::max(M, v);
    if (!std::isfinite(M)) return -kInf;
    NeumaierSum acc;
    for (double v : l2xs) acc.add(std::exp2(v - M));
    return M + std::log2(acc.value());
  }

  Verdict series_criterion(double s0, double p0, double s1, double p1,
                           const DualExponents& st) const {
    const double ds = s0 - s1, ip0 = reciprocal(p0), ip1 = reciprocal(p1);
    const double pst = st.p_star, qst = st.q_star;
    const double thr = pol_.slope_threshold;
    Verdict v;
    fill_sup(v.evidence, ds, ip0, ip1);

    // Far-field tail classification from the ladder lines. For the m-series
    // the relevant octave-shell exponent is d + p* * (term slope); a
    // non-decaying shell profile means the m-sum diverges at every level.
    FitScan ladder_scan;
    {
      std::vector<double> l2t;
      for (const auto& line : ladder_lines_) {
        l2t.clear();
        for (std::size_t i : line.idx) l2t.push_back(log2_term(i, ds, ip0, ip1));
        scan_line(ladder_scan, line, l2t);
      }
    }
    for (auto& f : ladder_scan.fits) v.evidence.slopes.push_back(f);
    double far_slope = -kInf;
    bool far_noisy = false;
    for (const auto& f : ladder_scan.fits) {
      if (f.fit.residual > pol_.residual_max) {
        far_noisy = true;
        continue;
      }
      far_slope = std::max(far_slope, f.fit.slope);
    }

    if (std::isfinite(far_slope) && far_slope > thr) {
      v.outcome = Outcome::Fails;
      v.evidence.notes.push_back("term grows in the far field (slope " +
                                 std::to_string(far_slope) + ")");
      return v;
    }

    bool m_tail_divergent = false, m_tail_flat = false;
    double m_tail_exponent = -kInf;
    if (!std::isinf(pst) && std::isfinite(far_slope)) {
      m_tail_exponent = d_ + pst * far_slope;
      if (m_tail_exponent > thr)
        m_tail_divergent = true;
      else if (m_tail_exponent >= -thr) {
        m_tail_divergent = true;
        m_tail_flat = true;
      }
    }
    if (!std::isinf(pst) && m_tail_divergent) {
      v.outcome = Outcome::Fails;
      std::string note = "octave-shell sums over m do not decay (exponent " +
                         std::to_string(m_tail_exponent) + ")";
      if (m_tail_flat) note += " [flat-tail]";
      v.evidence.notes.push_back(note);
      return v;
    }
    if (!std::isinf(pst) && far_noisy && !std::isfinite(far_slope)) {
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back("far-field fits too noisy to classify the m-series tail");
      return v;
    }

    // Per-level inner value a_nu (log2): sup over the dense row when
    // p* = inf, octave-shell sum with geometric tail otherwise.
    std::vector<double> lvl_x, lvl_l2a;
    bool shell_flat_divergence = false;
    std::string shell_note;
    for (std::size_t nu = 0; nu < dense_rows_.size(); ++nu) {
      const auto& row = dense_rows_[nu];
      if (row.empty()) continue;
      double l2a;
      if (std::isinf(pst)) {
        double mx = -kInf;
        for (std::size_t i : row) mx = std::max(mx, log2_term(i, ds, ip0, ip1));
        l2a = mx;
      } else {
        // Bucket the row into octave shells by |m|_inf.
        std::vector<std::vector<double>> shells;
        for (std::size_t i : row) {
          std::int64_t minf = 0;
          for (auto mi : cubes_[i].m) minf = std::max<std::int64_t>(minf, std::llabs(mi));
          std::size_t l = minf == 0 ? 0 : std::bit_width(static_cast<std::uint64_t>(minf));
          if (shells.size() <= l) shells.resize(l + 1);
          shells[l].push_back(pst * log2_term(i, ds, ip0, ip1));
        }
        std::vector<double> sx, sy;
        for (std::size_t l = 0; l < shells.size(); ++l) {
          if (shells[l].empty()) continue;
          sx.push_back(static_cast<double>(l));
          sy.push_back(log2_sum(shells[l]));
        }
        double l2sum = log2_sum(sy);
        // Window-interior shell profile: flat or growing increments mean the
        // m-series already diverges inside the window.
        if (sy.size() >= static_cast<std::size_t>(pol_.min_samples)) {
          std::size_t take =
              std::min<std::size_t>(sy.size(), static_cast<std::size_t>(pol_.tail_points));
          std::vector<double> txs(sx.end() - static_cast<std::ptrdiff_t>(take), sx.end());
          std::vector<double> tys(sy.end() - static_cast<std::ptrdiff_t>(take), sy.end());
          auto fit = dyadic::fit_linear(txs, tys);
          if (nu + 1 == dense_rows_.size())
            v.evidence.slopes.push_back({"m_shells(last level)", fit});
          if (fit.residual <= pol_.residual_max && fit.slope >= -thr && !shell_flat_divergence) {
            shell_flat_divergence = true;
            shell_note = "octave-shell sums stop decaying at level " + std::to_string(nu);
            if (std::abs(fit.slope) <= thr) shell_note += " [flat-tail]";
          }
          // Geometric tail beyond the window from the fitted decay.
          if (fit.slope < -thr) {
            double r = std::exp2(fit.slope);
            double tail = sy.back() + std::log2(r / (1.0 - r));
            double both[2] = {l2sum, tail};
            l2sum = log2_sum(both);
          }
        }
        l2a = l2sum / pst;
      }
      lvl_x.push_back(static_cast<double>(nu));
      lvl_l2a.push_back(l2a);
    }

    if (shell_flat_divergence) {
      v.outcome = Outcome::Fails;
      v.evidence.notes.push_back(shell_note);
      return v;
    }

    // Outer ell^{q*} over the levels.
    if (lvl_l2a.size() < static_cast<std::size_t>(pol_.min_samples)) {
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back("too few levels in the window to classify the level series");
      return v;
    }
    std::size_t take =
        std::min<std::size_t>(lvl_l2a.size(), static_cast<std::size_t>(pol_.tail_points));
    std::vector<double> txs(lvl_x.end() - static_cast<std::ptrdiff_t>(take), lvl_x.end());

    if (std::isinf(qst)) {
      std::vector<double> tys(lvl_l2a.end() - static_cast<std::ptrdiff_t>(take), lvl_l2a.end());
      auto fit = dyadic::fit_linear(txs, tys);
      v.evidence.slopes.push_back({"level_sup", fit});
      double mx = -kInf;
      for (double a : lvl_l2a) mx = std::max(mx, a);
      v.evidence.sup_value = detail::clamp_exp2(mx);
      v.evidence.log2_sup = mx;
      if (fit.residual > pol_.residual_max && fit.slope > -thr) {
        v.outcome = Outcome::Inconclusive;
        v.evidence.notes.push_back("level profile too noisy to classify");
      } else if (fit.slope > thr) {
        v.outcome = Outcome::Fails;
        v.evidence.notes.push_back("per-level values grow with the level");
      } else {
        v.outcome = Outcome::Holds;
        v.evidence.notes.push_back("per-level values flat or decaying; sup is the bound");
      }
      return v;
    }

    std::vector<double> lvl_terms(lvl_l2a.size());
    for (std::size_t i = 0; i < lvl_l2a.size(); ++i) lvl_terms[i] = qst * lvl_l2a[i];
    std::vector<double> tys(lvl_terms.end() - static_cast<std::ptrdiff_t>(take), lvl_terms.end());
    auto fit = dyadic::fit_linear(txs, tys);
    v.evidence.slopes.push_back({"level_sums", fit});
    if (fit.residual > pol_.residual_max) {
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back("level series too noisy to classify");
      return v;
    }
    if (fit.slope > thr) {
      v.outcome = Outcome::Fails;
      v.evidence.notes.push_back("level series terms grow; series diverges");
      return v;
    }
    if (fit.slope >= -thr) {
      v.outcome = Outcome::Fails;
      v.evidence.notes.push_back("level series terms do not decay; series diverges [flat-tail]");
      return v;
    }
    double l2total = log2_sum(lvl_terms);
    double r = std::exp2(fit.slope);
    double tail = lvl_terms.back() + std::log2(r / (1.0 - r));
    double both[2] = {l2total, tail};
    l2total = log2_sum(both);
    v.outcome = Outcome::Holds;
    v.evidence.sup_value = detail::clamp_exp2(l2total / qst);
    v.evidence.log2_sup = l2total / qst;
    v.evidence.notes.push_back("level series converges; value includes a geometric tail estimate");
    return v;
  }

  weights::Weight w0_, w1_;
  dyadic::Window win_;
  EvalPolicy pol_;
  int d_;
  std::vector<dyadic::Cube> cubes_;
  std::map<std::pair<int, std::vector<std::int64_t>>, std::size_t> index_;
  std::vector<double> l2w0_, l2w1_;
  std::vector<std::vector<std::size_t>> dense_rows_;
  std::vector<Line> nu_lines_;
  std::vector<Line> ladder_lines_;
};

inline Verdict evaluate_condition_c(const EmbeddingQuery& q, const dyadic::Window& win,
                                    const EvalPolicy& pol = {}) {
  q.validate();
  ConditionEngine eng(q.source.weight, q.target.weight, win, pol);
  return eng.condition_c(q.source.s, q.source.p, q.target.s, q.target.p);
}

inline Verdict evaluate_besov_condition(const EmbeddingQuery& q, const dyadic::Window& win,
                                        const EvalPolicy& pol = {}) {
  q.validate();
  ConditionEngine eng(q.source.weight, q.target.weight, win, pol);
  return eng.besov(q.source.s, q.source.p, q.source.q, q.target.s, q.target.p, q.target.q);
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

struct DecideOptions {
  std::optional<dyadic::Window> window;  // defaults per dimension
  EvalPolicy policy;
  bool prefer_closed_form = true;
};

namespace detail {

inline bool is_integer(double s) { return s >= 0.0 && s == std::floor(s); }

// Effective scale of a space for mixed-scale dispatch: the Bessel scale is
// the F-scale at q = 2; non-integer Slobodetskii is the Besov diagonal; and
// integer Slobodetskii sits between F_{p,1} and F_{p,inf}, so for the
// q-independent F-side rules it acts as F with a free microscopic parameter.
struct EffSpace {
  bool besov_like = false;
  double s = 0.0, p = 2.0, q = 2.0;
  bool q_free = false;
  bool from_hw = false;
};

inline EffSpace effective(const SpaceSpec& sp) {
  EffSpace e;
  e.s = sp.s;
  e.p = sp.p;
  switch (sp.scale) {
    case Scale::Besov:
      e.besov_like = true;
      e.q = sp.q;
      break;
    case Scale::TriebelLizorkin:
      e.q = sp.q;
      break;
    case Scale::BesselPotential:
      e.q = 2.0;
      e.from_hw = true;
      break;
    case Scale::SobolevSlobodetskii:
      e.from_hw = true;
      if (is_integer(sp.s)) {
        e.q_free = true;
      } else {
        e.besov_like = true;
        e.q = sp.p;
      }
      break;
  }
  return e;
}

inline bool hw_scale(Scale s) {
  return s == Scale::BesselPotential || s == Scale::SobolevSlobodetskii;
}

inline Verdict from_closed_form(const ClosedFormVerdict& cf) {
  Verdict v;
  v.closed_form = true;
  v.rule = cf.rule;
  v.evidence.margins = cf.margins;
  switch (cf.outcome) {
    case FormOutcome::Holds:
      v.outcome = Outcome::Holds;
      break;
    case FormOutcome::Fails:
      v.outcome = Outcome::Fails;
      break;
    case FormOutcome::Boundary:
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back("closed-form margin inside the boundary band");
      break;
  }
  return v;
}

inline Verdict inconclusive(std::string rule, std::string reason) {
  Verdict v;
  v.outcome = Outcome::Inconclusive;
  v.rule = std::move(rule);
  v.evidence.notes.push_back(std::move(reason));
  return v;
}

// The sup and series criteria assume A_infinity weights. Cataloged powers
// with valid exponents qualify automatically; custom weights and extreme
// exponents get a warning note instead of a refusal.
inline void ainfty_hypothesis_notes(const weights::Weight& w0, const weights::Weight& w1,
                                    std::vector<std::string>& notes) {
  for (const weights::Weight* w : {&w0, &w1}) {
    if (w->family() == weights::Family::Custom) {
      notes.push_back("A_infinity membership of " + w->key() +
                      " is asserted by the caller, not verified");
      continue;
    }
    bool any_member = false;
    for (double p : {1.5, 2.0, 4.0, 8.0, 16.0})
      if (weights::ap_membership_closed_form(*w, p).cls != weights::ApClass::NonMember)
        any_member = true;
    if (!any_member)
      notes.push_back("weight " + w->key() +
                      " lies outside A_p for every sampled p; the criterion assumes an "
                      "A_infinity weight");
  }
}

// A_p hypothesis check used by the Bessel/Slobodetskii routes. Returns an
// explanation when the hypothesis is not certifiable.
inline std::optional<std::string> ap_hypothesis_issue(const weights::Weight& w, double p,
                                                      std::vector<std::string>& notes) {
  auto mem = weights::ap_membership_closed_form(w, p);
  switch (mem.cls) {
    case weights::ApClass::Member:
      return std::nullopt;
    case weights::ApClass::NonMember:
      return "weight " + w.key() + " lies outside the A_p class for p = " + std::to_string(p);
    case weights::ApClass::Boundary:
      return "weight " + w.key() + " sits on the A_p boundary for p = " + std::to_string(p);
    case weights::ApClass::Unknown:
      notes.push_back("A_p membership of " + w.key() + " is unverified");
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

inline Verdict decide_embedding(const EmbeddingQuery& q, const DecideOptions& opts = {}) {
  q.validate();
  const SpaceSpec& src = q.source;
  const SpaceSpec& tgt = q.target;
  const int d = q.dim();
  const dyadic::Window win = opts.window.value_or(dyadic::Window::defaults(d));
  const EvalPolicy& pol = opts.policy;
  const double s0 = src.s, p0 = src.p, s1 = tgt.s, p1 = tgt.p;
  const double band = pol.boundary_band;

  if (s0 < s1) throw UnsupportedQuery("decide_embedding: no rule covers increasing smoothness");

  const bool upward_p = reciprocal(p0) >= reciprocal(p1);  // p0 <= p1

  // Identical spaces up to the microscopic parameter.
  auto identical_modulo_q = [&] {
    return src.scale == tgt.scale && s0 == s1 && p0 == p1 &&
           src.weight.key() == tgt.weight.key();
  };

  // ---- Bessel/Slobodetskii pairs: the sup criterion applies directly. ----
  if (detail::hw_scale(src.scale) && detail::hw_scale(tgt.scale)) {
    std::vector<std::string> notes;
    if (!upward_p) {
      // Downward integrability: pure-power catalog only.
      auto pure_gamma = [](const weights::Weight& w) -> std::optional<double> {
        if (w.family() == weights::Family::Constant) return 0.0;
        if (w.family() == weights::Family::RadialPower) {
          const auto& f = w.as<weights::RadialPowerW>();
          if (f.alpha == f.beta) return f.alpha;
        }
        return std::nullopt;
      };
      auto g0 = pure_gamma(src.weight), g1 = pure_gamma(tgt.weight);
      bool h_pair = src.scale == Scale::BesselPotential && tgt.scale == Scale::BesselPotential;
      if (h_pair && g0 && g1 && *g0 < d * (p0 - 1.0) && *g1 < d * (p1 - 1.0)) {
        Verdict v = detail::from_closed_form(
            closed_form_downward_h(*g0, *g1, s0, p0, s1, p1, d, band));
        v.downward_rule = true;
        return v;
      }
      return detail::inconclusive(
          "downward", "decreasing integrability is characterized only for pure powers of |x| on "
                      "the Bessel-potential scale");
    }
    if (!(s0 > s1))
      return identical_modulo_q()
                 ? [&] {
                     Verdict v;
                     v.outcome = Outcome::Holds;
                     v.rule = "identity";
                     v.evidence.notes.push_back("source and target are the same space");
                     return v;
                   }()
                 : detail::inconclusive("condition_c",
                                        "these scales require a strict smoothness drop");
    if (src.scale == Scale::SobolevSlobodetskii && tgt.scale == Scale::BesselPotential &&
        !(s0 > 0.0))
      return detail::inconclusive("condition_c",
                                  "no rule covers s0 = 0 on the Slobodetskii-to-Bessel line");
    // Weights strictly outside A_p take these scales outside the theory.
    // The power-family closed forms remain valid up to and including the
    // edge of the Muckenhoupt range, so exact boundary exponents are still
    // routed to the catalog (with a note); only the window evaluator, whose
    // characterization hypothesis is full A_p membership, refuses them.
    const auto cls0 = weights::ap_membership_closed_form(src.weight, p0).cls;
    const auto cls1 = weights::ap_membership_closed_form(tgt.weight, p1).cls;
    auto describe = [](const weights::Weight& w, double p) {
      return "weight " + w.key() + " for p = " + std::to_string(p);
    };
    if (cls0 == weights::ApClass::NonMember)
      return detail::inconclusive(
          "condition_c", "source " + describe(src.weight, p0) + " lies outside the A_p class");
    if (cls1 == weights::ApClass::NonMember)
      return detail::inconclusive(
          "condition_c", "target " + describe(tgt.weight, p1) + " lies outside the A_p class");
    if (cls0 == weights::ApClass::Unknown)
      notes.push_back("A_p membership of " + src.weight.key() + " is unverified");
    if (cls1 == weights::ApClass::Unknown)
      notes.push_back("A_p membership of " + tgt.weight.key() + " is unverified");
    if (opts.prefer_closed_form) {
      if (auto cf = closed_form_for(src.weight, s0, p0, tgt.weight, s1, p1, band)) {
        Verdict v = detail::from_closed_form(*cf);
        v.condition_c = true;
        if (cls0 == weights::ApClass::Boundary)
          v.evidence.notes.push_back("source " + describe(src.weight, p0) +
                                     " sits on the A_p boundary");
        if (cls1 == weights::ApClass::Boundary)
          v.evidence.notes.push_back("target " + describe(tgt.weight, p1) +
                                     " sits on the A_p boundary");
        for (auto& n : notes) v.evidence.notes.push_back(n);
        return v;
      }
    }
    if (cls0 == weights::ApClass::Boundary)
      return detail::inconclusive("condition_c", "source " + describe(src.weight, p0) +
                                                     " sits on the A_p boundary");
    if (cls1 == weights::ApClass::Boundary)
      return detail::inconclusive("condition_c", "target " + describe(tgt.weight, p1) +
                                                     " sits on the A_p boundary");
    ConditionEngine eng(src.weight, tgt.weight, win, pol);
    Verdict v = eng.condition_c(s0, p0, s1, p1);
    for (auto& n : notes) v.evidence.notes.push_back(n);
    return v;
  }

  const detail::EffSpace e0 = detail::effective(src);
  const detail::EffSpace e1 = detail::effective(tgt);
  std::vector<std::string> notes;
  if (e0.from_hw)
    if (auto issue = detail::ap_hypothesis_issue(src.weight, p0, notes))
      return detail::inconclusive("scale_identification", *issue);
  if (e1.from_hw)
    if (auto issue = detail::ap_hypothesis_issue(tgt.weight, p1, notes))
      return detail::inconclusive("scale_identification", *issue);

  auto attach = [&](Verdict v) {
    for (auto& n : notes) v.evidence.notes.push_back(n);
    return v;
  };

  // ---- Besov -> Besov: the ell^{q*}(ell^{p*}) criterion verdict. ----
  if (e0.besov_like && e1.besov_like) {
    if (identical_modulo_q() && src.q <= tgt.q) {
      Verdict v;
      v.outcome = Outcome::Holds;
      v.rule = "q_monotonicity";
      v.evidence.notes.push_back("same space with a larger microscopic parameter");
      return v;
    }
    const double q0 = e0.q, q1 = e1.q;
    if (upward_p && opts.prefer_closed_form && s0 > s1 && reciprocal(q0) >= reciprocal(q1)) {
      if (auto cf = closed_form_for(src.weight, s0, p0, tgt.weight, s1, p1, band)) {
        Verdict v = detail::from_closed_form(*cf);
        v.besov_criterion = true;
        return attach(std::move(v));
      }
    }
    detail::ainfty_hypothesis_notes(src.weight, tgt.weight, notes);
    ConditionEngine eng(src.weight, tgt.weight, win, pol);
    Verdict v = eng.besov(s0, p0, q0, s1, p1, q1);
    if (!upward_p && v.outcome == Outcome::Fails) {
      v.outcome = Outcome::Inconclusive;
      v.evidence.notes.push_back(
          "criterion is sufficient but not characterizing for decreasing integrability");
    }
    return attach(std::move(v));
  }

  // ---- F-like -> F-like: condition (C); the microscopic parameters drop out. ----
  if (!e0.besov_like && !e1.besov_like) {
    if (!upward_p)
      return detail::inconclusive(
          "downward", "decreasing integrability is characterized only for pure powers of |x| on "
                      "the Bessel-potential scale");
    if (!(s0 > s1)) {
      if (identical_modulo_q() && (!src.uses_q() || src.q <= tgt.q)) {
        Verdict v;
        v.outcome = Outcome::Holds;
        v.rule = "q_monotonicity";
        v.evidence.notes.push_back("same space with a larger microscopic parameter");
        return v;
      }
      return detail::inconclusive("condition_c",
                                  "the sup criterion characterizes only a strict smoothness drop");
    }
    if (opts.prefer_closed_form) {
      if (auto cf = closed_form_for(src.weight, s0, p0, tgt.weight, s1, p1, band)) {
        Verdict v = detail::from_closed_form(*cf);
        v.condition_c = true;
        return attach(std::move(v));
      }
    }
    detail::ainfty_hypothesis_notes(src.weight, tgt.weight, notes);
    ConditionEngine eng(src.weight, tgt.weight, win, pol);
    return attach(eng.condition_c(s0, p0, s1, p1));
  }

  // ---- Mixed Besov/F-like pairs: exact cross-scale patterns, then
  //      sufficient reductions (Holds or Inconclusive, never Fails). ----
  detail::ainfty_hypothesis_notes(src.weight, tgt.weight, notes);
  const bool jf_ranges = p0 > 1.0 && reciprocal(p0) > reciprocal(p1) && !std::isinf(p1);
  auto run_condition_c = [&]() {
    if (opts.prefer_closed_form)
      if (auto cf = closed_form_for(src.weight, s0, p0, tgt.weight, s1, p1, band)) {
        Verdict v = detail::from_closed_form(*cf);
        v.condition_c = true;
        return v;
      }
    ConditionEngine eng(src.weight, tgt.weight, win, pol);
    return eng.condition_c(s0, p0, s1, p1);
  };

  if (e0.besov_like && !e1.besov_like) {
    // Besov source, F-like target.
    const double q0 = e0.q;
    bool q_ok = q0 >= 1.0 && (e1.q_free || (e1.q >= 1.0));
    if (jf_ranges && s0 > s1 && q_ok && nearly_equal(q0, p1, 1e-12)) {
      Verdict v = run_condition_c();
      v.rule = "jawerth_franke_bf:" + v.rule;
      return attach(std::move(v));
    }
    if (jf_ranges && s0 > s1 && q_ok && reciprocal(q0) > reciprocal(p1)) {
      Verdict v = run_condition_c();
      if (v.outcome == Outcome::Holds) {
        v.rule = "q_monotonicity+jawerth_franke_bf:" + v.rule;
        return attach(std::move(v));
      }
      notes.push_back("cross-scale pattern after enlarging the source microscopic parameter "
                      "was negative; not characterizing here");
    }
    // Elementary reduction: the F-like target contains B^{s1}_{p1,min(p1,q)}.
    double qt = e1.q_free ? 1.0 : std::min(p1, e1.q);
    if (upward_p) {
      ConditionEngine eng(src.weight, tgt.weight, win, pol);
      Verdict v = eng.besov(s0, p0, q0, s1, p1, qt);
      if (v.outcome == Outcome::Holds) {
        v.rule = "besov_reduction:" + v.rule;
        return attach(std::move(v));
      }
      notes.push_back("elementary reduction through the Besov criterion was negative");
    }
    return attach(detail::inconclusive(
        "cross_scale", "no characterizing cross-scale rule applies and the sufficient "
                       "reductions were negative"));
  }

  // F-like source, Besov target.
  const double q1 = e1.q;
  bool q_ok = q1 >= 1.0 && (e0.q_free || (e0.q >= 1.0));
  if (jf_ranges && s0 > s1 && q_ok && nearly_equal(q1, p0, 1e-12)) {
    Verdict v = run_condition_c();
    v.rule = "jawerth_franke_fb:" + v.rule;
    return attach(std::move(v));
  }
  if (jf_ranges && s0 > s1 && q_ok && reciprocal(q1) < reciprocal(p0)) {
    Verdict v = run_condition_c();
    if (v.outcome == Outcome::Holds) {
      v.rule = "jawerth_franke_fb+q_monotonicity:" + v.rule;
      return attach(std::move(v));
    }
    notes.push_back("cross-scale pattern before enlarging the target microscopic parameter "
                    "was negative; not characterizing here");
  }
  double qs = e0.q_free ? kInf : std::max(p0, e0.q);
  if (upward_p) {
    ConditionEngine eng(src.weight, tgt.weight, win, pol);
    Verdict v = eng.besov(s0, p0, qs, s1, p1, q1);
    if (v.outcome == Outcome::Holds) {
      v.rule = "besov_reduction:" + v.rule;
      return attach(std::move(v));
    }
    notes.push_back("elementary reduction through the Besov criterion was negative");
  }
  return attach(detail::inconclusive(
      "cross_scale",
      "no characterizing cross-scale rule applies and the sufficient reductions were negative"));
}

// ---------------------------------------------------------------------------
// Cross-validation sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  EmbeddingQuery query;
  ClosedFormVerdict closed;
  Verdict window;
  bool boundary = false;   // closed form inside the band; excluded from agreement
  bool agree = false;      // both decided and equal
  bool disagree = false;   // both decided and different
};

struct SweepReport {
  std::vector<SweepRow> rows;
  int n_rows = 0;
  int n_agree = 0;
  int n_disagree = 0;
  int n_inconclusive = 0;
  int n_boundary = 0;
  int n_boundary_violations = 0;  // boundary rows where the window said Fails
  double agreement_rate = 1.0;    // among decided, non-boundary rows
  double inconclusive_rate = 0.0;
};

// Compares the window evaluator against the closed form on each query.
// Queries must use cataloged weight pairs. Engines are cached per weight
// pair, so large (s, p) grids over few weights stay cheap.
inline SweepReport cross_validate(std::span<const EmbeddingQuery> grid, const dyadic::Window& win,
                                  const EvalPolicy& pol = {}) {
  SweepReport rep;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<ConditionEngine>> engines;
  for (const auto& q : grid) {
    q.validate();
    auto cf = closed_form_for(q.source.weight, q.source.s, q.source.p, q.target.weight, q.target.s,
                              q.target.p, pol.boundary_band);
    if (!cf) throw InvalidSpec("cross_validate: query weights are not a cataloged pair");
    auto key = std::make_pair(q.source.weight.key(), q.target.weight.key());
    auto it = engines.find(key);
    if (it == engines.end())
      it = engines
               .emplace(key, std::make_shared<ConditionEngine>(q.source.weight, q.target.weight,
                                                               win, pol))
               .first;
    SweepRow row{q, *cf, {}, false, false, false};
    bool besov_pair = q.source.scale == Scale::Besov && q.target.scale == Scale::Besov;
    row.window = besov_pair
                     ? it->second->besov(q.source.s, q.source.p, q.source.q, q.target.s,
                                         q.target.p, q.target.q)
                     : it->second->condition_c(q.source.s, q.source.p, q.target.s, q.target.p);

    row.boundary = cf->outcome == FormOutcome::Boundary;
    if (row.boundary) {
      ++rep.n_boundary;
      if (row.window.outcome == Outcome::Fails) ++rep.n_boundary_violations;
    } else if (row.window.outcome == Outcome::Inconclusive) {
      ++rep.n_inconclusive;
    } else {
      bool closed_holds = cf->outcome == FormOutcome::Holds;
      bool window_holds = row.window.outcome == Outcome::Holds;
      row.agree = closed_holds == window_holds;
      row.disagree = !row.agree;
      rep.n_agree += row.agree;
      rep.n_disagree += row.disagree;
    }
    rep.rows.push_back(std::move(row));
  }
  rep.n_rows = static_cast<int>(rep.rows.size());
  int decided = rep.n_agree + rep.n_disagree;
  rep.agreement_rate = decided > 0 ? static_cast<double>(rep.n_agree) / decided : 1.0;
  int off_boundary = decided + rep.n_inconclusive;
  rep.inconclusive_rate =
      off_boundary > 0 ? static_cast<double>(rep.n_inconclusive) / off_boundary : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Grid builders for sweeps
// ---------------------------------------------------------------------------

inline EmbeddingQuery make_query(Scale scale0, double s0, double p0, double q0, weights::Weight w0,
                                 Scale scale1, double s1, double p1, double q1,
                                 weights::Weight w1) {
  EmbeddingQuery q{SpaceSpec{scale0, s0, p0, q0, std::move(w0)},
                   SpaceSpec{scale1, s1, p1, q1, std::move(w1)}};
  return q;
}

// F -> F pairs over s in {0,0.25,...,2} (s0 > s1) and p in {1.5,2,3,4}
// (p0 <= p1), unweighted, with rows closer than margin_excl to the
// closed-form boundary removed.
inline std::vector<EmbeddingQuery> unweighted_grid(int d, double margin_excl = 0.01) {
  std::vector<double> ss;
  for (int i = 0; i <= 8; ++i) ss.push_back(0.25 * i);
  std::vector<double> ps = {1.5, 2.0, 3.0, 4.0};
  weights::Weight one = weights::Weight::constant(d);
  std::vector<EmbeddingQuery> grid;
  for (double s0 : ss)
    for (double s1 : ss) {
      if (!(s0 > s1)) continue;
      for (double p0 : ps)
        for (double p1 : ps) {
          if (p0 > p1) continue;
          double margin = (s0 - d / p0) - (s1 - d / p1);
          if (std::abs(margin) < margin_excl) continue;
          grid.push_back(make_query(Scale::TriebelLizorkin, s0, p0, 2.0, one,
                                    Scale::TriebelLizorkin, s1, p1, 2.0, one));
        }
    }
  return grid;
}

// Radial-power F -> F pairs in d=1 over alpha_i, beta_i in {-0.5,0,0.5,1}
// with the same (s, p) grid, excluding rows near any closed-form boundary.
inline std::vector<EmbeddingQuery> radial_power_grid(double margin_excl = 0.05) {
  const int d = 1;
  std::vector<double> expos = {-0.5, 0.0, 0.5, 1.0};
  std::vector<double> ss;
  for (int i = 0; i <= 8; ++i) ss.push_back(0.25 * i);
  std::vector<double> ps = {1.5, 2.0, 3.0, 4.0};
  std::vector<weights::Weight> ws;
  for (double a : expos)
    for (double b : expos) ws.push_back(weights::Weight::radial_power(d, a, b));
  std::vector<EmbeddingQuery> grid;
  for (const auto& w0 : ws)
    for (const auto& w1 : ws) {
      const auto& f0 = w0.as<weights::RadialPowerW>();
      const auto& f1 = w1.as<weights::RadialPowerW>();
      for (double s0 : ss)
        for (double s1 : ss) {
          if (!(s0 > s1)) continue;
          for (double p0 : ps)
            for (double p1 : ps) {
              if (p0 > p1) continue;
              auto cf = closed_form_radial(s0, p0, f0.alpha, f0.beta, s1, p1, f1.alpha, f1.beta, d);
              bool near_boundary = false;
              for (const auto& m : cf.margins) near_boundary |= std::abs(m.value) < margin_excl;
              if (near_boundary) continue;
              grid.push_back(make_query(Scale::TriebelLizorkin, s0, p0, 2.0, w0,
                                        Scale::TriebelLizorkin, s1, p1, 2.0, w1));
            }
        }
    }
  return grid;
}

// Two-block product weights in d=2 (dims = (1,1)).
inline std::vector<EmbeddingQuery> product_power_grid(double margin_excl = 0.05) {
  std::vector<double> expos = {-0.5, 0.0, 0.5, 1.0};
  std::vector<double> ss;
  for (int i = 0; i <= 8; ++i) ss.push_back(0.25 * i);
  std::vector<double> ps = {1.5, 2.0, 3.0, 4.0};
  std::vector<weights::Weight> ws;
  std::vector<std::array<double, 2>> alphas;
  for (double a : expos)
    for (double b : expos) {
      ws.push_back(weights::Weight::product_power({1, 1}, {a, b}));
      alphas.push_back({a, b});
    }
  std::vector<EmbeddingQuery> grid;
  const int dims[2] = {1, 1};
  for (std::size_t i = 0; i < ws.size(); ++i)
    for (std::size_t j = 0; j < ws.size(); ++j)
      for (double s0 : ss)
        for (double s1 : ss) {
          if (!(s0 > s1)) continue;
          for (double p0 : ps)
            for (double p1 : ps) {
              if (p0 > p1) continue;
              auto cf = closed_form_product(dims, alphas[i], alphas[j], s0, p0, s1, p1);
              bool near_boundary = false;
              for (const auto& m : cf.margins)
                if (m.name != "unweighted_implied") near_boundary |= std::abs(m.value) < margin_excl;
              if (near_boundary) continue;
              grid.push_back(make_query(Scale::TriebelLizorkin, s0, p0, 2.0, ws[i],
                                        Scale::TriebelLizorkin, s1, p1, 2.0, ws[j]));
            }
        }
  return grid;
}

// Distance weights to the unit circle in d=2.
inline std::vector<EmbeddingQuery> distance_power_grid(double margin_excl = 0.05) {
  const int d = 2;
  weights::Manifold circle = weights::Manifold::sphere({0.0, 0.0}, 1.0);
  std::vector<double> gammas = {-0.5, 0.0, 0.5, 1.0};
  std::vector<double> ss;
  for (int i = 0; i <= 8; ++i) ss.push_back(0.25 * i);
  std::vector<double> ps = {1.5, 2.0, 3.0, 4.0};
  std::vector<EmbeddingQuery> grid;
  for (double g0 : gammas)
    for (double g1 : gammas)
      for (double s0 : ss)
        for (double s1 : ss) {
          if (!(s0 > s1)) continue;
          for (double p0 : ps)
            for (double p1 : ps) {
              if (p0 > p1) continue;
              auto cf = closed_form_distance(1, g0, g1, s0, p0, s1, p1, d);
              bool near_boundary = false;
              for (const auto& m : cf.margins) near_boundary |= std::abs(m.value) < margin_excl;
              if (near_boundary) continue;
              grid.push_back(make_query(Scale::TriebelLizorkin, s0, p0, 2.0,
                                        weights::Weight::distance_power(d, circle, g0),
                                        Scale::TriebelLizorkin, s1, p1, 2.0,
                                        weights::Weight::distance_power(d, circle, g1)));
            }
        }
  return grid;
}

}  // namespace embedkit::criteria
