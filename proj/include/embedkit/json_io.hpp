#pragma once

// JSON and CSV serialization for specs and reports. JSON is the exchange
// format for inputs (weights, spaces, queries, windows, policies, grids,
// synthetic field descriptors) and for structured reports; CSV is the
// plot-ready tabular format. Infinite exponents travel as the string "inf"
// because JSON numbers cannot carry them. Reports append a schema_version
// field and CSV files start with a versioned comment line, so downstream
// regression tooling can pin the layout.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "criteria.hpp"
#include "dyadic.hpp"
#include "oracle.hpp"
#include "weights.hpp"

namespace embedkit::jsonio {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Scalars that may be infinite
// ---------------------------------------------------------------------------

inline json num_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num_from_json(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
    if (s == "-inf" || s == "-infinity") return -kInf;
  }
  if (j.is_null()) return kNaN;
  throw InvalidSpec(std::string(what) + ": expected a number or \"inf\"");
}

namespace detail {

// Fixed CSV float format: shortest-roundtrip is overkill, 17 significant
// digits reproduce the double exactly and format identically everywhere.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

template <typename T>
json int_array(const std::vector<T>& v) {
  json a = json::array();
  for (const T& x : v) a.push_back(x);
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

inline json manifold_to_json(const weights::Manifold& m) {
  json j;
  j["shape"] = m.shape == weights::Manifold::Shape::Sphere ? "sphere" : "circle3d";
  j["center"] = m.center;
  j["radius"] = m.radius;
  if (m.shape == weights::Manifold::Shape::Circle3d) j["normal"] = m.normal;
  return j;
}

inline weights::Manifold manifold_from_json(const json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  std::vector<double> center = j.at("center").get<std::vector<double>>();
  const double radius = num_from_json(j.at("radius"), "manifold.radius");
  if (shape == "sphere") return weights::Manifold::sphere(std::move(center), radius);
  if (shape == "circle3d") {
    std::vector<double> normal = {0.0, 0.0, 1.0};
    if (j.contains("normal")) normal = j.at("normal").get<std::vector<double>>();
    return weights::Manifold::circle3d(std::move(center), radius, std::move(normal));
  }
  throw InvalidSpec("manifold: unknown shape \"" + shape + "\"");
}

inline json weight_to_json(const weights::Weight& w) {
  using weights::Family;
  json j;
  switch (w.family()) {
    case Family::Constant:
      j["family"] = "constant";
      j["d"] = w.dim();
      j["c"] = w.as<weights::ConstantW>().c;
      break;
    case Family::RadialPower: {
      const auto& f = w.as<weights::RadialPowerW>();
      j["family"] = "radial_power";
      j["d"] = w.dim();
      j["alpha"] = f.alpha;
      j["beta"] = f.beta;
      break;
    }
    case Family::PartialRadialPower: {
      const auto& f = w.as<weights::PartialRadialPowerW>();
      j["family"] = "partial_radial_power";
      j["n"] = f.n;
      j["k"] = f.k;
      j["alpha"] = f.alpha;
      j["beta"] = f.beta;
      break;
    }
    case Family::ProductPower: {
      const auto& f = w.as<weights::ProductPowerW>();
      j["family"] = "product_power";
      j["dims"] = f.dims;
      j["alphas"] = f.alphas;
      break;
    }
    case Family::DistancePower: {
      const auto& f = w.as<weights::DistancePowerW>();
      j["family"] = "distance_power";
      j["d"] = w.dim();
      j["manifold"] = manifold_to_json(f.manifold);
      j["gamma"] = f.gamma;
      break;
    }
    case Family::Custom:
      throw InvalidSpec("custom weights have no JSON form");
  }
  if (w.scale() != 1.0) j["scale"] = w.scale();
  return j;
}

inline weights::Weight weight_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  const auto scaled = [&j](weights::Weight w) {
    if (j.contains("scale")) return w.scaled(num_from_json(j.at("scale"), "weight.scale"));
    return w;
  };
  if (family == "constant") {
    const int d = j.at("d").get<int>();
    const double c = j.contains("c") ? num_from_json(j.at("c"), "weight.c") : 1.0;
    return scaled(weights::Weight::constant(d, c));
  }
  if (family == "radial_power") {
    return scaled(weights::Weight::radial_power(j.at("d").get<int>(),
                                                num_from_json(j.at("alpha"), "weight.alpha"),
                                                num_from_json(j.at("beta"), "weight.beta")));
  }
  if (family == "partial_radial_power") {
    return scaled(weights::Weight::partial_radial_power(
        j.at("n").get<int>(), j.at("k").get<int>(), num_from_json(j.at("alpha"), "weight.alpha"),
        num_from_json(j.at("beta"), "weight.beta")));
  }
  if (family == "product_power") {
    return scaled(weights::Weight::product_power(j.at("dims").get<std::vector<int>>(),
                                                 j.at("alphas").get<std::vector<double>>()));
  }
  if (family == "distance_power") {
    return scaled(weights::Weight::distance_power(j.at("d").get<int>(),
                                                  manifold_from_json(j.at("manifold")),
                                                  num_from_json(j.at("gamma"), "weight.gamma")));
  }
  if (family == "custom")
    throw InvalidSpec("weight: the \"custom\" family cannot be constructed from JSON");
  throw InvalidSpec("weight: unknown family \"" + family + "\"");
}

// ---------------------------------------------------------------------------
// Spaces and queries
// ---------------------------------------------------------------------------

inline criteria::Scale scale_from_string(const std::string& s) {
  if (s == "besov") return criteria::Scale::Besov;
  if (s == "triebel_lizorkin") return criteria::Scale::TriebelLizorkin;
  if (s == "bessel_potential") return criteria::Scale::BesselPotential;
  if (s == "sobolev_slobodetskii") return criteria::Scale::SobolevSlobodetskii;
  throw InvalidSpec("space: unknown scale \"" + s + "\"");
}

inline json space_to_json(const criteria::SpaceSpec& sp) {
  json j;
  j["scale"] = criteria::to_string(sp.scale);
  j["s"] = num_to_json(sp.s);
  j["p"] = num_to_json(sp.p);
  if (sp.uses_q()) j["q"] = num_to_json(sp.q);
  j["weight"] = weight_to_json(sp.weight);
  return j;
}

inline criteria::SpaceSpec space_from_json(const json& j) {
  criteria::SpaceSpec sp;
  sp.scale = scale_from_string(j.at("scale").get<std::string>());
  sp.s = num_from_json(j.at("s"), "space.s");
  sp.p = num_from_json(j.at("p"), "space.p");
  if (j.contains("q")) sp.q = num_from_json(j.at("q"), "space.q");
  if (j.contains("weight")) {
    sp.weight = weight_from_json(j.at("weight"));
  } else if (j.contains("d")) {
    sp.weight = weights::Weight::constant(j.at("d").get<int>());
  } else {
    throw InvalidSpec("space: needs a \"weight\" or a dimension \"d\"");
  }
  return sp;
}

inline json query_to_json(const criteria::EmbeddingQuery& q) {
  json j;
  j["source"] = space_to_json(q.source);
  j["target"] = space_to_json(q.target);
  return j;
}

inline criteria::EmbeddingQuery query_from_json(const json& j) {
  criteria::EmbeddingQuery q;
  q.source = space_from_json(j.at("source"));
  q.target = space_from_json(j.at("target"));
  return q;
}

// ---------------------------------------------------------------------------
// Windows, policies, quadrature options
// ---------------------------------------------------------------------------

inline json window_to_json(const dyadic::Window& w) {
  json j;
  j["nu_max"] = w.nu_max;
  j["radius_factor"] = w.radius_factor;
  if (w.radius_cap)
    j["radius_cap"] = *w.radius_cap;
  else
    j["radius_cap"] = nullptr;
  if (w.filter)
    j["filter"] = dyadic::to_string(*w.filter);
  else
    j["filter"] = nullptr;
  j["region_eps"] = w.region_eps;
  j["budget"] = w.budget;
  return j;
}

inline dyadic::Window window_from_json(const json& j, dyadic::Window base = {}) {
  dyadic::Window w = base;
  if (j.contains("nu_max")) w.nu_max = j.at("nu_max").get<int>();
  if (j.contains("radius_factor")) w.radius_factor = j.at("radius_factor").get<double>();
  if (j.contains("radius_cap")) {
    if (j.at("radius_cap").is_null())
      w.radius_cap.reset();
    else
      w.radius_cap = j.at("radius_cap").get<std::int64_t>();
  }
  if (j.contains("filter")) {
    if (j.at("filter").is_null()) {
      w.filter.reset();
    } else {
      const std::string f = j.at("filter").get<std::string>();
      if (f == "near_origin")
        w.filter = dyadic::Region::NearOrigin;
      else if (f == "intermediate")
        w.filter = dyadic::Region::Intermediate;
      else if (f == "far")
        w.filter = dyadic::Region::Far;
      else
        throw InvalidSpec("window: unknown region filter \"" + f + "\"");
    }
  }
  if (j.contains("region_eps")) w.region_eps = j.at("region_eps").get<double>();
  if (j.contains("budget")) w.budget = j.at("budget").get<std::int64_t>();
  return w;
}

inline json quad_to_json(const quad::Options& o) {
  json j;
  j["rel_tol"] = o.rel_tol;
  j["max_depth"] = o.max_depth;
  j["max_evals"] = o.max_evals;
  return j;
}

inline quad::Options quad_from_json(const json& j, quad::Options base = {}) {
  quad::Options o = base;
  if (j.contains("rel_tol")) o.rel_tol = j.at("rel_tol").get<double>();
  if (j.contains("max_depth")) o.max_depth = j.at("max_depth").get<int>();
  if (j.contains("max_evals")) o.max_evals = j.at("max_evals").get<long long>();
  return o;
}

inline json policy_to_json(const criteria::EvalPolicy& p) {
  json j;
  j["slope_threshold"] = p.slope_threshold;
  j["residual_max"] = p.residual_max;
  j["min_samples"] = p.min_samples;
  j["tail_points"] = p.tail_points;
  j["line_nu_max"] = p.line_nu_max;
  j["ladder_j_max"] = p.ladder_j_max;
  j["region_eps"] = p.region_eps;
  j["boundary_band"] = p.boundary_band;
  j["quad"] = quad_to_json(p.quad);
  j["threads"] = p.threads;
  return j;
}

inline criteria::EvalPolicy policy_from_json(const json& j, criteria::EvalPolicy base = {}) {
  criteria::EvalPolicy p = base;
  if (j.contains("slope_threshold")) p.slope_threshold = j.at("slope_threshold").get<double>();
  if (j.contains("residual_max")) p.residual_max = j.at("residual_max").get<double>();
  if (j.contains("min_samples")) p.min_samples = j.at("min_samples").get<int>();
  if (j.contains("tail_points")) p.tail_points = j.at("tail_points").get<int>();
  if (j.contains("line_nu_max")) p.line_nu_max = j.at("line_nu_max").get<int>();
  if (j.contains("ladder_j_max")) p.ladder_j_max = j.at("ladder_j_max").get<int>();
  if (j.contains("region_eps")) p.region_eps = j.at("region_eps").get<double>();
  if (j.contains("boundary_band")) p.boundary_band = j.at("boundary_band").get<double>();
  if (j.contains("quad")) p.quad = quad_from_json(j.at("quad"), p.quad);
  if (j.contains("threads")) p.threads = j.at("threads").get<int>();
  return p;
}

// ---------------------------------------------------------------------------
// Verdicts and evidence
// ---------------------------------------------------------------------------

inline json fit_to_json(const dyadic::SlopeFit& f) {
  json j;
  j["slope"] = num_to_json(f.slope);
  j["intercept"] = num_to_json(f.intercept);
  j["residual"] = num_to_json(f.residual);
  j["n"] = f.n;
  return j;
}

inline json cube_to_json(const dyadic::Cube& c) {
  json j;
  j["nu"] = c.nu;
  j["m"] = c.m;
  return j;
}

inline json evidence_to_json(const criteria::Evidence& e) {
  json j;
  j["sup_value"] = num_to_json(e.sup_value);
  j["log2_sup"] = num_to_json(e.log2_sup);
  j["witness"] = e.witness ? cube_to_json(*e.witness) : json(nullptr);
  json slopes = json::array();
  for (const auto& nf : e.slopes) {
    json s = fit_to_json(nf.fit);
    s["name"] = nf.name;
    slopes.push_back(std::move(s));
  }
  j["slopes"] = std::move(slopes);
  json margins = json::array();
  for (const auto& m : e.margins) {
    json mi;
    mi["name"] = m.name;
    mi["value"] = num_to_json(m.value);
    margins.push_back(std::move(mi));
  }
  j["margins"] = std::move(margins);
  j["notes"] = e.notes;
  return j;
}

inline json verdict_to_json(const criteria::Verdict& v) {
  json j;
  j["outcome"] = criteria::to_string(v.outcome);
  j["rule"] = v.rule;
  j["condition_c"] = v.condition_c;
  j["besov_criterion"] = v.besov_criterion;
  j["closed_form"] = v.closed_form;
  j["downward_rule"] = v.downward_rule;
  j["evidence"] = evidence_to_json(v.evidence);
  return j;
}

inline json closed_form_to_json(const criteria::ClosedFormVerdict& v) {
  json j;
  j["outcome"] = criteria::to_string(v.outcome);
  j["rule"] = v.rule;
  json margins = json::array();
  for (const auto& m : v.margins) {
    json mi;
    mi["name"] = m.name;
    mi["value"] = num_to_json(m.value);
    margins.push_back(std::move(mi));
  }
  j["margins"] = std::move(margins);
  j["min_margin"] = num_to_json(v.min_margin);
  return j;
}

// ---------------------------------------------------------------------------
// A_p estimates
// ---------------------------------------------------------------------------

inline json box_to_json(const Box& b) {
  json j;
  j["lo"] = b.lo;
  j["hi"] = b.hi;
  return j;
}

inline json ap_estimate_to_json(const weights::ApEstimate& e) {
  json j;
  j["p"] = num_to_json(e.p);
  j["supremum"] = num_to_json(e.supremum);
  j["argmax"] = box_to_json(e.argmax);
  j["growth_slope"] = num_to_json(e.growth_slope);
  j["slope_shrink"] = num_to_json(e.slope_shrink);
  j["slope_grow"] = num_to_json(e.slope_grow);
  j["classification"] = weights::to_string(e.classification);
  j["note"] = e.note;
  return j;
}

// ---------------------------------------------------------------------------
// Sweep reports
// ---------------------------------------------------------------------------

inline json sweep_to_json(const criteria::SweepReport& rep) {
  json j;
  json rows = json::array();
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    json row;
    row["index"] = i;
    row["query"] = query_to_json(r.query);
    row["closed"] = closed_form_to_json(r.closed);
    row["window"] = verdict_to_json(r.window);
    row["boundary"] = r.boundary;
    row["agree"] = r.agree;
    row["disagree"] = r.disagree;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["n_rows"] = rep.n_rows;
  j["n_agree"] = rep.n_agree;
  j["n_disagree"] = rep.n_disagree;
  j["n_inconclusive"] = rep.n_inconclusive;
  j["n_boundary"] = rep.n_boundary;
  j["n_boundary_violations"] = rep.n_boundary_violations;
  j["agreement_rate"] = num_to_json(rep.agreement_rate);
  j["inconclusive_rate"] = num_to_json(rep.inconclusive_rate);
  return j;
}

inline std::string sweep_to_csv(const criteria::SweepReport& rep) {
  std::ostringstream os;
  os << "# embedkit sweep csv v1\n";
  os << "index,scale0,s0,p0,q0,weight0,scale1,s1,p1,q1,weight1,"
        "closed_outcome,closed_rule,min_margin,window_outcome,window_rule,sup_value,"
        "boundary,agree,disagree\n";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    const auto& s0 = r.query.source;
    const auto& s1 = r.query.target;
    os << i << ',' << criteria::to_string(s0.scale) << ',' << detail::fmt(s0.s) << ','
       << detail::fmt(s0.p) << ',' << detail::fmt(s0.q) << ','
       << detail::csv_quote(s0.weight.key()) << ',' << criteria::to_string(s1.scale) << ','
       << detail::fmt(s1.s) << ',' << detail::fmt(s1.p) << ',' << detail::fmt(s1.q) << ','
       << detail::csv_quote(s1.weight.key()) << ',' << criteria::to_string(r.closed.outcome)
       << ',' << detail::csv_quote(r.closed.rule) << ',' << detail::fmt(r.closed.min_margin)
       << ',' << criteria::to_string(r.window.outcome) << ','
       << detail::csv_quote(r.window.rule) << ',' << detail::fmt(r.window.evidence.sup_value)
       << ',' << (r.boundary ? 1 : 0) << ',' << (r.agree ? 1 : 0) << ',' << (r.disagree ? 1 : 0)
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Oracle: grids, field descriptors, probe and interpolation reports
// ---------------------------------------------------------------------------

inline json grid_to_json(const oracle::Grid& g) {
  json j;
  j["d"] = g.d;
  j["L"] = g.L;
  j["N"] = g.N;
  return j;
}

inline oracle::Grid grid_from_json(const json& j, oracle::Grid base) {
  oracle::Grid g = base;
  if (j.contains("d")) {
    g = oracle::Grid::standard(j.at("d").get<int>());
  }
  if (j.contains("L")) g.L = num_from_json(j.at("L"), "grid.L");
  if (j.contains("N")) g.N = j.at("N").get<int>();
  g.validate();
  return g;
}

// Synthetic field descriptors: {"kind": "tone"|"gaussian"|"atom"|"random", ...}.
inline oracle::GridField field_from_descriptor(const json& j, const oracle::Grid& g) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tone") {
    const std::vector<int> idx = j.at("j").get<std::vector<int>>();
    return oracle::make_tone(g, idx);
  }
  if (kind == "gaussian") {
    const std::vector<double> center = j.at("center").get<std::vector<double>>();
    return oracle::make_gaussian(g, center, num_from_json(j.at("sigma"), "field.sigma"));
  }
  if (kind == "atom") {
    const std::vector<int> m = j.at("m").get<std::vector<int>>();
    return oracle::make_atom(g, j.at("nu").get<int>(), m);
  }
  if (kind == "random") {
    oracle::RandomFieldOptions opt;
    if (j.contains("band")) opt.band = num_from_json(j.at("band"), "field.band");
    if (j.contains("envelope")) opt.envelope = num_from_json(j.at("envelope"), "field.envelope");
    return oracle::random_bandlimited(g, j.at("seed").get<std::uint64_t>(), opt);
  }
  throw InvalidSpec("field descriptor: unknown kind \"" + kind + "\"");
}

inline json probe_to_json(const oracle::ProbeReport& rep) {
  json j;
  j["grid"] = grid_to_json(rep.grid);
  j["max_ratio"] = num_to_json(rep.max_ratio);
  j["conclusion"] = oracle::to_string(rep.conclusion);
  json lines = json::array();
  for (const auto& line : rep.lines) {
    json lj;
    lj["name"] = line.name;
    json samples = json::array();
    for (const auto& s : line.samples) {
      json sj;
      sj["nu"] = s.nu;
      sj["m"] = s.m;
      sj["source_norm"] = num_to_json(s.source_norm);
      sj["target_norm"] = num_to_json(s.target_norm);
      sj["ratio"] = num_to_json(s.ratio);
      sj["term"] = num_to_json(s.term);
      samples.push_back(std::move(sj));
    }
    lj["samples"] = std::move(samples);
    lj["measured"] = fit_to_json(line.measured);
    lj["analytic"] = fit_to_json(line.analytic);
    lj["slope_gap"] = num_to_json(line.slope_gap);
    lines.push_back(std::move(lj));
  }
  j["lines"] = std::move(lines);
  j["warnings"] = rep.warnings;
  return j;
}

inline std::string probe_to_csv(const oracle::ProbeReport& rep) {
  std::ostringstream os;
  os << "# embedkit probe csv v1\n";
  os << "line,nu,m0,m1,source_norm,target_norm,ratio,term\n";
  for (const auto& line : rep.lines) {
    for (const auto& s : line.samples) {
      os << detail::csv_quote(line.name) << ',' << s.nu << ',' << s.m[0] << ','
         << (s.m.size() > 1 ? std::to_string(s.m[1]) : std::string()) << ','
         << detail::fmt(s.source_norm) << ',' << detail::fmt(s.target_norm) << ','
         << detail::fmt(s.ratio) << ',' << detail::fmt(s.term) << '\n';
    }
  }
  return os.str();
}

inline json gn_to_json(const oracle::GnSpec& spec, const oracle::GnBatchReport& rep) {
  json j;
  j["theta"] = num_to_json(spec.theta);
  j["source"] = {{"s", num_to_json(spec.s0)},
                 {"p", num_to_json(spec.p0)},
                 {"q", num_to_json(spec.q0)},
                 {"weight", weight_to_json(spec.w0)}};
  j["target"] = {{"s", num_to_json(spec.s1)},
                 {"p", num_to_json(spec.p1)},
                 {"q", num_to_json(spec.q1)},
                 {"weight", weight_to_json(spec.w1)}};
  const auto mix = oracle::gn_interpolate(spec);
  j["interpolated"] = {{"s", num_to_json(mix.s)},
                       {"p", num_to_json(mix.p)},
                       {"q", num_to_json(mix.q)},
                       {"weight", weight_to_json(mix.w)}};
  j["seed"] = rep.seed;
  j["count"] = rep.results.size();
  j["max_ratio"] = num_to_json(rep.max_ratio);
  json rows = json::array();
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const auto& r = rep.results[i];
    json row;
    row["index"] = i;
    row["ratio"] = num_to_json(r.ratio);
    row["numerator"] = num_to_json(r.numerator);
    row["denominator0"] = num_to_json(r.denominator0);
    row["denominator1"] = num_to_json(r.denominator1);
    rows.push_back(std::move(row));
  }
  j["results"] = std::move(rows);
  return j;
}

inline std::string gn_to_csv(const oracle::GnBatchReport& rep) {
  std::ostringstream os;
  os << "# embedkit gn csv v1\n";
  os << "index,ratio,numerator,denominator0,denominator1\n";
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const auto& r = rep.results[i];
    os << i << ',' << detail::fmt(r.ratio) << ',' << detail::fmt(r.numerator) << ','
       << detail::fmt(r.denominator0) << ',' << detail::fmt(r.denominator1) << '\n';
  }
  return os.str();
}

}  // namespace embedkit::jsonio
