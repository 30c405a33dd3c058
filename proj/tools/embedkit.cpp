// embedkit command-line frontend.
//
//   embedkit check --spec query.json          decide one embedding (exit 0/1/2)
//   embedkit ap    --spec ap.json             A_p constant estimates vs closed form
//   embedkit cube  --spec cube.json           weighted dyadic cube-measure table
//   embedkit probe --spec probe.json          witness-atom embedding ratio probe
//   embedkit gn    --spec gn.json             interpolation inequality batch
//   embedkit sweep --spec sweep.json          closed-form vs window cross-validation
//
// Reports go to --out (default stdout) as json (default) or csv. Identical
// config and seed produce byte-identical reports. Exit codes: check returns
// 0 = Holds, 1 = Fails, 2 = Inconclusive; table commands return 0 on
// success; 64 = malformed spec; 70 = internal evaluation failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "embedkit/json_io.hpp"

namespace {

using embedkit::jsonio::json;
namespace jio = embedkit::jsonio;
namespace criteria = embedkit::criteria;
namespace weights = embedkit::weights;
namespace dyadic = embedkit::dyadic;
namespace oracle = embedkit::oracle;
namespace quad = embedkit::quad;

constexpr int kExitHolds = 0;
constexpr int kExitFails = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitBadSpec = 64;
constexpr int kExitInternal = 70;

struct RunConfig {
  std::string spec_path;
  std::string grid_path;
  std::string out_path;
  std::string format = "json";
  int nu_max = -1;             // < 0: keep spec/default value
  std::int64_t m_radius = -1;  // < 0: keep spec/default value
  double eps = -1.0;           // < 0: keep spec/default value
  double tol = -1.0;           // < 0: keep spec/default value
  std::uint64_t seed = 0;
  bool seed_set = false;
};

json load_spec(const std::string& path) {
  if (path.empty()) throw embedkit::InvalidSpec("a spec file is required (--spec PATH)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw embedkit::InvalidSpec("cannot open spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw embedkit::InvalidSpec("spec file is empty: " + path);
  return json::parse(text);
}

void emit(const RunConfig& cfg, const std::string& payload) {
  if (cfg.out_path.empty()) {
    std::cout << payload;
    if (payload.empty() || payload.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary);
  if (!out) throw embedkit::Error("cannot open output file: " + cfg.out_path);
  out << payload;
  if (payload.empty() || payload.back() != '\n') out << '\n';
}

json envelope(const char* command) {
  json j;
  j["schema_version"] = jio::kSchemaVersion;
  j["command"] = command;
  return j;
}

void emit_json(const RunConfig& cfg, json j) { emit(cfg, j.dump(2)); }

const char* measure_path_name(weights::MeasurePath p) {
  switch (p) {
    case weights::MeasurePath::ClosedForm: return "closed_form";
    case weights::MeasurePath::SemiAnalytic: return "semi_analytic";
    case weights::MeasurePath::Quadrature: return "quadrature";
  }
  return "quadrature";
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

criteria::DecideOptions decide_options(const json& spec, const RunConfig& cfg, int d) {
  criteria::DecideOptions opts;
  dyadic::Window win = dyadic::Window::defaults(d);
  bool have_window = false;
  if (spec.contains("window")) {
    win = jio::window_from_json(spec.at("window"), win);
    have_window = true;
  }
  if (cfg.nu_max >= 0) {
    win.nu_max = cfg.nu_max;
    have_window = true;
  }
  if (cfg.m_radius >= 0) {
    win.radius_cap = cfg.m_radius;
    have_window = true;
  }
  if (cfg.eps >= 0.0) {
    win.region_eps = cfg.eps;
  }
  if (have_window) opts.window = win;
  if (spec.contains("policy")) opts.policy = jio::policy_from_json(spec.at("policy"));
  if (cfg.eps >= 0.0) opts.policy.region_eps = cfg.eps;
  if (cfg.tol > 0.0) opts.policy.quad.rel_tol = cfg.tol;
  if (spec.contains("prefer_closed_form"))
    opts.prefer_closed_form = spec.at("prefer_closed_form").get<bool>();
  return opts;
}

int cmd_check(const RunConfig& cfg) {
  const json spec = load_spec(cfg.spec_path);
  const auto query = jio::query_from_json(spec);
  const auto opts = decide_options(spec, cfg, query.source.dim());
  const auto verdict = criteria::decide_embedding(query, opts);

  if (cfg.format == "csv") {
    std::ostringstream os;
    os << "# embedkit check csv v1\n";
    os << "outcome,rule,sup_value,log2_sup,condition_c,closed_form\n";
    os << criteria::to_string(verdict.outcome) << ',' << jio::detail::csv_quote(verdict.rule)
       << ',' << jio::detail::fmt(verdict.evidence.sup_value) << ','
       << jio::detail::fmt(verdict.evidence.log2_sup) << ',' << (verdict.condition_c ? 1 : 0)
       << ',' << (verdict.closed_form ? 1 : 0) << '\n';
    emit(cfg, os.str());
  } else {
    json rep = envelope("check");
    rep["query"] = jio::query_to_json(query);
    if (opts.window) rep["window"] = jio::window_to_json(*opts.window);
    rep["verdict"] = jio::verdict_to_json(verdict);
    emit_json(cfg, std::move(rep));
  }
  switch (verdict.outcome) {
    case criteria::Outcome::Holds: return kExitHolds;
    case criteria::Outcome::Fails: return kExitFails;
    case criteria::Outcome::Inconclusive: return kExitInconclusive;
  }
  return kExitInternal;
}

// ---------------------------------------------------------------------------
// ap
// ---------------------------------------------------------------------------

int cmd_ap(const RunConfig& cfg) {
  const json spec = load_spec(cfg.spec_path);
  const auto w = jio::weight_from_json(spec.at("weight"));
  std::vector<double> ps;
  if (spec.contains("p")) {
    if (spec.at("p").is_array())
      for (const auto& v : spec.at("p")) ps.push_back(jio::num_from_json(v, "ap.p"));
    else
      ps.push_back(jio::num_from_json(spec.at("p"), "ap.p"));
  } else {
    ps = {1.5, 2.0, 3.0};
  }
  weights::ApCubePolicy policy;
  if (spec.contains("policy")) {
    const json& pj = spec.at("policy");
    if (pj.contains("j_max")) policy.j_max = pj.at("j_max").get<int>();
    if (pj.contains("j_min")) policy.j_min = pj.at("j_min").get<int>();
    if (pj.contains("off_offset")) policy.off_offset = pj.at("off_offset").get<double>();
    if (pj.contains("slope_threshold"))
      policy.slope_threshold = pj.at("slope_threshold").get<double>();
    if (pj.contains("quad")) policy.quad = jio::quad_from_json(pj.at("quad"), policy.quad);
  }
  if (cfg.tol > 0.0) policy.quad.rel_tol = cfg.tol;
  const double band = cfg.eps >= 0.0 ? cfg.eps : 1e-9;

  json rows = json::array();
  std::ostringstream csv;
  csv << "# embedkit ap csv v1\n";
  csv << "p,supremum,growth_slope,slope_shrink,slope_grow,classification,"
         "closed_classification,closed_margin,agree,error\n";
  for (double p : ps) {
    json row;
    row["p"] = jio::num_to_json(p);
    std::string cls = "unknown", closed_cls = "unknown", err;
    double margin = embedkit::kNaN;
    json agree = nullptr;
    try {
      const auto est = weights::estimate_ap_constant(w, p, policy);
      row["estimate"] = jio::ap_estimate_to_json(est);
      cls = weights::to_string(est.classification);
      const auto closed = weights::ap_membership_closed_form(w, p, band);
      closed_cls = weights::to_string(closed.cls);
      margin = closed.margin;
      row["closed_form"] = {{"classification", closed_cls},
                            {"margin", jio::num_to_json(closed.margin)},
                            {"inferred", closed.inferred}};
      if (closed.cls != weights::ApClass::Unknown && closed.cls != weights::ApClass::Boundary &&
          est.classification != weights::ApClass::Unknown)
        agree = (est.classification == closed.cls);
      row["agree"] = agree;
    } catch (const embedkit::Error& e) {
      err = e.what();
      row["error"] = err;
    }
    rows.push_back(std::move(row));
    csv << jio::detail::fmt(p) << ',';
    if (err.empty()) {
      const json& est = rows.back().at("estimate");
      csv << est.at("supremum").dump() << ',' << est.at("growth_slope").dump() << ','
          << est.at("slope_shrink").dump() << ',' << est.at("slope_grow").dump() << ',' << cls
          << ',' << closed_cls << ',' << jio::detail::fmt(margin) << ','
          << (agree.is_null() ? std::string() : std::string(agree.get<bool>() ? "1" : "0"))
          << ",\n";
    } else {
      csv << ",,,,,,,," << jio::detail::csv_quote(err) << '\n';
    }
  }

  if (cfg.format == "csv") {
    emit(cfg, csv.str());
  } else {
    json rep = envelope("ap");
    rep["weight"] = jio::weight_to_json(w);
    rep["rows"] = std::move(rows);
    emit_json(cfg, std::move(rep));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// cube
// ---------------------------------------------------------------------------

int cmd_cube(const RunConfig& cfg) {
  const json spec = load_spec(cfg.spec_path);
  const auto w = jio::weight_from_json(spec.at("weight"));
  int nu_min = spec.contains("nu_min") ? spec.at("nu_min").get<int>() : 0;
  int nu_max = spec.contains("nu_max") ? spec.at("nu_max").get<int>() : 8;
  if (cfg.nu_max >= 0) nu_max = cfg.nu_max;
  if (nu_max < nu_min) throw embedkit::InvalidSpec("cube: nu_max must be >= nu_min");
  std::vector<std::int64_t> m(static_cast<std::size_t>(w.dim()), 0);
  if (spec.contains("m")) {
    m = spec.at("m").get<std::vector<std::int64_t>>();
    if (static_cast<int>(m.size()) != w.dim())
      throw embedkit::InvalidSpec("cube: index m has wrong dimension");
  }
  quad::Options qopt;
  if (spec.contains("quad")) qopt = jio::quad_from_json(spec.at("quad"), qopt);
  if (cfg.tol > 0.0) qopt.rel_tol = cfg.tol;

  json rows = json::array();
  std::ostringstream csv;
  csv << "# embedkit cube csv v1\n";
  csv << "nu,m,measure,estimated_error,path,error\n";
  std::vector<double> log_nu, log_measure;
  for (int nu = nu_min; nu <= nu_max; ++nu) {
    const dyadic::Cube cube{nu, m};
    json row;
    row["nu"] = nu;
    row["m"] = m;
    std::string err;
    weights::MeasureResult res;
    try {
      res = weights::cube_measure(w, dyadic::cube_box(cube), qopt);
      row["measure"] = jio::num_to_json(res.value);
      row["estimated_error"] = jio::num_to_json(res.error);
      row["path"] = measure_path_name(res.path);
      if (res.value > 0.0 && std::isfinite(res.value)) {
        log_nu.push_back(nu);
        log_measure.push_back(res.value);
      }
    } catch (const embedkit::Error& e) {
      err = e.what();
      row["error"] = err;
    }
    rows.push_back(std::move(row));
    std::string mtxt;
    for (std::size_t i = 0; i < m.size(); ++i) mtxt += (i ? " " : "") + std::to_string(m[i]);
    csv << nu << ',' << jio::detail::csv_quote(mtxt) << ',';
    if (err.empty())
      csv << jio::detail::fmt(res.value) << ',' << jio::detail::fmt(res.error) << ','
          << measure_path_name(res.path) << ",\n";
    else
      csv << ",,," << jio::detail::csv_quote(err) << '\n';
  }

  if (cfg.format == "csv") {
    emit(cfg, csv.str());
    return 0;
  }
  json rep = envelope("cube");
  rep["weight"] = jio::weight_to_json(w);
  rep["rows"] = std::move(rows);
  if (log_nu.size() >= 3) {
    std::vector<double> ys = log_measure;
    rep["log2_slope"] = jio::fit_to_json(dyadic::fit_log_slope(log_nu, ys));
  }
  emit_json(cfg, std::move(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

int cmd_probe(const RunConfig& cfg) {
  const json spec = load_spec(cfg.spec_path);
  const auto query = jio::query_from_json(spec);
  oracle::ProbeOptions opt;
  if (spec.contains("grid"))
    opt.grid = jio::grid_from_json(spec.at("grid"), oracle::Grid::standard(query.source.dim()));
  if (spec.contains("nu_min")) opt.nu_min = spec.at("nu_min").get<int>();
  if (spec.contains("nu_max")) opt.nu_max = spec.at("nu_max").get<int>();
  if (spec.contains("fixed_position")) opt.fixed_position = spec.at("fixed_position").get<double>();
  if (spec.contains("far_position")) opt.far_position = spec.at("far_position").get<double>();
  if (spec.contains("growth_threshold"))
    opt.growth_threshold = spec.at("growth_threshold").get<double>();
  if (cfg.nu_max >= 0) opt.nu_max = cfg.nu_max;
  if (cfg.eps >= 0.0) opt.growth_threshold = cfg.eps;
  if (cfg.tol > 0.0) opt.quad.rel_tol = cfg.tol;

  const auto rep = oracle::embedding_ratio_probe(query, opt);
  if (cfg.format == "csv") {
    emit(cfg, jio::probe_to_csv(rep));
  } else {
    json out = envelope("probe");
    out["query"] = jio::query_to_json(query);
    out["report"] = jio::probe_to_json(rep);
    emit_json(cfg, std::move(out));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gn
// ---------------------------------------------------------------------------

int cmd_gn(const RunConfig& cfg) {
  const json spec = load_spec(cfg.spec_path);
  oracle::GnSpec gn;
  if (spec.contains("theta")) gn.theta = jio::num_from_json(spec.at("theta"), "gn.theta");
  const auto read_leg = [](const json& j, double& s, double& p, double& q,
                           weights::Weight& w) {
    if (j.contains("s")) s = jio::num_from_json(j.at("s"), "gn.s");
    if (j.contains("p")) p = jio::num_from_json(j.at("p"), "gn.p");
    if (j.contains("q")) q = jio::num_from_json(j.at("q"), "gn.q");
    if (j.contains("weight")) w = jio::weight_from_json(j.at("weight"));
  };
  if (spec.contains("source")) read_leg(spec.at("source"), gn.s0, gn.p0, gn.q0, gn.w0);
  if (spec.contains("target")) read_leg(spec.at("target"), gn.s1, gn.p1, gn.q1, gn.w1);
  if (spec.contains("K")) gn.K = spec.at("K").get<int>();
  if (cfg.tol > 0.0) gn.quad.rel_tol = cfg.tol;

  oracle::Grid grid = oracle::Grid::standard(gn.w0.dim());
  if (spec.contains("grid")) grid = jio::grid_from_json(spec.at("grid"), grid);
  const int count = spec.contains("count") ? spec.at("count").get<int>() : 50;
  std::uint64_t seed = spec.contains("seed") ? spec.at("seed").get<std::uint64_t>() : 2024;
  if (cfg.seed_set) seed = cfg.seed;
  oracle::RandomFieldOptions fopt;
  if (spec.contains("band")) fopt.band = jio::num_from_json(spec.at("band"), "gn.band");
  if (spec.contains("envelope"))
    fopt.envelope = jio::num_from_json(spec.at("envelope"), "gn.envelope");

  const auto batch = oracle::gn_batch(grid, gn, count, seed, fopt);
  if (cfg.format == "csv") {
    emit(cfg, jio::gn_to_csv(batch));
  } else {
    json out = envelope("gn");
    out["grid"] = jio::grid_to_json(grid);
    out["report"] = jio::gn_to_json(gn, batch);
    emit_json(cfg, std::move(out));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

std::vector<criteria::EmbeddingQuery> sweep_grid(const json& spec) {
  if (spec.contains("queries")) {
    std::vector<criteria::EmbeddingQuery> qs;
    for (const auto& qj : spec.at("queries")) qs.push_back(jio::query_from_json(qj));
    if (qs.empty()) throw embedkit::InvalidSpec("sweep: query list is empty");
    return qs;
  }
  if (spec.contains("family")) {
    const std::string fam = spec.at("family").get<std::string>();
    const int d = spec.contains("d") ? spec.at("d").get<int>() : 1;
    if (fam == "unweighted") {
      const double margin = spec.contains("margin") ? spec.at("margin").get<double>() : 0.01;
      return criteria::unweighted_grid(d, margin);
    }
    const double margin = spec.contains("margin") ? spec.at("margin").get<double>() : 0.05;
    if (fam == "radial_power") return criteria::radial_power_grid(margin);
    if (fam == "product_power") return criteria::product_power_grid(margin);
    if (fam == "distance_power") return criteria::distance_power_grid(margin);
    throw embedkit::InvalidSpec("sweep: unknown family \"" + fam + "\"");
  }
  throw embedkit::InvalidSpec("sweep: spec needs \"queries\" or \"family\"");
}

int cmd_sweep(const RunConfig& cfg) {
  json spec = cfg.spec_path.empty() ? json::object() : load_spec(cfg.spec_path);
  if (!cfg.grid_path.empty()) {
    const json g = load_spec(cfg.grid_path);
    if (g.is_array())
      spec["queries"] = g;
    else
      for (const auto& [k, v] : g.items()) spec[k] = v;
  }
  const auto queries = sweep_grid(spec);
  const int d = queries.front().source.dim();

  dyadic::Window win = dyadic::Window::defaults(d);
  if (spec.contains("window")) win = jio::window_from_json(spec.at("window"), win);
  if (cfg.nu_max >= 0) win.nu_max = cfg.nu_max;
  if (cfg.m_radius >= 0) win.radius_cap = cfg.m_radius;
  criteria::EvalPolicy pol;
  if (spec.contains("policy")) pol = jio::policy_from_json(spec.at("policy"));
  if (cfg.eps >= 0.0) {
    win.region_eps = cfg.eps;
    pol.region_eps = cfg.eps;
  }
  if (cfg.tol > 0.0) pol.quad.rel_tol = cfg.tol;

  const auto rep = criteria::cross_validate(queries, win, pol);
  if (cfg.format == "csv") {
    emit(cfg, jio::sweep_to_csv(rep));
  } else {
    json out = envelope("sweep");
    out["window"] = jio::window_to_json(win);
    out["report"] = jio::sweep_to_json(rep);
    emit_json(cfg, std::move(out));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embedkit: weighted function-space embedding criteria and norm oracles"};
  app.require_subcommand(1);

  RunConfig cfg;
  const auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--spec", cfg.spec_path, "input spec file (JSON)");
    sub->add_option("--out", cfg.out_path, "output file (default stdout)");
    sub->add_option("--format", cfg.format, "output format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--nu-max", cfg.nu_max, "override the finest dyadic level");
    sub->add_option("--m-radius", cfg.m_radius, "override the translation radius cap");
    sub->add_option("--eps", cfg.eps, "override the region/boundary epsilon");
    sub->add_option("--tol", cfg.tol, "override the quadrature relative tolerance");
    sub->add_option("--grid", cfg.grid_path, "grid file for sweep (JSON)");
  };

  CLI::App* c_check = app.add_subcommand("check", "decide a single embedding query");
  CLI::App* c_ap = app.add_subcommand("ap", "estimate Muckenhoupt constants");
  CLI::App* c_cube = app.add_subcommand("cube", "tabulate weighted cube measures");
  CLI::App* c_probe = app.add_subcommand("probe", "witness-atom embedding ratio probe");
  CLI::App* c_gn = app.add_subcommand("gn", "interpolation inequality ratio batch");
  CLI::App* c_sweep = app.add_subcommand("sweep", "cross-validate closed forms vs window");
  for (CLI::App* sub : {c_check, c_ap, c_cube, c_probe, c_gn, c_sweep}) add_common(sub);
  c_gn->add_option("--seed", cfg.seed, "random family seed")->each([&cfg](const std::string&) {
    cfg.seed_set = true;
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(c_check)) return cmd_check(cfg);
    if (app.got_subcommand(c_ap)) return cmd_ap(cfg);
    if (app.got_subcommand(c_cube)) return cmd_cube(cfg);
    if (app.got_subcommand(c_probe)) return cmd_probe(cfg);
    if (app.got_subcommand(c_gn)) return cmd_gn(cfg);
    if (app.got_subcommand(c_sweep)) return cmd_sweep(cfg);
  } catch (const json::exception& e) {
    std::cerr << "embedkit: malformed spec: " << e.what() << '\n';
    return kExitBadSpec;
  } catch (const embedkit::InvalidSpec& e) {
    std::cerr << "embedkit: malformed spec: " << e.what() << '\n';
    return kExitBadSpec;
  } catch (const embedkit::UnsupportedQuery& e) {
    std::cerr << "embedkit: unsupported query: " << e.what() << '\n';
    return kExitBadSpec;
  } catch (const std::exception& e) {
    std::cerr << "embedkit: error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
