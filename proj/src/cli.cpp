#include "robustdp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <CLI11.hpp>

#include "robustdp/geometry.hpp"
#include "robustdp/oracle.hpp"
#include "robustdp/recipes.hpp"
#include "robustdp/report.hpp"

namespace robustdp {

using nlohmann::json;

namespace {

int exit_code_for(const std::vector<Failure>& failures) {
  bool input = false;
  for (const Failure& f : failures) {
    if (f.error_class == ErrorClass::assumption) return 2;
    input = true;
  }
  return input ? 1 : 0;
}

json failures_json(const std::vector<Failure>& failures) {
  json a = json::array();
  for (const Failure& f : failures) a.push_back(f.to_json());
  return a;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

DpParams params_of(const CliConfig& c) {
  DpParams p;
  p.mode = c.mode;
  p.tol = c.tol;
  p.grid_lo = c.grid_lo;
  p.grid_hi = c.grid_hi;
  p.grid_step = c.grid_step;
  p.alpha_safety = c.alpha_safety;
  p.seed = c.seed;
  p.u0_samples = c.u0_samples;
  return p;
}

json check_na(const Market& m, double safety, std::vector<Failure>& failures) {
  json nodes = json::object();
  for (NodeIndex i : m.tree.interior()) {
    const std::string& id = m.tree.node(i).id;
    NodeGeometry g = node_geometry(m, i, nullptr, safety);
    json pts = json::array();
    for (const Vec& p : g.support.points) pts.push_back(vec_json(p));
    json entry{{"support", pts},
               {"affine_dim", g.frame.dim()},
               {"zero_in_ri", g.verdict.zero_in_ri},
               {"lp_margin", number_json(g.verdict.lp_margin)},
               {"alpha", g.verdict.alpha ? number_json(*g.verdict.alpha) : json(nullptr)},
               {"alpha_approximate", g.verdict.alpha_approximate}};
    if (g.verdict.witness) entry["witness"] = vec_json(*g.verdict.witness);
    nodes[id] = entry;
    if (!g.verdict.zero_in_ri)
      failures.push_back(failure_from(NAFailure(id, g.verdict.witness.value_or(Vec{}),
                                                "0 is not in ri(conv(D)) at node '" + id + "'")));
  }
  return nodes;
}

json diagnose(const Market& m, const RandomUtility& u, const CliConfig& c, std::vector<Failure>& failures) {
  json out = json::object();
  DpParams p = params_of(c);
  const double x0 = c.x0.value_or(0.0);
  try {
    build_p_star(m);
  } catch (const Error& e) {
    failures.push_back(failure_from(e));
    return out;
  }
  try {
    p.certificate = certify_growth(u, m.tree);
    json C = json::object();
    for (const auto& [k, v] : p.certificate->C_of_leaf) C[k] = number_json(v);
    out["ae"] = json{{"gamma", p.certificate->gamma}, {"side", to_string(p.certificate->side)}, {"C", C}};
  } catch (const Error& e) {
    failures.push_back(failure_from(e));
  }
  try {
    out["type_A"] = assess_type_A(u, m, p.certificate ? std::optional(p.certificate->gamma) : std::nullopt, c.seed)
                        .to_json();
  } catch (const Error& e) {
    out["type_A"] = json{{"verdict", false}, {"error", e.what()}};
  }
  if (!p.certificate) return out;

  ValueFunction vf = value_function(m, u, p);
  json bounds = json::object();
  for (NodeIndex i : m.tree.interior()) {
    const std::string& id = m.tree.node(i).id;
    json b{{"alpha", vf.instance(i).alpha}, {"affine_dim", vf.instance(i).frame.dim()}};
    try {
      const BoundPack& bp = vf.bounds(i);
      json nm = json::object();
      for (int mm : {1, 2, 5}) nm[std::to_string(mm)] = to_string(verify_nm(vf.instance(i), bp, mm, c.tol));
      b.update(json{{"c_star", number_json(bp.c_star)},
                    {"l_star", number_json(bp.l_star)},
                    {"n0_star", bp.n0_star},
                    {"Kbar", number_json(bp.Kbar)},
                    {"K0_at_x0", number_json(bp.K0_of_x(x0))},
                    {"K1_at_x0", number_json(bp.K1_of_x(x0))},
                    {"nm_check", nm}});
    } catch (const Error& e) {
      failures.push_back(failure_from(e));
      b["error"] = e.what();
    }
    bounds[id] = b;
  }
  out["bounds"] = bounds;
  try {
    out["U0"] = check_assumption_U0(m, u, c.u0_samples, c.seed, p).to_json();
  } catch (const Error& e) {
    out["U0"] = json{{"error", e.what()}};
  }
  return out;
}

json demo_comparison(const Instance& inst, const SolveReport& rep, double x0) {
  json cmp = json::object();
  bool match = true;
  auto has_failure = [&](const std::string& assumption) {
    for (const Failure& f : rep.failures)
      if (f.assumption == assumption) return true;
    return false;
  };
  if (inst.name == "remark9") {
    double a = inst.parameters["a"].get<double>();
    double worst_h = 0.0, worst_v = 0.0;
    if (x0 == 0.0 && rep.ok()) {
      for (auto it = inst.expected["nodes"].begin(); it != inst.expected["nodes"].end(); ++it) {
        double H = it.value()["H_star"].get<double>();
        double l = it.value()["l"].get<double>();
        double h = rep.strategy.at(it.key())[0];
        worst_h = std::max(worst_h, std::fabs(h - H) / std::max(1.0, std::fabs(H)));
        worst_v = std::max(worst_v, std::fabs(remark9_u1(l, a, h) - it.value()["u1"].get<double>()));
      }
      match = worst_h <= 1e-4 && worst_v <= 1e-6;
    } else {
      match = rep.ok();
    }
    cmp = json{{"max_relative_strategy_error", worst_h}, {"max_value_error", worst_v}};
  } else if (inst.name == "remark2") {
    double bound = inst.expected["upper_bound"].get<double>();
    match = rep.value && *rep.value <= ExtReal(bound + 1e-6);
    cmp = json{{"upper_bound", bound}};
  } else if (inst.name == "remark8") {
    match = has_failure("pb_inequality");
  } else if (inst.name == "arbitrage_toy") {
    match = has_failure("no_arbitrage");
  } else if (inst.name == "example1") {
    double lb = inst.expected["alpha_lower_bound"].get<double>();
    double alpha = rep.diagnostics.contains("alpha") ? rep.diagnostics["alpha"]["root"].get<double>() : 0.0;
    match = rep.ok() && alpha >= lb - 1e-12;
    cmp = json{{"alpha", alpha}, {"alpha_lower_bound", lb}};
  }
  cmp["match"] = match;
  return cmp;
}

void flatten(const json& j, const std::string& path, std::string& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (j.is_array()) {
    bool scalars = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
    if (scalars) {
      std::string line = path + " = [";
      for (std::size_t i = 0; i < j.size(); ++i) line += (i ? ", " : "") + render_canonical(j[i]).substr(0, render_canonical(j[i]).size() - 1);
      out += line + "]\n";
    } else {
      for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
    }
  } else {
    std::string v = render_canonical(j);
    out += path + " = " + v.substr(0, v.size() - 1) + "\n";
  }
}

}  // namespace

std::string render_table(const json& report) {
  std::string out;
  flatten(report, "", out);
  return out;
}

int run(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  json report = json::object();
  std::vector<Failure> failures;
  int code = 0;
  report["command"] = c.command;
  report["version"] = kVersion;
  report["seed"] = c.seed;

  try {
    if (!(c.tol > 0.0)) throw ParameterError("--tol must be positive");
    auto load_market_arg = [&] {
      if (c.market_path.empty()) throw ParseError("--market is required");
      return load_market_file(c.market_path);
    };
    auto load_utility_arg = [&] {
      if (c.utility_path.empty()) throw ParseError("--utility is required");
      return load_utility_file(c.utility_path);
    };

    if (c.command == "solve") {
      Market m = load_market_arg();
      RandomUtility u = load_utility_arg();
      SolveReport rep = solve(m, u, c.x0.value_or(0.0), params_of(c));
      report.update(rep.to_json());
      failures = rep.failures;
    } else if (c.command == "check-na") {
      Market m = load_market_arg();
      report["nodes"] = check_na(m, c.alpha_safety, failures);
      for (const Failure& f : failures) {
        err << "no-arbitrage fails at '" << f.node << "'; witness direction "
            << report["nodes"][f.node].value("witness", json::array()).dump() << "\n";
      }
    } else if (c.command == "diagnose") {
      Market m = load_market_arg();
      RandomUtility u = load_utility_arg();
      report["diagnostics"] = diagnose(m, u, c, failures);
    } else if (c.command == "oracle") {
      Market m = load_market_arg();
      RandomUtility u = load_utility_arg();
      double x0 = c.x0.value_or(0.0);
      OracleResult o = brute_force_oracle(m, u, x0, c.oracle_step, c.oracle_radius);
      json oj{{"combinations", number_json(o.combinations)}, {"step", c.oracle_step}, {"radius", c.oracle_radius},
              {"refused", o.refused}};
      if (o.refused) {
        err << "oracle refused: " << o.combinations << " strategy-grid combinations exceed 1e5\n";
        report["oracle"] = oj;
        code = 3;
      } else {
        oj["value"] = to_json(*o.value);
        json s = json::object();
        for (const auto& [k, h] : o.strategy) s[k] = vec_json(h);
        oj["strategy"] = s;
        report["oracle"] = oj;
        try {
          report["solver_value"] = to_json(value_function(m, u, params_of(c))(m.tree.root(), x0));
        } catch (const Error& e) {
          failures.push_back(failure_from(e));
        }
      }
    } else if (c.command == "demo") {
      Instance inst = make_recipe(c.recipe, c.seed);
      double x0 = c.x0.value_or(inst.name == "remark2" ? 1.0 : 0.0);
      SolveReport rep = solve(inst.market, inst.utility, x0, params_of(c));
      failures = rep.failures;
      report["recipe"] = inst.name;
      report["parameters"] = inst.parameters;
      report["expected"] = inst.expected;
      report["x0"] = x0;
      report["report"] = rep.to_json();
      report["comparison"] = demo_comparison(inst, rep, x0);
    } else {
      throw ParameterError("unknown command '" + c.command + "'");
    }
  } catch (const Error& e) {
    failures.push_back(failure_from(e));
    if (e.error_class() != ErrorClass::assumption) failures.back().error_class = ErrorClass::input;
    err << e.code() << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    failures.push_back(Failure{"InternalError", "", "", e.what(), ErrorClass::input});
    err << "error: " << e.what() << "\n";
  }

  report["failures"] = failures_json(failures);
  report["timing_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  if (code == 0) code = exit_code_for(failures);
  out << (c.output == "table" ? render_table(report) : render_canonical(report));
  return code;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust maxmin utility maximization on scenario trees"};
  app.require_subcommand(1);
  CliConfig c;
  std::string mode = "exact";
  double x0 = 0.0;

  auto common = [&](CLI::App* sub, bool utility) {
    sub->add_option("--market", c.market_path, "market JSON file");
    if (utility) sub->add_option("--utility", c.utility_path, "utility JSON file");
    sub->add_option("--x0", x0, "initial wealth");
    sub->add_option("--mode", mode, "exact or grid")->check(CLI::IsMember({"exact", "grid"}));
    sub->add_option("--tol", c.tol, "maximizer tolerance");
    sub->add_option("--output", c.output, "json or table")->check(CLI::IsMember({"json", "table"}));
    sub->add_option("--seed", c.seed, "seed for randomized checks");
    sub->add_option("--alpha-safety", c.alpha_safety, "factor applied to grid-estimated alpha");
    sub->add_option("--grid-lo", c.grid_lo, "grid mode: lowest knot");
    sub->add_option("--grid-hi", c.grid_hi, "grid mode: highest knot");
    sub->add_option("--grid-step", c.grid_step, "grid mode: knot spacing");
    sub->add_option("--u0-samples", c.u0_samples, "random priors in the U0 check");
  };
  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the robust problem");
  common(solve_cmd, true);
  CLI::App* na_cmd = app.add_subcommand("check-na", "per-node no-arbitrage geometry");
  common(na_cmd, false);
  CLI::App* diag_cmd = app.add_subcommand("diagnose", "bounds, certificates and assumption checks");
  common(diag_cmd, true);
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force maxmin over a strategy grid");
  common(oracle_cmd, true);
  oracle_cmd->add_option("--oracle-step", c.oracle_step, "strategy grid step");
  oracle_cmd->add_option("--oracle-radius", c.oracle_radius, "strategy grid radius");
  CLI::App* demo_cmd = app.add_subcommand("demo", "run a built-in instance");
  common(demo_cmd, false);
  demo_cmd->add_option("recipe", c.recipe, "remark9, remark2, remark8, example1 or arbitrage_toy")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }
  for (CLI::App* sub : {solve_cmd, na_cmd, diag_cmd, oracle_cmd, demo_cmd}) {
    if (!sub->parsed()) continue;
    c.command = sub->get_name();
    if (sub->count("--x0")) c.x0 = x0;
  }
  c.mode = mode == "grid" ? Mode::grid : Mode::exact;
  return run(c, out, err);
}

}  // namespace robustdp
