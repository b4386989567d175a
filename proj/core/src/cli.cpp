#include "dampopt/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dampopt/mmio.hpp"

namespace dampopt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& what) {
  throw ValidationError("config: " + what);
}

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      config_error("unknown key \"" + item.key() + "\" in " + where);
  }
}

double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) config_error(std::string(key) + " must be a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    config_error(std::string(key) + " must be an integer");
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) config_error(std::string(key) + " must be a boolean");
  return obj[key].get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) config_error(std::string(key) + " must be a string");
  return obj[key].get<std::string>();
}

DirectionMode parse_direction_mode(const std::string& s) {
  if (s == "full") return DirectionMode::full;
  if (s == "padded") return DirectionMode::padded;
  if (s == "tangential") return DirectionMode::tangential;
  config_error("direction mode must be \"full\", \"padded\" or \"tangential\", got \"" +
               s + "\"");
}

const char* termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::gains_tol:
      return "gains_tol";
    case TerminationReason::value_tol:
      return "value_tol";
    default:
      return "max_outer";
  }
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) config_error("top level must be an object");
  check_keys(root, "the top level",
             {"system", "problem", "mode", "sweep", "oracle", "record_timings",
              "seed", "jobs", "tol_gains", "tol_value", "greedy_tol",
              "dense_tol", "stationarity_tol", "max_outer_iter",
              "max_inner_iter", "heuristic_count", "init_sample_count",
              "screen_top", "init_directions", "update_directions", "out",
              "long_run", "verbose"});

  RunConfig rc;

  if (root.contains("system")) {
    const json& s = root["system"];
    if (!s.is_object()) config_error("system must be an object");
    if (s.contains("files")) {
      check_keys(s, "system", {"files"});
      const json& f = s["files"];
      check_keys(f, "system.files", {"M", "K", "C_int", "B2", "E2", "H1"});
      rc.use_files = true;
      for (const char* key : {"M", "K", "B2", "E2", "H1"})
        if (!f.contains(key))
          config_error(std::string("system.files.") + key + " is required");
      rc.m_path = f["M"].get<std::string>();
      rc.k_path = f["K"].get<std::string>();
      rc.b2_path = f["B2"].get<std::string>();
      rc.e2_path = f["E2"].get<std::string>();
      rc.h1_path = f["H1"].get<std::string>();
      rc.cint_path = f.contains("C_int") ? f["C_int"].get<std::string>() : "";
    } else {
      check_keys(s, "system", {"family", "n", "j", "k"});
      const std::string family = get_str(s, "family", "scaled");
      if (family == "reference")
        rc.reference_family = true;
      else if (family != "scaled")
        config_error("system.family must be \"scaled\" or \"reference\"");
      rc.n = get_int(s, "n", static_cast<int>(rc.n));
      rc.j = get_int(s, "j", static_cast<int>(rc.j));
      rc.k = get_int(s, "k", static_cast<int>(rc.k));
    }
  }

  if (root.contains("problem")) {
    const json& p = root["problem"];
    if (p.is_string()) {
      const std::string tag = p.get<std::string>();
      if (tag != "a" && tag != "b")
        config_error("problem must be \"a\", \"b\" or an object");
      rc.problem = tag[0];
      rc.alpha_c = problem_alpha(rc.problem);
    } else if (p.is_object()) {
      check_keys(p, "problem", {"alpha_c", "init_gains"});
      rc.custom_problem = true;
      rc.problem = '-';
      rc.alpha_c = get_num(p, "alpha_c", 1e-2);
      if (!(rc.alpha_c >= 0.0)) config_error("problem.alpha_c must be >= 0");
      if (!p.contains("init_gains"))
        config_error("problem.init_gains is required for a custom problem");
      const json& ig = p["init_gains"];
      if (!ig.is_array() || ig.empty())
        config_error("problem.init_gains must be a nonempty array of arrays");
      for (const json& row : ig) {
        if (!row.is_array() || row.empty())
          config_error("problem.init_gains entries must be nonempty arrays");
        Vec g(static_cast<Index>(row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (!row[i].is_number())
            config_error("problem.init_gains entries must be numbers");
          g(static_cast<Index>(i)) = row[i].get<double>();
        }
        if (!rc.init_gains.empty() && g.size() != rc.init_gains.front().size())
          config_error("problem.init_gains rows must share one length");
        rc.init_gains.push_back(std::move(g));
      }
    } else {
      config_error("problem must be \"a\", \"b\" or an object");
    }
  } else {
    rc.alpha_c = problem_alpha(rc.problem);
  }

  rc.mode = get_str(root, "mode", rc.mode);
  if (rc.mode == "ii" || rc.mode == "iv")
    config_error("mode \"" + rc.mode +
                 "\" selects interpolation points from sampled closed-loop "
                 "poles and is not part of this build; supported modes are "
                 "\"i\" and \"iii\"");
  if (rc.mode != "i" && rc.mode != "iii")
    config_error("mode must be \"i\" or \"iii\", got \"" + rc.mode + "\"");

  if (root.contains("sweep")) {
    const json& sw = root["sweep"];
    if (!sw.is_object()) config_error("sweep must be an object");
    check_keys(sw, "sweep", {"j_set", "k_set"});
    rc.sweep = true;
    for (const char* key : {"j_set", "k_set"}) {
      if (!sw.contains(key) || !sw[key].is_array() || sw[key].empty())
        config_error(std::string("sweep.") + key + " must be a nonempty array");
      auto& dst = std::string(key) == "j_set" ? rc.j_set : rc.k_set;
      for (const json& v : sw[key]) {
        if (!v.is_number_integer())
          config_error(std::string("sweep.") + key + " entries must be integers");
        dst.push_back(v.get<Index>());
      }
    }
  }

  rc.oracle = get_bool(root, "oracle", rc.oracle);
  rc.record_timings = get_bool(root, "record_timings", rc.record_timings);
  const int seed = get_int(root, "seed", static_cast<int>(rc.seed));
  if (seed < 0) config_error("seed must be nonnegative");
  rc.seed = static_cast<unsigned>(seed);
  rc.jobs = get_int(root, "jobs", rc.jobs);
  if (rc.jobs < 1) config_error("jobs must be >= 1");

  rc.tol_gains = get_num(root, "tol_gains", rc.tol_gains);
  rc.tol_value = get_num(root, "tol_value", rc.tol_value);
  rc.greedy_tol = get_num(root, "greedy_tol", rc.greedy_tol);
  rc.dense_tol = get_num(root, "dense_tol", rc.dense_tol);
  rc.stationarity_tol = get_num(root, "stationarity_tol", rc.stationarity_tol);
  if (rc.tol_gains < 0.0 || rc.tol_value < 0.0)
    config_error("tolerances must be nonnegative");
  if (rc.greedy_tol <= 0.0 || rc.dense_tol <= 0.0 || rc.stationarity_tol <= 0.0)
    config_error("greedy_tol, dense_tol and stationarity_tol must be positive");
  rc.max_outer_iter = get_int(root, "max_outer_iter", rc.max_outer_iter);
  rc.max_inner_iter = get_int(root, "max_inner_iter", rc.max_inner_iter);
  rc.heuristic_count = get_int(root, "heuristic_count", rc.heuristic_count);
  rc.init_sample_count = get_int(root, "init_sample_count", rc.init_sample_count);
  rc.screen_top = get_int(root, "screen_top", rc.screen_top);
  if (rc.max_outer_iter < 1 || rc.max_inner_iter < 1 || rc.heuristic_count < 1 ||
      rc.init_sample_count < 2 || rc.screen_top < 1)
    config_error("iteration and count settings must be positive "
                 "(init_sample_count >= 2)");
  rc.init_directions = get_str(root, "init_directions", rc.init_directions);
  rc.update_directions = get_str(root, "update_directions", rc.update_directions);
  parse_direction_mode(rc.init_directions);
  parse_direction_mode(rc.update_directions);
  rc.out_dir = get_str(root, "out", rc.out_dir);
  rc.long_run = get_bool(root, "long_run", rc.long_run);
  rc.verbose = get_bool(root, "verbose", rc.verbose);
  return rc;
}

std::string resolved_config_json(const RunConfig& rc) {
  json root;
  json sys;
  if (rc.use_files) {
    json f;
    f["M"] = rc.m_path;
    f["K"] = rc.k_path;
    if (!rc.cint_path.empty()) f["C_int"] = rc.cint_path;
    f["B2"] = rc.b2_path;
    f["E2"] = rc.e2_path;
    f["H1"] = rc.h1_path;
    sys["files"] = f;
  } else {
    sys["family"] = rc.reference_family ? "reference" : "scaled";
    sys["n"] = rc.n;
    sys["j"] = rc.j;
    sys["k"] = rc.k;
  }
  root["system"] = sys;

  if (rc.custom_problem) {
    json p;
    p["alpha_c"] = rc.alpha_c;
    json gains = json::array();
    for (const Vec& g : rc.init_gains) {
      json row = json::array();
      for (Index i = 0; i < g.size(); ++i) row.push_back(g(i));
      gains.push_back(row);
    }
    p["init_gains"] = gains;
    root["problem"] = p;
  } else {
    root["problem"] = std::string(1, rc.problem);
  }

  root["mode"] = rc.mode;
  if (rc.sweep) {
    json sw;
    sw["j_set"] = rc.j_set;
    sw["k_set"] = rc.k_set;
    root["sweep"] = sw;
  }
  root["oracle"] = rc.oracle;
  root["record_timings"] = rc.record_timings;
  root["seed"] = rc.seed;
  root["jobs"] = rc.jobs;
  root["tol_gains"] = rc.tol_gains;
  root["tol_value"] = rc.tol_value;
  root["greedy_tol"] = rc.greedy_tol;
  root["dense_tol"] = rc.dense_tol;
  root["stationarity_tol"] = rc.stationarity_tol;
  root["max_outer_iter"] = rc.max_outer_iter;
  root["max_inner_iter"] = rc.max_inner_iter;
  root["heuristic_count"] = rc.heuristic_count;
  root["init_sample_count"] = rc.init_sample_count;
  root["screen_top"] = rc.screen_top;
  root["init_directions"] = rc.init_directions;
  root["update_directions"] = rc.update_directions;
  root["out"] = rc.out_dir;
  root["long_run"] = rc.long_run;
  root["verbose"] = rc.verbose;
  return root.dump(2);
}

namespace {

AlgorithmConfig algorithm_config(const RunConfig& rc) {
  AlgorithmConfig algo;
  algo.init_mode =
      rc.mode == "i" ? InitMode::equidistant : InitMode::maximizers;
  algo.init_sample_count = rc.init_sample_count;
  algo.heuristic_count = rc.heuristic_count;
  algo.screen_top = rc.screen_top;
  algo.tol_gains = rc.tol_gains;
  algo.tol_value = rc.tol_value;
  algo.max_outer_iter = rc.max_outer_iter;
  algo.init_direction_mode = parse_direction_mode(rc.init_directions);
  algo.update_direction_mode = parse_direction_mode(rc.update_directions);
  algo.greedy_tol = rc.greedy_tol;
  algo.inner.dense_tol = rc.dense_tol;
  algo.inner.stationarity_tol = rc.stationarity_tol;
  algo.inner.max_inner_iter = rc.max_inner_iter;
  algo.inner.seed = rc.seed;
  return algo;
}

SweepRow run_files_case(const RunConfig& rc) {
  VibrationalSystem sys;
  sys.M = read_matrix_market(rc.m_path);
  sys.K = read_matrix_market(rc.k_path);
  sys.B2 = read_matrix_market(rc.b2_path);
  sys.E2 = read_matrix_market(rc.e2_path);
  sys.H1 = read_matrix_market(rc.h1_path);
  sys.C_int = rc.cint_path.empty()
                  ? Mat::Zero(sys.M.rows(), sys.M.cols()).eval()
                  : read_matrix_market(rc.cint_path);
  validate(sys);
  if (sys.M.rows() > 200 && !rc.long_run)
    throw ValidationError("system larger than n = 200 requires --long");

  std::vector<Vec> gains = rc.init_gains;
  if (gains.empty()) {
    if (sys.B2.cols() != 2)
      throw ValidationError(
          "preset problems assume two dampers; provide problem.init_gains");
    gains = problem_init_gains(rc.problem);
  }
  for (const Vec& g : gains)
    if (g.size() != sys.B2.cols())
      throw ValidationError("init_gains length must match the damper count");

  AlgorithmConfig algo = algorithm_config(rc);

  SweepRow row;
  row.config_id = std::string("custom_") + rc.problem + "_" + rc.mode;
  row.n = sys.M.rows();
  row.j = -1;
  row.k = -1;
  row.problem = rc.problem;
  row.mode = algo.init_mode;
  row.rel_gain_err = std::numeric_limits<double>::quiet_NaN();
  row.rel_hinf_err = std::numeric_limits<double>::quiet_NaN();

  const auto t0 = std::chrono::steady_clock::now();
  row.result = optimize_damping(sys, gains, algo);
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (rc.oracle) {
    NaiveOptions nopts;
    nopts.inner = algo.inner;
    nopts.inner.seed = rc.seed + 9001;
    nopts.linf_tol = rc.dense_tol;
    nopts.allow_large = rc.long_run;
    const auto t1 = std::chrono::steady_clock::now();
    row.oracle = naive_optimize(sys, gains.front(), nopts);
    row.oracle_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
            .count();
    row.has_oracle = true;
    const double gn = row.oracle.g_star.norm();
    row.rel_gain_err = (row.result.g_star - row.oracle.g_star).norm() /
                       (gn > 0.0 ? gn : 1.0);
    row.rel_hinf_err = std::abs(row.result.hinf_value - row.oracle.value) /
                       std::abs(row.oracle.value);
  }
  return row;
}

void write_results_csv(const fs::path& path, const std::vector<SweepRow>& rows,
                       bool record_timings) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open " + path.string());
  out << "config_id,j,k,problem,mode,g1_star,g2_star,hinf_value,outer_iters,"
         "rom_dim,rel_gain_err,rel_hinf_err,wall_seconds,termination_reason\n";
  for (const SweepRow& r : rows) {
    const Vec& g = r.result.g_star;
    out << r.config_id << ',' << r.j << ',' << r.k << ',' << r.problem << ','
        << (r.mode == InitMode::equidistant ? "i" : "iii") << ','
        << (g.size() > 0 ? fmt17(g(0)) : "") << ','
        << (g.size() > 1 ? fmt17(g(1)) : "") << ','
        << fmt17(r.result.hinf_value) << ',' << r.result.outer_iterations << ','
        << r.result.rom_dimension << ','
        << (r.has_oracle ? fmt17(r.rel_gain_err) : "") << ','
        << (r.has_oracle ? fmt17(r.rel_hinf_err) : "") << ','
        << (record_timings ? fmt17(r.wall_seconds) : "") << ','
        << termination_name(r.result.termination) << '\n';
  }
  if (!out) throw std::ios_base::failure("write failure on " + path.string());
}

json row_summary(const SweepRow& r, bool record_timings) {
  json o;
  o["config_id"] = r.config_id;
  o["n"] = r.n;
  o["j"] = r.j;
  o["k"] = r.k;
  o["problem"] = std::string(1, r.problem);
  o["mode"] = r.mode == InitMode::equidistant ? "i" : "iii";
  json gs = json::array();
  for (Index i = 0; i < r.result.g_star.size(); ++i)
    gs.push_back(r.result.g_star(i));
  o["g_star"] = gs;
  o["hinf_value"] = r.result.hinf_value;
  o["omega_star"] = r.result.omega_star;
  o["outer_iterations"] = r.result.outer_iterations;
  o["rom_dimension"] = r.result.rom_dimension;
  o["termination"] = termination_name(r.result.termination);
  o["full_factorizations"] = r.result.full_factorizations;
  if (record_timings) o["wall_seconds"] = r.wall_seconds;
  if (r.has_oracle) {
    json n;
    json gn = json::array();
    for (Index i = 0; i < r.oracle.g_star.size(); ++i)
      gn.push_back(r.oracle.g_star(i));
    n["g_star"] = gn;
    n["hinf_value"] = r.oracle.value;
    n["omega_star"] = r.oracle.omega_star;
    n["norm_evals"] = r.oracle.norm_evals;
    n["factorizations"] = r.oracle.factorizations;
    if (record_timings) n["wall_seconds"] = r.oracle_wall_seconds;
    o["oracle"] = n;
    o["rel_gain_err"] = r.rel_gain_err;
    o["rel_hinf_err"] = r.rel_hinf_err;
  }
  return o;
}

void write_summary(const fs::path& path, const RunConfig& rc,
                   const std::vector<SweepRow>& rows) {
  json root;
  root["config"] = json::parse(resolved_config_json(rc));
  json jr = json::array();
  long tot_fac = 0;
  long tot_oracle_evals = 0;
  for (const SweepRow& r : rows) {
    jr.push_back(row_summary(r, rc.record_timings));
    tot_fac += r.result.full_factorizations;
    if (r.has_oracle) tot_oracle_evals += r.oracle.norm_evals;
  }
  root["rows"] = jr;
  json tot;
  tot["full_factorizations"] = tot_fac;
  tot["oracle_norm_evals"] = tot_oracle_evals;
  root["totals"] = tot;
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open " + path.string());
  out << root.dump(2) << '\n';
  if (!out) throw std::ios_base::failure("write failure on " + path.string());
}

void write_trace(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot open " + path.string());
  for (const SweepRow& r : rows) {
    for (const OuterIterate& it : r.result.trace) {
      json o;
      o["config_id"] = r.config_id;
      o["iter"] = it.iter;
      json gs = json::array();
      for (Index i = 0; i < it.g.size(); ++i) gs.push_back(it.g(i));
      o["g"] = gs;
      o["reduced_value"] = it.reduced_value;
      o["full_value"] = it.full_value;
      o["omega"] = it.omega;
      o["rom_dim"] = it.rom_dim;
      o["inner_iterations"] = it.inner_iterations;
      o["inner_evals"] = it.inner_evals;
      o["restarted"] = it.restarted;
      o["repairs"] = it.repairs;
      out << o.dump() << '\n';
    }
  }
  if (!out) throw std::ios_base::failure("write failure on " + path.string());
}

}  // namespace

int run(const RunConfig& rc) {
  if (!rc.use_files && (rc.reference_family || rc.n > 200) && !rc.long_run)
    throw ValidationError(
        "configurations beyond n = 200 take a while; pass --long to confirm");

  std::vector<SweepRow> rows;
  if (rc.use_files) {
    if (rc.sweep)
      throw ValidationError("sweep applies to builtin systems only");
    rows.push_back(run_files_case(rc));
  } else {
    SweepConfig sc;
    sc.base.n = rc.n;
    sc.base.alpha_c = rc.alpha_c;
    sc.reference_family = rc.reference_family;
    sc.j_set = rc.sweep ? rc.j_set : std::vector<Index>{rc.j};
    sc.k_set = rc.sweep ? rc.k_set : std::vector<Index>{rc.k};
    sc.problem = rc.problem;
    sc.use_preset = !rc.custom_problem;
    sc.custom_gains = rc.init_gains;
    sc.algo = algorithm_config(rc);
    sc.with_oracle = rc.oracle;
    sc.oracle.inner = sc.algo.inner;
    sc.oracle.linf_tol = rc.dense_tol;
    sc.oracle.allow_large = rc.long_run;
    sc.jobs = rc.jobs;
    sc.seed = rc.seed;
    rows = run_sweep(sc);
  }

  fs::create_directories(rc.out_dir);
  write_results_csv(fs::path(rc.out_dir) / "results.csv", rows,
                    rc.record_timings);
  write_summary(fs::path(rc.out_dir) / "summary.json", rc, rows);
  if (rc.verbose) write_trace(fs::path(rc.out_dir) / "trace.jsonl", rows);

  for (const SweepRow& r : rows) {
    std::ostringstream gains;
    for (Index i = 0; i < r.result.g_star.size(); ++i)
      gains << (i ? ", " : "") << fmt17(r.result.g_star(i));
    std::cout << r.config_id << ": value " << fmt17(r.result.hinf_value)
              << " at gains (" << gains.str() << "), "
              << r.result.outer_iterations << " outer iterations, surrogate dimension "
              << r.result.rom_dimension << "\n";
  }
  std::cout << "results written to " << rc.out_dir << "\n";
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"locally optimal viscous damper gains via interpolatory "
               "surrogate optimization"};
  std::string config_path;
  std::string out_override;
  bool long_flag = false;
  bool verbose = false;
  int jobs = 0;
  long long seed = -1;
  app.add_option("--config", config_path, "run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_override, "output directory override");
  app.add_flag("--long", long_flag, "confirm expensive full-size runs");
  app.add_option("--jobs", jobs, "concurrent sweep rows")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "per-iteration trace to trace.jsonl");
  app.add_option("--seed", seed, "random seed override")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::ifstream in(config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    if (!in) throw std::ios_base::failure("cannot read " + config_path);
    RunConfig rc = parse_run_config(buf.str());
    if (!out_override.empty()) rc.out_dir = out_override;
    if (long_flag) rc.long_run = true;
    if (verbose) rc.verbose = true;
    if (jobs > 0) rc.jobs = jobs;
    if (seed >= 0) rc.seed = static_cast<unsigned>(seed);
    return run(rc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnboundedModelError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const PoleProximityError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const NonsmoothPointError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dampopt
