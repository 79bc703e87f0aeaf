#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "diffest/errors.hpp"
#include "diffest/estfun.hpp"
#include "diffest/estimator.hpp"
#include "diffest/model.hpp"
#include "diffest/path_sim.hpp"
#include "diffest/study.hpp"

namespace {

using diffest::ConfigError;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSim = 3;
constexpr int kExitNoRoot = 4;
constexpr int kExitCheckFailed = 5;
constexpr int kExitIo = 6;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat key=value config, optional [section] headers. Returns the selected
// section (or the whole file when no sections are present).
std::map<std::string, std::string> load_config(const std::string& path,
                                               const std::string& section) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line, current;
  bool seen_section = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      current = trim(line.substr(1, line.size() - 2));
      seen_section = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line '" + line + "'");
    if (seen_section && current != section && !section.empty()) continue;
    if (seen_section && section.empty())
      throw ConfigError("config has sections; pass --section");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long l = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return l;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct SimulateArgs {
  std::string config_path, section;
  std::string model, scheme = "milstein", out = "path.csv";
  double theta = 0.0, x0 = 0.0;
  long steps = 0;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& args, const CLI::App& sub) {
  SimulateArgs a = args;
  if (!a.config_path.empty()) {
    auto cfg = load_config(a.config_path, a.section);
    auto take = [&](const char* key, auto apply) {
      auto it = cfg.find(key);
      if (it != cfg.end()) apply(it->second);
    };
    if (!sub.count("--model")) take("model", [&](const std::string& v) { a.model = v; });
    if (!sub.count("--theta")) take("theta", [&](const std::string& v) { a.theta = to_double("theta", v); });
    if (!sub.count("--steps")) take("steps", [&](const std::string& v) { a.steps = to_long("steps", v); });
    if (!sub.count("--seed")) take("seed", [&](const std::string& v) { a.seed = static_cast<std::uint64_t>(to_long("seed", v)); });
    if (!sub.count("--x0")) take("x0", [&](const std::string& v) { a.x0 = to_double("x0", v); });
    if (!sub.count("--scheme")) take("scheme", [&](const std::string& v) { a.scheme = v; });
    if (!sub.count("--out")) take("out", [&](const std::string& v) { a.out = v; });
  }
  if (a.model.empty() || a.steps <= 0) {
    std::cerr << "simulate: --model and --steps are required (flags or config)\n";
    return kExitUsage;
  }
  if (!sub.count("--theta") &&
      (a.config_path.empty() || a.theta == 0.0)) {
    // theta has no safe default; demand it explicitly.
    std::cerr << "simulate: --theta is required (flags or config)\n";
    return kExitUsage;
  }

  diffest::DiffusionModel model;
  try {
    model = diffest::builtin_model(a.model);
  } catch (const diffest::UnknownModel& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  diffest::SimConfig sim;
  try {
    sim.scheme = diffest::scheme_from_string(a.scheme);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  sim.fine_steps = a.steps;
  sim.seed = a.seed;
  sim.x0 = a.x0;

  diffest::PathGrid path;
  try {
    path = diffest::simulate_path(model, a.theta, sim);
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return kExitSim;
  }
  std::ofstream out(a.out, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write '" << a.out << "'\n";
    return kExitIo;
  }
  diffest::write_path_csv(path, out);
  double mn = path.values[0], mx = path.values[0];
  for (double v : path.values) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  std::cout << "final=" << fmt17(path.values.back()) << " min=" << fmt17(mn)
            << " max=" << fmt17(mx) << " rows=" << path.values.size() << '\n';
  return kExitOk;
}

struct EstimateArgs {
  std::string model, estfun, data;
  bool self_sim = false;
  double theta0 = 1.0, x0 = 0.0;
  long n = 10000, fine_steps = 100000;
  std::uint64_t seed = 1;
  double lo = 0.01, hi = 1.99, xtol = 1e-10, ref = std::nan("");
  int scan_points = 256, max_iter = 200;
  std::string policy = "nearest";
  long subsample_n = 0;
};

int cmd_estimate(const EstimateArgs& a) {
  diffest::DiffusionModel model;
  diffest::EstimatingFunctionSpec spec;
  try {
    model = diffest::builtin_model(a.model);
    spec = diffest::builtin_estfun(a.estfun, model);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  diffest::Sample sample;
  try {
    diffest::PathGrid grid;
    if (a.self_sim) {
      diffest::SimConfig sim;
      sim.fine_steps = a.fine_steps;
      sim.seed = a.seed;
      sim.x0 = a.x0;
      grid = diffest::simulate_path(model, a.theta0, sim);
      grid = diffest::subsample(grid, a.n);
    } else if (!a.data.empty()) {
      std::ifstream in(a.data);
      if (!in) {
        std::cerr << "cannot open '" << a.data << "'\n";
        return kExitUsage;
      }
      grid = diffest::read_path_csv(in);
      if (a.subsample_n > 0) grid = diffest::subsample(grid, a.subsample_n);
    } else {
      std::cerr << "estimate: need --data or --self-sim\n";
      return kExitUsage;
    }
    sample = diffest::Sample::from_grid(grid);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  if (a.scan_points < 16) {
    std::cerr << "estimate: --scan-points must be >= 16\n";
    return kExitUsage;
  }
  diffest::RootSolverConfig solver;
  solver.search_lo = a.lo;
  solver.search_hi = a.hi;
  solver.scan_points = a.scan_points;
  solver.xtol = a.xtol;
  solver.max_iter = a.max_iter;
  solver.policy = a.policy == "leftmost" ? diffest::MultiplicityPolicy::leftmost
                                         : diffest::MultiplicityPolicy::nearest_to_ref;
  solver.ref = a.ref;

  const diffest::EstimationResult res = diffest::estimate(spec, sample, solver);
  std::cout << res.to_json() << '\n';
  return res.theta_hat ? kExitOk : kExitNoRoot;
}

struct CheckArgs {
  std::string model, estfun, grid = "-2:2:50";
  double theta = 1.0;
  bool mc = false, json = false;
  double mc_x = 1.0;
  long mc_reps = 20000;
  std::string mc_deltas = "0.25,0.125,0.0625,0.03125,0.015625";
  std::uint64_t seed = 12345;
};

std::vector<double> parse_grid(const std::string& s) {
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 == std::string::npos ? 0 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw ConfigError("grid must be lo:hi:count");
  const double lo = to_double("grid", s.substr(0, c1));
  const double hi = to_double("grid", s.substr(c1 + 1, c2 - c1 - 1));
  const long count = to_long("grid", s.substr(c2 + 1));
  if (count < 2 || !(lo < hi)) throw ConfigError("grid must be lo:hi:count with lo<hi, count>=2");
  std::vector<double> xs(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i)
    xs[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return xs;
}

int cmd_check(const CheckArgs& a) {
  diffest::DiffusionModel model;
  diffest::EstimatingFunctionSpec spec;
  std::vector<double> grid;
  try {
    model = diffest::builtin_model(a.model);
    spec = diffest::builtin_estfun(a.estfun, model);
    grid = parse_grid(a.grid);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  bool all_passed = true;

  const auto jac = diffest::check_jacobsen(spec, model, grid, a.theta);
  all_passed = all_passed && jac.passed;
  {
    nlohmann::ordered_json r;
    r["name"] = spec.name;
    r["check"] = "jacobsen";
    r["passed"] = jac.passed;
    r["max_defect"] = jac.max_defect;
    r["grid"] = grid;
    r["details"] = {{"defects", jac.defects}};
    reports.push_back(r);
  }

  const auto eff = diffest::check_efficiency(spec, model, grid, a.theta);
  const bool eff_passed = eff.verdict == diffest::EfficiencyVerdict::efficient;
  all_passed = all_passed && eff_passed;
  {
    nlohmann::ordered_json r;
    r["name"] = spec.name;
    r["check"] = "efficiency";
    r["passed"] = eff_passed;
    r["max_defect"] = eff.relative_spread;
    r["grid"] = grid;
    nlohmann::ordered_json kv = nlohmann::ordered_json::array();
    for (const auto& [x, K] : eff.K_values) kv.push_back({{"x", x}, {"K", K}});
    r["details"] = {{"verdict", diffest::to_string(eff.verdict)},
                    {"relative_spread", eff.relative_spread},
                    {"K_values", kv}};
    reports.push_back(r);
  }

  if (a.mc) {
    std::vector<double> deltas;
    for (const auto& d : split_list(a.mc_deltas))
      deltas.push_back(to_double("mc-deltas", d));
    nlohmann::ordered_json r;
    r["name"] = spec.name;
    r["check"] = "martingale_order";
    r["grid"] = deltas;
    try {
      const auto res = diffest::martingale_defect_order(
          spec, model, a.mc_x, a.theta, deltas, a.mc_reps, a.seed);
      // kappa >= 2 within noise; the slope tolerance mirrors the study
      // acceptance band.
      const bool passed =
          res.slope >= 2.0 - std::max(0.3, 2.0 * res.slope_stderr);
      all_passed = all_passed && passed;
      r["passed"] = passed;
      r["max_defect"] = std::max(0.0, 2.0 - res.slope);
      nlohmann::ordered_json pts = nlohmann::ordered_json::array();
      for (const auto& p : res.points)
        pts.push_back({{"delta", p.delta},
                       {"estimate", p.estimate},
                       {"std_error", p.std_error},
                       {"censored", p.censored}});
      r["details"] = {{"slope", res.slope},
                      {"slope_stderr", res.slope_stderr},
                      {"points", pts}};
    } catch (const diffest::AllCensored& e) {
      r["passed"] = true;
      r["max_defect"] = 0.0;
      r["details"] = {{"all_censored", true}, {"message", e.what()}};
    }
    reports.push_back(r);
  }

  if (a.json) {
    std::cout << reports.dump(2) << '\n';
  } else {
    for (const auto& r : reports) {
      std::cout << (r["passed"].get<bool>() ? "[PASS] " : "[FAIL] ")
                << r["check"].get<std::string>() << " (" << a.estfun << " on "
                << a.model << ")";
      if (r["check"] == "efficiency")
        std::cout << " verdict=" << r["details"]["verdict"].get<std::string>();
      if (r["check"] == "jacobsen")
        std::cout << " max_defect=" << r["max_defect"].dump();
      if (r["check"] == "martingale_order") std::cout << " " << r["details"].dump();
      std::cout << '\n';
    }
  }
  return all_passed ? kExitOk : kExitCheckFailed;
}

struct StudyArgs {
  std::string config_path, section, out;
  int workers = -1;
  long replicates = -1;
  std::optional<std::uint64_t> seed;
  bool timings = false, json = false;
};

diffest::StudyConfig study_config_from_map(
    const std::map<std::string, std::string>& cfg) {
  diffest::StudyConfig sc;
  sc.fine_steps = 0;  // desk-scale default chosen below when unset
  for (const auto& [key, value] : cfg) {
    if (key == "model") sc.model_name = value;
    else if (key == "estfun") sc.estfun_names = split_list(value);
    else if (key == "theta0") sc.theta0 = to_double(key, value);
    else if (key == "x0") sc.x0 = to_double(key, value);
    else if (key == "n_list") {
      sc.n_list.clear();
      for (const auto& n : split_list(value)) sc.n_list.push_back(to_long(key, n));
    }
    else if (key == "replicates") sc.replicates = static_cast<int>(to_long(key, value));
    else if (key == "fine_steps") sc.fine_steps = to_long(key, value);
    else if (key == "base_seed") sc.base_seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "search_lo") sc.solver.search_lo = to_double(key, value);
    else if (key == "search_hi") sc.solver.search_hi = to_double(key, value);
    else if (key == "scan_points") sc.solver.scan_points = static_cast<int>(to_long(key, value));
    else if (key == "xtol") sc.solver.xtol = to_double(key, value);
    else if (key == "max_iter") sc.solver.max_iter = static_cast<int>(to_long(key, value));
    else if (key == "policy") {
      if (value == "leftmost") sc.solver.policy = diffest::MultiplicityPolicy::leftmost;
      else if (value == "nearest") sc.solver.policy = diffest::MultiplicityPolicy::nearest_to_ref;
      else throw ConfigError("policy must be 'leftmost' or 'nearest'");
    }
    else if (key == "ref") sc.solver.ref = to_double(key, value);
    else if (key == "output_dir") sc.output_dir = value;
    else if (key == "workers") sc.workers = static_cast<int>(to_long(key, value));
    else if (key == "scheme") sc.scheme = diffest::scheme_from_string(value);
    else if (key == "timings") sc.record_timings = to_long(key, value) != 0;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (sc.model_name.empty()) throw ConfigError("config needs 'model'");
  if (sc.output_dir.empty()) sc.output_dir = "study_out";
  if (sc.fine_steps == 0) {
    long max_n = 0;
    for (long n : sc.n_list) max_n = std::max(max_n, n);
    sc.fine_steps = max_n <= 1000 ? 10000 : 100000;
  }
  return sc;
}

int cmd_study(const StudyArgs& a) {
  diffest::StudyConfig sc;
  try {
    sc = study_config_from_map(load_config(a.config_path, a.section));
    if (a.workers >= 0) sc.workers = a.workers;
    if (a.replicates >= 0) sc.replicates = static_cast<int>(a.replicates);
    if (!a.out.empty()) sc.output_dir = a.out;
    if (a.seed) sc.base_seed = *a.seed;
    if (a.timings) sc.record_timings = true;
    if (const char* env = std::getenv("DIFFEST_SEED"))
      sc.base_seed = static_cast<std::uint64_t>(to_long("DIFFEST_SEED", env));
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  diffest::StudyResult result;
  try {
    result = diffest::run_study(sc);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  std::vector<diffest::FileManifestEntry> manifest;
  try {
    manifest = diffest::write_outputs(result, sc.output_dir);
  } catch (const diffest::IoError& e) {
    std::cerr << e.what() << '\n';
    return kExitIo;
  }

  if (a.json) {
    nlohmann::ordered_json jm = nlohmann::ordered_json::array();
    for (const auto& e : manifest) jm.push_back({{"path", e.path}, {"rows", e.rows}});
    std::cout << jm.dump(2) << '\n';
  } else {
    for (const auto& e : manifest)
      std::cout << "wrote " << e.path << " (" << e.rows << " rows)\n";
    for (const auto& g : result.groups) {
      std::cout << "group n=" << g.n << " estfun=" << g.estfun
                << " converged=" << g.stats.count_converged
                << " no_root=" << g.stats.count_no_root
                << " degenerate=" << g.stats.count_degenerate
                << " sim_failed=" << g.stats.count_sim_failed;
      if (g.stats.ks_stat) std::cout << " ks=" << *g.stats.ks_stat;
      if (g.stats.var_scaled_error)
        std::cout << " var_scaled_error=" << *g.stats.var_scaled_error;
      std::cout << '\n';
    }
  }
  return kExitOk;
}

struct SummarizeArgs {
  std::string replicates_path, out;
  double theta0 = 1.0;
};

int cmd_summarize(const SummarizeArgs& a) {
  std::vector<diffest::ReplicateRecord> records;
  try {
    std::ifstream in(a.replicates_path);
    if (!in) {
      std::cerr << "cannot open '" << a.replicates_path << "'\n";
      return kExitUsage;
    }
    records = diffest::read_replicates_csv(in);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  const auto groups = diffest::summarize_records(records, a.theta0);
  const std::string json = diffest::summary_json(groups);
  if (a.out.empty()) {
    std::cout << json;
  } else {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write '" << a.out << "'\n";
      return kExitIo;
    }
    out << json;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffest: diffusion-coefficient estimation from high-frequency data"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Simulate a fine path and write it as CSV");
  s_sim->add_option("--model", sim.model, "Model catalog name");
  s_sim->add_option("--theta", sim.theta, "True parameter value");
  s_sim->add_option("--steps", sim.steps, "Number of fine steps on [0,1]");
  s_sim->add_option("--seed", sim.seed, "RNG seed");
  s_sim->add_option("--x0", sim.x0, "Initial value");
  s_sim->add_option("--scheme", sim.scheme, "euler|milstein");
  s_sim->add_option("--out", sim.out, "Output CSV path");
  s_sim->add_option("--config", sim.config_path, "Config file with the same keys");
  s_sim->add_option("--section", sim.section, "Config section");

  EstimateArgs est;
  auto* s_est = app.add_subcommand("estimate", "Solve the estimating equation on a sample");
  s_est->add_option("--model", est.model, "Model catalog name")->required();
  s_est->add_option("--estfun", est.estfun, "Estimating function name")->required();
  s_est->add_option("--data", est.data, "Path CSV with t,x rows");
  s_est->add_flag("--self-sim", est.self_sim, "Simulate the sample instead of reading one");
  s_est->add_option("--theta0", est.theta0, "True parameter for --self-sim");
  s_est->add_option("--x0", est.x0, "Initial value for --self-sim");
  s_est->add_option("--n", est.n, "Observations for --self-sim");
  s_est->add_option("--fine-steps", est.fine_steps, "Fine steps for --self-sim");
  s_est->add_option("--seed", est.seed, "Seed for --self-sim");
  s_est->add_option("--subsample", est.subsample_n, "Subsample --data to this n");
  s_est->add_option("--lo", est.lo, "Search interval lower end");
  s_est->add_option("--hi", est.hi, "Search interval upper end");
  s_est->add_option("--scan-points", est.scan_points, "Scan grid size");
  s_est->add_option("--xtol", est.xtol, "Root tolerance");
  s_est->add_option("--max-iter", est.max_iter, "Refinement iteration cap");
  s_est->add_option("--policy", est.policy, "leftmost|nearest");
  s_est->add_option("--ref", est.ref, "Reference point for nearest policy");

  CheckArgs chk;
  auto* s_chk = app.add_subcommand("check", "Rate-optimality/efficiency checks");
  s_chk->add_option("--model", chk.model, "Model catalog name")->required();
  s_chk->add_option("--estfun", chk.estfun, "Estimating function name")->required();
  s_chk->add_option("--theta", chk.theta, "Parameter value for the checks");
  s_chk->add_option("--grid", chk.grid, "x grid as lo:hi:count");
  s_chk->add_flag("--mc", chk.mc, "Also run the Monte Carlo defect-order check");
  s_chk->add_option("--mc-x", chk.mc_x, "Conditioning state for --mc");
  s_chk->add_option("--mc-reps", chk.mc_reps, "Monte Carlo replicates");
  s_chk->add_option("--mc-deltas", chk.mc_deltas, "Comma list of deltas");
  s_chk->add_option("--seed", chk.seed, "Seed for --mc");
  s_chk->add_flag("--json", chk.json, "Machine-readable report");

  StudyArgs stu;
  auto* s_stu = app.add_subcommand("study", "Run a Monte Carlo replication study");
  s_stu->add_option("--config", stu.config_path, "Study config file")->required();
  s_stu->add_option("--section", stu.section, "Config section");
  s_stu->add_option("--workers", stu.workers, "Worker threads (0 = cores)");
  s_stu->add_option("--replicates", stu.replicates, "Override replicate count");
  s_stu->add_option("--out", stu.out, "Override output directory");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = s_stu->add_option("--seed", seed_flag, "Override base seed");
  s_stu->add_flag("--timings", stu.timings, "Record wall times (breaks byte determinism)");
  s_stu->add_flag("--json", stu.json, "Print manifest as JSON");

  SummarizeArgs sum;
  auto* s_sum = app.add_subcommand("summarize", "Recompute summary.json from replicates.csv");
  s_sum->add_option("--replicates", sum.replicates_path, "replicates.csv path")->required();
  s_sum->add_option("--theta0", sum.theta0, "True parameter value")->required();
  s_sum->add_option("--out", sum.out, "Write summary JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(sim, *s_sim);
    if (s_est->parsed()) return cmd_estimate(est);
    if (s_chk->parsed()) return cmd_check(chk);
    if (s_stu->parsed()) {
      if (seed_opt->count() > 0) stu.seed = seed_flag;
      return cmd_study(stu);
    }
    if (s_sum->parsed()) return cmd_summarize(sum);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
