// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Budgeted for desk scale; the full-size protocol stays reachable through
// the study configs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "diffest/numdiff.hpp"

#include "diffest/errors.hpp"
#include "diffest/estfun.hpp"
#include "diffest/estimator.hpp"
#include "diffest/model.hpp"
#include "diffest/path_sim.hpp"
#include "diffest/rng.hpp"
#include "diffest/stats.hpp"
#include "diffest/study.hpp"

using namespace diffest;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

const SummaryStats* group_stats(const StudyResult& res, long n,
                                const std::string& estfun) {
  for (const auto& g : res.groups)
    if (g.n == n && g.estfun == estfun) return &g.stats;
  return nullptr;
}

double no_root_fraction(const SummaryStats& s) {
  const double total = static_cast<double>(s.count_converged + s.count_no_root +
                                           s.count_degenerate + s.count_sim_failed);
  return static_cast<double>(s.count_no_root) / total;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_type7(v, 0.5);
}

// --- C1: closed-form efficiency oracle ------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig cfg;
  cfg.model_name = "ou_sqrt_theta";
  cfg.estfun_names = {"qv"};
  cfg.theta0 = 1.0;
  cfg.x0 = 0.0;
  cfg.n_list = {10000};
  cfg.replicates = 500;
  cfg.fine_steps = 100000;
  cfg.base_seed = 20240101;
  const StudyResult res = run_study(cfg);
  const SummaryStats* s = group_stats(res, 10000, "qv");
  const double elapsed = seconds_since(t0);
  if (!s || !s->var_scaled_error) {
    report("C1", false, "missing summary group");
    return;
  }
  const double var = *s->var_scaled_error;
  const bool ok = var >= 1.7 && var <= 2.3 && elapsed <= 120.0;
  report("C1", ok,
         "var sqrt(n)(theta_hat-theta0) = " + fmt(var) +
             " (target 2.0, band [1.7,2.3]); converged " +
             std::to_string(s->count_converged) + "/500; " + fmt(elapsed) + "s");
}

// --- C2 + C3(ergodic): ergodic-model desk study ----------------------------

void criterion2_and_3a() {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig cfg;
  cfg.model_name = "ergodic_sec4";
  cfg.estfun_names = {"sec4_g", "sec4_h"};
  cfg.theta0 = 1.0;
  cfg.x0 = 0.0;
  cfg.n_list = {1000, 10000};
  cfg.replicates = 500;
  cfg.fine_steps = 100000;
  cfg.base_seed = 20240202;
  const StudyResult res = run_study(cfg);
  const double elapsed = seconds_since(t0);

  const SummaryStats* sg = group_stats(res, 10000, "sec4_g");
  const SummaryStats* sh = group_stats(res, 10000, "sec4_h");
  const SummaryStats* sh3 = group_stats(res, 1000, "sec4_h");
  if (!sg || !sh || !sh3 || !sg->ks_stat || !sg->var_scaled_error ||
      !sh->var_scaled_error) {
    report("C2", false, "missing summary groups");
    report("C3a", false, "missing summary groups");
    return;
  }
  const double ks = *sg->ks_stat;
  const double ratio = *sh->var_scaled_error / *sg->var_scaled_error;
  const bool ok2 = ks < 0.0808 && ratio >= 1.2 && elapsed <= 900.0;
  report("C2", ok2,
         "ks(Z_G, n=1e4) = " + fmt(ks) + " (< 0.0808); var ratio H/G = " +
             fmt(ratio) + " (>= 1.2); " + fmt(elapsed) + "s");

  const double frac = no_root_fraction(*sh3);
  report("C3a", frac <= 0.02,
         "ergodic sec4_h no-root fraction at n=1e3 = " + fmt(frac) +
             " (<= 0.02)");
}

// --- C3(non-ergodic): failure-rate reproduction ----------------------------

void criterion3_nonergodic() {
  StudyConfig cfg;
  cfg.model_name = "nonergodic_sec4";
  cfg.estfun_names = {"sec4_g", "sec4_h"};
  cfg.theta0 = 1.0;
  cfg.x0 = 0.0;
  cfg.n_list = {1000, 10000};
  cfg.replicates = 500;
  cfg.fine_steps = 100000;
  cfg.base_seed = 20240303;
  const StudyResult res = run_study(cfg);
  const SummaryStats* h3 = group_stats(res, 1000, "sec4_h");
  const SummaryStats* h4 = group_stats(res, 10000, "sec4_h");
  if (!h3 || !h4) {
    report("C3b", false, "missing summary groups");
    report("C3c", false, "missing summary groups");
    return;
  }
  const double f3 = no_root_fraction(*h3);
  const double f4 = no_root_fraction(*h4);
  report("C3b", f3 >= 0.29 && f3 <= 0.49,
         "non-ergodic sec4_h no-root fraction at n=1e3 = " + fmt(f3) +
             " (band [0.29,0.49], center 0.39)");
  report("C3c", f4 >= 0.07 && f4 <= 0.21,
         "non-ergodic sec4_h no-root fraction at n=1e4 = " + fmt(f4) +
             " (band [0.07,0.21], center 0.14)");
}

// --- C4: What_n converges to the mixing variable --------------------------

void criterion4() {
  const DiffusionModel model = builtin_model("ergodic_sec4");
  const auto spec = builtin_estfun("sec4_g", model);
  RootSolverConfig solver;
  std::vector<double> err3, err4;
  for (int r = 0; r < 200; ++r) {
    SimConfig sim;
    sim.fine_steps = 100000;
    sim.x0 = 0.0;
    sim.seed = replicate_stream_seed(20240404, static_cast<std::uint64_t>(r));
    const PathGrid fine = simulate_path(model, 1.0, sim);
    const double w_limit = mixing_W(spec, model, fine, 1.0);
    for (long n : {1000L, 10000L}) {
      const Sample s = Sample::from_grid(subsample(fine, n));
      const EstimationResult est = estimate(spec, s, solver);
      if (!est.theta_hat || !est.w_hat) continue;
      const double err = std::fabs(std::fabs(*est.w_hat) - std::fabs(w_limit));
      (n == 1000 ? err3 : err4).push_back(err);
    }
  }
  if (err3.size() < 150 || err4.size() < 150) {
    report("C4", false, "too many estimation failures");
    return;
  }
  const double m3 = median(err3), m4 = median(err4);
  report("C4", m4 <= 0.5 * m3,
         "median |What - W|: n=1e3 " + fmt(m3) + ", n=1e4 " + fmt(m4) +
             " (need n=1e4 <= half of n=1e3)");
}

// --- C5: efficiency identity ------------------------------------------------

void criterion5() {
  bool ok = true;
  std::string worst;
  double worst_dev = 0.0;

  const DiffusionModel erg = builtin_model("ergodic_sec4");
  const auto g = builtin_estfun("sec4_g", erg);
  const DiffusionModel ou = builtin_model("ou_sqrt_theta");
  const auto qv = builtin_estfun("qv", ou);
  for (int r = 0; r < 50; ++r) {
    SimConfig sim;
    sim.fine_steps = 2000;
    sim.x0 = 0.0;
    sim.seed = replicate_stream_seed(20240505, static_cast<std::uint64_t>(r));
    const PathGrid pe = simulate_path(erg, 1.0, sim);
    const PathGrid po = simulate_path(ou, 1.0, sim);
    for (const auto& [spec, model, path] :
         {std::tuple{&g, &erg, &pe}, std::tuple{&qv, &ou, &po}}) {
      const double dev =
          std::fabs(fisher_consistency_check(*spec, *model, *path, 1.0).ratio - 1.0);
      if (dev > worst_dev) {
        worst_dev = dev;
        worst = spec->name;
      }
      ok = ok && dev <= 1e-6;
    }
  }

  PathGrid zero;
  zero.n_steps = 64;
  zero.values.assign(65, 0.0);
  const double wg = std::fabs(mixing_W(g, erg, zero, 1.0));
  const bool const_ok = std::fabs(wg - std::sqrt(2.0)) <= 1e-6;
  ok = ok && const_ok;
  report("C5", ok,
         "max |ratio-1| over 50 paths = " + fmt(worst_dev) + " (" + worst +
             "); constant-path |W_G| = " + fmt(wg) + " (sqrt(2) +- 1e-6)");
}

// --- C6: expansion order ----------------------------------------------------

void criterion6() {
  const DiffusionModel ou = builtin_model("ou_sqrt_theta");
  const ScalarField id{[](double y) { return y; }, 6};
  const double x = 1.0, theta = 1.0;
  std::vector<double> lx, ly;
  for (int e = 4; e <= 10; ++e) {
    const double d = std::pow(2.0, -e);
    const double approx = conditional_moment_expansion(ou, id, x, d, theta, 2);
    const double exact = x * std::exp(-d);
    lx.push_back(std::log(d));
    ly.push_back(std::log(std::fabs(approx - exact)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  const double slope = sxy / sxx;
  report("C6", slope >= 2.8,
         "k=2 expansion error slope vs exact OU mean = " + fmt(slope) +
             " (>= 2.8)");
}

// --- C7: approximate martingale order ----------------------------------------

void criterion7() {
  const DiffusionModel ou = builtin_model("ou_sqrt_theta");
  const auto simple = builtin_estfun("ou_simple", ou);
  const auto exact = builtin_estfun("ou_exact", ou);
  const std::vector<double> deltas{0.25, 0.125, 0.0625, 0.03125, 0.015625};

  bool ok = true;
  std::string detail;

  const auto res =
      martingale_defect_order(simple, ou, 1.0, 1.0, deltas, 100000, 20240707);
  ok = ok && res.slope >= 1.7 && res.slope <= 2.5;
  detail += "ou_simple slope = " + fmt(res.slope) + " +- " +
            fmt(res.slope_stderr) + " (band [1.7,2.5])";

  bool censored = false;
  try {
    martingale_defect_order(exact, ou, 1.0, 1.0, deltas, 100000, 20240708);
  } catch (const AllCensored&) {
    censored = true;
  }
  ok = ok && censored;
  detail += censored ? "; ou_exact all censored" : "; ou_exact NOT censored";

  const DiffusionModel erg = builtin_model("ergodic_sec4");
  const auto g = builtin_estfun("sec4_g", erg);
  double worst_z = 0.0;
  for (const auto& [xx, th] :
       {std::pair{0.0, 2.0}, std::pair{0.5, 1.5}, std::pair{-0.7, 0.6}}) {
    const auto lm = leading_moment_check(g, erg, xx, th, 1.0, 1e-3, 100000,
                                         20240709 + static_cast<int>(10 * th));
    worst_z = std::fmax(worst_z, std::fabs(lm.z_score));
  }
  ok = ok && worst_z <= 3.0;
  detail += "; max |z| over leading-moment predictions = " + fmt(worst_z) + " (<= 3)";
  report("C7", ok, detail);
}

// --- C8: generator identities -------------------------------------------------

void criterion8() {
  std::mt19937_64 eng(20240808);
  std::uniform_real_distribution<double> ux(-1.5, 1.5), ut(0.3, 1.8);
  const char* names[] = {"efficient_generic", "qv",      "gcj_contrast_score",
                         "sec4_g",            "sec4_h",  "ou_exact",
                         "ou_simple"};
  double worst_zero = 0.0, worst_ident = 0.0;
  for (const char* name : names) {
    const DiffusionModel model =
        (std::string(name) == "sec4_g" || std::string(name) == "sec4_h")
            ? builtin_model("ergodic_sec4")
            : builtin_model("ou_sqrt_theta");
    const auto spec = builtin_estfun(name, model);
    for (int i = 0; i < 50; ++i) {
      const double x = ux(eng), theta = ut(eng);
      const double d2scale = 1.0 + std::fabs(diag_d2y(spec, x, theta));
      worst_zero =
          std::fmax(worst_zero, std::fabs(spec.g(0.0, x, x, theta)) / d2scale);

      const double g1 = numdiff::d1(
          [&](double t) { return spec.g(t, x, x, theta); }, 0.0);
      ScalarField f{[&](double y) { return spec.g(0.0, y, x, theta); }, 6};
      const double lg = generator_apply(model, f, x, theta);
      const double scale = 1.0 + std::fabs(g1) + std::fabs(lg);
      worst_ident = std::fmax(worst_ident, std::fabs(g1 + lg) / scale);
    }
  }
  const bool ok = worst_zero <= 1e-10 && worst_ident <= 1e-5;
  report("C8", ok,
         "max |g(0,x,x)|/scale = " + fmt(worst_zero) +
             " (<= 1e-10); max |g1 + L g(0)|/scale = " + fmt(worst_ident) +
             " (<= 1e-5), catalog x 50 points");
}

// --- C9: determinism ----------------------------------------------------------

void criterion9() {
  StudyConfig cfg;
  cfg.model_name = "ergodic_sec4";
  cfg.estfun_names = {"sec4_g", "sec4_h"};
  cfg.theta0 = 1.0;
  cfg.n_list = {100, 1000};
  cfg.replicates = 10;
  cfg.fine_steps = 10000;
  cfg.base_seed = 20240909;
  cfg.workers = 1;

  const fs::path base = fs::temp_directory_path() / "diffest_acceptance_c9";
  fs::remove_all(base);
  auto bytes_of = [&](const StudyConfig& c, const char* sub) {
    const fs::path dir = base / sub;
    write_outputs(run_study(c), dir.string());
    std::ifstream in(dir / "replicates.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string run1 = bytes_of(cfg, "run1");
  const std::string run2 = bytes_of(cfg, "run2");
  StudyConfig par = cfg;
  par.workers = 4;
  const std::string run3 = bytes_of(par, "run3");
  fs::remove_all(base);

  const bool ok = run1 == run2 && run1 == run3 && !run1.empty();
  report("C9", ok,
         std::string("rerun byte-identical: ") + (run1 == run2 ? "yes" : "no") +
             "; workers 1 vs 4 identical: " + (run1 == run3 ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion1();
  criterion2_and_3a();
  criterion3_nonergodic();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  std::printf("acceptance finished in %.1fs with %d failure(s)\n",
              seconds_since(t0), g_failures);
  return g_failures == 0 ? 0 : 1;
}
