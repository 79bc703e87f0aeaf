#include "diffest/study.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <thread>

#include "diffest/errors.hpp"
#include "diffest/rng.hpp"
#include "diffest/stats.hpp"

#include "json.hpp"

namespace diffest {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr int kQuantilePercents[] = {1, 5, 25, 50, 75, 95, 99};

}  // namespace

std::string to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::converged: return "converged";
    case RecordStatus::multiple_roots_resolved: return "multiple_roots_resolved";
    case RecordStatus::no_root: return "no_root";
    case RecordStatus::degenerate_w: return "degenerate_w";
    default: return "sim_failed";
  }
}

RecordStatus record_status_from_string(const std::string& s) {
  if (s == "converged") return RecordStatus::converged;
  if (s == "multiple_roots_resolved") return RecordStatus::multiple_roots_resolved;
  if (s == "no_root") return RecordStatus::no_root;
  if (s == "degenerate_w") return RecordStatus::degenerate_w;
  if (s == "sim_failed") return RecordStatus::sim_failed;
  throw IoError("unknown record status '" + s + "'");
}

namespace {

RecordStatus to_record_status(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return RecordStatus::converged;
    case SolveStatus::multiple_roots_resolved:
      return RecordStatus::multiple_roots_resolved;
    case SolveStatus::degenerate_w: return RecordStatus::degenerate_w;
    default: return RecordStatus::no_root;
  }
}

void validate(const StudyConfig& config, const DiffusionModel& model) {
  if (config.replicates < 1)
    throw ConfigError("study: replicates must be >= 1");
  if (config.fine_steps < 1)
    throw ConfigError("study: fine_steps must be >= 1");
  if (config.solver.scan_points < 16)
    throw ConfigError("study: scan_points must be >= 16");
  for (long n : config.n_list) {
    if (n < 1) throw ConfigError("study: n must be >= 1");
    if (config.fine_steps % n != 0)
      throw ConfigError("study: fine_steps " + std::to_string(config.fine_steps) +
                        " not divisible by n " + std::to_string(n));
  }
  if (!model.state_space.contains(config.x0))
    throw ConfigError("study: x0 outside the model state space");
  if (!model.theta_domain.contains(config.theta0))
    throw ConfigError("study: theta0 outside the parameter domain");
  if (!model.theta_domain.contains(config.solver.search_lo) ||
      !model.theta_domain.contains(config.solver.search_hi))
    throw ConfigError("study: search interval not inside the parameter domain");
}

void run_one_replicate(const StudyConfig& config, const DiffusionModel& model,
                       const std::vector<EstimatingFunctionSpec>& specs,
                       int replicate_id, ReplicateRecord* out) {
  const std::size_t per_n = specs.size();
  PathGrid fine;
  bool sim_ok = true;
  try {
    SimConfig sim;
    sim.scheme = config.scheme;
    sim.fine_steps = config.fine_steps;
    sim.seed = replicate_stream_seed(config.base_seed,
                                     static_cast<std::uint64_t>(replicate_id));
    sim.x0 = config.x0;
    fine = simulate_path(model, config.theta0, sim);
  } catch (const StateEscape&) {
    sim_ok = false;
  } catch (const NonFiniteResult&) {
    sim_ok = false;
  }

  std::size_t slot = 0;
  for (long n : config.n_list) {
    Sample sample;
    if (sim_ok) sample = Sample::from_grid(subsample(fine, n));
    for (std::size_t e = 0; e < specs.size(); ++e, ++slot) {
      ReplicateRecord& rec = out[slot];
      rec.replicate_id = replicate_id;
      rec.n = n;
      rec.estfun = specs[e].name;
      if (!sim_ok) {
        rec.status = RecordStatus::sim_failed;
        continue;
      }
      const auto start = std::chrono::steady_clock::now();
      try {
        const EstimationResult res = estimate(specs[e], sample, config.solver);
        rec.status = to_record_status(res.status);
        rec.theta_hat = res.theta_hat;
        rec.w_hat = res.w_hat;
        if (res.theta_hat && res.w_hat && *res.w_hat != 0.0)
          rec.z = std::sqrt(static_cast<double>(n)) *
                  (*res.theta_hat - config.theta0) / std::fabs(*res.w_hat);
      } catch (const std::exception&) {
        // Replicate-level failures are recorded, never thrown.
        rec.status = RecordStatus::sim_failed;
      }
      if (config.record_timings) {
        const auto stop = std::chrono::steady_clock::now();
        rec.wall_time_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(stop - start)
                .count();
      }
    }
  }
  (void)per_n;
}

}  // namespace

SummaryStats summarize_group(const std::vector<const ReplicateRecord*>& records,
                             double theta0) {
  SummaryStats s;
  std::vector<double> zs;
  std::vector<double> scaled;
  for (const ReplicateRecord* r : records) {
    switch (r->status) {
      case RecordStatus::converged:
      case RecordStatus::multiple_roots_resolved:
        ++s.count_converged;
        break;
      case RecordStatus::no_root: ++s.count_no_root; break;
      case RecordStatus::degenerate_w: ++s.count_degenerate; break;
      case RecordStatus::sim_failed: ++s.count_sim_failed; break;
    }
    if (r->z) zs.push_back(*r->z);
    if (r->theta_hat)
      scaled.push_back(std::sqrt(static_cast<double>(r->n)) *
                       (*r->theta_hat - theta0));
  }
  if (!zs.empty()) {
    s.mean_z = mean(zs);
    s.ks_stat = ks_stat(zs);
    std::vector<double> sorted = zs;
    std::sort(sorted.begin(), sorted.end());
    for (int p : kQuantilePercents)
      s.quantiles.emplace_back(p, quantile_type7(sorted, p / 100.0));
  }
  if (zs.size() > 1) s.var_z = sample_variance(zs);
  if (scaled.size() > 1) s.var_scaled_error = sample_variance(scaled);
  return s;
}

std::vector<StudyGroup> summarize_records(
    const std::vector<ReplicateRecord>& records, double theta0) {
  // Group in order of first appearance, which matches config order for
  // canonically sorted records.
  std::vector<StudyGroup> groups;
  std::vector<std::vector<const ReplicateRecord*>> members;
  for (const ReplicateRecord& r : records) {
    std::size_t gi = groups.size();
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].n == r.n && groups[i].estfun == r.estfun) {
        gi = i;
        break;
      }
    }
    if (gi == groups.size()) {
      groups.push_back(StudyGroup{r.n, r.estfun, {}});
      members.emplace_back();
    }
    members[gi].push_back(&r);
  }
  for (std::size_t i = 0; i < groups.size(); ++i)
    groups[i].stats = summarize_group(members[i], theta0);
  return groups;
}

StudyResult run_study(const StudyConfig& config) {
  DiffusionModel model;
  std::vector<EstimatingFunctionSpec> specs;
  try {
    model = builtin_model(config.model_name);
    for (const auto& name : config.estfun_names)
      specs.push_back(builtin_estfun(name, model));
  } catch (const UnknownModel& e) {
    throw ConfigError(e.what());
  } catch (const UnknownEstFun& e) {
    throw ConfigError(e.what());
  } catch (const ModelMismatch& e) {
    throw ConfigError(e.what());
  }
  validate(config, model);

  StudyResult result;
  result.config = config;
  const std::size_t per_replicate = config.n_list.size() * specs.size();
  result.records.resize(static_cast<std::size_t>(config.replicates) *
                        per_replicate);

  if (per_replicate > 0) {
    int workers = config.workers > 0
                      ? config.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, config.replicates));
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= config.replicates) return;
        run_one_replicate(config, model, specs, r,
                          result.records.data() +
                              static_cast<std::size_t>(r) * per_replicate);
      }
    };
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  } else {
    result.records.clear();
  }

  result.groups = summarize_records(result.records, config.theta0);
  return result;
}

void write_replicates_csv(const std::vector<ReplicateRecord>& records,
                          std::ostream& out) {
  out << "replicate_id,n,estfun,theta_hat,w_hat,z,status,wall_time_ms\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt17(*v) : std::string();
  };
  for (const ReplicateRecord& r : records) {
    out << r.replicate_id << ',' << r.n << ',' << r.estfun << ','
        << opt(r.theta_hat) << ',' << opt(r.w_hat) << ',' << opt(r.z) << ','
        << to_string(r.status) << ',' << r.wall_time_ms << '\n';
  }
}

std::vector<ReplicateRecord> read_replicates_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("replicate_id,", 0) != 0)
    throw IoError("read_replicates_csv: missing header");
  std::vector<ReplicateRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 8)
      throw IoError("read_replicates_csv: malformed row '" + line + "'");
    ReplicateRecord r;
    r.replicate_id = std::stoi(fields[0]);
    r.n = std::stol(fields[1]);
    r.estfun = fields[2];
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.theta_hat = opt(fields[3]);
    r.w_hat = opt(fields[4]);
    r.z = opt(fields[5]);
    r.status = record_status_from_string(fields[6]);
    r.wall_time_ms = std::stol(fields[7]);
    records.push_back(std::move(r));
  }
  return records;
}

std::string summary_json(const std::vector<StudyGroup>& groups) {
  nlohmann::ordered_json root;
  root["groups"] = nlohmann::ordered_json::array();
  for (const StudyGroup& g : groups) {
    nlohmann::ordered_json jg;
    jg["n"] = g.n;
    jg["estfun"] = g.estfun;
    jg["count_converged"] = g.stats.count_converged;
    jg["count_no_root"] = g.stats.count_no_root;
    jg["count_degenerate"] = g.stats.count_degenerate;
    jg["count_sim_failed"] = g.stats.count_sim_failed;
    auto put = [&jg](const char* key, const std::optional<double>& v) {
      if (v)
        jg[key] = *v;
      else
        jg[key] = nullptr;
    };
    put("mean_z", g.stats.mean_z);
    put("var_z", g.stats.var_z);
    put("ks_stat", g.stats.ks_stat);
    put("var_scaled_error", g.stats.var_scaled_error);
    nlohmann::ordered_json jq = nlohmann::ordered_json::object();
    for (const auto& [p, v] : g.stats.quantiles) jq[std::to_string(p)] = v;
    jg["quantiles"] = jq;
    root["groups"].push_back(jg);
  }
  return root.dump(2) + "\n";
}

std::vector<FileManifestEntry> write_outputs(const StudyResult& result,
                                             const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("write_outputs: cannot create '" + output_dir + "'");

  std::vector<FileManifestEntry> manifest;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(output_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_outputs: cannot write '" + path + "'");
    return std::make_pair(path, std::move(out));
  };

  {
    auto [path, out] = open("replicates.csv");
    write_replicates_csv(result.records, out);
    manifest.push_back({path, static_cast<long>(result.records.size())});
  }
  {
    auto [path, out] = open("summary.json");
    out << summary_json(result.groups);
    manifest.push_back({path, static_cast<long>(result.groups.size())});
  }

  for (const StudyGroup& g : result.groups) {
    std::vector<double> zs;
    std::vector<double> scaled;
    for (const ReplicateRecord& r : result.records) {
      if (r.n != g.n || r.estfun != g.estfun) continue;
      if (r.z) zs.push_back(*r.z);
      if (r.theta_hat)
        scaled.push_back(std::sqrt(static_cast<double>(r.n)) *
                         (*r.theta_hat - result.config.theta0));
    }
    const std::string suffix =
        std::to_string(g.n) + "_" + g.estfun + ".csv";
    {
      auto [path, out] = open("qq_" + suffix);
      out << "theoretical,empirical\n";
      long rows = 0;
      if (!zs.empty()) {
        for (const auto& [q, z] : qq_data(zs)) {
          out << fmt17(q) << ',' << fmt17(z) << '\n';
          ++rows;
        }
      }
      manifest.push_back({path, rows});
    }
    {
      auto [path, out] = open("kde_" + suffix);
      out << "x,density\n";
      long rows = 0;
      if (!scaled.empty()) {
        bool degenerate = false;
        const double bw = nrd0_bandwidth(scaled, &degenerate);
        const auto [mn, mx] = std::minmax_element(scaled.begin(), scaled.end());
        const double lo = *mn - 3.0 * bw;
        const double hi = *mx + 3.0 * bw;
        std::vector<double> xs(512);
        for (std::size_t i = 0; i < xs.size(); ++i)
          xs[i] = lo + (hi - lo) * static_cast<double>(i) / 511.0;
        const KdeResult k = kde(scaled, xs);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          out << fmt17(xs[i]) << ',' << fmt17(k.density[i]) << '\n';
          ++rows;
        }
      }
      manifest.push_back({path, rows});
    }
  }
  return manifest;
}

}  // namespace diffest
