#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "diffest/estimator.hpp"
#include "diffest/path_sim.hpp"

namespace diffest {

struct StudyConfig {
  std::string model_name;
  std::vector<std::string> estfun_names;
  double theta0 = 1.0;
  double x0 = 0.0;
  std::vector<long> n_list;
  int replicates = 500;
  long fine_steps = 100000;
  std::uint64_t base_seed = 0;
  RootSolverConfig solver;
  std::string output_dir;
  int workers = 0;  // 0 = logical cores
  Scheme scheme = Scheme::milstein;
  // Timing capture is opt-in so default outputs are byte-reproducible;
  // with it off the wall_time_ms column is written as 0.
  bool record_timings = false;
};

enum class RecordStatus {
  converged,
  multiple_roots_resolved,
  no_root,
  degenerate_w,
  sim_failed
};

std::string to_string(RecordStatus s);
RecordStatus record_status_from_string(const std::string& s);

struct ReplicateRecord {
  int replicate_id = 0;
  long n = 0;
  std::string estfun;
  std::optional<double> theta_hat;
  std::optional<double> w_hat;
  std::optional<double> z;  // sqrt(n)(theta_hat - theta0)/|w_hat|
  RecordStatus status = RecordStatus::no_root;
  long wall_time_ms = 0;
};

struct SummaryStats {
  long count_converged = 0;
  long count_no_root = 0;
  long count_degenerate = 0;
  long count_sim_failed = 0;
  std::optional<double> mean_z;
  std::optional<double> var_z;
  std::optional<double> ks_stat;
  std::optional<double> var_scaled_error;  // sample variance of sqrt(n)(theta_hat-theta0)
  // Quantiles of z at {1,5,25,50,75,95,99} percent.
  std::vector<std::pair<int, double>> quantiles;
};

struct StudyGroup {
  long n = 0;
  std::string estfun;
  SummaryStats stats;
};

struct StudyResult {
  StudyConfig config;
  std::vector<ReplicateRecord> records;  // canonical order
  std::vector<StudyGroup> groups;
};

// One fine path per replicate (from the replicate's own seed stream),
// shared across all n and estimating functions; estimates, failure
// accounting and per-group summaries. Deterministic for a fixed base
// seed regardless of worker count.
StudyResult run_study(const StudyConfig& config);

SummaryStats summarize_group(const std::vector<const ReplicateRecord*>& records,
                             double theta0);

// Regroup records (e.g. parsed back from replicates.csv) and recompute
// all summaries; group order follows first appearance.
std::vector<StudyGroup> summarize_records(
    const std::vector<ReplicateRecord>& records, double theta0);

struct FileManifestEntry {
  std::string path;
  long rows = 0;
};

// Writes replicates.csv, summary.json, and per-group qq_/kde_ CSVs into
// output_dir; returns the manifest.
std::vector<FileManifestEntry> write_outputs(const StudyResult& result,
                                             const std::string& output_dir);

void write_replicates_csv(const std::vector<ReplicateRecord>& records,
                          std::ostream& out);
std::vector<ReplicateRecord> read_replicates_csv(std::istream& in);

std::string summary_json(const std::vector<StudyGroup>& groups);

}  // namespace diffest
