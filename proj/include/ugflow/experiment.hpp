#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ugflow/analysis.hpp"
#include "ugflow/dynamics.hpp"
#include "ugflow/fsle.hpp"
#include "ugflow/instance.hpp"

namespace ugflow {

inline constexpr const char* kToolName = "ugflow";
inline constexpr const char* kToolVersion = "0.1.0";

/// Evenly spaced grid 1/steps, 2/steps, ..., 1.
std::vector<double> uniform_delta_grid(std::size_t steps);

/// Number of unsatisfied equations a cell asks for: round(epsilon * n_eq).
std::size_t target_unsat_for(double epsilon, std::size_t n_eq);

struct SweepConfig {
  std::vector<int> k_list{4, 6, 8};
  std::vector<double> epsilon_list{0.4};
  std::vector<double> delta_grid = uniform_delta_grid(20);
  std::size_t n_x = 8;
  std::size_t n_eq = 20;
  std::size_t ensemble = 50;
  std::uint64_t master_seed = 1;
  std::size_t worker_count = 1;
  std::filesystem::path output_dir = "sweep_out";
  double beta = 1.0;
  /// alpha, tolerances, t_end, a_init, clamp, cadence and vicinity radius.
  /// The seed field is ignored; member seeds come from master_seed.
  DynamicsConfig dynamics;

  void validate() const;

  /// n_x = 11, n_eq = 30, k up to 30, ensemble 300. Multi-hour on one core.
  static SweepConfig paper_scale();
};

/// Seeds of a sweep: instance of cell c from derive_seed(master, {1, c}),
/// trajectory m of cell c from derive_seed(master, {2, c, m}).
std::uint64_t cell_instance_seed(std::uint64_t master, std::size_t cell);
std::uint64_t member_seed(std::uint64_t master, std::size_t cell, std::size_t member);

struct SweepCell {
  std::size_t index = 0;
  int k = 0;
  double epsilon = 0.0;
  std::size_t target_unsat = 0;
  std::uint64_t instance_seed = 0;
  std::string instance_hash;
  std::size_t generator_attempts = 0;
  bool verified = false;
  bool ok = true;
  std::string error;  // first failure, "kind: message"
  std::size_t failed_members = 0;
  ResidencyTable table;
  std::size_t implicit_members = 0;  // trajectories that switched to the stiff solver
  // Range checks over every sample of every member.
  double max_abs_spin = 0.0;
  double min_clause = 1.0;
  double max_clause = 0.0;
  std::size_t min_distinct_assignments = 0;  // over members
  bool any_converged = false;                 // some member reached V < 1e-8
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::filesystem::path> files;  // written CSVs, in write order
  bool partial() const;
};

/// Progress callback: (finished jobs, total jobs).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Runs every (k, epsilon) cell, writes residency.csv, exponent_by_k.csv,
/// exponent_by_gap.csv, one instance file per cell and manifest.json into
/// config.output_dir. Cells with a failed generation or trajectory are
/// quarantined: reported in the manifest and left out of the CSV tables.
SweepResult run_sweep(const SweepConfig& config, const ProgressFn& progress = {});

struct FsleSweepConfig {
  std::vector<double> alpha_list{1.0, 1.5, 2.0};
  std::size_t n_instances = 2;
  std::size_t seeds = 50;
  std::size_t n_x = 5;
  int k = 3;
  std::size_t target_unsat = 2;
  std::size_t n_eq = 0;  // 0 picks the generator default
  std::uint64_t master_seed = 1;
  std::size_t worker_count = 1;
  FsleOptions fsle;
  /// alpha and seed are overridden per run. Tighter than the trajectory
  /// defaults so the integration error stays well below delta0.
  DynamicsConfig dynamics = [] {
    DynamicsConfig d;
    d.rtol = 1e-6;
    d.atol = 1e-9;
    return d;
  }();

  void validate() const;
};

struct FsleSweepResult {
  std::vector<TwoLinInstance> instances;
  std::vector<FsleSummaryRow> rows;  // one per alpha, in alpha_list order
  std::vector<std::vector<FsleEstimate>> runs;  // per alpha, instance-major
  std::size_t failed_runs = 0;
  std::string first_error;
};

/// Runs every (alpha, instance, seed) FSLE experiment. The same initial
/// states are used for every alpha.
FsleSweepResult run_fsle_sweep(const FsleSweepConfig& config, const ProgressFn& progress = {});

HeaderFields describe(const FsleSweepConfig& config);
HeaderFields describe(const SweepConfig& config);

/// Runs job(i) for i in [0, count) on `workers` threads. Each index runs
/// exactly once; the first exception is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job,
                  const ProgressFn& progress = {});

}  // namespace ugflow
