#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ugflow/cnf.hpp"
#include "ugflow/dynamics.hpp"

namespace ugflow {

struct TrajectorySample {
  double t = 0.0;
  std::vector<double> spins;  // x-block or all N spins, per SpinStorage
  Assignment assignment;      // decoded from the x-blocks
  std::vector<std::uint8_t> satisfied;  // per equation
  std::size_t satisfied_count = 0;
  double energy = 0.0;
  double min_clause = 0.0;
  double max_clause = 0.0;
  double max_abs_spin = 0.0;
  double log_a_max = 0.0;
  double log_a_sum = 0.0;     // log of sum_m a_m
  std::vector<double> log_a;  // only with DynamicsConfig::keep_log_a
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  SpinStorage storage = SpinStorage::x_block;
  double observe_interval = 0.1;
  SystemState final_state;
  IntegratorStats stats;
  std::optional<double> implicit_from;  // time of the switch to the stiff solver
};

/// s uniform in (-1, 1)^N and a per config.a_init, from config.seed.
SystemState initial_state(const CnfFormula& formula, const DynamicsConfig& config);

/// Integrates from initial_state(formula, config) to config.t_end.
TrajectoryRecord integrate(const CnfFormula& formula, const DynamicsConfig& config);

/// Integrates from `start` (at start.t) to config.t_end.
TrajectoryRecord integrate_from(const CnfFormula& formula, const DynamicsConfig& config,
                                SystemState start);

TrajectorySample observe(const CnfFormula& formula, std::span<const double> s,
                         std::span<const double> log_a, double t, SpinStorage storage,
                         bool keep_log_a);

/// Ordered key/value pairs echoed as '# key=value' lines at the top of CSV outputs.
using HeaderFields = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal text that reads back to the same double.
std::string header_number(double v);

HeaderFields describe(const DynamicsConfig& config);

/// Columns: t, sat_count, V, maxK, log_a_max, in_vicinity, then x0..x{n-1}
/// when `with_values`.
void write_trajectory_csv(const TrajectoryRecord& record, const CnfFormula& formula,
                          const HeaderFields& header, double radius, bool with_values,
                          std::ostream& out);

// Binary state dump: "UGFS", u32 version, u64 N, u64 M, f64 t, N f64 spins,
// M f64 log-weights; little-endian.
void write_state(const SystemState& state, std::ostream& out);
SystemState read_state(std::istream& in);

}  // namespace ugflow
