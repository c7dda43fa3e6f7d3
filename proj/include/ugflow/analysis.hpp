#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ugflow/cnf.hpp"
#include "ugflow/instance.hpp"
#include "ugflow/trajectory.hpp"

namespace ugflow {

inline constexpr double kDefaultVicinityRadius = 0.1;

/// A sample reduced to what residency needs. `in` is true when the x-block
/// spins lie within the vicinity radius of the decoded assignment's corner.
struct LabeledSample {
  double t = 0.0;
  bool in = false;
  std::size_t satisfied = 0;
  Assignment assignment;
  double distance = 0.0;
};

/// IN(assignment) or TRANSIENT label per sample.
std::vector<LabeledSample> vicinity_episode_labels(const TrajectoryRecord& record,
                                                   const CnfFormula& formula,
                                                   const TwoLinInstance& instance, double radius);

/// Per-trajectory time totals. Each sample owns the interval up to the next
/// sample, so the last sample carries no time.
struct ResidencyTimes {
  double total_time = 0.0;
  double vicinity_time = 0.0;
  std::vector<double> at_least;  // IN time with satisfied / n_eq >= delta, per grid point
};

ResidencyTimes residency_times(std::span<const LabeledSample> labels, std::size_t n_eq,
                               std::span<const double> delta_grid);

struct ResidencyTable {
  std::vector<double> delta_grid;
  std::vector<double> y_values;      // pooled IN time / pooled non-transient time
  std::vector<double> y_total_time;  // pooled IN time / pooled total time
  std::vector<double> y_traj_mean;   // mean over trajectories with nonzero vicinity time
  std::vector<double> y_traj_std;
  double vicinity_radius = kDefaultVicinityRadius;
  double total_time = 0.0;
  double vicinity_time = 0.0;
  double transient_time = 0.0;
  std::size_t ensemble_size = 0;
  std::size_t nonempty_trajectories = 0;

  /// No vicinity time at all; y_values are then NaN.
  bool empty() const { return vicinity_time == 0.0; }
};

/// Throws InvalidInput unless the grid is ascending inside (0, 1].
void validate_delta_grid(std::span<const double> delta_grid);

ResidencyTable pool_residency(std::span<const ResidencyTimes> trajectories,
                              std::span<const double> delta_grid, double radius);

ResidencyTable residency(const TrajectoryRecord& record, const CnfFormula& formula,
                         const TwoLinInstance& instance, std::span<const double> delta_grid,
                         double radius = kDefaultVicinityRadius);

/// f = log_{n_x}(ln beta - ln y). `defined` is false when the outer argument
/// is not above 1 (or y is NaN); `log_argument` always carries the raw value.
/// y = 0 gives f = +inf.
struct ScalingExponent {
  bool defined = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  double log_argument = std::numeric_limits<double>::quiet_NaN();
};

ScalingExponent scaling_exponent_f(double y, std::size_t n_x, double beta = 1.0);

/// Least-squares fit of ln y = ln beta - n^f over points (n, y) with
/// distinct n >= 2 and y in (0, 1].
struct ScalingFit {
  double beta = 1.0;
  double f = 0.0;
  double residual = 0.0;  // sum of squared residuals in ln y
};

ScalingFit fit_scaling(std::span<const std::size_t> n_values, std::span<const double> y_values);

/// (1 / T) times the trapezoid integral of K_g^alpha over the record span.
/// Needs samples holding every spin of clause g (full storage, unless g only
/// touches x-spins).
double mle_lower_bound(const TrajectoryRecord& record, const CnfFormula& formula, double alpha,
                       std::size_t g);

struct ErgodicitySummary {
  std::size_t distinct_assignments = 0;  // distinct IN labels
  std::size_t episodes = 0;              // IN episodes
  double max_dwell = 0.0;                // longest single IN episode
  Assignment most_visited;               // most IN time; empty if never IN
  double most_visited_time = 0.0;
  std::size_t most_visited_recurrences = 0;  // IN episodes of most_visited
};

/// An episode ends when the label or the decoded assignment changes.
ErgodicitySummary ergodicity_diagnostics(std::span<const LabeledSample> labels);

ErgodicitySummary ergodicity_diagnostics(const TrajectoryRecord& record, const CnfFormula& formula,
                                         const TwoLinInstance& instance,
                                         double radius = kDefaultVicinityRadius);

/// Labels read back from a trajectory CSV.
struct TrajectoryCsv {
  HeaderFields header;
  std::size_t n_eq = 0;
  double vicinity_radius = kDefaultVicinityRadius;
  std::vector<LabeledSample> samples;
};

/// Parses the CSV written by write_trajectory_csv. Throws ParseError.
TrajectoryCsv read_trajectory_csv(std::istream& in);

void write_residency_csv(const ResidencyTable& table, const HeaderFields& header,
                         std::size_t n_x, double beta, std::ostream& out);

}  // namespace ugflow
