#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ugflow/cnf.hpp"
#include "ugflow/dynamics.hpp"
#include "ugflow/trajectory.hpp"

namespace ugflow {

enum class PerturbTarget { any_x_spin, free_x_spin };

struct FsleOptions {
  double delta0 = 1e-8;
  double delta1 = 1e-4;
  std::size_t n_segments = 10;
  /// Longest co-integration per segment. A capped segment scores its
  /// finite-time rate ln(d(cap) / delta0) / cap.
  double segment_cap = 20.0;
  /// Fiducial time before the first segment.
  double burn_in = 10.0;
  std::uint64_t seed = 0;  // picks the perturbed spins
  /// free_x_spin draws among x-spins not pinned at +-1.
  PerturbTarget target = PerturbTarget::any_x_spin;
  /// Start each later segment from the previous end separation rescaled to
  /// delta0 instead of a fresh single-spin kick.
  bool realign = true;

  void validate() const;
};

struct FsleEstimate {
  double alpha = 0.0;
  double lambda_mean = 0.0;
  double lambda_std = 0.0;
  double delta0 = 0.0;
  double delta1 = 0.0;
  std::size_t n_segments = 0;
  std::size_t capped_segments = 0;
  /// Fiducial ended at V < 1e-8, i.e. a solution corner.
  bool converged = false;
  std::vector<double> segment_rates;
  std::vector<double> segment_times;
};

/// Threshold FSLE. A fiducial trajectory (initial state from config.seed) runs
/// for the burn-in. The first segment shifts one x-spin of a copy by delta0
/// towards the interior; each later segment restarts the copy at the previous
/// end separation rescaled to delta0 (or a fresh kick when realign is off or
/// the copies merged). Both copies are co-integrated with shared steps until
/// the L2 spin separation reaches delta1, giving rate ln(delta1/d0) / elapsed,
/// or until segment_cap passes, giving ln(d/d0) / cap (negative when the
/// copies converge). The fiducial carries on from the end of each segment.
FsleEstimate fsle(const CnfFormula& formula, const DynamicsConfig& config,
                  const FsleOptions& options);

/// Two copies of the flow integrated as one system so both see the same steps.
class PairedFlow final : public OdeSystem {
 public:
  explicit PairedFlow(const ClauseFlow& flow) : flow_(flow) {}
  std::size_t dimension() const override { return 2 * flow_.dimension(); }
  void evaluate(const Vec& y, Vec& dydt) const override;
  bool has_jacobian() const override { return true; }
  void shifted_jacobian(const Vec& y, double shift, SparseMat& matrix) const override;
  std::unique_ptr<ShiftedSolver> make_shifted_solver() const override;
  void project(Vec& y, const Vec& previous) const override;

  /// L2 distance between the spin parts of the two copies.
  double spin_separation(const Vec& y) const;

 private:
  const ClauseFlow& flow_;
};

/// One row per alpha: alpha, mean, std, runs, capped fraction.
struct FsleSummaryRow {
  double alpha = 0.0;
  double mean = 0.0;  // mean over runs of the per-run lambda_mean
  double std = 0.0;
  std::size_t runs = 0;
  std::size_t segments = 0;
  std::size_t capped = 0;
  std::size_t converged_runs = 0;
};

FsleSummaryRow summarize_fsle(double alpha, const std::vector<FsleEstimate>& runs);

void write_fsle_csv(const std::vector<FsleSummaryRow>& rows, const HeaderFields& header,
                    std::ostream& out);

}  // namespace ugflow
