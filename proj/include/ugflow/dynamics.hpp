#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ugflow/cnf.hpp"
#include "ugflow/integrator.hpp"

namespace ugflow {

/// Point of the flow: spins s in [-1, 1]^N and auxiliary weights a in
/// (0, inf)^M. The weights are held as log a; they grow exponentially on
/// unsatisfiable formulas and would leave double range otherwise.
struct SystemState {
  std::vector<double> s;
  std::vector<double> log_a;
  double t = 0.0;

  double a(std::size_t m) const;
  std::vector<double> a_values() const;
};

enum class AuxInit { constant_one, uniform_unit };
enum class ClampMode { hard, none };
enum class SpinStorage { x_block, full };

struct DynamicsConfig {
  double alpha = 2.0;
  AuxInit a_init = AuxInit::constant_one;
  double rtol = 1e-3;
  double atol = 1e-6;
  double max_step = 1.0;
  double t_end = 600.0;
  double observe_interval = 0.1;
  ClampMode clamp = ClampMode::hard;
  MethodPolicy solver = MethodPolicy::automatic;
  std::uint64_t seed = 0;
  SpinStorage storage = SpinStorage::x_block;
  bool keep_log_a = false;
  double vicinity_radius = 0.1;
  double burn_in = 0.0;  // no samples are taken before this time

  void validate() const;
};

std::string to_string(AuxInit v);
std::string to_string(ClampMode v);
std::string to_string(MethodPolicy v);
std::string to_string(SpinStorage v);

/// K_m = prod over literals of (1 - c s) / 2, in [0, 1]. The per-clause
/// 2^-|m| normalization makes a fully violated clause of any length equal 1.
double clause_value(const CnfFormula& formula, std::span<const double> s, std::size_t m);

/// K_ml: K_m with the factor of spin l removed, normalization kept, so that
/// K_m = K_ml * (1 - c_ml s_l). Throws InvalidInput if l is not in clause m.
double clause_value_excluding(const CnfFormula& formula, std::span<const double> s, std::size_t m,
                              std::size_t l);

/// V = sum_m a_m K_m^2.
double energy(const CnfFormula& formula, std::span<const double> s,
              std::span<const double> log_a);
inline double energy(const CnfFormula& formula, const SystemState& state) {
  return energy(formula, state.s, state.log_a);
}

struct FlowDerivative {
  std::vector<double> ds;  // = -grad_s V
  std::vector<double> da;  // = a K^alpha
};

FlowDerivative rhs(const CnfFormula& formula, const SystemState& state, double alpha);

/// The flow on y = [s, log a] (length N + M):
///   ds_l/dt     = sum_m 2 a_m c_ml K_ml K_m
///   dlog a_m/dt = K_m^alpha
/// with an analytic sparse Jacobian for the implicit integrator.
class ClauseFlow final : public OdeSystem {
 public:
  ClauseFlow(const CnfFormula& formula, double alpha, ClampMode clamp = ClampMode::hard);

  std::size_t dimension() const override { return num_spins_ + num_clauses_; }
  void evaluate(const Vec& y, Vec& dydt) const override;
  bool has_jacobian() const override { return true; }
  void shifted_jacobian(const Vec& y, double shift, SparseMat& matrix) const override;
  /// Eliminates the log a rows (their diagonal block is shift*I) and factors
  /// the dense N x N Schur complement on the spins.
  std::unique_ptr<ShiftedSolver> make_shifted_solver() const override;
  /// Clamps s to [-1, 1] and keeps every log a_m from decreasing.
  void project(Vec& y, const Vec& previous) const override;

  std::size_t num_spins() const { return num_spins_; }
  std::size_t num_clauses() const { return num_clauses_; }
  double alpha() const { return alpha_; }

  Vec pack(const SystemState& state) const;
  SystemState unpack(const Vec& y, double t) const;

 private:
  friend class ClauseFlowSolver;

  // Jacobian entries of one clause: ss is len x len row-major (d ds_t / d s_u),
  // sa[t] = d ds_t / d log a_m, as[t] = d (K_m^alpha) / d s_t.
  struct ClauseJacobian {
    std::vector<double> f, pre, suf, excl, ss, sa, as;
  };
  void clause_jacobian(std::size_t m, const Vec& y, ClauseJacobian& out) const;
  double power_alpha(double k) const;

  std::size_t num_spins_;
  std::size_t num_clauses_;
  double alpha_;
  ClampMode clamp_;
  std::vector<std::uint32_t> start_;  // clause m occupies [start_[m], start_[m+1])
  std::vector<std::uint32_t> var_;
  std::vector<double> sign_;
  std::size_t max_len_ = 0;

  // Offsets into the compressed value array of the Jacobian pattern.
  SparseMat pattern_;
  std::vector<std::int64_t> diag_slot_;
  std::vector<std::int64_t> ss_slot_;  // per clause, len*len block, row-major (l, p)
  std::vector<std::uint32_t> ss_start_;
  std::vector<std::int64_t> sa_slot_;  // per literal: (spin row, clause column)
  std::vector<std::int64_t> as_slot_;  // per literal: (clause row, spin column)
};

}  // namespace ugflow
