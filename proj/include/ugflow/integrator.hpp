#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <cstddef>
#include <memory>
#include <optional>

namespace ugflow {

using Vec = Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

/// Holds a factorization of shift*I - df/dy at one state.
class ShiftedSolver {
 public:
  virtual ~ShiftedSolver() = default;
  /// False when the matrix is numerically singular.
  virtual bool factorize(const Vec& y, double shift) = 0;
  virtual void solve(const Vec& rhs, Vec& x) = 0;
};

/// Autonomous system dy/dt = f(y).
class OdeSystem {
 public:
  virtual ~OdeSystem() = default;
  virtual std::size_t dimension() const = 0;
  virtual void evaluate(const Vec& y, Vec& dydt) const = 0;

  virtual bool has_jacobian() const { return false; }
  /// Writes shift*I - df/dy at y into `matrix`. The sparsity pattern must not
  /// depend on y so the symbolic factorization can be reused.
  virtual void shifted_jacobian(const Vec& y, double shift, SparseMat& matrix) const;
  /// Solver used by the implicit method. The default factorizes
  /// shifted_jacobian with a sparse LU whose ordering is computed once.
  virtual std::unique_ptr<ShiftedSolver> make_shifted_solver() const;

  /// Maps an accepted step result back onto the admissible set.
  virtual void project(Vec& /*y*/, const Vec& /*previous*/) const {}
};

enum class Method { dormand_prince, rosenbrock };
enum class MethodPolicy { automatic, explicit_only, implicit_only };

struct IntegratorOptions {
  double rtol = 1e-6;
  double atol = 1e-9;
  double max_step = 1.0;
  double initial_step = 0.0;  // 0 picks one from the local derivative scale
  double min_step = 1e-12;    // relative to max(1, |t|)
  MethodPolicy policy = MethodPolicy::automatic;
  /// Consecutive stiff-flagged explicit steps before switching to Rosenbrock.
  int stiff_patience = 15;
  /// An explicit step below this size also triggers the switch.
  double collapse_step = 1e-7;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  std::size_t factorizations = 0;
};

/// Adaptive single-trajectory integrator. Starts with Dormand-Prince 5(4)
/// and, under MethodPolicy::automatic, hands over permanently to the
/// four-stage L-stable Rosenbrock scheme (order 3, embedded order 2) when the
/// explicit method reports stiffness. Dense output between the last two
/// accepted points is cubic Hermite.
class Integrator {
 public:
  Integrator(const OdeSystem& system, IntegratorOptions options);

  void reset(double t, const Vec& y);

  /// One accepted step that does not pass t_limit.
  void step(double t_limit);
  /// Fixed step of size h with no error control (convergence tests).
  void fixed_step(double h);

  double time() const { return t_; }
  const Vec& state() const { return y_; }
  const Vec& derivative() const { return f_; }
  double previous_time() const { return t_prev_; }
  const Vec& previous_state() const { return y_prev_; }
  double last_step() const { return t_ - t_prev_; }
  double suggested_step() const { return h_; }

  /// Cubic Hermite interpolant on [previous_time, time].
  Vec interpolate(double t) const;

  Method method() const { return method_; }
  std::optional<double> switch_time() const { return switch_time_; }
  const IntegratorStats& stats() const { return stats_; }

 private:
  bool attempt_dormand_prince(double h, Vec& y_new, double& err, double& h_lambda);
  bool attempt_rosenbrock(double h, Vec& y_new, double& err);
  void accept(double h, Vec& y_new);
  double error_norm(const Vec& err, const Vec& y_old, const Vec& y_new) const;
  double initial_step_guess() const;
  void switch_to_implicit();

  const OdeSystem& system_;
  IntegratorOptions opt_;
  Method method_ = Method::dormand_prince;
  std::optional<double> switch_time_;
  IntegratorStats stats_;

  double t_ = 0.0, t_prev_ = 0.0, h_ = 0.0;
  Vec y_, f_, y_prev_, f_prev_;
  int stiff_count_ = 0, nonstiff_count_ = 0;

  std::array<Vec, 7> k_;
  Vec scratch_;
  std::unique_ptr<ShiftedSolver> solver_;
};

}  // namespace ugflow
