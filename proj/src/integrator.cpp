#include "ugflow/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

#include "ugflow/errors.hpp"

namespace ugflow {

void OdeSystem::shifted_jacobian(const Vec&, double, SparseMat&) const {
  throw InvalidInput("this system provides no Jacobian");
}

namespace {

class SparseShiftedSolver final : public ShiftedSolver {
 public:
  explicit SparseShiftedSolver(const OdeSystem& system) : system_(system) {}

  bool factorize(const Vec& y, double shift) override {
    system_.shifted_jacobian(y, shift, matrix_);
    if (!analyzed_) {
      lu_.analyzePattern(matrix_);
      analyzed_ = true;
    }
    lu_.factorize(matrix_);
    return lu_.info() == Eigen::Success;
  }
  void solve(const Vec& rhs, Vec& x) override { x = lu_.solve(rhs); }

 private:
  const OdeSystem& system_;
  SparseMat matrix_;
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
};

}  // namespace

std::unique_ptr<ShiftedSolver> OdeSystem::make_shifted_solver() const {
  if (!has_jacobian()) throw InvalidInput("this system provides no Jacobian");
  return std::make_unique<SparseShiftedSolver>(*this);
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

// Rodas3: gamma = 1/2; stage inputs Y3 = y + 2K1, Y4 = y + 2K1 + K3;
// solution y + 2K1 + K3 + K4 (stiffly accurate); error estimate K4.
constexpr double ros_gamma = 0.5;
constexpr double c21 = 4.0, c31 = 1.0, c32 = -1.0, c41 = 1.0, c42 = -1.0, c43 = -8.0 / 3.0;

constexpr double kSafety = 0.9;

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Integrator::Integrator(const OdeSystem& system, IntegratorOptions options)
    : system_(system), opt_(options) {
  if (!(opt_.rtol > 0.0) || !(opt_.atol > 0.0)) throw InvalidInput("tolerances must be positive");
  if (!(opt_.max_step > 0.0)) throw InvalidInput("max_step must be positive");
  if (opt_.policy == MethodPolicy::implicit_only && !system_.has_jacobian())
    throw InvalidInput("implicit integration needs a Jacobian");
  const auto n = static_cast<Eigen::Index>(system_.dimension());
  for (auto& k : k_) k.resize(n);
  scratch_.resize(n);
}

void Integrator::reset(double t, const Vec& y) {
  t_ = t_prev_ = t;
  y_ = y;
  y_prev_ = y;
  f_.resize(y.size());
  system_.evaluate(y_, f_);
  ++stats_.evaluations;
  if (!all_finite(f_)) throw NumericalOverflow("non-finite derivative at the initial state");
  f_prev_ = f_;
  method_ = opt_.policy == MethodPolicy::implicit_only ? Method::rosenbrock
                                                       : Method::dormand_prince;
  switch_time_.reset();
  if (method_ == Method::rosenbrock) switch_time_ = t;
  stiff_count_ = nonstiff_count_ = 0;
  h_ = opt_.initial_step > 0.0 ? std::min(opt_.initial_step, opt_.max_step)
                               : initial_step_guess();
}

double Integrator::initial_step_guess() const {
  double d0 = 0.0, d1 = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    const double sc = opt_.atol + opt_.rtol * std::abs(y_[i]);
    d0 += (y_[i] / sc) * (y_[i] / sc);
    d1 += (f_[i] / sc) * (f_[i] / sc);
  }
  const double n = static_cast<double>(std::max<Eigen::Index>(1, y_.size()));
  d0 = std::sqrt(d0 / n);
  d1 = std::sqrt(d1 / n);
  const double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  return std::min(h, opt_.max_step);
}

double Integrator::error_norm(const Vec& err, const Vec& y_old, const Vec& y_new) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y_old[i]), std::abs(y_new[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

bool Integrator::attempt_dormand_prince(double h, Vec& y_new, double& err, double& h_lambda) {
  auto& [k1, k2, k3, k4, k5, k6, k7] = k_;
  k1 = f_;
  scratch_ = y_ + h * a21 * k1;
  system_.evaluate(scratch_, k2);
  scratch_ = y_ + h * (a31 * k1 + a32 * k2);
  system_.evaluate(scratch_, k3);
  scratch_ = y_ + h * (a41 * k1 + a42 * k2 + a43 * k3);
  system_.evaluate(scratch_, k4);
  scratch_ = y_ + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
  system_.evaluate(scratch_, k5);
  scratch_ = y_ + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
  system_.evaluate(scratch_, k6);
  y_new = y_ + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  system_.evaluate(y_new, k7);
  stats_.evaluations += 6;
  if (!all_finite(y_new) || !all_finite(k7)) return false;

  const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  err = error_norm(e, y_, y_new);
  // Hairer's stiffness indicator: h times a local Lipschitz estimate.
  const double num = (k7 - k6).squaredNorm();
  const double den = (y_new - scratch_).squaredNorm();
  h_lambda = den > 0.0 ? h * std::sqrt(num / den) : 0.0;
  return std::isfinite(err);
}

bool Integrator::attempt_rosenbrock(double h, Vec& y_new, double& err) {
  auto& [K1, K2, K3, K4, F, unused1, unused2] = k_;
  (void)unused1;
  (void)unused2;
  if (!solver_) solver_ = system_.make_shifted_solver();
  ++stats_.factorizations;
  if (!solver_->factorize(y_, 1.0 / (h * ros_gamma))) return false;

  solver_->solve(f_, K1);
  solver_->solve(f_ + (c21 / h) * K1, K2);
  scratch_ = y_ + 2.0 * K1;
  system_.evaluate(scratch_, F);
  solver_->solve(F + (c31 / h) * K1 + (c32 / h) * K2, K3);
  scratch_ = y_ + 2.0 * K1 + K3;
  system_.evaluate(scratch_, F);
  solver_->solve(F + (c41 / h) * K1 + (c42 / h) * K2 + (c43 / h) * K3, K4);
  stats_.evaluations += 2;
  y_new = scratch_ + K4;
  if (!all_finite(y_new)) return false;
  err = error_norm(K4, y_, y_new);
  return std::isfinite(err);
}

void Integrator::accept(double h, Vec& y_new) {
  system_.project(y_new, y_);
  y_prev_.swap(y_);
  f_prev_.swap(f_);
  t_prev_ = t_;
  t_ += h;
  y_.swap(y_new);
  system_.evaluate(y_, f_);
  ++stats_.evaluations;
  ++stats_.accepted;
  if (!all_finite(f_))
    throw NumericalOverflow("non-finite derivative at t = " + std::to_string(t_) +
                            "; auxiliary weights exceed double range");
}

void Integrator::switch_to_implicit() {
  if (opt_.policy != MethodPolicy::automatic || !system_.has_jacobian()) return;
  if (method_ == Method::rosenbrock) return;
  method_ = Method::rosenbrock;
  switch_time_ = t_;
}

void Integrator::step(double t_limit) {
  Vec y_new(y_.size());
  bool rejected_before = false;
  bool last_nonfinite = false;
  while (true) {
    const double floor = opt_.min_step * std::max(1.0, std::abs(t_));
    const double remaining = t_limit - t_;
    double h = std::min({h_, opt_.max_step, remaining});
    if (h < floor && remaining > floor) {
      if (last_nonfinite)
        throw NumericalOverflow("state became non-finite at t = " + std::to_string(t_));
      throw StiffnessError(t_, std::numeric_limits<double>::quiet_NaN(),
                           "step size underflow at t = " + std::to_string(t_));
    }
    if (h <= 0.0) return;

    double err = std::numeric_limits<double>::infinity();
    double h_lambda = 0.0;
    const bool ok = method_ == Method::dormand_prince
                        ? attempt_dormand_prince(h, y_new, err, h_lambda)
                        : attempt_rosenbrock(h, y_new, err);
    const double order = method_ == Method::dormand_prince ? 5.0 : 3.0;

    if (!ok) {
      ++stats_.rejected;
      last_nonfinite = true;
      rejected_before = true;
      h_ = 0.25 * h;
      continue;
    }
    last_nonfinite = false;
    if (err <= 1.0) {
      double fac = err > 0.0 ? kSafety * std::pow(err, -1.0 / order) : 10.0;
      fac = std::clamp(fac, 0.2, method_ == Method::dormand_prince ? 10.0 : 6.0);
      if (rejected_before) fac = std::min(fac, 1.0);
      const bool clipped = h < h_ && h == remaining;
      accept(h, y_new);
      if (!clipped) h_ = std::min(h * fac, opt_.max_step);

      if (method_ == Method::dormand_prince) {
        if (h_lambda > 3.25) {
          nonstiff_count_ = 0;
          if (++stiff_count_ >= opt_.stiff_patience) switch_to_implicit();
        } else if (++nonstiff_count_ >= 6) {
          stiff_count_ = 0;
        }
        if (h < opt_.collapse_step && h != remaining) switch_to_implicit();
      }
      return;
    }
    ++stats_.rejected;
    rejected_before = true;
    h_ = h * std::max(0.2, kSafety * std::pow(err, -1.0 / order));
    if (method_ == Method::dormand_prince && h_ < opt_.collapse_step) switch_to_implicit();
  }
}

void Integrator::fixed_step(double h) {
  Vec y_new(y_.size());
  double err = 0.0, h_lambda = 0.0;
  const bool ok = method_ == Method::dormand_prince ? attempt_dormand_prince(h, y_new, err, h_lambda)
                                                    : attempt_rosenbrock(h, y_new, err);
  if (!ok) throw NumericalOverflow("fixed step produced a non-finite state");
  accept(h, y_new);
}

Vec Integrator::interpolate(double t) const {
  const double h = t_ - t_prev_;
  if (h <= 0.0) return y_;
  const double s = (t - t_prev_) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * y_prev_ + (h10 * h) * f_prev_ + h01 * y_ + (h11 * h) * f_;
}

}  // namespace ugflow
