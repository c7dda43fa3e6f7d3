#include "ugflow/fsle.hpp"

#include <cmath>
#include <ostream>

#include "ugflow/errors.hpp"
#include "ugflow/random.hpp"

namespace ugflow {

void FsleOptions::validate() const {
  if (!(delta0 > 0.0) || !(delta1 > delta0)) throw InvalidInput("need 0 < delta0 < delta1");
  if (delta1 >= 1.0) throw InvalidInput("delta1 must be small");
  if (n_segments == 0) throw InvalidInput("n_segments must be at least 1");
  if (!(segment_cap > 0.0)) throw InvalidInput("segment_cap must be positive");
  if (burn_in < 0.0) throw InvalidInput("burn_in must be nonnegative");
}

void PairedFlow::evaluate(const Vec& y, Vec& dydt) const {
  const auto d = static_cast<Eigen::Index>(flow_.dimension());
  dydt.resize(2 * d);
  Vec half(d), out(d);
  half = y.head(d);
  flow_.evaluate(half, out);
  dydt.head(d) = out;
  half = y.tail(d);
  flow_.evaluate(half, out);
  dydt.tail(d) = out;
}

void PairedFlow::shifted_jacobian(const Vec& y, double shift, SparseMat& matrix) const {
  const auto d = static_cast<Eigen::Index>(flow_.dimension());
  SparseMat a, b;
  flow_.shifted_jacobian(y.head(d), shift, a);
  flow_.shifted_jacobian(y.tail(d), shift, b);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(a.nonZeros() + b.nonZeros()));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (SparseMat::InnerIterator it(a, c); it; ++it) trip.emplace_back(it.row(), c, it.value());
    for (SparseMat::InnerIterator it(b, c); it; ++it)
      trip.emplace_back(it.row() + d, c + d, it.value());
  }
  matrix.resize(2 * d, 2 * d);
  matrix.setFromTriplets(trip.begin(), trip.end());
  matrix.makeCompressed();
}

namespace {

Eigen::Index pick_spin(const CnfFormula& formula, const Vec& state, const FsleOptions& options,
                       Rng& rng) {
  const auto nx = formula.num_x_spins();
  if (options.target == PerturbTarget::free_x_spin) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index q = 0; q < static_cast<Eigen::Index>(nx); ++q)
      if (std::abs(state[q]) < 1.0 - options.delta0) free.push_back(q);
    if (!free.empty()) return free[uniform_index(rng, free.size())];
  }
  return static_cast<Eigen::Index>(uniform_index(rng, nx));
}

// Moves spin p of the second copy by delta0, inward when at the upper bound.
void kick(Vec& y, Eigen::Index d, Eigen::Index p, double delta0) {
  const double s = y[d + p];
  y[d + p] = s + delta0 <= 1.0 ? s + delta0 : s - delta0;
}

class PairedSolver final : public ShiftedSolver {
 public:
  PairedSolver(const ClauseFlow& flow)
      : d_(static_cast<Eigen::Index>(flow.dimension())),
        first_(flow.make_shifted_solver()),
        second_(flow.make_shifted_solver()) {}

  bool factorize(const Vec& y, double shift) override {
    half_ = y.head(d_);
    if (!first_->factorize(half_, shift)) return false;
    half_ = y.tail(d_);
    return second_->factorize(half_, shift);
  }

  void solve(const Vec& rhs, Vec& x) override {
    x.resize(rhs.size());
    half_ = rhs.head(d_);
    first_->solve(half_, out_);
    x.head(d_) = out_;
    half_ = rhs.tail(d_);
    second_->solve(half_, out_);
    x.tail(d_) = out_;
  }

 private:
  Eigen::Index d_;
  std::unique_ptr<ShiftedSolver> first_, second_;
  Vec half_, out_;
};

}  // namespace

std::unique_ptr<ShiftedSolver> PairedFlow::make_shifted_solver() const {
  return std::make_unique<PairedSolver>(flow_);
}

void PairedFlow::project(Vec& y, const Vec& previous) const {
  const auto d = static_cast<Eigen::Index>(flow_.dimension());
  Vec cur = y.head(d);
  flow_.project(cur, previous.head(d));
  y.head(d) = cur;
  cur = y.tail(d);
  flow_.project(cur, previous.tail(d));
  y.tail(d) = cur;
}

double PairedFlow::spin_separation(const Vec& y) const {
  const auto d = static_cast<Eigen::Index>(flow_.dimension());
  const auto n = static_cast<Eigen::Index>(flow_.num_spins());
  return (y.head(n) - y.segment(d, n)).norm();
}

FsleEstimate fsle(const CnfFormula& formula, const DynamicsConfig& config,
                  const FsleOptions& options) {
  config.validate();
  options.validate();
  const ClauseFlow flow(formula, config.alpha, config.clamp);
  IntegratorOptions iopt;
  iopt.rtol = config.rtol;
  iopt.atol = config.atol;
  iopt.max_step = config.max_step;
  iopt.policy = config.solver;

  FsleEstimate est;
  est.alpha = config.alpha;
  est.delta0 = options.delta0;
  est.delta1 = options.delta1;
  est.n_segments = options.n_segments;

  const auto d = static_cast<Eigen::Index>(flow.dimension());
  Vec fiducial = flow.pack(initial_state(formula, config));
  double t = 0.0;
  if (options.burn_in > 0.0) {
    Integrator integ(flow, iopt);
    integ.reset(0.0, fiducial);
    while (integ.time() < options.burn_in) integ.step(options.burn_in);
    fiducial = integ.state();
    t = integ.time();
  }

  Rng rng(derive_seed(options.seed, {0xf5e1ULL}));
  const PairedFlow pair(flow);
  const auto ns = static_cast<Eigen::Index>(flow.num_spins());
  Vec y(2 * d), offset;
  for (std::size_t seg = 0; seg < options.n_segments; ++seg) {
    y.head(d) = fiducial;
    const double carried = offset.size() ? offset.head(ns).norm() : 0.0;
    if (options.realign && carried > 0.0) {
      // Keep the direction the separation has grown along, rescaled to delta0.
      y.tail(d) = fiducial + offset * (options.delta0 / carried);
      y.segment(d, ns) = y.segment(d, ns).cwiseMax(-1.0).cwiseMin(1.0);
    }
    if (!(options.realign && carried > 0.0) || pair.spin_separation(y) == 0.0) {
      y.tail(d) = fiducial;
      kick(y, d, pick_spin(formula, fiducial, options, rng), options.delta0);
    }

    Integrator integ(pair, iopt);
    integ.reset(t, y);
    const double t_start = t, t_stop = t + options.segment_cap;
    double rate = 0.0, elapsed = options.segment_cap;
    bool reached = false;
    const double start_sep = pair.spin_separation(y);
    double prev_sep = start_sep;
    while (integ.time() < t_stop) {
      integ.step(t_stop);
      const double sep = pair.spin_separation(integ.state());
      if (sep >= options.delta1) {
        // Log-linear crossing time inside the last step.
        double crossing = integ.time();
        if (prev_sep > 0.0 && sep > prev_sep) {
          const double w = (std::log(options.delta1) - std::log(prev_sep)) /
                           (std::log(sep) - std::log(prev_sep));
          crossing = integ.previous_time() + std::clamp(w, 0.0, 1.0) * integ.last_step();
        }
        elapsed = crossing - t_start;
        reached = true;
        break;
      }
      prev_sep = sep;
    }
    if (reached && elapsed > 0.0) {
      rate = std::log(options.delta1 / start_sep) / elapsed;
    } else {
      // Finite-time growth rate over the whole cap.
      ++est.capped_segments;
      const double sep = pair.spin_separation(integ.state());
      rate = sep > 0.0 ? std::log(sep / start_sep) / (integ.time() - t_start) : 0.0;
    }
    est.segment_rates.push_back(rate);
    est.segment_times.push_back(elapsed);
    fiducial = integ.state().head(d);
    offset = integ.state().tail(d) - fiducial;
    t = integ.time();
  }

  double sum = 0.0, sum2 = 0.0;
  for (double r : est.segment_rates) {
    sum += r;
    sum2 += r * r;
  }
  const double n = static_cast<double>(est.segment_rates.size());
  est.lambda_mean = sum / n;
  est.lambda_std = n > 1 ? std::sqrt(std::max(0.0, (sum2 - n * est.lambda_mean * est.lambda_mean) / (n - 1))) : 0.0;
  const SystemState end = flow.unpack(fiducial, t);
  est.converged = energy(formula, end) < 1e-8;
  return est;
}

FsleSummaryRow summarize_fsle(double alpha, const std::vector<FsleEstimate>& runs) {
  FsleSummaryRow row;
  row.alpha = alpha;
  row.runs = runs.size();
  if (runs.empty()) return row;
  double sum = 0.0, sum2 = 0.0;
  for (const auto& r : runs) {
    sum += r.lambda_mean;
    sum2 += r.lambda_mean * r.lambda_mean;
    row.segments += r.segment_rates.size();
    row.capped += r.capped_segments;
    row.converged_runs += r.converged;
  }
  const double n = static_cast<double>(runs.size());
  row.mean = sum / n;
  row.std = n > 1 ? std::sqrt(std::max(0.0, (sum2 - n * row.mean * row.mean) / (n - 1))) : 0.0;
  return row;
}

void write_fsle_csv(const std::vector<FsleSummaryRow>& rows, const HeaderFields& header,
                    std::ostream& out) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "alpha,fsle_mean,fsle_std,runs,segments,capped_segments,converged_runs\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.alpha << ',' << r.mean << ',' << r.std << ',' << r.runs << ',' << r.segments << ','
        << r.capped << ',' << r.converged_runs << '\n';
}

}  // namespace ugflow
