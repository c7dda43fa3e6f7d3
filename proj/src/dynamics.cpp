#include "ugflow/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "ugflow/errors.hpp"

namespace ugflow {

double SystemState::a(std::size_t m) const { return std::exp(log_a[m]); }

std::vector<double> SystemState::a_values() const {
  std::vector<double> out(log_a.size());
  std::transform(log_a.begin(), log_a.end(), out.begin(), [](double v) { return std::exp(v); });
  return out;
}

void DynamicsConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw InvalidInput("tolerances must be positive");
  if (!(max_step > 0.0)) throw InvalidInput("max_step must be positive");
  if (!(t_end > 0.0)) throw InvalidInput("t_end must be positive");
  if (!(observe_interval > 0.0)) throw InvalidInput("observation interval must be positive");
  if (!(vicinity_radius > 0.0)) throw InvalidInput("vicinity radius must be positive");
  if (burn_in < 0.0 || burn_in >= t_end) throw InvalidInput("burn_in must lie in [0, t_end)");
}

std::string to_string(AuxInit v) {
  return v == AuxInit::constant_one ? "constant_one" : "uniform_unit";
}
std::string to_string(ClampMode v) { return v == ClampMode::hard ? "hard" : "none"; }
std::string to_string(MethodPolicy v) {
  switch (v) {
    case MethodPolicy::automatic: return "auto";
    case MethodPolicy::explicit_only: return "explicit";
    case MethodPolicy::implicit_only: return "implicit";
  }
  return "auto";
}
std::string to_string(SpinStorage v) { return v == SpinStorage::x_block ? "x_block" : "full"; }

double clause_value(const CnfFormula& formula, std::span<const double> s, std::size_t m) {
  double k = 1.0;
  for (const auto& lit : formula.clause(m).literals) k *= 0.5 * (1.0 - lit.sign * s[lit.var]);
  return k;
}

double clause_value_excluding(const CnfFormula& formula, std::span<const double> s, std::size_t m,
                              std::size_t l) {
  const auto& lits = formula.clause(m).literals;
  bool found = false;
  double k = std::ldexp(1.0, -static_cast<int>(lits.size()));
  for (const auto& lit : lits) {
    if (lit.var == l) {
      found = true;
      continue;
    }
    k *= 1.0 - lit.sign * s[lit.var];
  }
  if (!found)
    throw InvalidInput("spin " + std::to_string(l) + " does not occur in clause " +
                       std::to_string(m));
  return k;
}

double energy(const CnfFormula& formula, std::span<const double> s,
              std::span<const double> log_a) {
  double v = 0.0;
  for (std::size_t m = 0; m < formula.num_clauses(); ++m) {
    const double k = clause_value(formula, s, m);
    if (k != 0.0) v += std::exp(log_a[m]) * k * k;
  }
  return v;
}

FlowDerivative rhs(const CnfFormula& formula, const SystemState& state, double alpha) {
  const ClauseFlow flow(formula, alpha, ClampMode::none);
  Vec dy(static_cast<Eigen::Index>(flow.dimension()));
  flow.evaluate(flow.pack(state), dy);
  FlowDerivative out;
  const auto n = formula.num_spins();
  out.ds.assign(dy.data(), dy.data() + n);
  out.da.resize(formula.num_clauses());
  for (std::size_t m = 0; m < out.da.size(); ++m) out.da[m] = state.a(m) * dy[static_cast<Eigen::Index>(n + m)];
  return out;
}

ClauseFlow::ClauseFlow(const CnfFormula& formula, double alpha, ClampMode clamp)
    : num_spins_(formula.num_spins()),
      num_clauses_(formula.num_clauses()),
      alpha_(alpha),
      clamp_(clamp) {
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  start_.reserve(num_clauses_ + 1);
  start_.push_back(0);
  for (const auto& c : formula.clauses()) {
    for (const auto& lit : c.literals) {
      var_.push_back(lit.var);
      sign_.push_back(static_cast<double>(lit.sign));
    }
    start_.push_back(static_cast<std::uint32_t>(var_.size()));
    max_len_ = std::max(max_len_, c.literals.size());
  }

  const auto dim = static_cast<Eigen::Index>(dimension());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index r = 0; r < dim; ++r) trip.emplace_back(r, r, 0.0);
  for (std::size_t m = 0; m < num_clauses_; ++m) {
    const auto row_m = static_cast<Eigen::Index>(num_spins_ + m);
    for (auto t = start_[m]; t < start_[m + 1]; ++t) {
      for (auto u = start_[m]; u < start_[m + 1]; ++u) trip.emplace_back(var_[t], var_[u], 0.0);
      trip.emplace_back(var_[t], row_m, 0.0);
      trip.emplace_back(row_m, var_[t], 0.0);
    }
  }
  pattern_.resize(dim, dim);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  auto slot = [&](Eigen::Index row, Eigen::Index col) -> std::int64_t {
    const auto* outer = pattern_.outerIndexPtr();
    const auto* inner = pattern_.innerIndexPtr();
    const auto* first = inner + outer[col];
    const auto* last = inner + outer[col + 1];
    const auto* it = std::lower_bound(first, last, static_cast<int>(row));
    return static_cast<std::int64_t>(it - inner);
  };
  diag_slot_.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index r = 0; r < dim; ++r) diag_slot_[static_cast<std::size_t>(r)] = slot(r, r);
  ss_start_.push_back(0);
  for (std::size_t m = 0; m < num_clauses_; ++m) {
    const auto row_m = static_cast<Eigen::Index>(num_spins_ + m);
    for (auto t = start_[m]; t < start_[m + 1]; ++t) {
      for (auto u = start_[m]; u < start_[m + 1]; ++u) ss_slot_.push_back(slot(var_[t], var_[u]));
      sa_slot_.push_back(slot(var_[t], row_m));
      as_slot_.push_back(slot(row_m, var_[t]));
    }
    ss_start_.push_back(static_cast<std::uint32_t>(ss_slot_.size()));
  }
}

double ClauseFlow::power_alpha(double k) const {
  if (alpha_ == 1.0) return k;
  if (alpha_ == 2.0) return k * k;
  return k > 0.0 ? std::pow(k, alpha_) : 0.0;
}

void ClauseFlow::evaluate(const Vec& y, Vec& dydt) const {
  dydt.setZero(y.size());
  std::vector<double> f(max_len_), pre(max_len_ + 1), suf(max_len_ + 1);
  const double* s = y.data();
  for (std::size_t m = 0; m < num_clauses_; ++m) {
    const auto b = start_[m];
    const auto len = start_[m + 1] - b;
    const double a = std::exp(y[static_cast<Eigen::Index>(num_spins_ + m)]);
    double k;
    if (len == 2) {
      const double f0 = 0.5 * (1.0 - sign_[b] * s[var_[b]]);
      const double f1 = 0.5 * (1.0 - sign_[b + 1] * s[var_[b + 1]]);
      k = f0 * f1;
      if (k != 0.0) {
        dydt[var_[b]] += a * sign_[b] * f1 * k;
        dydt[var_[b + 1]] += a * sign_[b + 1] * f0 * k;
      }
    } else {
      pre[0] = 1.0;
      for (std::uint32_t t = 0; t < len; ++t) {
        f[t] = 0.5 * (1.0 - sign_[b + t] * s[var_[b + t]]);
        pre[t + 1] = pre[t] * f[t];
      }
      k = pre[len];
      if (k != 0.0) {
        suf[len] = 1.0;
        for (std::uint32_t t = len; t-- > 0;) suf[t] = suf[t + 1] * f[t];
        for (std::uint32_t t = 0; t < len; ++t)
          dydt[var_[b + t]] += a * sign_[b + t] * pre[t] * suf[t + 1] * k;
      }
    }
    dydt[static_cast<Eigen::Index>(num_spins_ + m)] = power_alpha(k);
  }
}

void ClauseFlow::clause_jacobian(std::size_t m, const Vec& y, ClauseJacobian& out) const {
  const auto b = start_[m];
  const auto len = start_[m + 1] - b;
  out.f.resize(len);
  out.pre.resize(len + 1);
  out.suf.resize(len + 1);
  out.excl.resize(len);
  out.ss.resize(static_cast<std::size_t>(len) * len);
  out.sa.resize(len);
  out.as.resize(len);
  const double* s = y.data();
  const double a = std::exp(y[static_cast<Eigen::Index>(num_spins_ + m)]);
  auto& f = out.f;
  out.pre[0] = 1.0;
  for (std::uint32_t t = 0; t < len; ++t) {
    f[t] = 0.5 * (1.0 - sign_[b + t] * s[var_[b + t]]);
    out.pre[t + 1] = out.pre[t] * f[t];
  }
  out.suf[len] = 1.0;
  for (std::uint32_t t = len; t-- > 0;) out.suf[t] = out.suf[t + 1] * f[t];
  for (std::uint32_t t = 0; t < len; ++t) out.excl[t] = out.pre[t] * out.suf[t + 1];
  const double k = out.pre[len];

  double dpow;  // alpha K^(alpha-1)
  if (alpha_ == 1.0) dpow = 1.0;
  else if (alpha_ == 2.0) dpow = 2.0 * k;
  else dpow = k > 0.0 ? alpha_ * std::pow(k, alpha_ - 1.0) : 0.0;

  for (std::uint32_t t = 0; t < len; ++t) {
    const double ct = sign_[b + t];
    for (std::uint32_t u = 0; u < len; ++u) {
      double entry;
      if (t == u) {
        entry = -0.5 * a * out.excl[t] * out.excl[t];
      } else {
        double pair = 1.0;  // product over q != t, u
        for (std::uint32_t q = 0; q < len; ++q)
          if (q != t && q != u) pair *= f[q];
        entry = -0.5 * a * ct * sign_[b + u] * (pair * k + out.excl[t] * out.excl[u]);
      }
      out.ss[t * len + u] = entry;
    }
    out.sa[t] = a * ct * out.excl[t] * k;
    out.as[t] = -0.5 * dpow * ct * out.excl[t];
  }
}

void ClauseFlow::shifted_jacobian(const Vec& y, double shift, SparseMat& matrix) const {
  if (matrix.rows() != pattern_.rows() || matrix.nonZeros() != pattern_.nonZeros()) matrix = pattern_;
  double* val = matrix.valuePtr();
  std::fill(val, val + matrix.nonZeros(), 0.0);
  for (auto sl : diag_slot_) val[sl] += shift;

  ClauseJacobian cj;
  std::size_t lit_index = 0;
  for (std::size_t m = 0; m < num_clauses_; ++m) {
    const auto len = start_[m + 1] - start_[m];
    clause_jacobian(m, y, cj);
    const auto* ss = ss_slot_.data() + ss_start_[m];
    for (std::uint32_t t = 0; t < len; ++t) {
      for (std::uint32_t u = 0; u < len; ++u) val[ss[t * len + u]] -= cj.ss[t * len + u];
      val[sa_slot_[lit_index + t]] -= cj.sa[t];
      val[as_slot_[lit_index + t]] -= cj.as[t];
    }
    lit_index += len;
  }
}

class ClauseFlowSolver final : public ShiftedSolver {
 public:
  explicit ClauseFlowSolver(const ClauseFlow& flow)
      : flow_(flow),
        n_(static_cast<Eigen::Index>(flow.num_spins_)),
        schur_(n_, n_),
        sa_(flow.var_.size()),
        as_(flow.var_.size()),
        r_(n_),
        u_(n_) {}

  bool factorize(const Vec& y, double shift) override {
    shift_ = shift;
    schur_.setZero();
    schur_.diagonal().setConstant(shift);
    const auto& st = flow_.start_;
    const auto& var = flow_.var_;
    for (std::size_t m = 0; m < flow_.num_clauses_; ++m) {
      const auto b = st[m];
      const auto len = st[m + 1] - b;
      flow_.clause_jacobian(m, y, cj_);
      for (std::uint32_t t = 0; t < len; ++t) {
        sa_[b + t] = cj_.sa[t];
        as_[b + t] = cj_.as[t];
      }
      for (std::uint32_t t = 0; t < len; ++t)
        for (std::uint32_t u = 0; u < len; ++u)
          schur_(var[b + t], var[b + u]) -= cj_.ss[t * len + u] + cj_.sa[t] * cj_.as[u] / shift;
    }
    lu_.compute(schur_);
    const double rc = lu_.rcond();
    return std::isfinite(rc) && rc > 1e-14;
  }

  void solve(const Vec& rhs, Vec& x) override {
    const auto& st = flow_.start_;
    const auto& var = flow_.var_;
    const auto n = n_;
    r_ = rhs.head(n);
    for (std::size_t m = 0; m < flow_.num_clauses_; ++m) {
      const double q = rhs[n + static_cast<Eigen::Index>(m)] / shift_;
      for (auto t = st[m]; t < st[m + 1]; ++t) r_[var[t]] += sa_[t] * q;
    }
    u_ = lu_.solve(r_);
    x.resize(rhs.size());
    x.head(n) = u_;
    for (std::size_t m = 0; m < flow_.num_clauses_; ++m) {
      double v = rhs[n + static_cast<Eigen::Index>(m)];
      for (auto t = st[m]; t < st[m + 1]; ++t) v += as_[t] * u_[var[t]];
      x[n + static_cast<Eigen::Index>(m)] = v / shift_;
    }
  }

 private:
  const ClauseFlow& flow_;
  Eigen::Index n_;
  double shift_ = 1.0;
  Eigen::MatrixXd schur_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::vector<double> sa_, as_;
  Vec r_, u_;
  ClauseFlow::ClauseJacobian cj_;
};

std::unique_ptr<ShiftedSolver> ClauseFlow::make_shifted_solver() const {
  return std::make_unique<ClauseFlowSolver>(*this);
}

void ClauseFlow::project(Vec& y, const Vec& previous) const {
  if (clamp_ == ClampMode::none) return;
  for (std::size_t p = 0; p < num_spins_; ++p) y[static_cast<Eigen::Index>(p)] = std::clamp(y[static_cast<Eigen::Index>(p)], -1.0, 1.0);
  for (std::size_t m = 0; m < num_clauses_; ++m) {
    const auto i = static_cast<Eigen::Index>(num_spins_ + m);
    y[i] = std::max(y[i], previous[i]);
  }
}

Vec ClauseFlow::pack(const SystemState& state) const {
  if (state.s.size() != num_spins_ || state.log_a.size() != num_clauses_)
    throw InvalidInput("state dimensions do not match the formula");
  Vec y(static_cast<Eigen::Index>(dimension()));
  std::copy(state.s.begin(), state.s.end(), y.data());
  std::copy(state.log_a.begin(), state.log_a.end(), y.data() + num_spins_);
  return y;
}

SystemState ClauseFlow::unpack(const Vec& y, double t) const {
  SystemState st;
  st.s.assign(y.data(), y.data() + num_spins_);
  st.log_a.assign(y.data() + num_spins_, y.data() + num_spins_ + num_clauses_);
  st.t = t;
  return st;
}

}  // namespace ugflow
