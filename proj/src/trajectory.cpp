#include "ugflow/trajectory.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ugflow/errors.hpp"
#include "ugflow/random.hpp"

namespace ugflow {

SystemState initial_state(const CnfFormula& formula, const DynamicsConfig& config) {
  Rng rng(config.seed);
  SystemState st;
  st.s.resize(formula.num_spins());
  for (auto& v : st.s) v = uniform_open(rng, -1.0, 1.0);
  st.log_a.assign(formula.num_clauses(), 0.0);
  if (config.a_init == AuxInit::uniform_unit)
    for (auto& v : st.log_a) v = std::log(uniform_open_unit(rng));
  st.t = 0.0;
  return st;
}

TrajectorySample observe(const CnfFormula& formula, std::span<const double> s,
                         std::span<const double> log_a, double t, SpinStorage storage,
                         bool keep_log_a) {
  TrajectorySample out;
  out.t = t;
  out.assignment = decode_assignment(s, formula);
  out.satisfied.resize(formula.n_eq());
  for (std::size_t q = 0; q < formula.n_eq(); ++q) {
    out.satisfied[q] = is_satisfied(formula.equations()[q], out.assignment, formula.k());
    out.satisfied_count += out.satisfied[q];
  }
  out.min_clause = std::numeric_limits<double>::infinity();
  out.max_clause = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < formula.num_clauses(); ++m) {
    const double k = clause_value(formula, s, m);
    out.min_clause = std::min(out.min_clause, k);
    out.max_clause = std::max(out.max_clause, k);
    if (k != 0.0) out.energy += std::exp(log_a[m]) * k * k;
  }
  for (double v : s) out.max_abs_spin = std::max(out.max_abs_spin, std::abs(v));
  out.log_a_max = *std::max_element(log_a.begin(), log_a.end());
  double acc = 0.0;
  for (double la : log_a) acc += std::exp(la - out.log_a_max);
  out.log_a_sum = out.log_a_max + std::log(acc);
  const auto kept = storage == SpinStorage::full ? s.size() : formula.num_x_spins();
  out.spins.assign(s.begin(), s.begin() + static_cast<long>(kept));
  if (keep_log_a) out.log_a.assign(log_a.begin(), log_a.end());
  return out;
}

TrajectoryRecord integrate(const CnfFormula& formula, const DynamicsConfig& config) {
  return integrate_from(formula, config, initial_state(formula, config));
}

TrajectoryRecord integrate_from(const CnfFormula& formula, const DynamicsConfig& config,
                                SystemState start) {
  config.validate();
  if (start.t >= config.t_end) throw InvalidInput("start time is not before t_end");
  const ClauseFlow flow(formula, config.alpha, config.clamp);
  IntegratorOptions opts;
  opts.rtol = config.rtol;
  opts.atol = config.atol;
  opts.max_step = config.max_step;
  opts.policy = config.solver;
  Integrator integ(flow, opts);
  integ.reset(start.t, flow.pack(start));

  const auto n = static_cast<Eigen::Index>(formula.num_spins());
  const auto m = static_cast<Eigen::Index>(formula.num_clauses());
  TrajectoryRecord rec;
  rec.storage = config.storage;
  rec.observe_interval = config.observe_interval;
  const double dt = config.observe_interval;
  const double slack = 1e-9 * dt;
  std::size_t next = 0;
  auto sample_time = [&](std::size_t i) { return start.t + static_cast<double>(i) * dt; };
  while (sample_time(next) < config.burn_in - slack) ++next;

  std::vector<double> s(static_cast<std::size_t>(n)), la(static_cast<std::size_t>(m));
  auto record_at = [&](double t) {
    const Vec y = integ.interpolate(t);
    for (Eigen::Index p = 0; p < n; ++p) {
      double v = y[p];
      if (config.clamp == ClampMode::hard) v = std::clamp(v, -1.0, 1.0);
      s[static_cast<std::size_t>(p)] = v;
    }
    // Log-weights are interpolated linearly so samples stay monotone.
    const double h = integ.time() - integ.previous_time();
    const double w = h > 0.0 ? (t - integ.previous_time()) / h : 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lo = integ.previous_state()[n + j], hi = integ.state()[n + j];
      la[static_cast<std::size_t>(j)] = lo + w * (hi - lo);
    }
    rec.samples.push_back(observe(formula, s, la, t, config.storage, config.keep_log_a));
  };

  if (sample_time(next) <= start.t + slack) {
    record_at(start.t);
    ++next;
  }
  try {
    while (integ.time() < config.t_end) {
      integ.step(config.t_end);
      while (sample_time(next) <= integ.time() + slack && sample_time(next) <= config.t_end + slack) {
        record_at(std::min(sample_time(next), integ.time()));
        ++next;
      }
    }
  } catch (const StiffnessError& e) {
    const auto& y = integ.state();
    const double max_la = m > 0 ? y.tail(m).maxCoeff() : 0.0;
    throw StiffnessError(e.time(), max_la,
                         std::string(e.what()) + " (max log a = " + std::to_string(max_la) + ")");
  }
  rec.final_state = flow.unpack(integ.state(), integ.time());
  rec.stats = integ.stats();
  rec.implicit_from = integ.switch_time();
  return rec;
}

std::string header_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

HeaderFields describe(const DynamicsConfig& c) {
  const auto num = header_number;
  return {{"alpha", num(c.alpha)},
          {"a_init", to_string(c.a_init)},
          {"rtol", num(c.rtol)},
          {"atol", num(c.atol)},
          {"max_step", num(c.max_step)},
          {"t_end", num(c.t_end)},
          {"observe_interval", num(c.observe_interval)},
          {"clamp", to_string(c.clamp)},
          {"solver", to_string(c.solver)},
          {"seed", std::to_string(c.seed)},
          {"burn_in", num(c.burn_in)},
          {"time_unit", "dimensionless flow time"}};
}

void write_trajectory_csv(const TrajectoryRecord& record, const CnfFormula& formula,
                          const HeaderFields& header, double radius, bool with_values,
                          std::ostream& out) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "# n_x=" << formula.n_x() << "\n# n_eq=" << formula.n_eq() << "\n# k=" << formula.k()
      << "\n# vicinity_space=x_block\n# vicinity_radius=" << radius << '\n';
  out << "t,sat_count,V,maxK,log_a_max,in_vicinity";
  if (with_values)
    for (std::size_t i = 0; i < formula.n_x(); ++i) out << ",x" << i;
  out << '\n';
  out.precision(10);
  for (const auto& smp : record.samples) {
    const bool in = x_block_distance(formula, smp.spins, smp.assignment) <= radius;
    out << smp.t << ',' << smp.satisfied_count << ',' << smp.energy << ',' << smp.max_clause << ','
        << smp.log_a_max << ',' << (in ? 1 : 0);
    if (with_values)
      for (int v : smp.assignment) out << ',' << v;
    out << '\n';
  }
}

namespace {

constexpr char kMagic[4] = {'U', 'G', 'F', 'S'};
constexpr std::uint32_t kStateVersion = 1;

static_assert(std::endian::native == std::endian::little, "state dumps assume little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw InvalidInput("truncated state dump");
  return v;
}

}  // namespace

void write_state(const SystemState& state, std::ostream& out) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kStateVersion);
  put<std::uint64_t>(out, state.s.size());
  put<std::uint64_t>(out, state.log_a.size());
  put<double>(out, state.t);
  out.write(reinterpret_cast<const char*>(state.s.data()),
            static_cast<std::streamsize>(state.s.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(state.log_a.data()),
            static_cast<std::streamsize>(state.log_a.size() * sizeof(double)));
}

SystemState read_state(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw InvalidInput("not a state dump");
  if (get<std::uint32_t>(in) != kStateVersion) throw InvalidInput("unsupported state dump version");
  SystemState st;
  st.s.resize(get<std::uint64_t>(in));
  st.log_a.resize(get<std::uint64_t>(in));
  st.t = get<double>(in);
  for (auto& v : st.s) v = get<double>(in);
  for (auto& v : st.log_a) v = get<double>(in);
  return st;
}

}  // namespace ugflow
