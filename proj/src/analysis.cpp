#include "ugflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ugflow/dynamics.hpp"
#include "ugflow/errors.hpp"

namespace ugflow {

std::vector<LabeledSample> vicinity_episode_labels(const TrajectoryRecord& record,
                                                   const CnfFormula& formula,
                                                   const TwoLinInstance& instance, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("vicinity radius must be positive");
  std::vector<LabeledSample> out;
  out.reserve(record.samples.size());
  for (const auto& s : record.samples) {
    LabeledSample l;
    l.t = s.t;
    l.assignment = decode_assignment(s.spins, formula);
    l.distance = x_block_distance(formula, s.spins, l.assignment);
    l.in = l.distance <= radius;
    l.satisfied = satisfied_count(instance, l.assignment);
    out.push_back(std::move(l));
  }
  return out;
}

void validate_delta_grid(std::span<const double> delta_grid) {
  if (delta_grid.empty()) throw InvalidInput("delta grid is empty");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    const double d = delta_grid[i];
    if (!(d > 0.0 && d <= 1.0)) throw InvalidInput("delta grid values must lie in (0, 1]");
    if (i > 0 && !(d > delta_grid[i - 1])) throw InvalidInput("delta grid must be ascending");
  }
}

namespace {

// satisfied / n_eq >= delta, decided on integers where possible so grid points
// such as 2/3 do not flip on rounding.
bool meets(std::size_t satisfied, std::size_t n_eq, double delta) {
  const double lhs = static_cast<double>(satisfied);
  const double rhs = delta * static_cast<double>(n_eq);
  return lhs >= rhs - 1e-9 * std::max(1.0, rhs);
}

}  // namespace

ResidencyTimes residency_times(std::span<const LabeledSample> labels, std::size_t n_eq,
                               std::span<const double> delta_grid) {
  validate_delta_grid(delta_grid);
  if (n_eq == 0) throw InvalidInput("n_eq must be positive");
  ResidencyTimes r;
  r.at_least.assign(delta_grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
    const double w = labels[i + 1].t - labels[i].t;
    if (w < 0.0) throw InvalidInput("sample times are not ascending");
    r.total_time += w;
    if (!labels[i].in) continue;
    r.vicinity_time += w;
    for (std::size_t d = 0; d < delta_grid.size(); ++d)
      if (meets(labels[i].satisfied, n_eq, delta_grid[d])) r.at_least[d] += w;
  }
  return r;
}

ResidencyTable pool_residency(std::span<const ResidencyTimes> trajectories,
                              std::span<const double> delta_grid, double radius) {
  validate_delta_grid(delta_grid);
  const auto nd = delta_grid.size();
  ResidencyTable t;
  t.delta_grid.assign(delta_grid.begin(), delta_grid.end());
  t.vicinity_radius = radius;
  t.ensemble_size = trajectories.size();
  std::vector<double> in(nd, 0.0), sum(nd, 0.0), sum2(nd, 0.0);
  for (const auto& r : trajectories) {
    if (r.at_least.size() != nd) throw InvalidInput("residency times do not match the delta grid");
    t.total_time += r.total_time;
    t.vicinity_time += r.vicinity_time;
    for (std::size_t d = 0; d < nd; ++d) in[d] += r.at_least[d];
    if (r.vicinity_time > 0.0) {
      ++t.nonempty_trajectories;
      for (std::size_t d = 0; d < nd; ++d) {
        const double y = r.at_least[d] / r.vicinity_time;
        sum[d] += y;
        sum2[d] += y * y;
      }
    }
  }
  t.transient_time = t.total_time - t.vicinity_time;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  t.y_values.assign(nd, nan);
  t.y_total_time.assign(nd, nan);
  t.y_traj_mean.assign(nd, nan);
  t.y_traj_std.assign(nd, nan);
  for (std::size_t d = 0; d < nd; ++d) {
    if (t.vicinity_time > 0.0) t.y_values[d] = in[d] / t.vicinity_time;
    if (t.total_time > 0.0) t.y_total_time[d] = in[d] / t.total_time;
    if (t.nonempty_trajectories > 0) {
      const double n = static_cast<double>(t.nonempty_trajectories);
      const double mean = sum[d] / n;
      t.y_traj_mean[d] = mean;
      t.y_traj_std[d] = n > 1 ? std::sqrt(std::max(0.0, (sum2[d] - n * mean * mean) / (n - 1))) : 0.0;
    }
  }
  return t;
}

ResidencyTable residency(const TrajectoryRecord& record, const CnfFormula& formula,
                         const TwoLinInstance& instance, std::span<const double> delta_grid,
                         double radius) {
  const auto labels = vicinity_episode_labels(record, formula, instance, radius);
  const ResidencyTimes r = residency_times(labels, instance.n_eq(), delta_grid);
  return pool_residency(std::span(&r, 1), delta_grid, radius);
}

ScalingExponent scaling_exponent_f(double y, std::size_t n_x, double beta) {
  if (n_x < 2) throw InvalidInput("n_x must be at least 2");
  if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
  if (y < 0.0 || y > 1.0) throw InvalidInput("y must lie in [0, 1]");
  ScalingExponent f;
  if (std::isnan(y)) return f;
  f.log_argument = std::log(beta) - std::log(y);
  if (!(f.log_argument > 1.0)) return f;
  f.defined = true;
  f.value = std::log(f.log_argument) / std::log(static_cast<double>(n_x));
  return f;
}

ScalingFit fit_scaling(std::span<const std::size_t> n_values, std::span<const double> y_values) {
  if (n_values.size() != y_values.size() || n_values.size() < 2)
    throw InvalidInput("fit needs at least two (n, y) points");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 2) throw InvalidInput("fit needs n >= 2");
    if (!(y_values[i] > 0.0 && y_values[i] <= 1.0)) throw InvalidInput("fit needs y in (0, 1]");
    for (std::size_t j = 0; j < i; ++j)
      if (n_values[j] == n_values[i]) throw InvalidInput("fit needs distinct n values");
  }
  // For fixed f the best ln beta is a mean; the remaining 1-D problem in f is
  // minimized by golden-section search.
  auto solve = [&](double f) {
    ScalingFit r;
    r.f = f;
    double lb = 0.0;
    for (std::size_t i = 0; i < n_values.size(); ++i)
      lb += std::log(y_values[i]) + std::pow(static_cast<double>(n_values[i]), f);
    lb /= static_cast<double>(n_values.size());
    r.beta = std::exp(lb);
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      const double e = std::log(y_values[i]) - lb + std::pow(static_cast<double>(n_values[i]), f);
      r.residual += e * e;
    }
    return r;
  };
  // The residual flattens out as f -> -inf, so bracket on a coarse grid first.
  const double step = 0.02;
  double best = -4.0, best_r = solve(best).residual;
  for (double f = -4.0 + step; f <= 4.0 + 1e-12; f += step) {
    const double r = solve(f).residual;
    if (r < best_r) {
      best = f;
      best_r = r;
    }
  }
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best - step, hi = best + step;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double r1 = solve(x1).residual, r2 = solve(x2).residual;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (r1 <= r2) {
      hi = x2;
      x2 = x1;
      r2 = r1;
      x1 = hi - g * (hi - lo);
      r1 = solve(x1).residual;
    } else {
      lo = x1;
      x1 = x2;
      r1 = r2;
      x2 = lo + g * (hi - lo);
      r2 = solve(x2).residual;
    }
  }
  return solve(0.5 * (lo + hi));
}

double mle_lower_bound(const TrajectoryRecord& record, const CnfFormula& formula, double alpha,
                       std::size_t g) {
  if (g >= formula.num_clauses()) throw InvalidInput("clause index out of range");
  if (record.samples.empty()) throw InvalidInput("record has no samples");
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be positive");
  for (const auto& lit : formula.clause(g).literals)
    if (lit.var >= record.samples.front().spins.size())
      throw InvalidInput("record does not store the spins of clause " + std::to_string(g) +
                         "; integrate with full spin storage");
  auto integrand = [&](const TrajectorySample& s) {
    const double k = clause_value(formula, s.spins, g);
    return k > 0.0 ? std::pow(k, alpha) : 0.0;
  };
  const auto& samples = record.samples;
  if (samples.size() == 1) return integrand(samples.front());
  double acc = 0.0;
  double prev = integrand(samples.front());
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double cur = integrand(samples[i]);
    acc += 0.5 * (prev + cur) * (samples[i].t - samples[i - 1].t);
    prev = cur;
  }
  const double span = samples.back().t - samples.front().t;
  return span > 0.0 ? acc / span : prev;
}

ErgodicitySummary ergodicity_diagnostics(std::span<const LabeledSample> labels) {
  ErgodicitySummary out;
  std::map<Assignment, std::pair<double, std::size_t>> visits;  // time, episodes
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j].in == labels[i].in &&
           labels[j].assignment == labels[i].assignment)
      ++j;
    if (labels[i].in) {
      // The episode runs until the first sample with a different label.
      const double end = j < labels.size() ? labels[j].t : labels[j - 1].t;
      const double dwell = end - labels[i].t;
      auto& v = visits[labels[i].assignment];
      v.first += dwell;
      ++v.second;
      ++out.episodes;
      out.max_dwell = std::max(out.max_dwell, dwell);
    }
    i = j;
  }
  out.distinct_assignments = visits.size();
  for (const auto& [a, v] : visits)
    if (out.most_visited.empty() || v.first > out.most_visited_time) {
      out.most_visited = a;
      out.most_visited_time = v.first;
      out.most_visited_recurrences = v.second;
    }
  return out;
}

ErgodicitySummary ergodicity_diagnostics(const TrajectoryRecord& record, const CnfFormula& formula,
                                         const TwoLinInstance& instance, double radius) {
  return ergodicity_diagnostics(vicinity_episode_labels(record, formula, instance, radius));
}

TrajectoryCsv read_trajectory_csv(std::istream& in) {
  TrajectoryCsv out;
  std::string line;
  std::size_t lineno = 0;
  bool have_columns = false, have_n_eq = false;
  int t_col = -1, sat_col = -1, in_col = -1;
  std::vector<int> value_cols;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      out.header.emplace_back(key, value);
      try {
        if (key == "n_eq") {
          out.n_eq = std::stoul(value);
          have_n_eq = true;
        } else if (key == "vicinity_radius") {
          out.vicinity_radius = std::stod(value);
        }
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad header value for " + key);
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!have_columns) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "t") t_col = static_cast<int>(c);
        else if (cells[c] == "sat_count") sat_col = static_cast<int>(c);
        else if (cells[c] == "in_vicinity") in_col = static_cast<int>(c);
        else if (cells[c].size() > 1 && cells[c][0] == 'x') value_cols.push_back(static_cast<int>(c));
      }
      if (t_col < 0 || sat_col < 0 || in_col < 0)
        throw ParseError(lineno, "missing t, sat_count or in_vicinity column");
      have_columns = true;
      continue;
    }
    LabeledSample s;
    try {
      std::size_t used = 0;
      auto num = [&](int c) -> const std::string& {
        if (static_cast<std::size_t>(c) >= cells.size()) throw ParseError(lineno, "short row");
        return cells[static_cast<std::size_t>(c)];
      };
      s.t = std::stod(num(t_col), &used);
      s.satisfied = std::stoul(num(sat_col));
      const auto& flag = num(in_col);
      if (flag != "0" && flag != "1") throw ParseError(lineno, "in_vicinity must be 0 or 1");
      s.in = flag == "1";
      for (int c : value_cols) s.assignment.push_back(std::stoi(num(c)));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(lineno, "malformed number");
    }
    if (!out.samples.empty() && s.t < out.samples.back().t)
      throw ParseError(lineno, "time column is not ascending");
    out.samples.push_back(std::move(s));
  }
  if (!have_columns) throw ParseError(lineno, "no column header");
  if (!have_n_eq) throw ParseError(lineno, "missing '# n_eq=' header");
  return out;
}

void write_residency_csv(const ResidencyTable& table, const HeaderFields& header,
                         std::size_t n_x, double beta, std::ostream& out) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out.precision(10);
  out << "# vicinity_space=x_block\n# vicinity_radius=" << table.vicinity_radius
      << "\n# y_denominator=non_transient\n# beta=" << beta << "\n# ensemble_size="
      << table.ensemble_size << "\n# nonempty_trajectories=" << table.nonempty_trajectories
      << "\n# total_time=" << table.total_time << "\n# vicinity_time=" << table.vicinity_time
      << "\n# transient_time=" << table.transient_time
      << "\n# empty=" << (table.empty() ? 1 : 0) << '\n';
  out << "delta,y,y_total_time,y_traj_mean,y_traj_std,f,f_defined\n";
  for (std::size_t d = 0; d < table.delta_grid.size(); ++d) {
    const auto f = std::isnan(table.y_values[d]) ? ScalingExponent{}
                                                 : scaling_exponent_f(table.y_values[d], n_x, beta);
    out << table.delta_grid[d] << ',' << table.y_values[d] << ',' << table.y_total_time[d] << ','
        << table.y_traj_mean[d] << ',' << table.y_traj_std[d] << ',' << f.value << ','
        << (f.defined ? 1 : 0) << '\n';
  }
}

}  // namespace ugflow
