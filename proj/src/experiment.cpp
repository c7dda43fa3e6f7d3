#include "ugflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "ugflow/cnf.hpp"
#include "ugflow/errors.hpp"
#include "ugflow/hash.hpp"
#include "ugflow/random.hpp"
#include "ugflow/trajectory.hpp"

namespace ugflow {

namespace {

std::string num(double v) { return header_number(v); }

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    if constexpr (std::is_floating_point_v<T>) out += num(values[i]);
    else out += std::to_string(values[i]);
  }
  return out;
}

void write_header(const HeaderFields& header, std::ostream& out) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
}

std::string describe_error(const std::exception& e) {
  if (const auto* u = dynamic_cast<const Error*>(&e)) return std::string(u->kind()) + ": " + e.what();
  return std::string("error: ") + e.what();
}

// Writes `content` to dir/name and returns the path.
std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& content) {
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << content;
  if (!out) throw InvalidInput("write failed for " + path.string());
  return path;
}

}  // namespace

std::vector<double> uniform_delta_grid(std::size_t steps) {
  if (steps == 0) throw InvalidInput("delta grid needs at least one step");
  std::vector<double> grid(steps);
  for (std::size_t i = 0; i < steps; ++i)
    grid[i] = static_cast<double>(i + 1) / static_cast<double>(steps);
  return grid;
}

std::size_t target_unsat_for(double epsilon, std::size_t n_eq) {
  if (!(epsilon >= 0.0) || !(epsilon < 1.0)) throw InvalidInput("epsilon must lie in [0, 1)");
  return static_cast<std::size_t>(std::llround(epsilon * static_cast<double>(n_eq)));
}

void SweepConfig::validate() const {
  if (k_list.empty()) throw InvalidInput("k_list is empty");
  for (int k : k_list)
    if (k < 2) throw InvalidInput("every k must be >= 2");
  if (epsilon_list.empty()) throw InvalidInput("epsilon_list is empty");
  for (double e : epsilon_list) {
    const auto u = target_unsat_for(e, n_eq);
    if (u > max_polygon_unsat(n_x) || u > n_eq - (n_x - 1))
      throw InvalidInput("epsilon " + num(e) + " asks for " + std::to_string(u) +
                         " unsatisfied equations, more than n_x = " + std::to_string(n_x) +
                         ", n_eq = " + std::to_string(n_eq) + " allow");
  }
  validate_delta_grid(delta_grid);
  if (n_x < 3) throw InvalidInput("n_x must be >= 3");
  if (n_eq < n_x || n_eq > n_x * (n_x - 1) / 2)
    throw InvalidInput("n_eq must lie in [n_x, n_x(n_x-1)/2]");
  if (ensemble == 0) throw InvalidInput("ensemble must be >= 1");
  if (worker_count == 0) throw InvalidInput("worker_count must be >= 1");
  if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
  dynamics.validate();
}

SweepConfig SweepConfig::paper_scale() {
  SweepConfig c;
  c.n_x = 11;
  c.n_eq = 30;
  c.k_list = {4, 6, 8, 10, 15, 20, 25, 30};
  c.ensemble = 300;
  return c;
}

std::uint64_t cell_instance_seed(std::uint64_t master, std::size_t cell) {
  return derive_seed(master, {1, cell});
}

std::uint64_t member_seed(std::uint64_t master, std::size_t cell, std::size_t member) {
  return derive_seed(master, {2, cell, member});
}

bool SweepResult::partial() const {
  return std::any_of(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.ok; });
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& job, const ProgressFn& progress) {
  std::atomic<std::size_t> next{0}, done{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
      const std::size_t d = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, count);
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

HeaderFields describe(const SweepConfig& c) {
  HeaderFields h{{"tool", kToolName},
                 {"tool_version", kToolVersion},
                 {"n_x", std::to_string(c.n_x)},
                 {"n_eq", std::to_string(c.n_eq)},
                 {"k_list", join(c.k_list)},
                 {"epsilon_list", join(c.epsilon_list)},
                 {"target_unsat_rule", "round(epsilon*n_eq)"},
                 {"delta_grid", join(c.delta_grid)},
                 {"ensemble", std::to_string(c.ensemble)},
                 {"master_seed", std::to_string(c.master_seed)},
                 {"instance_policy", "one_per_cell"}};
  for (auto& kv : describe(c.dynamics))
    if (kv.first != "seed") h.push_back(std::move(kv));
  h.emplace_back("vicinity_space", "x_block");
  h.emplace_back("vicinity_radius", num(c.dynamics.vicinity_radius));
  h.emplace_back("y_denominator", "non_transient");
  h.emplace_back("beta", num(c.beta));
  return h;
}

namespace {

struct MemberOutcome {
  bool ok = false;
  std::string error;
  ResidencyTimes times;
  bool implicit = false;
  double max_abs_spin = 0.0;
  double min_clause = 1.0;
  double max_clause = 0.0;
  std::size_t distinct = 0;
  bool converged = false;
};

struct CellInstance {
  bool ok = false;
  std::string error;
  PolygonDraw draw;
  std::optional<CnfFormula> formula;
};

void write_sweep_tables(const SweepConfig& config, const std::vector<SweepCell>& cells,
                        const HeaderFields& header, std::string& residency_csv,
                        std::string& by_k_csv, std::string& by_gap_csv) {
  std::ostringstream res, byk, gap;
  for (auto* os : {&res, &byk, &gap}) {
    os->precision(10);
    write_header(header, *os);
    for (const auto& c : cells) {
      *os << "# instance_hash.cell" << c.index << '=' << (c.ok ? c.instance_hash : "quarantined")
          << '\n';
    }
  }
  res << "k,epsilon,target_unsat,delta,y,y_total_time,y_traj_mean,y_traj_std,"
         "nonempty_trajectories,ensemble_size,vicinity_time,total_time\n";
  byk << "epsilon,delta,k,y,f,f_defined,log_argument\n";
  gap << "k,epsilon,one_minus_epsilon,delta,gap,y,f,f_defined\n";

  for (const auto& c : cells) {
    if (!c.ok) continue;
    const auto& t = c.table;
    for (std::size_t d = 0; d < t.delta_grid.size(); ++d) {
      res << c.k << ',' << c.epsilon << ',' << c.target_unsat << ',' << t.delta_grid[d] << ','
          << t.y_values[d] << ',' << t.y_total_time[d] << ',' << t.y_traj_mean[d] << ','
          << t.y_traj_std[d] << ',' << t.nonempty_trajectories << ',' << t.ensemble_size << ','
          << t.vicinity_time << ',' << t.total_time << '\n';
    }
  }
  // Fixed epsilon, f over (delta, k).
  for (double eps : config.epsilon_list) {
    for (std::size_t d = 0; d < config.delta_grid.size(); ++d) {
      for (const auto& c : cells) {
        if (!c.ok || c.epsilon != eps) continue;
        const double y = c.table.y_values[d];
        const auto f = std::isnan(y) ? ScalingExponent{}
                                     : scaling_exponent_f(y, config.n_x, config.beta);
        byk << eps << ',' << config.delta_grid[d] << ',' << c.k << ',' << y << ',' << f.value
            << ',' << (f.defined ? 1 : 0) << ',' << f.log_argument << '\n';
      }
    }
  }
  // Fixed k, f over (delta, 1 - epsilon).
  for (int k : config.k_list) {
    for (const auto& c : cells) {
      if (!c.ok || c.k != k) continue;
      for (std::size_t d = 0; d < config.delta_grid.size(); ++d) {
        const double y = c.table.y_values[d];
        const auto f = std::isnan(y) ? ScalingExponent{}
                                     : scaling_exponent_f(y, config.n_x, config.beta);
        const double ome = 1.0 - c.epsilon;
        gap << k << ',' << c.epsilon << ',' << ome << ',' << config.delta_grid[d] << ','
            << ome - config.delta_grid[d] << ',' << y << ',' << f.value << ','
            << (f.defined ? 1 : 0) << '\n';
      }
    }
  }
  residency_csv = res.str();
  by_k_csv = byk.str();
  by_gap_csv = gap.str();
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config, const ProgressFn& progress) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);

  std::vector<SweepCell> cells;
  for (int k : config.k_list) {
    for (double eps : config.epsilon_list) {
      SweepCell c;
      c.index = cells.size();
      c.k = k;
      c.epsilon = eps;
      c.target_unsat = target_unsat_for(eps, config.n_eq);
      c.instance_seed = cell_instance_seed(config.master_seed, c.index);
      cells.push_back(std::move(c));
    }
  }

  std::vector<CellInstance> inst(cells.size());
  parallel_for(cells.size(), config.worker_count, [&](std::size_t i) {
    try {
      PolygonOptions po;
      po.n_eq = config.n_eq;
      inst[i].draw = draw_polygon_instance(config.n_x, cells[i].k, cells[i].target_unsat,
                                           cells[i].instance_seed, po);
      inst[i].formula = encode(inst[i].draw.instance);
      inst[i].ok = true;
    } catch (const std::exception& e) {
      inst[i].error = describe_error(e);
    }
  });

  const std::size_t members = config.ensemble;
  std::vector<MemberOutcome> outcomes(cells.size() * members);
  parallel_for(
      outcomes.size(), config.worker_count,
      [&](std::size_t job) {
        const std::size_t ci = job / members, m = job % members;
        auto& out = outcomes[job];
        if (!inst[ci].ok) return;
        try {
          DynamicsConfig dc = config.dynamics;
          dc.seed = member_seed(config.master_seed, ci, m);
          const CnfFormula& formula = *inst[ci].formula;
          const auto record = integrate(formula, dc);
          const auto labels = vicinity_episode_labels(record, formula,
                                                      inst[ci].draw.instance, dc.vicinity_radius);
          out.times = residency_times(labels, config.n_eq, config.delta_grid);
          out.distinct = ergodicity_diagnostics(labels).distinct_assignments;
          for (const auto& s : record.samples) {
            out.max_abs_spin = std::max(out.max_abs_spin, s.max_abs_spin);
            out.min_clause = std::min(out.min_clause, s.min_clause);
            out.max_clause = std::max(out.max_clause, s.max_clause);
          }
          out.implicit = record.implicit_from.has_value();
          out.converged = energy(formula, record.final_state) < 1e-8;
          out.ok = true;
        } catch (const std::exception& e) {
          out.error = describe_error(e);
        }
      },
      progress);

  for (auto& c : cells) {
    const auto& ci = inst[c.index];
    if (!ci.ok) {
      c.ok = false;
      c.error = ci.error;
      continue;
    }
    c.instance_hash = instance_hash(ci.draw.instance);
    c.generator_attempts = ci.draw.attempts;
    c.verified = ci.draw.verified;
    std::vector<ResidencyTimes> times;
    times.reserve(members);
    c.min_distinct_assignments = std::numeric_limits<std::size_t>::max();
    for (std::size_t m = 0; m < members; ++m) {
      const auto& o = outcomes[c.index * members + m];
      if (!o.ok) {
        ++c.failed_members;
        if (c.error.empty()) c.error = "member " + std::to_string(m) + ": " + o.error;
        continue;
      }
      times.push_back(o.times);
      c.implicit_members += o.implicit;
      c.max_abs_spin = std::max(c.max_abs_spin, o.max_abs_spin);
      c.min_clause = std::min(c.min_clause, o.min_clause);
      c.max_clause = std::max(c.max_clause, o.max_clause);
      c.min_distinct_assignments = std::min(c.min_distinct_assignments, o.distinct);
      c.any_converged = c.any_converged || o.converged;
    }
    if (times.empty()) c.min_distinct_assignments = 0;
    c.ok = c.failed_members == 0;
    c.table = pool_residency(times, config.delta_grid, config.dynamics.vicinity_radius);
  }

  SweepResult result;
  const HeaderFields header = describe(config);
  std::string res, byk, gap;
  write_sweep_tables(config, cells, header, res, byk, gap);

  nlohmann::ordered_json manifest;
  manifest["tool"] = kToolName;
  manifest["tool_version"] = kToolVersion;
  nlohmann::ordered_json conf;
  for (const auto& [k, v] : header) conf[k] = v;
  manifest["config"] = conf;
  manifest["seeds"] = {{"instance", "derive_seed(master_seed, {1, cell})"},
                       {"trajectory", "derive_seed(master_seed, {2, cell, member})"}};
  manifest["cells"] = nlohmann::ordered_json::array();

  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& c : cells) {
    nlohmann::ordered_json j;
    j["index"] = c.index;
    j["k"] = c.k;
    j["epsilon"] = c.epsilon;
    j["target_unsat"] = c.target_unsat;
    j["instance_seed"] = c.instance_seed;
    j["status"] = c.ok ? "ok" : "quarantined";
    if (!c.error.empty()) j["error"] = c.error;
    if (inst[c.index].ok) {
      std::ostringstream os;
      write_instance(inst[c.index].draw.instance, os);
      const std::string name = "instance_cell" + std::to_string(c.index) + ".2link";
      files.emplace_back(name, os.str());
      j["instance_file"] = name;
      j["instance_hash"] = c.instance_hash;
      j["generator_attempts"] = c.generator_attempts;
      j["optimum_verified"] = c.verified;
      j["failed_members"] = c.failed_members;
      j["implicit_members"] = c.implicit_members;
      j["nonempty_trajectories"] = c.table.nonempty_trajectories;
      j["vicinity_time"] = c.table.vicinity_time;
      j["total_time"] = c.table.total_time;
      j["max_abs_spin"] = c.max_abs_spin;
      j["min_clause"] = c.min_clause;
      j["max_clause"] = c.max_clause;
    }
    manifest["cells"].push_back(j);
  }
  files.emplace_back("residency.csv", res);
  files.emplace_back("exponent_by_k.csv", byk);
  files.emplace_back("exponent_by_gap.csv", gap);

  manifest["files"] = nlohmann::ordered_json::array();
  for (const auto& [name, content] : files) {
    result.files.push_back(write_file(config.output_dir, name, content));
    manifest["files"].push_back({{"name", name}, {"git_blob_hash", git_blob_hash(content)}});
  }
  result.files.push_back(write_file(config.output_dir, "manifest.json", manifest.dump(2) + "\n"));
  result.cells = std::move(cells);
  return result;
}

void FsleSweepConfig::validate() const {
  if (alpha_list.empty()) throw InvalidInput("alpha_list is empty");
  for (double a : alpha_list)
    if (!(a > 0.0)) throw InvalidInput("every alpha must be positive");
  if (n_instances == 0 || seeds == 0) throw InvalidInput("need at least one instance and seed");
  if (worker_count == 0) throw InvalidInput("worker_count must be >= 1");
  fsle.validate();
  dynamics.validate();
}

HeaderFields describe(const FsleSweepConfig& c) {
  HeaderFields h{{"tool", kToolName},
                 {"tool_version", kToolVersion},
                 {"alpha_list", join(c.alpha_list)},
                 {"n_instances", std::to_string(c.n_instances)},
                 {"seeds", std::to_string(c.seeds)},
                 {"n_x", std::to_string(c.n_x)},
                 {"k", std::to_string(c.k)},
                 {"target_unsat", std::to_string(c.target_unsat)},
                 {"n_eq", c.n_eq ? std::to_string(c.n_eq) : "default"},
                 {"master_seed", std::to_string(c.master_seed)},
                 {"delta0", num(c.fsle.delta0)},
                 {"delta1", num(c.fsle.delta1)},
                 {"n_segments", std::to_string(c.fsle.n_segments)},
                 {"segment_cap", num(c.fsle.segment_cap)},
                 {"fsle_burn_in", num(c.fsle.burn_in)},
                 {"perturb_target", c.fsle.target == PerturbTarget::any_x_spin ? "any_x_spin"
                                                                                : "free_x_spin"},
                 {"capped_rate", "ln(d(cap)/delta0)/cap"}};
  for (auto& kv : describe(c.dynamics))
    if (kv.first != "seed" && kv.first != "alpha" && kv.first != "t_end" &&
        kv.first != "observe_interval" && kv.first != "burn_in")
      h.push_back(std::move(kv));
  return h;
}

FsleSweepResult run_fsle_sweep(const FsleSweepConfig& config, const ProgressFn& progress) {
  config.validate();
  FsleSweepResult result;
  PolygonOptions po;
  if (config.n_eq) po.n_eq = config.n_eq;
  std::vector<CnfFormula> formulas;
  for (std::size_t i = 0; i < config.n_instances; ++i) {
    result.instances.push_back(
        draw_polygon_instance(config.n_x, config.k, config.target_unsat,
                              derive_seed(config.master_seed, {3, i}), po)
            .instance);
    formulas.push_back(encode(result.instances.back()));
  }

  const std::size_t per_alpha = config.n_instances * config.seeds;
  const std::size_t total = config.alpha_list.size() * per_alpha;
  std::vector<FsleEstimate> est(total);
  std::vector<std::string> errors(total);
  parallel_for(
      total, config.worker_count,
      [&](std::size_t job) {
        const std::size_t a = job / per_alpha, r = job % per_alpha;
        const std::size_t i = r / config.seeds, s = r % config.seeds;
        DynamicsConfig dc = config.dynamics;
        dc.alpha = config.alpha_list[a];
        dc.seed = derive_seed(config.master_seed, {4, i, s});
        FsleOptions fo = config.fsle;
        fo.seed = derive_seed(config.master_seed, {5, i, s});
        try {
          est[job] = fsle(formulas[i], dc, fo);
        } catch (const Error& e) {
          errors[job] = describe_error(e);
        }
      },
      progress);

  for (std::size_t a = 0; a < config.alpha_list.size(); ++a) {
    std::vector<FsleEstimate> runs;
    for (std::size_t r = 0; r < per_alpha; ++r) {
      const std::size_t job = a * per_alpha + r;
      if (!errors[job].empty()) {
        ++result.failed_runs;
        if (result.first_error.empty()) result.first_error = errors[job];
        continue;
      }
      runs.push_back(std::move(est[job]));
    }
    result.rows.push_back(summarize_fsle(config.alpha_list[a], runs));
    result.runs.push_back(std::move(runs));
  }
  return result;
}

}  // namespace ugflow
