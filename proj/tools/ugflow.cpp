#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "ugflow/analysis.hpp"
#include "ugflow/cnf.hpp"
#include "ugflow/errors.hpp"
#include "ugflow/experiment.hpp"
#include "ugflow/instance.hpp"
#include "ugflow/trajectory.hpp"

using namespace ugflow;

namespace {

enum Exit { kOk = 0, kInput = 2, kNumerical = 3, kPartial = 4 };

// One line, key=value, so scripts can split on spaces after the prefix.
void report_error(const std::string& command, const std::string& kind, const std::string& what) {
  std::string msg = what;
  for (auto& ch : msg)
    if (ch == '\n') ch = ' ';
  std::cerr << "ugflow: error command=" << command << " kind=" << kind << " message=\"" << msg
            << "\"\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  return in;
}

const std::map<std::string, MethodPolicy> kSolvers{{"auto", MethodPolicy::automatic},
                                                   {"explicit", MethodPolicy::explicit_only},
                                                   {"implicit", MethodPolicy::implicit_only}};
const std::map<std::string, AuxInit> kAInit{{"one", AuxInit::constant_one},
                                            {"uniform", AuxInit::uniform_unit}};
const std::map<std::string, PerturbTarget> kTargets{{"any", PerturbTarget::any_x_spin},
                                                    {"free", PerturbTarget::free_x_spin}};

// Integration flags shared by simulate, sweep and fsle.
void add_dynamics_flags(CLI::App* cmd, DynamicsConfig& d) {
  cmd->add_option("--alpha", d.alpha, "Exponent on K in the weight flow")->capture_default_str();
  cmd->add_option("--rtol", d.rtol)->capture_default_str();
  cmd->add_option("--atol", d.atol)->capture_default_str();
  cmd->add_option("--max-step", d.max_step)->capture_default_str();
  cmd->add_option("--solver", d.solver)->transform(CLI::CheckedTransformer(kSolvers));
  cmd->add_option("--a-init", d.a_init, "Initial weights: one or uniform")
      ->transform(CLI::CheckedTransformer(kAInit));
  cmd->add_flag("--no-clamp", [&d](std::int64_t) { d.clamp = ClampMode::none; },
                "Do not clamp spins to [-1, 1]");
}

HeaderFields tool_header() { return {{"tool", kToolName}, {"tool_version", kToolVersion}}; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw InvalidInput("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidInput("empty list '" + text + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time flows for 2-Lin-k instances: generation, encoding, simulation, "
               "residency and FSLE experiments"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // gen
  struct {
    int k = 2;
    std::size_t n_x = 3, unsat = 0, n_eq = 0;
    std::uint64_t seed = 0;
    std::string out;
  } gen;
  auto* gen_cmd = app.add_subcommand("gen", "Draw a polygon 2-Lin-k instance with a planted optimum");
  gen_cmd->add_option("--k", gen.k, "Alphabet size")->required();
  gen_cmd->add_option("--nx", gen.n_x, "Number of variables")->required();
  gen_cmd->add_option("--unsat", gen.unsat, "Equations left unsatisfied at the optimum")
      ->capture_default_str();
  gen_cmd->add_option("--neq", gen.n_eq, "Equation count (default: smallest that fits)");
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("-o,--output", gen.out)->required();

  // encode
  std::string enc_in, enc_out;
  auto* enc_cmd = app.add_subcommand("encode", "Write the CNF encoding of an instance as DIMACS");
  enc_cmd->add_option("-i,--input", enc_in)->required();
  enc_cmd->add_option("-o,--output", enc_out)->required();

  // simulate
  DynamicsConfig sim;
  std::string sim_in, sim_out, sim_state;
  bool sim_values = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate one trajectory and write it as CSV");
  sim_cmd->add_option("-i,--input", sim_in)->required();
  sim_cmd->add_option("-o,--output", sim_out)->required();
  add_dynamics_flags(sim_cmd, sim);
  sim_cmd->add_option("--tmax", sim.t_end)->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed)->capture_default_str();
  sim_cmd->add_option("--interval", sim.observe_interval, "Sampling interval")
      ->capture_default_str();
  sim_cmd->add_option("--burn-in", sim.burn_in)->capture_default_str();
  sim_cmd->add_option("--radius", sim.vicinity_radius, "x-block L1 vicinity radius")
      ->capture_default_str();
  sim_cmd->add_flag("--values", sim_values, "Also write the x-block spins");
  sim_cmd->add_option("--state-out", sim_state, "Binary dump of the final state");

  // analyze
  std::string an_in, an_out, an_deltas = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,"
                                         "0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";
  double an_beta = 1.0;
  auto* an_cmd = app.add_subcommand("analyze", "Residency Y(delta) and f from a trajectory CSV");
  an_cmd->add_option("-i,--input", an_in)->required();
  an_cmd->add_option("-o,--output", an_out)->required();
  an_cmd->add_option("--deltas", an_deltas, "Comma-separated ascending grid in (0, 1]");
  an_cmd->add_option("--beta", an_beta)->capture_default_str();

  // sweep
  SweepConfig sw;
  std::string sw_k = "4,6,8", sw_eps = "0.4", sw_deltas;
  std::size_t sw_steps = 20;
  bool paper_scale = false;
  std::string sw_out = "sweep_out";
  auto* sw_cmd = app.add_subcommand("sweep", "Residency and exponent maps over (k, epsilon)");
  sw_cmd->add_flag("--paper-scale", paper_scale,
                   "n_x=11, n_eq=30, k up to 30, ensemble 300; many hours on one core");
  sw_cmd->add_option("--k-list", sw_k)->capture_default_str();
  sw_cmd->add_option("--eps-list", sw_eps, "Unsatisfied fraction per cell")->capture_default_str();
  sw_cmd->add_option("--deltas", sw_deltas, "Explicit grid; overrides --delta-steps");
  sw_cmd->add_option("--delta-steps", sw_steps, "Grid 1/steps, ..., 1")->capture_default_str();
  auto* sw_nx = sw_cmd->add_option("--nx", sw.n_x)->capture_default_str();
  auto* sw_neq = sw_cmd->add_option("--neq", sw.n_eq)->capture_default_str();
  auto* sw_ens = sw_cmd->add_option("--ensemble", sw.ensemble)->capture_default_str();
  sw_cmd->add_option("--tmax", sw.dynamics.t_end)->capture_default_str();
  sw_cmd->add_option("--interval", sw.dynamics.observe_interval)->capture_default_str();
  sw_cmd->add_option("--burn-in", sw.dynamics.burn_in)->capture_default_str();
  sw_cmd->add_option("--radius", sw.dynamics.vicinity_radius)->capture_default_str();
  sw_cmd->add_option("--beta", sw.beta)->capture_default_str();
  sw_cmd->add_option("--seed", sw.master_seed, "Master seed")->capture_default_str();
  sw_cmd->add_option("--workers", sw.worker_count)->capture_default_str();
  sw_cmd->add_option("-o,--output-dir", sw_out)->capture_default_str();
  add_dynamics_flags(sw_cmd, sw.dynamics);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress output");

  // fsle
  FsleSweepConfig fc;
  std::string fc_alphas = "1,1.5,2", fc_out;
  auto* fc_cmd = app.add_subcommand("fsle", "Finite-size Lyapunov exponents per alpha");
  fc_cmd->add_option("--alphas", fc_alphas)->capture_default_str();
  fc_cmd->add_option("--instances", fc.n_instances)->capture_default_str();
  fc_cmd->add_option("--seeds", fc.seeds, "Initial conditions per instance")->capture_default_str();
  fc_cmd->add_option("--nx", fc.n_x)->capture_default_str();
  fc_cmd->add_option("--k", fc.k)->capture_default_str();
  fc_cmd->add_option("--unsat", fc.target_unsat)->capture_default_str();
  fc_cmd->add_option("--neq", fc.n_eq, "0 picks the smallest that fits")->capture_default_str();
  fc_cmd->add_option("--seed", fc.master_seed, "Master seed")->capture_default_str();
  fc_cmd->add_option("--workers", fc.worker_count)->capture_default_str();
  fc_cmd->add_option("--delta0", fc.fsle.delta0)->capture_default_str();
  fc_cmd->add_option("--delta1", fc.fsle.delta1)->capture_default_str();
  fc_cmd->add_option("--segments", fc.fsle.n_segments)->capture_default_str();
  fc_cmd->add_option("--cap", fc.fsle.segment_cap, "Longest segment")->capture_default_str();
  fc_cmd->add_option("--burn-in", fc.fsle.burn_in)->capture_default_str();
  fc_cmd->add_option("--perturb", fc.fsle.target, "any or free")
      ->transform(CLI::CheckedTransformer(kTargets));
  fc_cmd->add_option("-o,--output", fc_out)->required();
  add_dynamics_flags(fc_cmd, fc.dynamics);
  fc_cmd->remove_option(fc_cmd->get_option("--alpha"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kOk;
    report_error("parse", "usage", e.what());
    return kInput;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  auto progress = [quiet](std::size_t done, std::size_t total) {
    if (!quiet) std::cerr << "\r" << done << "/" << total << (done == total ? "\n" : "")
                          << std::flush;
  };

  try {
    if (command == "gen") {
      PolygonOptions po;
      if (gen.n_eq) po.n_eq = gen.n_eq;
      const auto draw = draw_polygon_instance(gen.n_x, gen.k, gen.unsat, gen.seed, po);
      auto out = open_out(gen.out);
      out << "# tool=" << kToolName << " tool_version=" << kToolVersion << " seed=" << gen.seed
          << " target_unsat=" << gen.unsat << " optimum_verified=" << draw.verified << '\n';
      write_instance(draw.instance, out);
      if (!quiet)
        std::cerr << "instance " << instance_hash(draw.instance) << " n_eq="
                  << draw.instance.n_eq() << '\n';
    } else if (command == "encode") {
      const auto inst = read_instance(std::filesystem::path(enc_in));
      write_dimacs(encode(inst), std::filesystem::path(enc_out));
    } else if (command == "simulate") {
      const auto inst = read_instance(std::filesystem::path(sim_in));
      const auto formula = encode(inst);
      const auto record = integrate(formula, sim);
      HeaderFields header = tool_header();
      header.emplace_back("instance_hash", instance_hash(inst));
      for (auto& kv : describe(sim)) header.push_back(std::move(kv));
      auto out = open_out(sim_out);
      write_trajectory_csv(record, formula, header, sim.vicinity_radius, sim_values, out);
      if (!sim_state.empty()) {
        auto so = open_out(sim_state);
        write_state(record.final_state, so);
      }
    } else if (command == "analyze") {
      auto in = open_in(an_in);
      const auto csv = read_trajectory_csv(in);
      const auto grid = parse_list(an_deltas);
      validate_delta_grid(grid);
      std::size_t n_x = 0;
      for (const auto& [k, v] : csv.header)
        if (k == "n_x") n_x = std::stoul(v);
      if (n_x < 2) throw ParseError(1, "trajectory header lacks n_x");
      const ResidencyTimes times[] = {residency_times(csv.samples, csv.n_eq, grid)};
      const auto table = pool_residency(times, grid, csv.vicinity_radius);
      HeaderFields header = tool_header();
      for (const auto& kv : csv.header)
        if (kv.first != "tool" && kv.first != "tool_version" && kv.first != "vicinity_space" &&
            kv.first != "vicinity_radius")
          header.push_back(kv);
      header.emplace_back("source", std::filesystem::path(an_in).filename().string());
      auto out = open_out(an_out);
      write_residency_csv(table, header, n_x, an_beta, out);
    } else if (command == "sweep") {
      if (paper_scale) {
        SweepConfig p = SweepConfig::paper_scale();
        if (sw_nx->count() == 0) sw.n_x = p.n_x;
        if (sw_neq->count() == 0) sw.n_eq = p.n_eq;
        if (sw_ens->count() == 0) sw.ensemble = p.ensemble;
        if (sw_cmd->get_option("--k-list")->count() == 0) sw.k_list = p.k_list;
      }
      if (sw_cmd->get_option("--k-list")->count() || !paper_scale) {
        sw.k_list.clear();
        for (double k : parse_list(sw_k)) {
          if (k != std::floor(k)) throw InvalidInput("k must be an integer");
          sw.k_list.push_back(static_cast<int>(k));
        }
      }
      sw.epsilon_list = parse_list(sw_eps);
      sw.delta_grid = sw_deltas.empty() ? uniform_delta_grid(sw_steps) : parse_list(sw_deltas);
      sw.output_dir = sw_out;
      const auto result = run_sweep(sw, progress);
      for (const auto& c : result.cells)
        if (!c.ok)
          report_error(command, "quarantined",
                       "cell " + std::to_string(c.index) + " (k=" + std::to_string(c.k) +
                           "): " + c.error);
      if (result.partial()) return kPartial;
    } else if (command == "fsle") {
      fc.alpha_list = parse_list(fc_alphas);
      const auto result = run_fsle_sweep(fc, progress);
      HeaderFields header = describe(fc);
      for (std::size_t i = 0; i < result.instances.size(); ++i)
        header.emplace_back("instance_hash." + std::to_string(i),
                            instance_hash(result.instances[i]));
      header.emplace_back("failed_runs", std::to_string(result.failed_runs));
      auto out = open_out(fc_out);
      write_fsle_csv(result.rows, header, out);
      if (result.failed_runs) {
        report_error(command, "partial", std::to_string(result.failed_runs) +
                                             " runs failed; first: " + result.first_error);
        return kPartial;
      }
    }
  } catch (const StiffnessError& e) {
    report_error(command, e.kind(), e.what());
    return kNumerical;
  } catch (const NumericalOverflow& e) {
    report_error(command, e.kind(), e.what());
    return kNumerical;
  } catch (const Error& e) {
    report_error(command, e.kind(), e.what());
    return kInput;
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(command, "io", e.what());
    return kInput;
  } catch (const std::exception& e) {
    report_error(command, "internal", e.what());
    return kNumerical;
  }
  return kOk;
}
