#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ugflow/analysis.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

class Workdir {
 public:
  explicit Workdir(const std::string& name) : dir_(fs::temp_directory_path() / ("ugflow_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }
  std::string operator/(const std::string& f) const { return (dir_ / f).string(); }

  Run run(const std::string& args) const {
    const std::string err = (dir_ / "stderr.txt").string();
    const std::string cmd = std::string(UGFLOW_CLI) + " " + args + " 2>" + err + " >/dev/null";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    r.err = ss.str();
    return r;
  }

 private:
  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const std::string& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("gen then encode gives the expected DIMACS header") {
  Workdir w("encode");
  REQUIRE(w.run("-q gen --k 2 --nx 3 --unsat 1 --seed 7 -o " + (w / "inst.2link")).code == 0);
  REQUIRE(w.run("encode -i " + (w / "inst.2link") + " -o " + (w / "inst.cnf")).code == 0);
  std::ifstream in(w / "inst.cnf");
  std::string line;
  do std::getline(in, line);
  while (line.rfind("c", 0) == 0);
  CHECK(line == "p cnf 12 18");
}

TEST_CASE("simulate then analyze") {
  Workdir w("simulate");
  REQUIRE(w.run("-q gen --k 3 --nx 5 --unsat 2 --seed 3 -o " + (w / "inst.2link")).code == 0);
  const auto sim = w.run("simulate -i " + (w / "inst.2link") +
                         " --alpha 2 --tmax 60 --seed 1 --radius 0.5 -o " + (w / "traj.csv"));
  REQUIRE(sim.code == 0);
  const auto text = slurp(w / "traj.csv");
  CHECK(text.find("# tool_version=") != std::string::npos);
  CHECK(text.find("# instance_hash=") != std::string::npos);
  CHECK(text.find("# vicinity_space=x_block") != std::string::npos);

  const auto rows = data_lines(w / "traj.csv");
  REQUIRE(rows.size() == 602);  // column line plus 601 samples
  double prev = -1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t = std::stod(rows[i].substr(0, rows[i].find(',')));
    CHECK(t > prev);
    prev = t;
  }

  REQUIRE(w.run("analyze -i " + (w / "traj.csv") + " --deltas 0.33,0.66 -o " + (w / "y.csv")).code == 0);
  const auto y = data_lines(w / "y.csv");
  REQUIRE(y.size() == 3);
  auto y_of = [](const std::string& row) {
    std::stringstream ss(row);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    return std::stod(cell);
  };
  const double y33 = y_of(y[1]), y66 = y_of(y[2]);
  if (!std::isnan(y33)) CHECK(y33 >= y66);
  CHECK(slurp(w / "y.csv").find("# y_denominator=non_transient") != std::string::npos);
}

TEST_CASE("input errors exit 2 with a machine-parsable line") {
  Workdir w("errors");
  {
    std::ofstream bad(w / "bad.2link");
    bad << "p 2link 2 3 3\ne 0 1 1\n";
  }
  const auto r = w.run("encode -i " + (w / "bad.2link") + " -o " + (w / "x.cnf"));
  CHECK(r.code == 2);
  CHECK(r.err.find("ugflow: error command=encode kind=parse message=\"") != std::string::npos);

  CHECK(w.run("encode -i " + (w / "missing.2link") + " -o " + (w / "x.cnf")).code == 2);
  CHECK(w.run("gen --k 3 --nx 4 --unsat 99 -o " + (w / "g.2link")).code == 2);
  const auto usage = w.run("gen --nx 4 -o " + (w / "g.2link"));
  CHECK(usage.code == 2);
  CHECK(usage.err.find("kind=usage") != std::string::npos);
  CHECK(w.run("sweep --eps-list 1.5 -o " + (w / "s")).code == 2);
}

TEST_CASE("numerical failures exit 3") {
  Workdir w("numerical");
  REQUIRE(w.run("-q gen --k 3 --nx 5 --unsat 2 --seed 3 -o " + (w / "inst.2link")).code == 0);
  // With alpha = 1 the weights grow like e^t and the steps underflow long
  // before t = 600.
  const auto r = w.run("simulate -i " + (w / "inst.2link") +
                       " --alpha 1 --tmax 600 --seed 1 -o " + (w / "t.csv"));
  CHECK(r.code == 3);
  CHECK(r.err.find("kind=stiffness") != std::string::npos);
}

TEST_CASE("a sweep with a quarantined cell exits 4") {
  Workdir w("partial");
  const auto r = w.run("-q sweep --k-list 3,2 --eps-list 0.3 --nx 5 --neq 6 --ensemble 2 --tmax 20 "
                       "--delta-steps 4 -o " + (w / "out"));
  CHECK(r.code == 4);
  CHECK(fs::exists(w / "out/manifest.json"));
}

TEST_CASE("fsle reruns are byte-identical") {
  Workdir w("fsle");
  const std::string args = "-q fsle --alphas 2 --instances 1 --seeds 2 --segments 2 --cap 5 --seed 9 -o ";
  REQUIRE(w.run(args + (w / "a.csv")).code == 0);
  REQUIRE(w.run(args + (w / "b.csv") + " --workers 2").code == 0);
  CHECK(slurp(w / "a.csv") == slurp(w / "b.csv"));
  CHECK(slurp(w / "a.csv").find("alpha,fsle_mean,fsle_std") != std::string::npos);
}
