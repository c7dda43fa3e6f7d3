#include <cmath>

#include <Eigen/SparseLU>

#include "doctest.h"
#include "oracles.hpp"
#include "ugflow/dynamics.hpp"
#include "ugflow/errors.hpp"

using namespace ugflow;

namespace {

CnfFormula single_clause_formula() {
  // k = 2, one equation: the first x-block clause is (-x0=0 or -x0=1).
  return encode(TwoLinInstance(2, 2, {{0, 1, 0}}));
}

SystemState random_interior(const CnfFormula& f, Rng& rng, double log_a_lo = -1.0,
                            double log_a_hi = 2.0) {
  SystemState st;
  st.s.resize(f.num_spins());
  for (auto& v : st.s) v = uniform_open(rng, -0.95, 0.95);
  st.log_a.resize(f.num_clauses());
  for (auto& v : st.log_a) v = uniform_open(rng, log_a_lo, log_a_hi);
  return st;
}

bool close(double got, double want, double rel, double floor) {
  return std::abs(got - want) <= std::max(rel * std::abs(want), floor);
}

}  // namespace

TEST_CASE("clause value examples") {
  const auto f = single_clause_formula();
  const auto& c = f.clause(0);
  REQUIRE(c.literals.size() == 2);
  std::vector<double> s(f.num_spins(), 0.0);
  CHECK(clause_value(f, s, 0) == doctest::Approx(0.25));
  // Both literals negated: violated when both spins are +1.
  for (const auto& l : c.literals) s[l.var] = -l.sign;
  CHECK(clause_value(f, s, 0) == doctest::Approx(1.0));
  s[c.literals[0].var] = c.literals[0].sign;
  CHECK(clause_value(f, s, 0) == 0.0);
}

TEST_CASE("clause value with a spin removed") {
  const auto f = single_clause_formula();
  const auto& c = f.clause(0);
  std::vector<double> s(f.num_spins(), 0.0);
  CHECK(clause_value_excluding(f, s, 0, c.literals[0].var) == doctest::Approx(0.25));
  s[c.literals[1].var] = c.literals[1].sign;  // other literal satisfied
  CHECK(clause_value_excluding(f, s, 0, c.literals[0].var) == 0.0);
  CHECK_THROWS_AS(clause_value_excluding(f, s, 0, f.num_spins() - 1), InvalidInput);
}

TEST_CASE("property: K_m = K_ml (1 - c_ml s_l)") {
  Rng rng(17);
  const auto f = encode(generate_polygon_instance(5, 4, 2, 3));
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(f.num_spins());
    for (auto& v : s) v = uniform_open(rng, -1.0, 1.0);
    const auto m = uniform_index(rng, f.num_clauses());
    const auto& lit = f.clause(m).literals[uniform_index(rng, f.clause(m).literals.size())];
    const double k = clause_value(f, s, m);
    CHECK(k == doctest::Approx(clause_value_excluding(f, s, m, lit.var) * (1.0 - lit.sign * s[lit.var])));
    CHECK(k >= 0.0);
    CHECK(k <= 1.0);
  }
}

TEST_CASE("energy examples") {
  const auto inst = generate_polygon_instance(4, 3, 0, 5);
  const auto f = encode(inst);
  const auto opt = brute_force_optimum(inst);
  const auto corner = encode_assignment(f, opt.assignment);
  std::vector<double> log_a(f.num_clauses(), 1.3);
  CHECK(energy(f, corner, log_a) == 0.0);

  Rng rng(3);
  const auto st = random_interior(f, rng);
  std::vector<double> doubled = st.log_a;
  for (auto& v : doubled) v += std::log(2.0);
  CHECK(energy(f, st.s, doubled) == doctest::Approx(2.0 * energy(f, st)));
  std::vector<double> a(f.num_clauses());
  for (std::size_t m = 0; m < a.size(); ++m) a[m] = st.a(m);
  CHECK(energy(f, st) == doctest::Approx(oracle::energy(f, st.s, a)));
}

TEST_CASE("unsat instance: every valid corner has V at least min a") {
  const TwoLinInstance inst(2, 3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  const auto f = encode(inst);
  Rng rng(2);
  std::vector<double> log_a(f.num_clauses());
  for (auto& v : log_a) v = uniform_open(rng, -2.0, 1.0);
  const double min_a = std::exp(*std::min_element(log_a.begin(), log_a.end()));
  oracle::for_each_assignment(3, 2, [&](const Assignment& x) {
    CHECK(energy(f, encode_assignment(f, x), log_a) >= min_a);
  });
}

TEST_CASE("solution corners are equilibria") {
  const auto inst = generate_polygon_instance(5, 3, 0, 9);
  const auto f = encode(inst);
  SystemState st;
  st.s = encode_assignment(f, brute_force_optimum(inst).assignment);
  st.log_a.assign(f.num_clauses(), 0.7);
  const auto d = rhs(f, st, 2.0);
  for (double v : d.ds) CHECK(v == 0.0);
  for (double v : d.da) CHECK(v == 0.0);
}

TEST_CASE("property: spin flow equals minus the gradient of V") {
  Rng rng(31);
  for (int formula = 0; formula < 6; ++formula) {
    const auto n_x = 3 + uniform_index(rng, 3);
    const int k = 2 + static_cast<int>(uniform_index(rng, 3));
    const auto f = encode(generate_polygon_instance(n_x, k, uniform_index(rng, 2), rng()));
    for (int point = 0; point < 10; ++point) {
      const auto st = random_interior(f, rng);
      const auto d = rhs(f, st, 2.0);
      const auto fd = oracle::minus_grad_fd(f, st.s, st.a_values(), 1e-3);
      for (std::size_t p = 0; p < fd.size(); ++p) CHECK(close(d.ds[p], fd[p], 1e-6, 1e-10));
    }
  }
}

TEST_CASE("alpha = 1 weight growth rate equals K") {
  Rng rng(12);
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  const auto st = random_interior(f, rng);
  const auto d = rhs(f, st, 1.0);
  for (std::size_t m = 0; m < f.num_clauses(); ++m)
    CHECK(d.da[m] / st.a(m) == doctest::Approx(clause_value(f, st.s, m)));
  const auto d2 = rhs(f, st, 2.0);
  for (std::size_t m = 0; m < f.num_clauses(); ++m)
    CHECK(d2.da[m] / st.a(m) == doctest::Approx(std::pow(clause_value(f, st.s, m), 2)));
}

TEST_CASE("ClauseFlow agrees with rhs and packs round trip") {
  Rng rng(4);
  const auto f = encode(generate_polygon_instance(4, 3, 1, 2));
  const ClauseFlow flow(f, 1.5);
  const auto st = random_interior(f, rng);
  const Vec y = flow.pack(st);
  Vec dy;
  flow.evaluate(y, dy);
  const auto d = rhs(f, st, 1.5);
  for (std::size_t p = 0; p < f.num_spins(); ++p)
    CHECK(dy[static_cast<Eigen::Index>(p)] == doctest::Approx(d.ds[p]));
  for (std::size_t m = 0; m < f.num_clauses(); ++m)
    CHECK(dy[static_cast<Eigen::Index>(f.num_spins() + m)] ==
          doctest::Approx(d.da[m] / st.a(m)));
  const auto back = flow.unpack(y, 2.5);
  CHECK(back.s == st.s);
  CHECK(back.log_a == st.log_a);
  CHECK(back.t == 2.5);
}

TEST_CASE("analytic Jacobian matches finite differences") {
  Rng rng(8);
  for (double alpha : {1.0, 2.0, 1.5}) {
    const auto f = encode(generate_polygon_instance(4, 3, 1, 6));
    const ClauseFlow flow(f, alpha);
    const Vec y = flow.pack(random_interior(f, rng, -0.5, 0.5));
    const auto n = y.size();
    SparseMat shifted;
    flow.shifted_jacobian(y, 0.0, shifted);
    const Eigen::MatrixXd jac = -Eigen::MatrixXd(shifted);
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < n; ++c) {
      Vec up = y, down = y, fu, fd;
      up[c] += h;
      down[c] -= h;
      flow.evaluate(up, fu);
      flow.evaluate(down, fd);
      const Vec col = (fu - fd) / (2 * h);
      for (Eigen::Index r = 0; r < n; ++r) CHECK(close(jac(r, c), col[r], 1e-5, 1e-7));
    }
  }
}

TEST_CASE("Schur-complement solver agrees with a sparse LU of the full matrix") {
  Rng rng(19);
  const auto f = encode(generate_polygon_instance(5, 3, 2, 4));
  const ClauseFlow flow(f, 2.0);
  auto solver = flow.make_shifted_solver();
  for (double shift : {0.5, 10.0, 1e4}) {
    const Vec y = flow.pack(random_interior(f, rng, 0.0, 3.0));
    SparseMat m;
    flow.shifted_jacobian(y, shift, m);
    Eigen::SparseLU<SparseMat> lu;
    lu.compute(m);
    REQUIRE(lu.info() == Eigen::Success);
    Vec rhs_vec(y.size());
    for (auto& v : rhs_vec) v = uniform_open(rng, -1.0, 1.0);
    const Vec want = lu.solve(rhs_vec);
    REQUIRE(solver->factorize(y, shift));
    Vec got;
    solver->solve(rhs_vec, got);
    CHECK((got - want).norm() <= 1e-9 * (1.0 + want.norm()));
  }
}

TEST_CASE("equilibria among valid corners are exactly the solutions") {
  // Exhaustive over one-hot x- and z-blocks, n_x <= 3, k = 2.
  Rng rng(1);
  for (int trial = 0; trial < 6; ++trial) {
    const auto inst = oracle::random_instance(rng, 2 + uniform_index(rng, 2), 2, 3);
    const auto f = encode(inst);
    const ClauseFlow flow(f, 2.0);
    const std::size_t blocks = f.n_x() + f.n_eq();
    oracle::for_each_assignment(blocks, 2, [&](const Assignment& pick) {
      std::vector<double> s(f.num_spins(), -1.0);
      for (std::size_t b = 0; b < blocks; ++b) s[2 * b + static_cast<std::size_t>(pick[b])] = 1.0;
      SystemState st{s, std::vector<double>(f.num_clauses(), 0.0), 0.0};
      Vec dy;
      flow.evaluate(flow.pack(st), dy);
      const bool still = dy.head(static_cast<Eigen::Index>(f.num_spins())).cwiseAbs().maxCoeff() == 0.0;
      CHECK(still == (count_satisfied_clauses(f, s) == f.num_clauses()));
    });
  }
}

TEST_CASE("projection clamps spins and keeps weights from decreasing") {
  const auto f = single_clause_formula();
  const ClauseFlow flow(f, 2.0);
  Vec prev = Vec::Zero(static_cast<Eigen::Index>(flow.dimension()));
  prev.tail(static_cast<Eigen::Index>(f.num_clauses())).setConstant(1.0);
  Vec y = prev;
  y[0] = 1.2;
  y[1] = -1.0000001;
  y[static_cast<Eigen::Index>(f.num_spins())] = 0.5;
  flow.project(y, prev);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == -1.0);
  CHECK(y[static_cast<Eigen::Index>(f.num_spins())] == 1.0);

  const ClauseFlow loose(f, 2.0, ClampMode::none);
  Vec z = prev;
  z[0] = 1.2;
  loose.project(z, prev);
  CHECK(z[0] == 1.2);
}

TEST_CASE("configuration validation") {
  DynamicsConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = DynamicsConfig{};
  c.burn_in = c.t_end;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK_THROWS_AS(ClauseFlow(single_clause_formula(), -1.0), InvalidInput);
}
