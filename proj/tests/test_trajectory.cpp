#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "ugflow/analysis.hpp"
#include "ugflow/errors.hpp"
#include "ugflow/trajectory.hpp"

using namespace ugflow;

TEST_CASE("sat instances converge to solution corners") {
  const auto inst = generate_polygon_instance(4, 2, 0, 21);
  const auto f = encode(inst);
  int solved = 0;
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    DynamicsConfig c;
    c.seed = static_cast<std::uint64_t>(seed);
    c.t_end = 600;
    c.observe_interval = 1.0;
    const auto rec = integrate(f, c);
    const auto& last = rec.samples.back();
    if (energy(f, rec.final_state) < 1e-8 && oracle::count_satisfied(inst, last.assignment) == inst.n_eq())
      ++solved;
  }
  CHECK(solved >= 45);
}

TEST_CASE("unsat trajectory invariants") {
  const auto inst = generate_polygon_instance(5, 3, 2, 7);
  const auto f = encode(inst);
  DynamicsConfig c;
  c.seed = 3;
  c.t_end = 200;
  c.keep_log_a = true;
  const auto rec = integrate(f, c);
  REQUIRE(rec.samples.size() == 2001);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const auto& s = rec.samples[i];
    CHECK(s.satisfied_count < inst.n_eq());
    CHECK(s.max_abs_spin <= 1.0 + 1e-9);
    CHECK(s.min_clause >= 0.0);
    CHECK(s.max_clause <= 1.0);
    CHECK(s.energy > 0.0);
    CHECK(s.t == doctest::Approx(0.1 * static_cast<double>(i)));
    if (i > 0) {
      CHECK(s.t > rec.samples[i - 1].t);
      for (std::size_t m = 0; m < s.log_a.size(); ++m)
        CHECK(s.log_a[m] >= rec.samples[i - 1].log_a[m]);
    }
  }
  CHECK(rec.final_state.t == doctest::Approx(200.0));
}

TEST_CASE("frozen replay: K^2 accumulates no faster than K") {
  // The same s path fed to both weight laws; log a_m(T) - log a_m(0) is the
  // integral of K^alpha.
  const auto f = encode(generate_polygon_instance(5, 3, 2, 4));
  DynamicsConfig c;
  c.alpha = 1.0;
  c.seed = 9;
  c.t_end = 50;
  c.storage = SpinStorage::full;
  const auto rec = integrate(f, c);
  for (std::size_t m = 0; m < f.num_clauses(); ++m) {
    double a1 = 0.0, a2 = 0.0;
    for (std::size_t i = 1; i < rec.samples.size(); ++i) {
      const double dt = rec.samples[i].t - rec.samples[i - 1].t;
      const double k0 = clause_value(f, rec.samples[i - 1].spins, m);
      const double k1 = clause_value(f, rec.samples[i].spins, m);
      a1 += 0.5 * dt * (k0 + k1);
      a2 += 0.5 * dt * (k0 * k0 + k1 * k1);
    }
    CHECK(a2 <= a1 + 1e-15);
  }
}

TEST_CASE("alpha = 1 weight growth matches the sampled K integral") {
  const auto f = encode(generate_polygon_instance(4, 2, 1, 2));
  DynamicsConfig c;
  c.alpha = 1.0;
  c.seed = 5;
  c.t_end = 20;
  c.rtol = 1e-8;
  c.atol = 1e-10;
  c.observe_interval = 0.01;
  c.storage = SpinStorage::full;
  c.keep_log_a = true;
  const auto rec = integrate(f, c);
  for (std::size_t m = 0; m < f.num_clauses(); ++m) {
    double integral = 0.0;
    for (std::size_t i = 1; i < rec.samples.size(); ++i) {
      const double dt = rec.samples[i].t - rec.samples[i - 1].t;
      integral += 0.5 * dt *
                  (clause_value(f, rec.samples[i - 1].spins, m) + clause_value(f, rec.samples[i].spins, m));
    }
    CHECK(rec.samples.back().log_a[m] == doctest::Approx(integral).epsilon(1e-3));
  }
}

TEST_CASE("same seed, same trajectory; different seed, different start") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  DynamicsConfig c;
  c.seed = 42;
  c.t_end = 30;
  const auto a = integrate(f, c);
  const auto b = integrate(f, c);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].spins == b.samples[i].spins);
  c.seed = 43;
  CHECK(initial_state(f, c).s != a.samples.front().spins);
}

TEST_CASE("initial state") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  DynamicsConfig c;
  c.seed = 7;
  const auto one = initial_state(f, c);
  for (double v : one.s) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  for (double v : one.log_a) CHECK(v == 0.0);
  c.a_init = AuxInit::uniform_unit;
  const auto uni = initial_state(f, c);
  for (double v : uni.log_a) CHECK(v < 0.0);
}

TEST_CASE("burn-in drops early samples") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  DynamicsConfig c;
  c.t_end = 10;
  c.burn_in = 4;
  const auto rec = integrate(f, c);
  CHECK(rec.samples.front().t == doctest::Approx(4.0));
  CHECK(rec.samples.size() == 61);
}

TEST_CASE("binary state dump round trip and restart") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  DynamicsConfig c;
  c.t_end = 10;
  const auto rec = integrate(f, c);
  std::stringstream ss;
  write_state(rec.final_state, ss);
  const auto back = read_state(ss);
  CHECK(back.s == rec.final_state.s);
  CHECK(back.log_a == rec.final_state.log_a);
  CHECK(back.t == rec.final_state.t);

  c.t_end = 20;
  const auto more = integrate_from(f, c, back);
  CHECK(more.samples.front().t == doctest::Approx(10.0));
  CHECK(more.samples.back().t == doctest::Approx(20.0));

  std::stringstream junk("NOPE");
  CHECK_THROWS_AS(read_state(junk), InvalidInput);
}

TEST_CASE("trajectory CSV carries the header and reads back") {
  const auto inst = generate_polygon_instance(4, 3, 1, 1);
  const auto f = encode(inst);
  DynamicsConfig c;
  c.t_end = 40;
  c.seed = 2;
  const auto rec = integrate(f, c);
  std::stringstream ss;
  write_trajectory_csv(rec, f, describe(c), kDefaultVicinityRadius, true, ss);
  const std::string text = ss.str();
  CHECK(text.find("# alpha=2\n") != std::string::npos);
  CHECK(text.find("# vicinity_space=x_block\n") != std::string::npos);
  CHECK(text.find("t,sat_count,V,maxK,log_a_max,in_vicinity,x0") != std::string::npos);

  const auto csv = read_trajectory_csv(ss);
  CHECK(csv.n_eq == inst.n_eq());
  const auto labels = vicinity_episode_labels(rec, f, inst, kDefaultVicinityRadius);
  REQUIRE(csv.samples.size() == labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK(csv.samples[i].in == labels[i].in);
    CHECK(csv.samples[i].satisfied == labels[i].satisfied);
    CHECK(csv.samples[i].t == doctest::Approx(labels[i].t));
  }
}

TEST_CASE("integration errors surface as typed exceptions") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 1));
  DynamicsConfig c;
  c.t_end = -1;
  CHECK_THROWS_AS(integrate(f, c), InvalidInput);
  c = DynamicsConfig{};
  SystemState late = initial_state(f, c);
  late.t = c.t_end;
  CHECK_THROWS_AS(integrate_from(f, c, late), InvalidInput);
}
