#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ugflow/errors.hpp"
#include "ugflow/fsle.hpp"
#include "ugflow/random.hpp"

using namespace ugflow;

namespace {

DynamicsConfig tight(double alpha, std::uint64_t seed) {
  DynamicsConfig c;
  c.alpha = alpha;
  c.seed = seed;
  c.rtol = 1e-6;
  c.atol = 1e-9;
  return c;
}

}  // namespace

TEST_CASE("paired flow is two independent copies") {
  const auto f = encode(generate_polygon_instance(4, 3, 1, 2));
  const ClauseFlow flow(f, 2.0);
  const PairedFlow pair(flow);
  const auto d = static_cast<Eigen::Index>(flow.dimension());
  CHECK(pair.dimension() == 2 * flow.dimension());

  DynamicsConfig c;
  c.seed = 1;
  const Vec a = flow.pack(initial_state(f, c));
  c.seed = 2;
  const Vec b = flow.pack(initial_state(f, c));
  Vec y(2 * d);
  y << a, b;
  Vec dy, da, db;
  pair.evaluate(y, dy);
  flow.evaluate(a, da);
  flow.evaluate(b, db);
  CHECK((dy.head(d) - da).norm() == 0.0);
  CHECK((dy.tail(d) - db).norm() == 0.0);
  const auto n = static_cast<Eigen::Index>(flow.num_spins());
  CHECK(pair.spin_separation(y) == doctest::Approx((a.head(n) - b.head(n)).norm()));

  // The paired solver matches solving each copy on its own.
  auto ps = pair.make_shifted_solver();
  auto fs = flow.make_shifted_solver();
  Rng rng(3);
  Vec rhs(2 * d);
  for (auto& v : rhs) v = uniform_open(rng, -1.0, 1.0);
  REQUIRE(ps->factorize(y, 7.0));
  Vec got;
  ps->solve(rhs, got);
  Vec part;
  REQUIRE(fs->factorize(a, 7.0));
  fs->solve(rhs.head(d), part);
  CHECK((got.head(d) - part).norm() <= 1e-12 * (1.0 + part.norm()));
  REQUIRE(fs->factorize(b, 7.0));
  fs->solve(rhs.tail(d), part);
  CHECK((got.tail(d) - part).norm() <= 1e-12 * (1.0 + part.norm()));
}

TEST_CASE("sat control: perturbations of a converged trajectory do not grow") {
  const auto f = encode(generate_polygon_instance(4, 3, 0, 5));
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    FsleOptions o;
    o.burn_in = 200;
    o.n_segments = 4;
    o.seed = seed;
    const auto est = fsle(f, tight(2.0, seed), o);
    if (!est.converged) continue;
    ++converged;
    CHECK(est.lambda_mean <= 1e-6);
    CHECK(est.capped_segments == est.n_segments);
  }
  CHECK(converged >= 4);
}

TEST_CASE("fsle is deterministic and reports its protocol") {
  const auto f = encode(generate_polygon_instance(5, 3, 2, 42));
  FsleOptions o;
  o.n_segments = 3;
  o.segment_cap = 5;
  o.seed = 11;
  const auto a = fsle(f, tight(2.0, 4), o);
  const auto b = fsle(f, tight(2.0, 4), o);
  CHECK(a.segment_rates == b.segment_rates);
  CHECK(a.segment_rates.size() == 3);
  CHECK(a.segment_times.size() == 3);
  CHECK(a.delta0 == o.delta0);
  CHECK(a.delta1 == o.delta1);
  CHECK(a.alpha == 2.0);
  for (double tau : a.segment_times) CHECK(tau <= o.segment_cap + 1e-9);
  double mean = 0.0;
  for (double r : a.segment_rates) mean += r / 3.0;
  CHECK(a.lambda_mean == doctest::Approx(mean));
}

TEST_CASE("segments that reach delta1 score a positive rate") {
  // delta1 barely above delta0, so most segments reach it quickly.
  const auto f = encode(generate_polygon_instance(5, 3, 2, 42));
  FsleOptions o;
  o.delta1 = 1.5 * o.delta0;
  o.n_segments = 4;
  o.segment_cap = 50;
  const auto est = fsle(f, tight(1.0, 1), o);
  CHECK(est.capped_segments < est.n_segments);
  for (std::size_t s = 0; s < est.segment_rates.size(); ++s)
    if (est.segment_times[s] < o.segment_cap) CHECK(est.segment_rates[s] > 0.0);
}

TEST_CASE("summaries and CSV") {
  FsleEstimate a, b;
  a.lambda_mean = 1.0;
  a.n_segments = 10;
  a.segment_rates.assign(10, 1.0);
  a.capped_segments = 2;
  b.lambda_mean = 3.0;
  b.n_segments = 10;
  b.segment_rates.assign(10, 3.0);
  b.capped_segments = 4;
  b.converged = true;
  const auto row = summarize_fsle(1.5, {a, b});
  CHECK(row.alpha == 1.5);
  CHECK(row.mean == doctest::Approx(2.0));
  CHECK(row.std == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(row.runs == 2);
  CHECK(row.segments == 20);
  CHECK(row.capped == 6);
  CHECK(row.converged_runs == 1);

  std::stringstream ss;
  write_fsle_csv({row}, {{"delta0", "1e-08"}}, ss);
  CHECK(ss.str().rfind("# delta0=1e-08\n", 0) == 0);
  CHECK(ss.str().find("alpha,") != std::string::npos);
}

TEST_CASE("fsle option validation") {
  FsleOptions o;
  CHECK_NOTHROW(o.validate());
  o.delta1 = o.delta0;
  CHECK_THROWS_AS(o.validate(), InvalidInput);
  o = FsleOptions{};
  o.n_segments = 0;
  CHECK_THROWS_AS(o.validate(), InvalidInput);
  o = FsleOptions{};
  o.segment_cap = 0;
  CHECK_THROWS_AS(o.validate(), InvalidInput);
  o = FsleOptions{};
  o.burn_in = -1;
  CHECK_THROWS_AS(o.validate(), InvalidInput);
}
