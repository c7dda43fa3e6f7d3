#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ugflow {

/// One 2-Lin-k constraint `x_i = x_j + b (mod k)`. Equations are directed:
/// swapping i and j negates b, so they are never canonicalized.
struct TwoLinEquation {
  std::size_t i = 0;
  std::size_t j = 0;
  int b = 0;

  friend bool operator==(const TwoLinEquation&, const TwoLinEquation&) = default;
};

/// Non-negative rational kept in the form it was written (m / n_eq), not reduced.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num * b.den == b.num * a.den;
  }
  friend bool operator<(const Fraction& a, const Fraction& b) {
    return a.num * b.den < b.num * a.den;
  }
};

std::string to_string(const Fraction& f);

/// Values of the n_x variables, each a residue in [0, k).
using Assignment = std::vector<int>;

/// A system of two-variable linear equations over Z_k.
class TwoLinInstance {
 public:
  TwoLinInstance() = default;
  /// Validates and throws InvalidInput on any violated invariant.
  TwoLinInstance(int k, std::size_t n_x, std::vector<TwoLinEquation> equations,
                 std::optional<Fraction> designed_opt = std::nullopt);

  int k() const { return k_; }
  std::size_t n_x() const { return n_x_; }
  std::size_t n_eq() const { return equations_.size(); }
  const std::vector<TwoLinEquation>& equations() const { return equations_; }
  const std::optional<Fraction>& designed_opt() const { return designed_opt_; }

  friend bool operator==(const TwoLinInstance&, const TwoLinInstance&) = default;

 private:
  int k_ = 2;
  std::size_t n_x_ = 0;
  std::vector<TwoLinEquation> equations_;
  std::optional<Fraction> designed_opt_;
};

bool is_satisfied(const TwoLinEquation& eq, const Assignment& values, int k);

/// Number of equations satisfied by `values`. Throws InvalidInput on a
/// length mismatch or an out-of-range residue.
std::size_t satisfied_count(const TwoLinInstance& instance, const Assignment& values);

struct Optimum {
  Assignment assignment;  // lexicographically smallest maximizer
  std::size_t satisfied = 0;
  Fraction fraction;
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = 10'000'000;

/// Exhaustive maximum over all k^n_x assignments. Throws CapacityError when
/// k^n_x exceeds `budget`.
Optimum brute_force_optimum(const TwoLinInstance& instance,
                            std::uint64_t budget = kDefaultEnumerationBudget);

/// Largest target_unsat the polygon geometry admits for n_x variables.
std::size_t max_polygon_unsat(std::size_t n_x);

struct PolygonOptions {
  /// Total equation count. Unset means the smallest count that fits
  /// target_unsat: max(n_x, n_x - 1 + target_unsat).
  std::optional<std::size_t> n_eq;
  /// Draws whose optimum can be enumerated within this many assignments are
  /// checked and redrawn until the optimum matches the designed value.
  std::uint64_t verify_budget = 100'000'000;
  std::size_t max_attempts = 20'000;
};

struct PolygonDraw {
  TwoLinInstance instance;
  Assignment reference;                     // hidden x*
  std::vector<std::size_t> unsat_equations;  // indices designated unsat, ascending
  std::size_t attempts = 1;
  bool verified = false;  // optimum checked by enumeration
};

PolygonDraw draw_polygon_instance(std::size_t n_x, int k, std::size_t target_unsat,
                                  std::uint64_t seed, const PolygonOptions& options = {});

inline TwoLinInstance generate_polygon_instance(std::size_t n_x, int k, std::size_t target_unsat,
                                                std::uint64_t seed,
                                                const PolygonOptions& options = {}) {
  return draw_polygon_instance(n_x, k, target_unsat, seed, options).instance;
}

// Text format:
//   p 2link <k> <n_x> <n_eq>
//   e <i> <j> <b>          (n_eq lines)
//   c opt <num>/<den>      (optional)
// '#' starts a comment.
TwoLinInstance read_instance(std::istream& in);
TwoLinInstance read_instance(const std::filesystem::path& path);
void write_instance(const TwoLinInstance& instance, std::ostream& out);
void write_instance(const TwoLinInstance& instance, const std::filesystem::path& path);

/// 16 hex digits identifying the instance content.
std::string instance_hash(const TwoLinInstance& instance);

}  // namespace ugflow
