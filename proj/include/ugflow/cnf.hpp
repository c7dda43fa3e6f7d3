#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ugflow/instance.hpp"

namespace ugflow {

struct Literal {
  std::uint32_t var = 0;  // spin index in [0, N)
  int sign = 1;           // +1 direct, -1 negated; this is c_mp

  friend bool operator==(const Literal&, const Literal&) = default;
};

struct Clause {
  std::vector<Literal> literals;
};

/// Incidence of spin p in clause m at position `slot` of that clause.
struct Occurrence {
  std::uint32_t clause = 0;
  std::uint32_t slot = 0;
};

/// CNF over spins for a 2-Lin-k instance.
///
/// Spin layout: x-variable i owns spins [k*i, k*i + k), the z-variable of
/// equation q owns [k*n_x + k*q, k*n_x + k*q + k). Clause order: pairwise
/// at-most-one clauses per x-block (ascending i, then ascending pair), then
/// per equation the k-ary OR over its z-block followed by the 2k implications
/// (not z_t or x_i=t), (not z_t or x_j=t-b) for t = 0..k-1.
class CnfFormula {
 public:
  CnfFormula(int k, std::size_t n_x, std::vector<TwoLinEquation> equations,
             std::vector<Clause> clauses);

  int k() const { return k_; }
  std::size_t n_x() const { return n_x_; }
  std::size_t n_eq() const { return equations_.size(); }
  std::size_t num_spins() const { return num_spins_; }
  std::size_t num_clauses() const { return clauses_.size(); }

  const std::vector<TwoLinEquation>& equations() const { return equations_; }
  const std::vector<Clause>& clauses() const { return clauses_; }
  const Clause& clause(std::size_t m) const { return clauses_[m]; }
  std::span<const Occurrence> occurrences(std::size_t p) const { return occurrences_[p]; }

  std::size_t x_spin(std::size_t i, int value) const {
    return static_cast<std::size_t>(k_) * i + static_cast<std::size_t>(value);
  }
  std::size_t z_spin(std::size_t q, int branch) const {
    return static_cast<std::size_t>(k_) * (n_x_ + q) + static_cast<std::size_t>(branch);
  }
  std::size_t num_x_spins() const { return static_cast<std::size_t>(k_) * n_x_; }
  /// Index of the k-ary OR clause of equation q.
  std::size_t equation_clause(std::size_t q) const;

 private:
  int k_;
  std::size_t n_x_;
  std::size_t num_spins_;
  std::vector<TwoLinEquation> equations_;
  std::vector<Clause> clauses_;
  std::vector<std::vector<Occurrence>> occurrences_;
};

/// N = (n_x + n_eq) k.
std::size_t expected_spin_count(std::size_t n_x, std::size_t n_eq, int k);
/// M = n_x k(k-1)/2 + n_eq (1 + 2k).
std::size_t expected_clause_count(std::size_t n_x, std::size_t n_eq, int k);

CnfFormula encode(const TwoLinInstance& instance);

/// Corner of {-1,+1}^N for `values`: one-hot x-blocks, and for each equation
/// a one-hot z-block at branch values[i] when satisfied, all -1 otherwise.
std::vector<double> encode_assignment(const CnfFormula& formula, const Assignment& values);

/// Per x-block argmax; ties go to the smallest value.
Assignment decode_assignment(std::span<const double> s, const CnfFormula& formula);

/// L1 distance between the x-block part of `spins` (which may hold just the
/// x-blocks or all N spins) and the one-hot corner of `values`.
double x_block_distance(const CnfFormula& formula, std::span<const double> spins,
                        const Assignment& values);

bool clause_satisfied(const Clause& clause, std::span<const double> corner);

/// Clauses with a true literal at a corner. Throws InvalidInput if some
/// entry is not exactly +-1.
std::size_t count_satisfied_clauses(const CnfFormula& formula, std::span<const double> corner);

void write_dimacs(const CnfFormula& formula, std::ostream& out);
void write_dimacs(const CnfFormula& formula, const std::filesystem::path& path);

struct DimacsCnf {
  std::size_t num_vars = 0;
  std::vector<std::vector<int>> clauses;  // 1-based signed literals
};

DimacsCnf read_dimacs(std::istream& in);

}  // namespace ugflow
