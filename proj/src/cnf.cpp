#include "ugflow/cnf.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ugflow/errors.hpp"

namespace ugflow {

CnfFormula::CnfFormula(int k, std::size_t n_x, std::vector<TwoLinEquation> equations,
                       std::vector<Clause> clauses)
    : k_(k),
      n_x_(n_x),
      num_spins_(expected_spin_count(n_x, equations.size(), k)),
      equations_(std::move(equations)),
      clauses_(std::move(clauses)),
      occurrences_(num_spins_) {
  for (std::size_t m = 0; m < clauses_.size(); ++m) {
    const auto& lits = clauses_[m].literals;
    for (std::size_t slot = 0; slot < lits.size(); ++slot) {
      if (lits[slot].var >= num_spins_) throw InvalidInput("clause literal outside spin range");
      occurrences_[lits[slot].var].push_back(
          {static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(slot)});
    }
  }
}

std::size_t CnfFormula::equation_clause(std::size_t q) const {
  const auto k = static_cast<std::size_t>(k_);
  return n_x_ * k * (k - 1) / 2 + q * (1 + 2 * k);
}

std::size_t expected_spin_count(std::size_t n_x, std::size_t n_eq, int k) {
  return (n_x + n_eq) * static_cast<std::size_t>(k);
}

std::size_t expected_clause_count(std::size_t n_x, std::size_t n_eq, int k) {
  const auto kk = static_cast<std::size_t>(k);
  return n_x * kk * (kk - 1) / 2 + n_eq * (1 + 2 * kk);
}

CnfFormula encode(const TwoLinInstance& instance) {
  const int k = instance.k();
  const std::size_t n_x = instance.n_x();
  const auto uk = static_cast<std::uint32_t>(k);
  auto x = [&](std::size_t i, int v) { return static_cast<std::uint32_t>(uk * i + v); };
  auto z = [&](std::size_t q, int t) { return static_cast<std::uint32_t>(uk * (n_x + q) + t); };

  std::vector<Clause> clauses;
  clauses.reserve(expected_clause_count(n_x, instance.n_eq(), k));

  // At most one value per variable. The at-least-one clause is implied by
  // the equation groups below and is left out.
  for (std::size_t i = 0; i < n_x; ++i)
    for (int q1 = 0; q1 < k; ++q1)
      for (int q2 = q1 + 1; q2 < k; ++q2)
        clauses.push_back({{{x(i, q1), -1}, {x(i, q2), -1}}});

  // Branch t of equation q witnesses x_i = t and x_j = t - b, i.e. x_i = x_j + b.
  for (std::size_t q = 0; q < instance.n_eq(); ++q) {
    const auto& e = instance.equations()[q];
    Clause any;
    for (int t = 0; t < k; ++t) any.literals.push_back({z(q, t), +1});
    clauses.push_back(std::move(any));
    for (int t = 0; t < k; ++t) {
      const int partner = ((t - e.b) % k + k) % k;
      clauses.push_back({{{z(q, t), -1}, {x(e.i, t), +1}}});
      clauses.push_back({{{z(q, t), -1}, {x(e.j, partner), +1}}});
    }
  }
  return CnfFormula(k, n_x, instance.equations(), std::move(clauses));
}

std::vector<double> encode_assignment(const CnfFormula& formula, const Assignment& values) {
  if (values.size() != formula.n_x()) throw InvalidInput("assignment length differs from n_x");
  const int k = formula.k();
  std::vector<double> s(formula.num_spins(), -1.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] >= k) throw InvalidInput("assignment residue outside [0, k)");
    s[formula.x_spin(i, values[i])] = 1.0;
  }
  for (std::size_t q = 0; q < formula.n_eq(); ++q) {
    const auto& e = formula.equations()[q];
    if (is_satisfied(e, values, k)) s[formula.z_spin(q, values[e.i])] = 1.0;
  }
  return s;
}

Assignment decode_assignment(std::span<const double> s, const CnfFormula& formula) {
  if (s.size() < formula.num_x_spins()) throw InvalidInput("spin vector too short to decode");
  const int k = formula.k();
  Assignment out(formula.n_x());
  for (std::size_t i = 0; i < formula.n_x(); ++i) {
    const double* block = s.data() + formula.x_spin(i, 0);
    int best = 0;
    for (int v = 1; v < k; ++v)
      if (block[v] > block[best]) best = v;
    out[i] = best;
  }
  return out;
}

double x_block_distance(const CnfFormula& formula, std::span<const double> spins,
                        const Assignment& values) {
  if (spins.size() < formula.num_x_spins()) throw InvalidInput("spin vector too short");
  double d = 0.0;
  for (std::size_t i = 0; i < formula.n_x(); ++i)
    for (int v = 0; v < formula.k(); ++v) {
      const double corner = v == values[i] ? 1.0 : -1.0;
      d += std::abs(spins[formula.x_spin(i, v)] - corner);
    }
  return d;
}

bool clause_satisfied(const Clause& clause, std::span<const double> corner) {
  for (const auto& lit : clause.literals)
    if (lit.sign * corner[lit.var] == 1.0) return true;
  return false;
}

std::size_t count_satisfied_clauses(const CnfFormula& formula, std::span<const double> corner) {
  if (corner.size() != formula.num_spins()) throw InvalidInput("corner length differs from N");
  for (double v : corner)
    if (v != 1.0 && v != -1.0) throw InvalidInput("not a corner: entries must be exactly +-1");
  std::size_t n = 0;
  for (const auto& c : formula.clauses()) n += clause_satisfied(c, corner);
  return n;
}

void write_dimacs(const CnfFormula& formula, std::ostream& out) {
  out << "c 2-lin-" << formula.k() << " encoding: n_x=" << formula.n_x()
      << " n_eq=" << formula.n_eq() << "\n";
  out << "p cnf " << formula.num_spins() << ' ' << formula.num_clauses() << '\n';
  for (const auto& c : formula.clauses()) {
    for (const auto& lit : c.literals)
      out << (lit.sign < 0 ? "-" : "") << (lit.var + 1) << ' ';
    out << "0\n";
  }
}

void write_dimacs(const CnfFormula& formula, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_dimacs(formula, out);
  if (!out) throw InvalidInput("write failed for " + path.string());
}

DimacsCnf read_dimacs(std::istream& in) {
  DimacsCnf cnf;
  std::string line;
  std::size_t lineno = 0, declared = 0;
  bool header = false;
  std::vector<int> current;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == 'c') continue;
    std::istringstream ls(line);
    if (line[0] == 'p') {
      std::string p, fmt;
      if (!(ls >> p >> fmt >> cnf.num_vars >> declared) || fmt != "cnf")
        throw ParseError(lineno, "bad DIMACS header");
      header = true;
      continue;
    }
    if (!header) throw ParseError(lineno, "clause before header");
    int lit;
    while (ls >> lit) {
      if (lit == 0) {
        cnf.clauses.push_back(std::move(current));
        current.clear();
      } else {
        if (static_cast<std::size_t>(std::abs(lit)) > cnf.num_vars)
          throw ParseError(lineno, "literal out of range");
        current.push_back(lit);
      }
    }
  }
  if (!current.empty()) throw ParseError(lineno, "unterminated clause");
  if (cnf.clauses.size() != declared) throw ParseError(lineno, "clause count mismatch");
  return cnf;
}

}  // namespace ugflow
