#include "ugflow/instance.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ugflow/errors.hpp"
#include "ugflow/hash.hpp"
#include "ugflow/random.hpp"

namespace ugflow {

std::string to_string(const Fraction& f) {
  return std::to_string(f.num) + "/" + std::to_string(f.den);
}

TwoLinInstance::TwoLinInstance(int k, std::size_t n_x, std::vector<TwoLinEquation> equations,
                               std::optional<Fraction> designed_opt)
    : k_(k), n_x_(n_x), equations_(std::move(equations)), designed_opt_(designed_opt) {
  if (k_ < 2) throw InvalidInput("alphabet size k must be >= 2, got " + std::to_string(k_));
  if (n_x_ < 2) throw InvalidInput("n_x must be >= 2, got " + std::to_string(n_x_));
  if (equations_.empty()) throw InvalidInput("instance needs at least one equation");

  std::vector<bool> used(n_x_, false);
  for (std::size_t l = 0; l < equations_.size(); ++l) {
    const auto& e = equations_[l];
    if (e.i >= n_x_ || e.j >= n_x_)
      throw InvalidInput("equation " + std::to_string(l) + ": variable index out of range");
    if (e.i == e.j) throw InvalidInput("equation " + std::to_string(l) + ": i == j");
    if (e.b < 0 || e.b >= k_)
      throw InvalidInput("equation " + std::to_string(l) + ": b outside [0, k)");
    used[e.i] = used[e.j] = true;
  }
  if (auto it = std::find(used.begin(), used.end(), false); it != used.end())
    throw InvalidInput("variable " + std::to_string(it - used.begin()) +
                       " appears in no equation");

  if (designed_opt_) {
    const auto n = static_cast<std::int64_t>(equations_.size());
    const auto& f = *designed_opt_;
    if (f.den <= 0 || f.num <= 0 || f.num > f.den)
      throw InvalidInput("designed_opt must lie in (0, 1]");
    // equals m / n_eq for an integer m
    if ((f.num * n) % f.den != 0)
      throw InvalidInput("designed_opt " + to_string(f) + " is not a multiple of 1/n_eq");
  }
}

bool is_satisfied(const TwoLinEquation& eq, const Assignment& values, int k) {
  const int lhs = values[eq.i];
  const int rhs = (values[eq.j] + eq.b) % k;
  return lhs == rhs;
}

std::size_t satisfied_count(const TwoLinInstance& instance, const Assignment& values) {
  if (values.size() != instance.n_x())
    throw InvalidInput("assignment has " + std::to_string(values.size()) + " entries, expected " +
                       std::to_string(instance.n_x()));
  for (int v : values)
    if (v < 0 || v >= instance.k()) throw InvalidInput("assignment residue outside [0, k)");
  std::size_t count = 0;
  for (const auto& e : instance.equations()) count += is_satisfied(e, values, instance.k());
  return count;
}

namespace {

// k^n, saturating at limit + 1.
std::uint64_t bounded_power(std::uint64_t k, std::size_t n, std::uint64_t limit) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (r > limit / k) return limit + 1;
    r *= k;
  }
  return r;
}

}  // namespace

Optimum brute_force_optimum(const TwoLinInstance& instance, std::uint64_t budget) {
  const int k = instance.k();
  const std::size_t n = instance.n_x();
  if (bounded_power(static_cast<std::uint64_t>(k), n, budget) > budget)
    throw CapacityError("brute force needs k^n_x = " + std::to_string(k) + "^" +
                        std::to_string(n) + " assignments, budget is " + std::to_string(budget));

  // Every equation is invariant under a common shift of all values, so the
  // lexicographically smallest maximizer has x_0 = 0; enumerating that slice
  // in lexicographic order and keeping the first maximum is exact.
  const auto& eqs = instance.equations();
  Assignment x(n, 0);
  Optimum best;
  best.assignment = x;
  bool have = false;
  while (true) {
    std::size_t count = 0;
    for (const auto& e : eqs) count += (x[e.i] == (x[e.j] + e.b) % k);
    if (!have || count > best.satisfied) {
      best.satisfied = count;
      best.assignment = x;
      have = true;
      if (count == eqs.size()) break;
    }
    std::size_t pos = n - 1;
    while (pos > 0 && x[pos] == k - 1) x[pos--] = 0;
    if (pos == 0) break;
    ++x[pos];
  }
  best.fraction = Fraction{static_cast<std::int64_t>(best.satisfied),
                           static_cast<std::int64_t>(eqs.size())};
  return best;
}

std::size_t max_polygon_unsat(std::size_t n_x) { return n_x * (n_x - 1) / 2 - n_x + 1; }

PolygonDraw draw_polygon_instance(std::size_t n_x, int k, std::size_t target_unsat,
                                  std::uint64_t seed, const PolygonOptions& options) {
  if (n_x < 3) throw InvalidInput("polygon instances need n_x >= 3");
  if (k < 2) throw InvalidInput("alphabet size k must be >= 2");
  if (target_unsat > max_polygon_unsat(n_x))
    throw InvalidInput("target_unsat " + std::to_string(target_unsat) + " exceeds the " +
                       std::to_string(max_polygon_unsat(n_x)) + " eligible edges of an " +
                       std::to_string(n_x) + "-gon");
  const std::size_t max_edges = n_x * (n_x - 1) / 2;
  const std::size_t n_eq = options.n_eq.value_or(std::max(n_x, n_x - 1 + target_unsat));
  if (n_eq < n_x || n_eq > max_edges)
    throw InvalidInput("n_eq must lie in [n_x, n_x(n_x-1)/2] = [" + std::to_string(n_x) + ", " +
                       std::to_string(max_edges) + "]");
  const std::size_t eligible = n_eq - (n_x - 1);
  if (target_unsat > eligible)
    throw InvalidInput("target_unsat " + std::to_string(target_unsat) + " exceeds the " +
                       std::to_string(eligible) + " non-path equations of this draw");

  std::vector<std::pair<std::size_t, std::size_t>> diagonals;
  for (std::size_t i = 0; i < n_x; ++i)
    for (std::size_t j = i + 2; j < n_x; ++j)
      if (!(i == 0 && j == n_x - 1)) diagonals.emplace_back(i, j);

  const bool checkable =
      target_unsat >= 2 &&
      bounded_power(static_cast<std::uint64_t>(k), n_x, options.verify_budget) <=
          options.verify_budget;
  const Fraction designed{static_cast<std::int64_t>(n_eq - target_unsat),
                          static_cast<std::int64_t>(n_eq)};

  Rng rng(seed);
  for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(1, options.max_attempts);
       ++attempt) {
    Assignment ref(n_x);
    for (auto& v : ref) v = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k)));

    // Path edges first, then the closing edge, then diagonals in draw order.
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i + 1 < n_x; ++i) edges.emplace_back(i, i + 1);
    edges.emplace_back(0, n_x - 1);
    auto pool = diagonals;
    shuffle_range(pool.begin(), pool.end(), rng);
    edges.insert(edges.end(), pool.begin(), pool.begin() + static_cast<long>(n_eq - n_x));

    // Unsat designations go to the closing edge and diagonals only.
    std::vector<std::size_t> candidates(eligible);
    std::iota(candidates.begin(), candidates.end(), n_x - 1);
    shuffle_range(candidates.begin(), candidates.end(), rng);
    std::vector<std::size_t> unsat(candidates.begin(),
                                   candidates.begin() + static_cast<long>(target_unsat));
    std::sort(unsat.begin(), unsat.end());

    std::vector<TwoLinEquation> eqs;
    eqs.reserve(n_eq);
    for (std::size_t l = 0; l < edges.size(); ++l) {
      const auto [i, j] = edges[l];
      int b = ((ref[i] - ref[j]) % k + k) % k;
      if (std::binary_search(unsat.begin(), unsat.end(), l))
        b = (b + 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k - 1)))) % k;
      eqs.push_back({i, j, b});
    }

    TwoLinInstance inst(k, n_x, std::move(eqs), designed);
    if (checkable) {
      const auto opt = brute_force_optimum(inst, options.verify_budget);
      if (!(opt.fraction == designed)) continue;
    }
    return PolygonDraw{std::move(inst), std::move(ref), std::move(unsat), attempt,
                       checkable || target_unsat < 2};
  }
  throw InvalidInput("no draw with optimum exactly " + to_string(designed) + " found in " +
                     std::to_string(options.max_attempts) + " attempts (n_x=" +
                     std::to_string(n_x) + ", k=" + std::to_string(k) +
                     ", target_unsat=" + std::to_string(target_unsat) + ")");
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::int64_t parse_int(std::string_view tok, std::size_t line, const char* what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
  return v;
}

}  // namespace

TwoLinInstance read_instance(std::istream& in) {
  std::string raw;
  std::size_t lineno = 0;
  bool have_header = false;
  std::int64_t k = 0, n_x = 0, n_eq = 0;
  std::vector<TwoLinEquation> eqs;
  std::optional<Fraction> opt;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    if (!have_header) {
      if (tok.size() != 5 || tok[0] != "p" || tok[1] != "2link")
        throw ParseError(lineno, "expected header 'p 2link <k> <n_x> <n_eq>'");
      k = parse_int(tok[2], lineno, "k");
      n_x = parse_int(tok[3], lineno, "n_x");
      n_eq = parse_int(tok[4], lineno, "n_eq");
      if (k < 2 || n_x < 2 || n_eq < 1) throw ParseError(lineno, "header values out of range");
      have_header = true;
      continue;
    }
    if (tok[0] == "e") {
      if (tok.size() != 4) throw ParseError(lineno, "expected 'e <i> <j> <b>'");
      if (opt) throw ParseError(lineno, "equation after 'c opt' trailer");
      const auto i = parse_int(tok[1], lineno, "index");
      const auto j = parse_int(tok[2], lineno, "index");
      const auto b = parse_int(tok[3], lineno, "residue");
      if (i < 0 || j < 0 || i >= n_x || j >= n_x) throw ParseError(lineno, "index out of range");
      if (i == j) throw ParseError(lineno, "equation relates a variable to itself");
      if (b < 0 || b >= k) throw ParseError(lineno, "b must lie in [0, k)");
      if (static_cast<std::int64_t>(eqs.size()) == n_eq)
        throw ParseError(lineno, "more than n_eq = " + std::to_string(n_eq) + " equations");
      eqs.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<int>(b)});
    } else if (tok[0] == "c") {
      if (tok.size() >= 2 && tok[1] == "opt") {
        if (tok.size() != 3) throw ParseError(lineno, "expected 'c opt <num>/<den>'");
        const auto slash = tok[2].find('/');
        if (slash == std::string_view::npos) throw ParseError(lineno, "expected <num>/<den>");
        opt = Fraction{parse_int(tok[2].substr(0, slash), lineno, "numerator"),
                       parse_int(tok[2].substr(slash + 1), lineno, "denominator")};
      }
    } else {
      throw ParseError(lineno, "unknown line type '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_header) throw ParseError(lineno, "missing 'p 2link' header");
  if (static_cast<std::int64_t>(eqs.size()) != n_eq)
    throw ParseError(lineno, "header declares " + std::to_string(n_eq) + " equations, found " +
                                 std::to_string(eqs.size()));
  try {
    return TwoLinInstance(static_cast<int>(k), static_cast<std::size_t>(n_x), std::move(eqs), opt);
  } catch (const InvalidInput& e) {
    throw ParseError(lineno, e.what());
  }
}

TwoLinInstance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return read_instance(in);
}

void write_instance(const TwoLinInstance& instance, std::ostream& out) {
  out << "p 2link " << instance.k() << ' ' << instance.n_x() << ' ' << instance.n_eq() << '\n';
  for (const auto& e : instance.equations()) out << "e " << e.i << ' ' << e.j << ' ' << e.b << '\n';
  if (instance.designed_opt()) out << "c opt " << to_string(*instance.designed_opt()) << '\n';
}

void write_instance(const TwoLinInstance& instance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_instance(instance, out);
  if (!out) throw InvalidInput("write failed for " + path.string());
}

std::string instance_hash(const TwoLinInstance& instance) {
  std::ostringstream os;
  write_instance(instance, os);
  return sha1_hex(os.str()).substr(0, 16);
}

}  // namespace ugflow
