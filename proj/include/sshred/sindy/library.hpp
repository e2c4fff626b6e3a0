#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sshred/diff/var.hpp"

namespace sshred {

struct TrigTerm {
  enum class Kind { Sin, Cos };
  Kind kind = Kind::Sin;
  double freq = 1.0;

  bool operator==(const TrigTerm&) const = default;
};

// Candidate-function library. Term order: constant, monomials of degree
// 1..max_degree in graded-lexicographic order, then for each trig entry one
// term per coordinate.
struct LibrarySpec {
  std::size_t dim = 1;
  bool include_constant = true;
  int max_degree = 1;
  std::vector<TrigTerm> trig;

  bool operator==(const LibrarySpec&) const = default;
};

struct LibraryTerm {
  enum class Kind { Constant, Monomial, Trig };
  Kind kind = Kind::Constant;
  std::vector<std::size_t> factors;  // monomial: coordinate indices, non-decreasing
  TrigTerm trig;                     // trig only
  std::size_t coord = 0;             // trig only
};

namespace detail {
inline void multisets(std::size_t dim, int degree, std::size_t start, std::vector<std::size_t>& cur,
                      std::vector<LibraryTerm>& out) {
  if (static_cast<int>(cur.size()) == degree) {
    LibraryTerm t;
    t.kind = LibraryTerm::Kind::Monomial;
    t.factors = cur;
    out.push_back(std::move(t));
    return;
  }
  for (std::size_t i = start; i < dim; ++i) {
    cur.push_back(i);
    multisets(dim, degree, i, cur, out);
    cur.pop_back();
  }
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace detail

inline std::vector<LibraryTerm> library_terms(const LibrarySpec& spec) {
  if (spec.dim == 0) throw ConfigError("LibrarySpec: dim must be positive");
  if (spec.max_degree < 0) throw ConfigError("LibrarySpec: max_degree must be >= 0");
  std::vector<LibraryTerm> terms;
  if (spec.include_constant) terms.push_back({});
  std::vector<std::size_t> cur;
  for (int deg = 1; deg <= spec.max_degree; ++deg) detail::multisets(spec.dim, deg, 0, cur, terms);
  for (const auto& tr : spec.trig) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      LibraryTerm t;
      t.kind = LibraryTerm::Kind::Trig;
      t.trig = tr;
      t.coord = j;
      terms.push_back(t);
    }
  }
  if (terms.empty()) throw ConfigError("LibrarySpec: library has no terms");
  return terms;
}

inline std::size_t library_size(const LibrarySpec& spec) { return library_terms(spec).size(); }

// Human-readable names, 1-based coordinates: "1", "z1", "z1 z2", "z2^3", "sin(2 z1)".
inline std::vector<std::string> term_names(const LibrarySpec& spec, const std::string& var = "z") {
  std::vector<std::string> names;
  for (const auto& t : library_terms(spec)) {
    switch (t.kind) {
      case LibraryTerm::Kind::Constant:
        names.emplace_back("1");
        break;
      case LibraryTerm::Kind::Monomial: {
        std::string s;
        for (std::size_t i = 0; i < t.factors.size();) {
          std::size_t j = i;
          while (j < t.factors.size() && t.factors[j] == t.factors[i]) ++j;
          if (!s.empty()) s += ' ';
          s += var + std::to_string(t.factors[i] + 1);
          if (j - i > 1) s += '^' + std::to_string(j - i);
          i = j;
        }
        names.push_back(s);
        break;
      }
      case LibraryTerm::Kind::Trig: {
        std::string arg = var + std::to_string(t.coord + 1);
        if (t.trig.freq != 1.0) arg = detail::fmt_num(t.trig.freq) + " " + arg;
        names.push_back((t.trig.kind == TrigTerm::Kind::Sin ? "sin(" : "cos(") + arg + ")");
        break;
      }
    }
  }
  return names;
}

inline double eval_term(const LibraryTerm& t, const double* z) {
  switch (t.kind) {
    case LibraryTerm::Kind::Constant:
      return 1.0;
    case LibraryTerm::Kind::Monomial: {
      double v = 1.0;
      for (auto i : t.factors) v *= z[i];
      return v;
    }
    case LibraryTerm::Kind::Trig: {
      const double a = t.trig.freq * z[t.coord];
      return t.trig.kind == TrigTerm::Kind::Sin ? std::sin(a) : std::cos(a);
    }
  }
  return 0.0;
}

// d term / d z[j]
inline double eval_term_partial(const LibraryTerm& t, const double* z, std::size_t j) {
  switch (t.kind) {
    case LibraryTerm::Kind::Constant:
      return 0.0;
    case LibraryTerm::Kind::Monomial: {
      double total = 0.0;
      for (std::size_t k = 0; k < t.factors.size(); ++k) {
        if (t.factors[k] != j) continue;
        double v = 1.0;
        for (std::size_t m = 0; m < t.factors.size(); ++m)
          if (m != k) v *= z[t.factors[m]];
        total += v;
      }
      return total;
    }
    case LibraryTerm::Kind::Trig: {
      if (t.coord != j) return 0.0;
      const double f = t.trig.freq;
      const double a = f * z[j];
      return t.trig.kind == TrigTerm::Kind::Sin ? f * std::cos(a) : -f * std::sin(a);
    }
  }
  return 0.0;
}

// Theta(z) for one state.
inline Eigen::VectorXd evaluate_library(const Eigen::Ref<const Eigen::VectorXd>& z, const LibrarySpec& spec) {
  if (static_cast<std::size_t>(z.size()) != spec.dim)
    throw ShapeError("evaluate_library: state has " + std::to_string(z.size()) + " entries, library expects " +
                     std::to_string(spec.dim));
  const auto terms = library_terms(spec);
  Eigen::VectorXd out(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) out[static_cast<Eigen::Index>(i)] = eval_term(terms[i], z.data());
  return out;
}

// Theta(Z) row by row: (n, dim) -> (n, p).
inline RowMat library_matrix(const Eigen::Ref<const RowMat>& Z, const LibrarySpec& spec) {
  if (static_cast<std::size_t>(Z.cols()) != spec.dim)
    throw ShapeError("library_matrix: states have " + std::to_string(Z.cols()) + " columns, library expects " +
                     std::to_string(spec.dim));
  const auto terms = library_terms(spec);
  RowMat out(Z.rows(), static_cast<Eigen::Index>(terms.size()));
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double* z = Z.data() + r * Z.cols();
    for (std::size_t i = 0; i < terms.size(); ++i) out(r, static_cast<Eigen::Index>(i)) = eval_term(terms[i], z);
  }
  return out;
}

namespace ops {

// Differentiable Theta: (batch, dim) -> (batch, p).
inline Var library(const Var& Z, const LibrarySpec& spec) {
  if (Z.cols() != spec.dim)
    throw ShapeError("library: input " + shape_str(Z.shape()) + " does not match dim " + std::to_string(spec.dim));
  auto terms = std::make_shared<std::vector<LibraryTerm>>(library_terms(spec));
  Tensor out = Tensor::from_eigen(library_matrix(Z.value().mat(), spec));
  const std::size_t d = spec.dim;
  return Var::make("library", std::move(out), {Z}, [terms, d](Node& n) {
    const Tensor& z = n.inputs[0]->value;
    Tensor& gz = n.inputs[0]->grad_buffer();
    const std::size_t p = terms->size();
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const double* zr = z.data() + r * d;
      for (std::size_t i = 0; i < p; ++i) {
        const double g = n.grad[r * p + i];
        if (g == 0.0) continue;
        const auto& t = (*terms)[i];
        if (t.kind == LibraryTerm::Kind::Constant) continue;
        for (std::size_t j = 0; j < d; ++j) gz[r * d + j] += g * eval_term_partial(t, zr, j);
      }
    }
  });
}

}  // namespace ops

}  // namespace sshred
