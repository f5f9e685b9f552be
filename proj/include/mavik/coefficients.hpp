#pragma once

// Symbolic expansion of provenance trees into monomial coefficients. Used
// for coefficient normalization, for the degree-wise rescaling transform and
// as an independent check on the evaluation representation.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "mavik/core.hpp"
#include "mavik/errors.hpp"

namespace mavik {

using Exponent = std::vector<int>;

inline int total_degree(const Exponent& e) {
  int d = 0;
  for (int v : e) d += v;
  return d;
}

/// Storage order for monomials: by total degree, then lexicographically with
/// larger leading exponents first (x^2 < xy < y^2 in iteration order).
struct GradedLexLess {
  bool operator()(const Exponent& a, const Exponent& b) const {
    const int da = total_degree(a);
    const int db = total_degree(b);
    if (da != db) return da < db;
    return b < a;
  }
};

inline constexpr double kPruneThreshold = 1e-14;
inline constexpr std::size_t kDefaultTermCap = 1'000'000;

/// Sparse coefficient vector of a polynomial in n indeterminates.
class CoeffVec {
 public:
  using Terms = std::map<Exponent, double, GradedLexLess>;

  CoeffVec() = default;
  explicit CoeffVec(int n) : n_(n) {}

  static CoeffVec constant(int n, double value) {
    CoeffVec c(n);
    c.add_term(Exponent(static_cast<std::size_t>(n), 0), value);
    c.prune();
    return c;
  }

  static CoeffVec variable(int n, int k) {
    CoeffVec c(n);
    Exponent e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(k)] = 1;
    c.add_term(std::move(e), 1.0);
    return c;
  }

  int num_vars() const { return n_; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  double coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
    return d;
  }

  void add_term(Exponent e, double c) {
    detail::require(static_cast<int>(e.size()) == n_, "CoeffVec: exponent length mismatch");
    terms_[std::move(e)] += c;
  }

  /// this += w * other (no pruning; call prune() when done accumulating).
  void add_scaled(const CoeffVec& other, double w) {
    detail::require(other.n_ == n_, "CoeffVec: variable count mismatch");
    if (w == 0.0) return;
    for (const auto& [e, c] : other.terms_) terms_[e] += w * c;
  }

  void prune(double threshold = kPruneThreshold) {
    std::erase_if(terms_, [&](const auto& kv) { return std::abs(kv.second) < threshold; });
  }

  CoeffVec times(const CoeffVec& other) const {
    detail::require(other.n_ == n_, "CoeffVec: variable count mismatch");
    CoeffVec out(n_);
    Exponent e(static_cast<std::size_t>(n_));
    for (const auto& [ea, ca] : terms_) {
      for (const auto& [eb, cb] : other.terms_) {
        for (std::size_t k = 0; k < e.size(); ++k) e[k] = ea[k] + eb[k];
        out.terms_[e] += ca * cb;
      }
    }
    out.prune();
    return out;
  }

  double dot(const CoeffVec& other) const {
    const auto& small = size() <= other.size() ? terms_ : other.terms_;
    const auto& large = size() <= other.size() ? other.terms_ : terms_;
    double s = 0.0;
    for (const auto& [e, c] : small) {
      if (auto it = large.find(e); it != large.end()) s += c * it->second;
    }
    return s;
  }

  double norm() const { return std::sqrt(dot(*this)); }

  /// Values at each row of `points`.
  Vector evaluate(const Matrix& points) const {
    detail::require(points.cols() == n_, "CoeffVec::evaluate: dimension mismatch");
    Vector out = Vector::Zero(points.rows());
    for (const auto& [e, c] : terms_) {
      Vector mono = Vector::Constant(points.rows(), c);
      for (int k = 0; k < n_; ++k) {
        for (int p = 0; p < e[static_cast<std::size_t>(k)]; ++p) mono.array() *= points.col(k).array();
      }
      out += mono;
    }
    return out;
  }

  /// Gradient rows at each point (|X| x n).
  Matrix gradient(const Matrix& points) const {
    detail::require(points.cols() == n_, "CoeffVec::gradient: dimension mismatch");
    Matrix out = Matrix::Zero(points.rows(), n_);
    for (const auto& [e, c] : terms_) {
      for (int j = 0; j < n_; ++j) {
        const int ej = e[static_cast<std::size_t>(j)];
        if (ej == 0) continue;
        Vector mono = Vector::Constant(points.rows(), c * ej);
        for (int k = 0; k < n_; ++k) {
          const int pk = e[static_cast<std::size_t>(k)] - (k == j ? 1 : 0);
          for (int p = 0; p < pk; ++p) mono.array() *= points.col(k).array();
        }
        out.col(j) += mono;
      }
    }
    return out;
  }

 private:
  int n_ = 0;
  Terms terms_;
};

inline void to_json(nlohmann::json& j, const CoeffVec& c) {
  j = nlohmann::json::array();
  for (const auto& [e, coef] : c.terms()) j.push_back({{"exps", e}, {"coef", coef}});
}

/// Symbolic expansion with per-node memoization. One expander is meant to be
/// reused across a fit so shared subtrees are expanded once.
class Expander {
 public:
  Expander(int num_vars, std::size_t term_cap = kDefaultTermCap) : n_(num_vars), cap_(term_cap) {}

  const CoeffVec& operator()(const NodePtr& node) {
    if (auto it = memo_.find(node.get()); it != memo_.end()) return *it->second;
    auto value = std::make_unique<CoeffVec>(compute(*node));
    if (value->size() > cap_) throw ResourceError("coefficient expansion exceeds the configured term cap");
    // Keep the node alive while its address is a cache key.
    keepalive_.push_back(node);
    return *memo_.emplace(node.get(), std::move(value)).first->second;
  }

  int num_vars() const { return n_; }

 private:
  CoeffVec compute(const ProvNode& node) {
    return std::visit(
        [&](const auto& op) -> CoeffVec {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, ConstantOp>) {
            return CoeffVec::constant(n_, op.value);
          } else if constexpr (std::is_same_v<T, VariableOp>) {
            detail::require(op.index < n_, "expand: variable index out of range");
            return CoeffVec::variable(n_, op.index);
          } else if constexpr (std::is_same_v<T, ProductOp>) {
            const CoeffVec& a = (*this)(op.left);
            const CoeffVec& b = (*this)(op.right);
            if (a.size() * b.size() > cap_ * 4)
              throw ResourceError("coefficient expansion exceeds the configured term cap");
            return a.times(b);
          } else {
            CoeffVec out(n_);
            for (std::size_t j = 0; j < op.children.size(); ++j) {
              if (op.weights[j] == 0.0) continue;
              out.add_scaled((*this)(op.children[j]), op.weights[j]);
              if (out.size() > cap_) throw ResourceError("coefficient expansion exceeds the configured term cap");
            }
            out.prune();
            return out;
          }
        },
        node.op);
  }

  int n_;
  std::size_t cap_;
  std::unordered_map<const ProvNode*, std::unique_ptr<CoeffVec>> memo_;
  std::vector<NodePtr> keepalive_;
};

inline CoeffVec expand(const Poly& p, std::size_t term_cap = kDefaultTermCap) {
  Expander ex(static_cast<int>(p.dim()), term_cap);
  return ex(p.node());
}

/// Coefficient vectors of C as columns of a dense matrix over the union of
/// their monomials (rows in graded-lex order). K^T K is the coefficient Gram.
inline Matrix coefficient_matrix(std::span<const Poly> C, Expander& ex) {
  std::map<Exponent, Index, GradedLexLess> rows;
  std::vector<const CoeffVec*> cols;
  cols.reserve(C.size());
  for (const auto& c : C) {
    cols.push_back(&ex(c.node()));
    for (const auto& [e, v] : cols.back()->terms()) rows.emplace(e, 0);
  }
  Index r = 0;
  for (auto& [e, idx] : rows) idx = r++;
  Matrix K = Matrix::Zero(r, static_cast<Index>(C.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (const auto& [e, v] : cols[j]->terms()) K(rows.at(e), static_cast<Index>(j)) = v;
  return K;
}

/// Gram of coefficient vectors: entry (i,j) = <coef(c_i), coef(c_j)>.
inline Matrix coeff_gram(std::span<const Poly> C, Expander& ex) {
  const Matrix K = coefficient_matrix(C, ex);
  return K.transpose() * K;
}

inline Matrix coeff_gram(std::span<const Poly> C, std::size_t term_cap = kDefaultTermCap) {
  if (C.empty()) return Matrix();
  Expander ex(static_cast<int>(C.front().dim()), term_cap);
  return coeff_gram(C, ex);
}

/// Scales each monomial of total degree tau by alpha^(t - tau).
inline CoeffVec degreewise_rescale(const CoeffVec& c, double alpha, int t) {
  if (alpha == 0.0) throw ContractViolation("degreewise_rescale: alpha must be nonzero");
  CoeffVec out(c.num_vars());
  for (const auto& [e, v] : c.terms()) out.add_term(e, v * std::pow(alpha, t - total_degree(e)));
  out.prune();
  return out;
}

}  // namespace mavik
