#pragma once

// Evaluation-representation polynomials: a polynomial is carried as its
// values and gradients on a fixed point set, plus the tree of products and
// linear combinations it was built from. The tree lets the polynomial be
// replayed on new points or expanded symbolically (see coefficients.hpp).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "mavik/errors.hpp"

namespace mavik {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// |X| points in R^n stored row-wise, with a free-form log of the transforms
/// that produced them.
class PointSet {
 public:
  PointSet() = default;

  explicit PointSet(Matrix points, std::vector<std::string> provenance = {})
      : points_(std::move(points)), provenance_(std::move(provenance)) {
    detail::require(points_.rows() >= 1, "PointSet: at least one point required");
    detail::require(points_.cols() >= 1, "PointSet: dimension must be >= 1");
    detail::require(points_.allFinite(), "PointSet: all coordinates must be finite");
  }

  const Matrix& points() const { return points_; }
  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const std::vector<std::string>& provenance() const { return provenance_; }

  /// New point set with `step` appended to the transform log.
  PointSet derive(Matrix points, std::string step) const {
    auto log = provenance_;
    log.push_back(std::move(step));
    return PointSet(std::move(points), std::move(log));
  }

  PointSet scaled(double alpha) const {
    return derive(alpha * points_, "scale(" + std::to_string(alpha) + ")");
  }

  PointSet translated(const Vector& shift) const {
    Matrix p = points_.rowwise() - shift.transpose();
    return derive(std::move(p), "translate");
  }

 private:
  Matrix points_;
  std::vector<std::string> provenance_;
};

struct ProvNode;
using NodePtr = std::shared_ptr<const ProvNode>;

struct ConstantOp {
  double value;
};
struct VariableOp {
  int index;
};
struct ProductOp {
  NodePtr left;
  NodePtr right;
};
struct LinCombOp {
  std::vector<NodePtr> children;
  std::vector<double> weights;
};

/// One step of a polynomial's construction. Nodes are immutable and shared,
/// so a basis forms a DAG rooted at its members.
struct ProvNode {
  std::variant<ConstantOp, VariableOp, ProductOp, LinCombOp> op;
  int degree = 0;

  static NodePtr constant(double value) {
    return std::make_shared<const ProvNode>(ProvNode{ConstantOp{value}, 0});
  }
  static NodePtr variable(int index) {
    return std::make_shared<const ProvNode>(ProvNode{VariableOp{index}, 1});
  }
  static NodePtr product(NodePtr left, NodePtr right) {
    const int deg = left->degree + right->degree;
    return std::make_shared<const ProvNode>(ProvNode{ProductOp{std::move(left), std::move(right)}, deg});
  }
  static NodePtr lincomb(std::vector<NodePtr> children, std::vector<double> weights) {
    detail::require(children.size() == weights.size(), "lincomb: children/weights size mismatch");
    int deg = 0;
    for (std::size_t i = 0; i < children.size(); ++i) {
      detail::require(std::isfinite(weights[i]), "lincomb: non-finite weight");
      if (weights[i] != 0.0) deg = std::max(deg, children[i]->degree);
    }
    return std::make_shared<const ProvNode>(ProvNode{LinCombOp{std::move(children), std::move(weights)}, deg});
  }
};

/// A polynomial h in evaluation representation: h(X), grad h(X) and the
/// provenance node that reproduces both on any point set.
class Poly {
 public:
  Poly(NodePtr node, Vector eval, Matrix grad)
      : node_(std::move(node)), eval_(std::move(eval)), grad_(std::move(grad)) {
    detail::require(grad_.rows() == eval_.size(), "Poly: eval/grad point count mismatch");
  }

  static Poly constant(const PointSet& X, double value) {
    return Poly(ProvNode::constant(value), Vector::Constant(X.size(), value), Matrix::Zero(X.size(), X.dim()));
  }

  static Poly variable(const PointSet& X, int k) {
    detail::require(k >= 0 && k < X.dim(), "Poly::variable: index out of range");
    Matrix grad = Matrix::Zero(X.size(), X.dim());
    grad.col(k).setOnes();
    return Poly(ProvNode::variable(k), X.points().col(k), std::move(grad));
  }

  int degree() const { return node_->degree; }
  const Vector& eval() const { return eval_; }
  const Matrix& grad() const { return grad_; }
  const NodePtr& node() const { return node_; }
  Index num_points() const { return eval_.size(); }
  Index dim() const { return grad_.cols(); }

  /// Euclidean norm of vec(grad h(X)).
  double gradient_norm() const { return grad_.norm(); }

 private:
  NodePtr node_;
  Vector eval_;
  Matrix grad_;
};

namespace detail {

inline void require_same_points(const Poly& a, const Poly& b) {
  if (a.num_points() != b.num_points() || a.dim() != b.dim())
    throw ContractViolation("polynomials built on different point sets");
}

}  // namespace detail

/// |X| x |H| evaluation matrix H(X).
inline Matrix eval_matrix(std::span<const Poly> H) {
  if (H.empty()) return Matrix();
  Matrix out(H.front().num_points(), static_cast<Index>(H.size()));
  for (std::size_t j = 0; j < H.size(); ++j) {
    detail::require_same_points(H.front(), H[j]);
    out.col(static_cast<Index>(j)) = H[j].eval();
  }
  return out;
}

/// (|X| n) x |H| matrix whose columns are vec(grad h(X)) (column-major vec).
inline Matrix grad_stack(std::span<const Poly> H) {
  if (H.empty()) return Matrix();
  const Index rows = H.front().num_points() * H.front().dim();
  Matrix out(rows, static_cast<Index>(H.size()));
  for (std::size_t j = 0; j < H.size(); ++j) {
    detail::require_same_points(H.front(), H[j]);
    out.col(static_cast<Index>(j)) = H[j].grad().reshaped();
  }
  return out;
}

/// Sum_j w_j h_j with value, gradient and provenance combined linearly.
inline Poly linear_combine(std::span<const Poly> H, const Vector& w) {
  detail::require(!H.empty(), "linear_combine: empty polynomial set");
  detail::require(static_cast<Index>(H.size()) == w.size(), "linear_combine: weight length mismatch");
  const auto& first = H.front();
  Vector eval = Vector::Zero(first.num_points());
  Matrix grad = Matrix::Zero(first.num_points(), first.dim());
  std::vector<NodePtr> children;
  std::vector<double> weights;
  children.reserve(H.size());
  weights.reserve(H.size());
  for (std::size_t j = 0; j < H.size(); ++j) {
    detail::require_same_points(first, H[j]);
    const double wj = w(static_cast<Index>(j));
    eval.noalias() += wj * H[j].eval();
    grad.noalias() += wj * H[j].grad();
    children.push_back(H[j].node());
    weights.push_back(wj);
  }
  return Poly(ProvNode::lincomb(std::move(children), std::move(weights)), std::move(eval), std::move(grad));
}

/// Columns of W applied to H: {H w_1, ..., H w_s}. Evaluation and gradient
/// data are combined with two matrix products instead of per-column loops.
inline std::vector<Poly> linear_combine_all(std::span<const Poly> H, const Matrix& W) {
  detail::require(static_cast<Index>(H.size()) == W.rows(), "linear_combine_all: weight rows mismatch");
  std::vector<Poly> out;
  if (W.cols() == 0) return out;
  detail::require(!H.empty(), "linear_combine_all: empty polynomial set");
  const Index npts = H.front().num_points();
  const Index dim = H.front().dim();
  const Matrix evals = eval_matrix(H) * W;
  const Matrix grads = grad_stack(H) * W;
  std::vector<NodePtr> children;
  children.reserve(H.size());
  for (const auto& h : H) children.push_back(h.node());
  out.reserve(static_cast<std::size_t>(W.cols()));
  for (Index c = 0; c < W.cols(); ++c) {
    std::vector<double> weights(W.col(c).data(), W.col(c).data() + W.rows());
    Matrix g = grads.col(c).reshaped(npts, dim);
    out.emplace_back(ProvNode::lincomb(children, std::move(weights)), evals.col(c), std::move(g));
  }
  return out;
}

/// Product p*q where p has degree 1. The gradient follows the product rule
/// on stored data: grad(pq)(x) = q(x) grad p(x) + p(x) grad q(x).
inline Poly multiply(const Poly& p, const Poly& q) {
  detail::require(p.degree() == 1, "multiply: left factor must have degree 1");
  detail::require_same_points(p, q);
  Vector eval = p.eval().cwiseProduct(q.eval());
  Matrix grad = p.grad().array().colwise() * q.eval().array() + q.grad().array().colwise() * p.eval().array();
  return Poly(ProvNode::product(p.node(), q.node()), std::move(eval), std::move(grad));
}

/// Re-evaluates provenance trees on a new point set. Results are memoized
/// per node, so replaying a whole basis visits each shared node once.
class Replayer {
 public:
  struct Value {
    Vector eval;
    Matrix grad;
  };

  explicit Replayer(const PointSet& X, bool with_gradient = true) : X_(X), with_grad_(with_gradient) {}

  const Value& operator()(const NodePtr& node) {
    if (auto it = memo_.find(node.get()); it != memo_.end()) return it->second;
    Value v = compute(*node);
    return memo_.emplace(node.get(), std::move(v)).first->second;
  }

  Poly poly(const NodePtr& node) {
    const auto& v = (*this)(node);
    Matrix grad = with_grad_ ? v.grad : Matrix::Zero(X_.size(), X_.dim());
    return Poly(node, v.eval, std::move(grad));
  }

 private:
  Value compute(const ProvNode& node) {
    const Index npts = X_.size();
    const Index dim = X_.dim();
    const Index grows = with_grad_ ? npts : 0;
    return std::visit(
        [&](const auto& op) -> Value {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, ConstantOp>) {
            return {Vector::Constant(npts, op.value), Matrix::Zero(grows, dim)};
          } else if constexpr (std::is_same_v<T, VariableOp>) {
            if (op.index >= dim) throw ContractViolation("replay: variable index exceeds point dimension");
            Matrix g = Matrix::Zero(grows, dim);
            if (with_grad_) g.col(op.index).setOnes();
            return {X_.points().col(op.index), std::move(g)};
          } else if constexpr (std::is_same_v<T, ProductOp>) {
            const Value& a = (*this)(op.left);
            const Value& b = (*this)(op.right);
            Value out{a.eval.cwiseProduct(b.eval), Matrix()};
            if (with_grad_)
              out.grad = a.grad.array().colwise() * b.eval.array() + b.grad.array().colwise() * a.eval.array();
            else
              out.grad = Matrix::Zero(0, dim);
            return out;
          } else {
            Value out{Vector::Zero(npts), Matrix::Zero(grows, dim)};
            for (std::size_t j = 0; j < op.children.size(); ++j) {
              const double w = op.weights[j];
              if (w == 0.0) continue;
              const Value& c = (*this)(op.children[j]);
              out.eval.noalias() += w * c.eval;
              if (with_grad_) out.grad.noalias() += w * c.grad;
            }
            return out;
          }
        },
        node.op);
  }

  const PointSet& X_;
  bool with_grad_;
  std::unordered_map<const ProvNode*, Value> memo_;
};

}  // namespace mavik
