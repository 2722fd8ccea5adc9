#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace kgtrust {

using Matrix = Eigen::MatrixXd;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records matrix-valued operations in creation order. Ids are therefore a
/// topological order and backward() walks them once, newest first. A tape is
/// single-use: a second backward() or recording after backward() throws.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var variable(Matrix value) { return record(std::move(value), true, {}); }
  Var constant(Matrix value) { return record(std::move(value), false, {}); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backprop.
  void backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Zero matrix of the node's shape when nothing reached it.
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Used by op implementations.
  Var record(Matrix value, bool requires_grad, Backprop backprop);
  void accumulate(std::size_t id, const Matrix& g);
  Matrix& grad_buffer(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
  mutable Matrix zero_;
};

inline const Matrix& Var::value() const { return tape->value(id); }
inline const Matrix& Var::grad() const { return tape->grad(id); }

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a (n x d) + row (1 x d) broadcast over rows.
Var add_row(Var a, Var row);
Var sum(Var a);

Var concat_cols(Var a, Var b);
Var vstack(Var top, Var bottom);
Var row_block(Var a, Eigen::Index begin, Eigen::Index count);
Var gather_rows(Var a, const std::vector<int>& rows);

/// Constant sparse matrix times a.
Var spmm(const SparseRowMatrix& s, Var a);
/// Rows of a multiplied by a 0/1 mask.
Var mask_rows(Var a, const Eigen::VectorXd& mask);

Var leaky_relu(Var a, double slope);
Var elu(Var a);
Var sigmoid(Var a);
/// Row-wise softmax restricted to entries with mask != 0. Masked entries are 0.
Var masked_softmax_rows(Var a, const Matrix& mask);

/// For every stored entry e = (i, j) of `structure` (row-major order):
///   out_e = alpha(i, type[j]) * (u_i + v_j)
/// alpha is n x T, u and v are n x 1; out is nnz x 1.
Var edge_logits(Var alpha, Var u, Var v, const SparseRowMatrix& structure,
                const std::vector<int>& type);
/// Softmax of edge values within each row of `structure`.
Var segment_softmax(Var edges, const SparseRowMatrix& structure);
/// out_i = sum_e w_e * m_j over entries e = (i, j); w is nnz x 1.
Var edge_spmm(Var weights, Var m, const SparseRowMatrix& structure);

/// sigmoid(raw) * a + (1 - sigmoid(raw)) * b with raw a 1 x d row.
Var gated_fuse(Var a, Var b, Var raw_gate);
/// Mean of -log softmax(logits)[label] over rows.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
/// Inverted dropout; identity when rate == 0.
Var dropout(Var a, double rate, std::mt19937_64& rng);

}  // namespace ad
}  // namespace kgtrust
