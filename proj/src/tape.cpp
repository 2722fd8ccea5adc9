#include "kgtrust/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kgtrust {

Var Tape::record(Matrix value, bool requires_grad, Backprop backprop) {
  if (consumed_) throw std::logic_error("cannot record on a tape after backward()");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  return node.grad;
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.has_grad) return node.grad;
  zero_ = Matrix::Zero(node.value.rows(), node.value.cols());
  return zero_;
}

void Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("tape already consumed by a previous backward()");
  if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
  const Node& root = nodes_[loss.id];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss");
  }
  consumed_ = true;
  if (!root.requires_grad) return;
  accumulate(loss.id, Matrix::Ones(1, 1));
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.has_grad && node.backprop) node.backprop(*this, id);
  }
}

namespace ad {

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands recorded on different tapes");
  return *a.tape;
}

bool needs(const Tape& t, std::initializer_list<Var> vars) {
  for (Var v : vars) {
    if (t.requires_grad(v.id)) return true;
  }
  return false;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  return t.record(a.value() * b.value(), needs(t, {a, b}),
                  [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.record(a.value().transpose(), needs(t, {a}), [ia = a.id](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self).transpose());
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), needs(t, {a, b}),
                  [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                    tp.accumulate(ia, tp.grad(self));
                    tp.accumulate(ib, tp.grad(self));
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), needs(t, {a, b}),
                  [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                    tp.accumulate(ia, tp.grad(self));
                    tp.accumulate(ib, -tp.grad(self));
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "hadamard");
  return t.record(a.value().cwiseProduct(b.value()), needs(t, {a, b}),
                  [ia = a.id, ib = b.id](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.record(a.value() * s, needs(t, {a}), [ia = a.id, s](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self) * s);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), needs(t, {a, row}),
                  [ia = a.id, ir = row.id](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    tp.accumulate(ia, g);
                    if (tp.requires_grad(ir)) tp.accumulate(ir, g.colwise().sum());
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), needs(t, {a}), [ia = a.id](Tape& tp, std::size_t self) {
    const Matrix& v = tp.value(ia);
    tp.accumulate(ia, Matrix::Constant(v.rows(), v.cols(), tp.grad(self)(0, 0)));
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return t.record(std::move(out), needs(t, {a, b}),
                  [ia = a.id, ib = b.id, ca, cb](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, g.rightCols(cb));
                  });
}

Var vstack(Var top, Var bottom) {
  Tape& t = tape_of(top, bottom);
  if (top.cols() != bottom.cols()) throw std::invalid_argument("vstack: column counts differ");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top.value(), bottom.value();
  const Eigen::Index rt = top.rows();
  const Eigen::Index rb = bottom.rows();
  return t.record(std::move(out), needs(t, {top, bottom}),
                  [it = top.id, ib = bottom.id, rt, rb](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(it)) tp.accumulate(it, g.topRows(rt));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, g.bottomRows(rb));
                  });
}

Var row_block(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = *a.tape;
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw std::invalid_argument("row_block: range outside matrix");
  }
  return t.record(a.value().middleRows(begin, count), needs(t, {a}),
                  [ia = a.id, begin, count](Tape& tp, std::size_t self) {
                    tp.grad_buffer(ia).middleRows(begin, count) += tp.grad(self);
                  });
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = *a.tape;
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) throw std::invalid_argument("gather_rows: bad index");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  }
  return t.record(std::move(out), needs(t, {a}), [ia = a.id, rows](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& dst = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) dst.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var spmm(const SparseRowMatrix& s, Var a) {
  Tape& t = *a.tape;
  if (s.cols() != a.rows()) throw std::invalid_argument("spmm: inner dimensions differ");
  return t.record(s * a.value(), needs(t, {a}), [ia = a.id, &s](Tape& tp, std::size_t self) {
    tp.accumulate(ia, s.transpose() * tp.grad(self));
  });
}

Var mask_rows(Var a, const Eigen::VectorXd& mask) {
  Tape& t = *a.tape;
  if (mask.size() != a.rows()) throw std::invalid_argument("mask_rows: mask length differs");
  return t.record(mask.asDiagonal() * a.value(), needs(t, {a}),
                  [ia = a.id, mask](Tape& tp, std::size_t self) {
                    tp.accumulate(ia, mask.asDiagonal() * tp.grad(self));
                  });
}

Var leaky_relu(Var a, double slope) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
  return t.record(std::move(out), needs(t, {a}), [ia = a.id, slope](Tape& tp, std::size_t self) {
    Matrix d = tp.value(ia).unaryExpr([slope](double x) { return x > 0 ? 1.0 : slope; });
    tp.accumulate(ia, tp.grad(self).cwiseProduct(d));
  });
}

Var elu(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); });
  return t.record(std::move(out), needs(t, {a}), [ia = a.id](Tape& tp, std::size_t self) {
    Matrix d = tp.value(ia).unaryExpr([](double x) { return x > 0 ? 1.0 : std::exp(x); });
    tp.accumulate(ia, tp.grad(self).cwiseProduct(d));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  return t.record(std::move(out), needs(t, {a}), [ia = a.id](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    tp.accumulate(ia, tp.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var masked_softmax_rows(Var a, const Matrix& mask) {
  Tape& t = *a.tape;
  check_same_shape(a.value(), mask, "masked_softmax_rows");
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(i, c) != 0.0) hi = std::max(hi, x(i, c));
    }
    if (!std::isfinite(hi)) continue;
    double z = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(i, c) != 0.0) z += (out(i, c) = std::exp(x(i, c) - hi));
    }
    out.row(i) /= z;
  }
  return t.record(std::move(out), needs(t, {a}), [ia = a.id](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double inner = y.row(i).dot(g.row(i));
      dx.row(i) = y.row(i).cwiseProduct((g.row(i).array() - inner).matrix());
    }
    tp.accumulate(ia, dx);
  });
}

Var edge_logits(Var alpha, Var u, Var v, const SparseRowMatrix& structure,
                const std::vector<int>& type) {
  Tape& t = tape_of(alpha, u);
  tape_of(u, v);
  const Eigen::Index n = structure.rows();
  if (alpha.rows() != n || u.rows() != n || v.rows() != n || u.cols() != 1 || v.cols() != 1 ||
      static_cast<Eigen::Index>(type.size()) != n) {
    throw std::invalid_argument("edge_logits: shape mismatch");
  }
  const int* outer = structure.outerIndexPtr();
  const int* inner = structure.innerIndexPtr();
  const Matrix& al = alpha.value();
  const Matrix& uv = u.value();
  const Matrix& vv = v.value();
  Matrix out(structure.nonZeros(), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int e = outer[i]; e < outer[i + 1]; ++e) {
      const int j = inner[e];
      out(e, 0) = al(i, type[j]) * (uv(i, 0) + vv(j, 0));
    }
  }
  return t.record(
      std::move(out), needs(t, {alpha, u, v}),
      [ia = alpha.id, iu = u.id, iv = v.id, &structure, &type](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& al = tp.value(ia);
        const Matrix& uv = tp.value(iu);
        const Matrix& vv = tp.value(iv);
        Matrix ga = Matrix::Zero(al.rows(), al.cols());
        Matrix gu = Matrix::Zero(uv.rows(), 1);
        Matrix gv = Matrix::Zero(vv.rows(), 1);
        const int* outer = structure.outerIndexPtr();
        const int* inner = structure.innerIndexPtr();
        for (Eigen::Index i = 0; i < structure.rows(); ++i) {
          for (int e = outer[i]; e < outer[i + 1]; ++e) {
            const int j = inner[e];
            const double a = al(i, type[j]);
            ga(i, type[j]) += g(e, 0) * (uv(i, 0) + vv(j, 0));
            gu(i, 0) += g(e, 0) * a;
            gv(j, 0) += g(e, 0) * a;
          }
        }
        tp.accumulate(ia, ga);
        tp.accumulate(iu, gu);
        tp.accumulate(iv, gv);
      });
}

Var segment_softmax(Var edges, const SparseRowMatrix& structure) {
  Tape& t = *edges.tape;
  if (edges.rows() != structure.nonZeros() || edges.cols() != 1) {
    throw std::invalid_argument("segment_softmax: expects one value per stored entry");
  }
  const int* outer = structure.outerIndexPtr();
  const Matrix& x = edges.value();
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < structure.rows(); ++i) {
    if (outer[i] == outer[i + 1]) continue;
    double hi = -std::numeric_limits<double>::infinity();
    for (int e = outer[i]; e < outer[i + 1]; ++e) hi = std::max(hi, x(e, 0));
    double z = 0.0;
    for (int e = outer[i]; e < outer[i + 1]; ++e) z += (out(e, 0) = std::exp(x(e, 0) - hi));
    for (int e = outer[i]; e < outer[i + 1]; ++e) out(e, 0) /= z;
  }
  return t.record(std::move(out), needs(t, {edges}),
                  [ie = edges.id, &structure](Tape& tp, std::size_t self) {
                    const Matrix& y = tp.value(self);
                    const Matrix& g = tp.grad(self);
                    const int* outer = structure.outerIndexPtr();
                    Matrix dx(y.rows(), 1);
                    for (Eigen::Index i = 0; i < structure.rows(); ++i) {
                      double inner = 0.0;
                      for (int e = outer[i]; e < outer[i + 1]; ++e) inner += y(e, 0) * g(e, 0);
                      for (int e = outer[i]; e < outer[i + 1]; ++e) dx(e, 0) = y(e, 0) * (g(e, 0) - inner);
                    }
                    tp.accumulate(ie, dx);
                  });
}

Var edge_spmm(Var weights, Var m, const SparseRowMatrix& structure) {
  Tape& t = tape_of(weights, m);
  if (weights.rows() != structure.nonZeros() || weights.cols() != 1 || m.rows() != structure.cols()) {
    throw std::invalid_argument("edge_spmm: shape mismatch");
  }
  const int* outer = structure.outerIndexPtr();
  const int* inner = structure.innerIndexPtr();
  const Matrix& w = weights.value();
  const Matrix& mv = m.value();
  Matrix out = Matrix::Zero(structure.rows(), mv.cols());
  for (Eigen::Index i = 0; i < structure.rows(); ++i) {
    for (int e = outer[i]; e < outer[i + 1]; ++e) out.row(i) += w(e, 0) * mv.row(inner[e]);
  }
  return t.record(std::move(out), needs(t, {weights, m}),
                  [iw = weights.id, im = m.id, &structure](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    const Matrix& w = tp.value(iw);
                    const Matrix& mv = tp.value(im);
                    const int* outer = structure.outerIndexPtr();
                    const int* inner = structure.innerIndexPtr();
                    const bool want_w = tp.requires_grad(iw);
                    const bool want_m = tp.requires_grad(im);
                    Matrix gw = want_w ? Matrix(w.rows(), 1) : Matrix();
                    Matrix gm = want_m ? Matrix::Zero(mv.rows(), mv.cols()) : Matrix();
                    for (Eigen::Index i = 0; i < structure.rows(); ++i) {
                      for (int e = outer[i]; e < outer[i + 1]; ++e) {
                        const int j = inner[e];
                        if (want_w) gw(e, 0) = g.row(i).dot(mv.row(j));
                        if (want_m) gm.row(j) += w(e, 0) * g.row(i);
                      }
                    }
                    if (want_w) tp.accumulate(iw, gw);
                    if (want_m) tp.accumulate(im, gm);
                  });
}

Var gated_fuse(Var a, Var b, Var raw_gate) {
  Tape& t = tape_of(a, b);
  tape_of(b, raw_gate);
  check_same_shape(a.value(), b.value(), "gated_fuse");
  if (raw_gate.rows() != 1 || raw_gate.cols() != a.cols()) {
    throw std::invalid_argument("gated_fuse: gate must be a 1 x d row");
  }
  const Eigen::RowVectorXd gate =
      raw_gate.value().row(0).unaryExpr([](double x) { return stable_sigmoid(x); });
  Matrix out = a.value().array().rowwise() * gate.array();
  out.array() += b.value().array().rowwise() * (1.0 - gate.array());
  return t.record(std::move(out), needs(t, {a, b, raw_gate}),
                  [ia = a.id, ib = b.id, ig = raw_gate.id, gate](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) {
                      tp.accumulate(ia, (g.array().rowwise() * gate.array()).matrix());
                    }
                    if (tp.requires_grad(ib)) {
                      tp.accumulate(ib, (g.array().rowwise() * (1.0 - gate.array())).matrix());
                    }
                    if (tp.requires_grad(ig)) {
                      Eigen::RowVectorXd diff =
                          (g.array() * (tp.value(ia) - tp.value(ib)).array()).colwise().sum();
                      tp.accumulate(ig, (diff.array() * gate.array() * (1.0 - gate.array())).matrix());
                    }
                  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  Tape& t = *logits.tape;
  const Matrix& x = logits.value();
  if (x.rows() == 0 || static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: need one label per row");
  }
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= x.cols()) throw std::invalid_argument("label out of range");
    const double hi = x.row(i).maxCoeff();
    const double z = (x.row(i).array() - hi).exp().sum();
    probs.row(i) = (x.row(i).array() - hi).exp() / z;
    loss -= x(i, label) - hi - std::log(z);
  }
  const double n = static_cast<double>(x.rows());
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  return t.record(std::move(out), needs(t, {logits}),
                  [il = logits.id, probs = std::move(probs), labels, n](Tape& tp, std::size_t self) {
                    Matrix d = probs;
                    for (std::size_t i = 0; i < labels.size(); ++i) {
                      d(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
                    }
                    tp.accumulate(il, d * (tp.grad(self)(0, 0) / n));
                  });
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
  Tape& t = *a.tape;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return t.record(std::move(out), needs(t, {a}), [ia = a.id, mask](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self).cwiseProduct(mask));
  });
}

}  // namespace ad
}  // namespace kgtrust
