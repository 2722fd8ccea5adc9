#include "kgtrust/conv.hpp"

#include <cmath>
#include <stdexcept>

namespace kgtrust {

namespace {

double leaky(double x) { return x > 0 ? x : kAttentionSlope * x; }

double dot_concat(const Matrix& vec2d, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index d = a.size();
  return vec2d.col(0).head(d).dot(a) + vec2d.col(0).tail(d).dot(b);
}

}  // namespace

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

LayerParams init_layer(int in_dim, int out_dim, std::mt19937_64& rng) {
  LayerParams p;
  for (int t = 0; t < kNumNodeTypes; ++t) p.weight[t] = glorot(in_dim, out_dim, rng);
  for (int t = 0; t < kNumNodeTypes; ++t) p.type_attention[t] = glorot(2 * in_dim, 1, rng);
  p.node_attention = glorot(2 * in_dim, 1, rng);
  return p;
}

RoleEncoder init_encoder(Role role, int dim, int num_layers, std::mt19937_64& rng) {
  RoleEncoder enc;
  enc.role = role;
  for (int l = 0; l < num_layers; ++l) enc.layers.push_back(init_layer(dim, dim, rng));
  return enc;
}

Eigen::VectorXd type_embedding(NodeId target, NodeType type, const GraphView& view,
                               const Matrix& H) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(H.cols());
  for (SparseRowMatrix::InnerIterator it(view.normalized_adjacency, target); it; ++it) {
    if (view.node_type[static_cast<std::size_t>(it.col())] == static_cast<int>(type)) {
      out += it.value() * H.row(it.col()).transpose();
    }
  }
  return out;
}

std::map<NodeType, double> type_attention(const Eigen::VectorXd& h_target,
                                          const std::map<NodeType, Eigen::VectorXd>& type_embeddings,
                                          const LayerParams& params) {
  if (type_embeddings.empty()) throw std::invalid_argument("type_attention needs at least one type");
  std::map<NodeType, double> logits;
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [type, h] : type_embeddings) {
    double s = leaky(dot_concat(params.type_attention[static_cast<int>(type)], h_target, h));
    logits[type] = s;
    hi = std::max(hi, s);
  }
  double z = 0.0;
  for (auto& [type, s] : logits) z += (s = std::exp(s - hi));
  for (auto& [type, s] : logits) s /= z;
  return logits;
}

std::vector<std::pair<NodeId, double>> node_attention(
    NodeId target, const std::vector<NodeId>& neighbors, const Matrix& H,
    const std::vector<int>& node_type, const std::map<NodeType, double>& type_weights,
    const LayerParams& params) {
  if (neighbors.empty()) return {{target, 1.0}};
  const Eigen::VectorXd hi_vec = H.row(target).transpose();
  std::vector<std::pair<NodeId, double>> out;
  double hi = -std::numeric_limits<double>::infinity();
  for (NodeId j : neighbors) {
    const auto type = static_cast<NodeType>(node_type[static_cast<std::size_t>(j)]);
    auto it = type_weights.find(type);
    const double alpha = it == type_weights.end() ? 0.0 : it->second;
    const double s =
        leaky(alpha * dot_concat(params.node_attention, hi_vec, H.row(j).transpose()));
    out.emplace_back(j, s);
    hi = std::max(hi, s);
  }
  double z = 0.0;
  for (auto& [j, s] : out) z += (s = std::exp(s - hi));
  for (auto& [j, s] : out) s /= z;
  return out;
}

Eigen::VectorXd fuse(const Eigen::VectorXd& h_trustor, const Eigen::VectorXd& h_trustee,
                     const GateParams& gate) {
  if (h_trustor.size() != h_trustee.size() || gate.raw_gate.size() != h_trustor.size()) {
    throw std::invalid_argument("fuse: dimension mismatch");
  }
  Eigen::VectorXd out(h_trustor.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double x = gate.raw_gate.data()[k];
    const double g = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    out(k) = g * h_trustor(k) + (1.0 - g) * h_trustee(k);
  }
  return out;
}

ViewOperators prepare_view(const GraphView& view) {
  ViewOperators ops;
  ops.view = &view;
  const auto& A = view.normalized_adjacency;
  const Eigen::Index n = A.rows();
  ops.type_present = Matrix::Zero(n, kNumNodeTypes);
  for (int t = 0; t < kNumNodeTypes; ++t) {
    ops.type_rows[t] = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (view.node_type[static_cast<std::size_t>(i)] == t) ops.type_rows[t](i) = 1.0;
    }
    ops.typed_adjacency[t] = A * ops.type_rows[t].asDiagonal();
    ops.typed_adjacency[t].prune(0.0);
    ops.typed_adjacency[t].makeCompressed();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) {
      ops.type_present(i, view.node_type[static_cast<std::size_t>(it.col())]) = 1.0;
    }
  }
  return ops;
}

LayerVars record_layer(Tape& tape, const LayerParams& params, bool trainable) {
  auto rec = [&](const Matrix& m) { return trainable ? tape.variable(m) : tape.constant(m); };
  LayerVars vars;
  for (int t = 0; t < kNumNodeTypes; ++t) vars.weight[t] = rec(params.weight[t]);
  for (int t = 0; t < kNumNodeTypes; ++t) vars.type_attention[t] = rec(params.type_attention[t]);
  vars.node_attention = rec(params.node_attention);
  return vars;
}

Var propagate_layer(Tape& tape, Var H, const ViewOperators& ops, const LayerVars& layer,
                    const PropagateOptions& options, LayerTrace* trace) {
  (void)tape;
  const GraphView& view = *ops.view;
  const auto& structure = view.normalized_adjacency;
  if (H.rows() != structure.rows()) throw std::invalid_argument("propagate_layer: row mismatch");
  const Eigen::Index d = H.cols();
  if (layer.node_attention.rows() != 2 * d) {
    throw std::invalid_argument("propagate_layer: attention size does not match input dim");
  }
  if (options.dropout > 0.0) {
    if (!options.rng) throw std::invalid_argument("dropout needs an rng");
    H = ad::dropout(H, options.dropout, *options.rng);
  }

  // Type-level attention.
  std::array<Var, kNumNodeTypes> logits;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    Var h_type = ad::spmm(ops.typed_adjacency[t], H);
    logits[t] = ad::leaky_relu(ad::matmul(ad::concat_cols(H, h_type), layer.type_attention[t]),
                               kAttentionSlope);
  }
  Var type_logits = logits[0];
  for (int t = 1; t < kNumNodeTypes; ++t) type_logits = ad::concat_cols(type_logits, logits[t]);
  Var alpha = ad::masked_softmax_rows(type_logits, ops.type_present);

  // Node-level attention over every stored neighbor (self loop included).
  Var u = ad::matmul(H, ad::row_block(layer.node_attention, 0, d));
  Var v = ad::matmul(H, ad::row_block(layer.node_attention, d, d));
  Var edge_scores = ad::leaky_relu(ad::edge_logits(alpha, u, v, structure, view.node_type),
                                   kAttentionSlope);
  Var beta = ad::segment_softmax(edge_scores, structure);

  // sum_t B_t H_t W_t == sum_j beta_ij h_j W_{type(j)}
  Var messages = ad::matmul(ad::mask_rows(H, ops.type_rows[0]), layer.weight[0]);
  for (int t = 1; t < kNumNodeTypes; ++t) {
    messages = ad::add(messages, ad::matmul(ad::mask_rows(H, ops.type_rows[t]), layer.weight[t]));
  }
  if (trace) *trace = LayerTrace{alpha, beta};
  return ad::elu(ad::edge_spmm(beta, messages, structure));
}

Var encode_role(Tape& tape, Var H0, const ViewOperators& ops, const std::vector<LayerVars>& layers,
                const PropagateOptions& options, std::vector<LayerTrace>* traces) {
  Var H = H0;
  for (const LayerVars& layer : layers) {
    LayerTrace trace;
    H = propagate_layer(tape, H, ops, layer, options, traces ? &trace : nullptr);
    if (traces) traces->push_back(trace);
  }
  return H;
}

Matrix propagate_layer(const Matrix& H, const GraphView& view, const LayerParams& params) {
  Tape tape;
  const ViewOperators ops = prepare_view(view);
  Var out = propagate_layer(tape, tape.constant(H), ops, record_layer(tape, params, false));
  return out.value();
}

EmbeddingTable encode_role(const GraphView& view, const EmbeddingTable& H0,
                           const RoleEncoder& encoder) {
  Tape tape;
  const ViewOperators ops = prepare_view(view);
  std::vector<LayerVars> layers;
  for (const auto& layer : encoder.layers) layers.push_back(record_layer(tape, layer, false));
  Var out = encode_role(tape, tape.constant(H0.vectors), ops, layers);
  return EmbeddingTable{out.value()};
}

}  // namespace kgtrust
