#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "kgtrust/embed.hpp"
#include "kgtrust/graph.hpp"
#include "kgtrust/tape.hpp"

namespace kgtrust {

inline constexpr double kAttentionSlope = 0.2;

/// One heterogeneous attention layer. Weights use the row convention
/// (H * W), so `weight[t]` is d_in x d_out for neighbors of type t.
struct LayerParams {
  std::array<Matrix, kNumNodeTypes> weight;
  std::array<Matrix, kNumNodeTypes> type_attention;  // eta_t, 2 d_in x 1
  Matrix node_attention;                             // gamma, 2 d_in x 1
};

struct RoleEncoder {
  Role role = Role::Trustor;
  std::vector<LayerParams> layers;
};

struct GateParams {
  Matrix raw_gate;  // 1 x d, effective gate is sigmoid(raw_gate)
};

LayerParams init_layer(int in_dim, int out_dim, std::mt19937_64& rng);
RoleEncoder init_encoder(Role role, int dim, int num_layers, std::mt19937_64& rng);
Matrix glorot(int rows, int cols, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Per-node reference operations

/// sum_j a_ij h_j over the neighbors j of `target` with type `type`,
/// self loop included.
Eigen::VectorXd type_embedding(NodeId target, NodeType type, const GraphView& view,
                               const Matrix& H);

/// softmax over the present types of LeakyReLU(eta_t . [h_target || h_t]).
std::map<NodeType, double> type_attention(const Eigen::VectorXd& h_target,
                                          const std::map<NodeType, Eigen::VectorXd>& type_embeddings,
                                          const LayerParams& params);

/// softmax over `neighbors` of LeakyReLU(alpha_{type(j)} * gamma . [h_i || h_j]).
/// An empty list leaves only the self loop with weight 1.
std::vector<std::pair<NodeId, double>> node_attention(
    NodeId target, const std::vector<NodeId>& neighbors, const Matrix& H,
    const std::vector<int>& node_type, const std::map<NodeType, double>& type_weights,
    const LayerParams& params);

/// g * h_trustor + (1 - g) * h_trustee with g = sigmoid(raw_gate).
Eigen::VectorXd fuse(const Eigen::VectorXd& h_trustor, const Eigen::VectorXd& h_trustee,
                     const GateParams& gate);

// ---------------------------------------------------------------------------
// Recorded (differentiable) layer

/// Constant operators derived once per view. The view must outlive every
/// tape that uses them.
struct ViewOperators {
  const GraphView* view = nullptr;
  std::array<SparseRowMatrix, kNumNodeTypes> typed_adjacency;  // A restricted to type-t columns
  std::array<Eigen::VectorXd, kNumNodeTypes> type_rows;        // 1 where node has type t
  Matrix type_present;                                          // n x T, 1 if i has a type-t neighbor
};

ViewOperators prepare_view(const GraphView& view);

struct LayerVars {
  std::array<Var, kNumNodeTypes> weight;
  std::array<Var, kNumNodeTypes> type_attention;
  Var node_attention;
};

LayerVars record_layer(Tape& tape, const LayerParams& params, bool trainable);

struct LayerTrace {
  Var type_weights;  // n x T
  Var node_weights;  // nnz x 1, aligned with the view's stored entries
};

struct PropagateOptions {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

/// ELU(sum_t B_t H_t W_t) with attention-derived B_t.
Var propagate_layer(Tape& tape, Var H, const ViewOperators& ops, const LayerVars& layer,
                    const PropagateOptions& options = {}, LayerTrace* trace = nullptr);

Var encode_role(Tape& tape, Var H0, const ViewOperators& ops, const std::vector<LayerVars>& layers,
                const PropagateOptions& options = {}, std::vector<LayerTrace>* traces = nullptr);

/// Value-level conveniences over a private tape.
Matrix propagate_layer(const Matrix& H, const GraphView& view, const LayerParams& params);
EmbeddingTable encode_role(const GraphView& view, const EmbeddingTable& H0,
                           const RoleEncoder& encoder);

}  // namespace kgtrust
