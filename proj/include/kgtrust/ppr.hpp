#pragma once

#include <utility>
#include <span>
#include <vector>

#include "kgtrust/graph.hpp"

namespace kgtrust {

/// Out-edge CSR over user ids.
class TrustDigraph {
 public:
  TrustDigraph(int num_nodes, const std::vector<Edge>& edges);

  int num_nodes() const { return num_nodes_; }
  int out_degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  std::span<const NodeId> out(NodeId u) const {
    return {targets_.data() + offsets_[u], static_cast<std::size_t>(out_degree(u))};
  }
  /// Undirected neighbor lists (no self loops), used by the symmetric transition.
  const std::vector<std::vector<NodeId>>& undirected() const { return undirected_; }

 private:
  int num_nodes_;
  std::vector<int> offsets_;
  std::vector<NodeId> targets_;
  std::vector<std::vector<NodeId>> undirected_;
};

enum class PprTransition {
  RandomWalk,  // row-stochastic out-edge walk; dangling nodes jump to the source
  Symmetric,   // D^-1/2 (A_sym + I) D^-1/2 over the symmetrized trust graph
};

struct PprOptions {
  double lambda = 0.15;
  double epsilon = 1e-6;
  PprTransition transition = PprTransition::RandomWalk;
  /// Scores closer than this are ranked as ties (smaller id first).
  double tie_tolerance = 1e-9;
  int threads = 1;
};

struct PprRow {
  NodeId source = 0;
  std::vector<std::pair<NodeId, double>> scores;  // sorted by node id, positive entries only
  double epsilon = 0.0;

  double score(NodeId node) const;
  double total() const;
};

/// Forward push. Pops a node while its residual is at least
/// epsilon * max(out_degree, 1).
PprRow ppr_push(const TrustDigraph& graph, NodeId source, double lambda, double epsilon,
                PprTransition transition = PprTransition::RandomWalk);

/// Best `k` targets of `row` other than the source, ranked by score with
/// near-ties (within `tie_tolerance` of the group leader) ordered by id.
std::vector<std::pair<NodeId, double>> select_top_k(const PprRow& row, int k,
                                                    double tie_tolerance);

struct Augmentation {
  std::vector<Edge> pairs;
  std::vector<double> scores;  // p_ij for each pair
};

/// Top-k PPR neighbors of every user over the directed trust subgraph.
Augmentation topk_augment(const HeteroGraph& graph, int k, const PprOptions& options = {});

}  // namespace kgtrust
