#include "kgtrust/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <thread>

namespace kgtrust {

TrustDigraph::TrustDigraph(int num_nodes, const std::vector<Edge>& edges)
    : num_nodes_(num_nodes),
      offsets_(static_cast<std::size_t>(num_nodes) + 1, 0),
      undirected_(static_cast<std::size_t>(num_nodes)) {
  std::vector<Edge> sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const Edge& e : sorted) {
    if (e.from < 0 || e.to < 0 || e.from >= num_nodes || e.to >= num_nodes) {
      throw std::invalid_argument("trust edge outside the node range");
    }
    ++offsets_[static_cast<std::size_t>(e.from) + 1];
  }
  for (int i = 0; i < num_nodes; ++i) offsets_[i + 1] += offsets_[i];
  targets_.reserve(sorted.size());
  for (const Edge& e : sorted) {
    targets_.push_back(e.to);
    if (e.from != e.to) {
      undirected_[static_cast<std::size_t>(e.from)].push_back(e.to);
      undirected_[static_cast<std::size_t>(e.to)].push_back(e.from);
    }
  }
  for (auto& nbrs : undirected_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
}

double PprRow::score(NodeId node) const {
  auto it = std::lower_bound(scores.begin(), scores.end(), node,
                             [](const auto& entry, NodeId id) { return entry.first < id; });
  return it != scores.end() && it->first == node ? it->second : 0.0;
}

double PprRow::total() const {
  double sum = 0.0;
  for (const auto& [node, value] : scores) sum += value;
  return sum;
}

PprRow ppr_push(const TrustDigraph& graph, NodeId source, double lambda, double epsilon,
                PprTransition transition) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must be in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const int n = graph.num_nodes();
  if (source < 0 || source >= n) throw std::invalid_argument("source outside the node range");

  std::vector<double> estimate(static_cast<std::size_t>(n), 0.0);
  std::vector<double> residual(static_cast<std::size_t>(n), 0.0);
  std::vector<char> queued(static_cast<std::size_t>(n), 0);
  std::deque<NodeId> queue;

  const bool symmetric = transition == PprTransition::Symmetric;
  auto degree = [&](NodeId u) {
    return symmetric ? static_cast<double>(graph.undirected()[u].size() + 1)
                     : static_cast<double>(graph.out_degree(u));
  };
  auto threshold = [&](NodeId u) { return epsilon * std::max(degree(u), 1.0); };
  auto add_residual = [&](NodeId v, double amount) {
    residual[v] += amount;
    if (!queued[v] && residual[v] >= threshold(v)) {
      queued[v] = 1;
      queue.push_back(v);
    }
  };

  add_residual(source, 1.0);
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    queued[u] = 0;
    const double mass = residual[u];
    if (mass < threshold(u)) continue;
    residual[u] = 0.0;
    estimate[u] += lambda * mass;
    const double spread = (1.0 - lambda) * mass;
    if (symmetric) {
      const double du = degree(u);
      add_residual(u, spread / du);
      for (NodeId v : graph.undirected()[u]) add_residual(v, spread / std::sqrt(du * degree(v)));
    } else if (graph.out_degree(u) == 0) {
      add_residual(source, spread);
    } else {
      const double share = spread / graph.out_degree(u);
      for (NodeId v : graph.out(u)) add_residual(v, share);
    }
  }

  PprRow row;
  row.source = source;
  row.epsilon = epsilon;
  for (int v = 0; v < n; ++v) {
    if (estimate[v] > 0.0) row.scores.emplace_back(v, estimate[v]);
  }
  return row;
}

std::vector<std::pair<NodeId, double>> select_top_k(const PprRow& row, int k,
                                                    double tie_tolerance) {
  std::vector<std::pair<NodeId, double>> candidates;
  for (const auto& entry : row.scores) {
    if (entry.first != row.source) candidates.push_back(entry);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  // Groups of near-equal scores are reordered by id.
  for (std::size_t begin = 0; begin < candidates.size();) {
    std::size_t end = begin + 1;
    while (end < candidates.size() &&
           candidates[begin].second - candidates[end].second <= tie_tolerance) {
      ++end;
    }
    std::sort(candidates.begin() + static_cast<std::ptrdiff_t>(begin),
              candidates.begin() + static_cast<std::ptrdiff_t>(end),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    begin = end;
  }
  if (static_cast<int>(candidates.size()) > k) candidates.resize(static_cast<std::size_t>(k));
  return candidates;
}

Augmentation topk_augment(const HeteroGraph& graph, int k, const PprOptions& options) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const int n = graph.num_users();
  const TrustDigraph digraph(n, graph.trust_edges());
  std::vector<std::vector<std::pair<NodeId, double>>> picks(static_cast<std::size_t>(n));

  auto work = [&](int begin, int end) {
    for (int u = begin; u < end; ++u) {
      PprRow row = ppr_push(digraph, u, options.lambda, options.epsilon, options.transition);
      picks[static_cast<std::size_t>(u)] = select_top_k(row, k, options.tie_tolerance);
    }
  };
  const int threads = std::clamp(options.threads, 1, std::max(n, 1));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(work, t * chunk, std::min(n, (t + 1) * chunk));
    }
  }

  Augmentation out;
  for (int u = 0; u < n; ++u) {
    for (const auto& [v, score] : picks[static_cast<std::size_t>(u)]) {
      out.pairs.push_back({u, v});
      out.scores.push_back(score);
    }
  }
  return out;
}

}  // namespace kgtrust
