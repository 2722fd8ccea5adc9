#include "kgtrust/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"

namespace kgtrust {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

class IdMap {
 public:
  int get_or_add(const std::string& key) {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(key);
    return it->second;
  }
  std::optional<int> find(const std::string& key) const {
    auto it = ids_.find(key);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> names_;
};

std::vector<std::vector<std::string>> read_whitespace_table(const std::filesystem::path& path,
                                                            std::size_t min_fields) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.empty()) continue;
    if (fields.size() < min_fields) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(min_fields) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t i = 2; i < min_fields; ++i) {
      std::size_t used = 0;
      try {
        (void)std::stod(fields[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[i].size()) {
        throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                             ": non-numeric value '" + fields[i] + "'",
                         line_no);
      }
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

HeteroGraph::HeteroGraph(int num_users, int num_objects, std::vector<Edge> trust_edges,
                         std::vector<Edge> interaction_edges, std::vector<Edge> object_edges)
    : num_users_(num_users), num_objects_(num_objects) {
  if (num_users < 0 || num_objects < 0) throw std::invalid_argument("negative node count");
  const int n = num_nodes();
  for (const Edge& e : trust_edges) {
    if (e.from < 0 || e.from >= num_users || e.to < 0 || e.to >= num_users) {
      throw std::invalid_argument("trust edge endpoint is not a user");
    }
    if (e.from == e.to) throw std::invalid_argument("self trust edge");
  }
  for (Edge& e : interaction_edges) {
    if (e.from >= num_users) std::swap(e.from, e.to);
    if (e.from < 0 || e.from >= num_users || e.to < num_users || e.to >= n) {
      throw std::invalid_argument("interaction edge must join one user and one object");
    }
  }
  for (Edge& e : object_edges) {
    if (e.from > e.to) std::swap(e.from, e.to);
    if (e.from < num_users || e.to >= n || e.from == e.to) {
      throw std::invalid_argument("object edge must join two distinct objects");
    }
  }
  sort_unique(trust_edges);
  sort_unique(interaction_edges);
  sort_unique(object_edges);
  trust_edges_ = std::move(trust_edges);
  interaction_edges_ = std::move(interaction_edges);
  object_edges_ = std::move(object_edges);
}

std::vector<int> HeteroGraph::node_types() const {
  std::vector<int> types(static_cast<std::size_t>(num_nodes()), 0);
  std::fill(types.begin() + num_users_, types.end(), static_cast<int>(NodeType::Object));
  return types;
}

bool HeteroGraph::has_trust_edge(NodeId from, NodeId to) const {
  return std::binary_search(trust_edges_.begin(), trust_edges_.end(), Edge{from, to});
}

HeteroGraph HeteroGraph::with_trust_edges(std::vector<Edge> trust_edges) const {
  return HeteroGraph(num_users_, num_objects_, std::move(trust_edges), interaction_edges_,
                     object_edges_);
}

FilmTrustData load_filmtrust(const std::filesystem::path& ratings_path,
                             const std::filesystem::path& trust_path) {
  auto ratings = read_whitespace_table(ratings_path, 3);
  auto trust = read_whitespace_table(trust_path, 3);

  IdMap users;
  IdMap items;
  for (const auto& row : ratings) {
    users.get_or_add(row[0]);
    items.get_or_add(row[1]);
  }
  FilmTrustData data;
  std::vector<Edge> trust_edges;
  for (const auto& row : trust) {
    if (row[0] == row[1]) {
      ++data.stats.skipped_self_trust;
      continue;
    }
    trust_edges.push_back({users.get_or_add(row[0]), users.get_or_add(row[1])});
  }
  const int num_users = users.size();
  std::vector<Edge> interactions;
  interactions.reserve(ratings.size());
  for (const auto& row : ratings) {
    interactions.push_back({*users.find(row[0]), num_users + *items.find(row[1])});
  }
  std::size_t raw_trust = trust_edges.size();
  data.graph = HeteroGraph(num_users, items.size(), std::move(trust_edges), std::move(interactions));
  data.stats.duplicate_edges = raw_trust - data.graph.trust_edges().size();
  for (const Edge& e : data.graph.trust_edges()) {
    data.positives.push_back({e.from, e.to, 1, Split::Train});
  }
  return data;
}

SiotData load_siot_csv(const std::filesystem::path& dir, int min_user_comments,
                       int min_object_comments) {
  const auto trust = detail::read_csv_file(dir / "trust.csv", 2);
  const auto interactions = detail::read_csv_file(dir / "interactions.csv", 3);
  const auto objects = detail::read_csv_file(dir / "objects.csv", 2);
  std::optional<detail::CsvTable> object_links;
  if (std::filesystem::exists(dir / "object_edges.csv")) {
    object_links = detail::read_csv_file(dir / "object_edges.csv", 2);
  }

  // Raw name spaces in order of first appearance.
  IdMap raw_users;
  IdMap raw_objects;
  for (const auto& row : interactions.rows) {
    raw_users.get_or_add(row[0]);
    raw_objects.get_or_add(row[1]);
  }
  for (const auto& row : trust.rows) {
    raw_users.get_or_add(row[0]);
    raw_users.get_or_add(row[1]);
  }
  std::unordered_map<std::string, std::string> entity_of;
  for (const auto& row : objects.rows) {
    raw_objects.get_or_add(row[0]);
    if (!row[1].empty()) entity_of[row[0]] = row[1];
  }
  if (object_links) {
    for (const auto& row : object_links->rows) {
      raw_objects.get_or_add(row[0]);
      raw_objects.get_or_add(row[1]);
    }
  }

  std::vector<int> user_count(static_cast<std::size_t>(raw_users.size()), 0);
  std::vector<int> object_count(static_cast<std::size_t>(raw_objects.size()), 0);
  for (const auto& row : interactions.rows) {
    ++user_count[static_cast<std::size_t>(*raw_users.find(row[0]))];
    ++object_count[static_cast<std::size_t>(*raw_objects.find(row[1]))];
  }

  std::vector<int> user_id(user_count.size(), -1);
  std::vector<int> object_index(object_count.size(), -1);
  SiotData data;
  for (std::size_t u = 0; u < user_count.size(); ++u) {
    if (user_count[u] > min_user_comments) {
      user_id[u] = static_cast<int>(data.user_names.size());
      data.user_names.push_back(raw_users.names()[u]);
    }
  }
  for (std::size_t o = 0; o < object_count.size(); ++o) {
    if (object_count[o] > min_object_comments) {
      object_index[o] = static_cast<int>(data.object_names.size());
      const std::string& name = raw_objects.names()[o];
      data.object_names.push_back(name);
      auto it = entity_of.find(name);
      data.object_entity.push_back(it == entity_of.end() ? std::nullopt
                                                         : std::optional<std::string>(it->second));
    }
  }
  const int num_users = static_cast<int>(data.user_names.size());
  const int num_objects = static_cast<int>(data.object_names.size());

  data.user_corpus.assign(static_cast<std::size_t>(num_users), {});
  std::vector<Edge> interaction_edges;
  for (const auto& row : interactions.rows) {
    int u = user_id[static_cast<std::size_t>(*raw_users.find(row[0]))];
    if (u < 0) continue;
    std::string& doc = data.user_corpus[static_cast<std::size_t>(u)];
    if (!doc.empty()) doc.push_back('\n');
    doc += row[2];
    int o = object_index[static_cast<std::size_t>(*raw_objects.find(row[1]))];
    if (o >= 0) interaction_edges.push_back({u, num_users + o});
  }

  std::vector<Edge> trust_edges;
  for (const auto& row : trust.rows) {
    int a = user_id[static_cast<std::size_t>(*raw_users.find(row[0]))];
    int b = user_id[static_cast<std::size_t>(*raw_users.find(row[1]))];
    if (a < 0 || b < 0) continue;
    if (a == b) {
      ++data.stats.skipped_self_trust;
      continue;
    }
    trust_edges.push_back({a, b});
  }
  std::vector<Edge> object_edges;
  if (object_links) {
    for (const auto& row : object_links->rows) {
      int a = object_index[static_cast<std::size_t>(*raw_objects.find(row[0]))];
      int b = object_index[static_cast<std::size_t>(*raw_objects.find(row[1]))];
      if (a < 0 || b < 0 || a == b) continue;
      object_edges.push_back({num_users + a, num_users + b});
    }
  }
  std::size_t raw_trust = trust_edges.size();
  data.graph = HeteroGraph(num_users, num_objects, std::move(trust_edges),
                           std::move(interaction_edges), std::move(object_edges));
  data.stats.duplicate_edges = raw_trust - data.graph.trust_edges().size();
  for (const Edge& e : data.graph.trust_edges()) {
    data.positives.push_back({e.from, e.to, 1, Split::Train});
  }
  return data;
}

GraphView build_view(const HeteroGraph& graph, const std::vector<Edge>& augmented, Role role,
                     const std::vector<double>* augmented_weights) {
  if (augmented_weights && augmented_weights->size() != augmented.size()) {
    throw std::invalid_argument("augmented weights do not align with augmented pairs");
  }
  const int n = graph.num_nodes();
  // (row, col) -> weight; duplicates keep the largest weight.
  std::map<std::pair<int, int>, double> entries;
  auto put = [&](int r, int c, double w) {
    auto [it, inserted] = entries.try_emplace({r, c}, w);
    if (!inserted) it->second = std::max(it->second, w);
  };
  auto put_trust = [&](const Edge& e, double w) {
    if (e.from < 0 || e.to < 0 || e.from >= graph.num_users() || e.to >= graph.num_users()) {
      throw std::invalid_argument("augmented pair is not user->user");
    }
    if (e.from == e.to) return;
    if (role == Role::Trustor) {
      put(e.from, e.to, w);
    } else {
      put(e.to, e.from, w);
    }
  };
  for (const Edge& e : graph.trust_edges()) put_trust(e, 1.0);
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    put_trust(augmented[i], augmented_weights ? (*augmented_weights)[i] : 1.0);
  }
  for (const Edge& e : graph.interaction_edges()) {
    put(e.from, e.to, 1.0);
    put(e.to, e.from, 1.0);
  }
  for (const Edge& e : graph.object_edges()) {
    put(e.from, e.to, 1.0);
    put(e.to, e.from, 1.0);
  }
  for (int i = 0; i < n; ++i) put(i, i, 1.0);

  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (const auto& [key, w] : entries) degree[static_cast<std::size_t>(key.first)] += w;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(entries.size());
  for (const auto& [key, w] : entries) {
    const auto [r, c] = key;
    triplets.emplace_back(
        r, c, w / std::sqrt(degree[static_cast<std::size_t>(r)] * degree[static_cast<std::size_t>(c)]));
  }
  GraphView view;
  view.role = role;
  view.normalized_adjacency.resize(n, n);
  view.normalized_adjacency.setFromTriplets(triplets.begin(), triplets.end());
  view.normalized_adjacency.makeCompressed();
  view.node_type = graph.node_types();
  return view;
}

std::vector<TrustSample> split_samples(const std::vector<TrustSample>& positives, int num_users,
                                       double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0, 1)");
  const std::size_t n = positives.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));

  std::unordered_set<std::uint64_t> linked;
  for (const auto& s : positives) linked.insert(pair_key(s.trustor, s.trustee));
  const double total_pairs =
      static_cast<double>(num_users) * static_cast<double>(std::max(num_users - 1, 0));
  if (total_pairs - static_cast<double>(linked.size()) < static_cast<double>(n)) {
    throw DataError("not enough unlinked user pairs to draw " + std::to_string(n) + " negatives");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<TrustSample> out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    TrustSample s = positives[order[i]];
    s.label = 1;
    s.split = i < n_train ? Split::Train : Split::Test;
    out.push_back(s);
  }

  // Dense users: rejection sampling. If the graph is nearly complete, fall back
  // to enumerating the free pairs.
  std::unordered_set<std::uint64_t> taken;
  std::vector<Edge> negatives;
  negatives.reserve(n);
  const double free_pairs = total_pairs - static_cast<double>(linked.size());
  if (free_pairs > 4.0 * static_cast<double>(n)) {
    std::uniform_int_distribution<int> pick(0, num_users - 1);
    while (negatives.size() < n) {
      int a = pick(rng);
      int b = pick(rng);
      if (a == b) continue;
      auto key = pair_key(a, b);
      if (linked.count(key) || !taken.insert(key).second) continue;
      negatives.push_back({a, b});
    }
  } else {
    std::vector<Edge> pool;
    for (int a = 0; a < num_users; ++a) {
      for (int b = 0; b < num_users; ++b) {
        if (a != b && !linked.count(pair_key(a, b))) pool.push_back({a, b});
      }
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    negatives.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({negatives[i].from, negatives[i].to, 0, i < n_train ? Split::Train : Split::Test});
  }
  return out;
}

std::vector<Edge> train_trust_edges(const std::vector<TrustSample>& samples) {
  std::vector<Edge> edges;
  for (const auto& s : samples) {
    if (s.label == 1 && s.split == Split::Train) edges.push_back({s.trustor, s.trustee});
  }
  return edges;
}

}  // namespace kgtrust
