#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

namespace kgtrust {

using NodeId = int;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class NodeType : std::uint8_t { User = 0, Object = 1 };
inline constexpr int kNumNodeTypes = 2;

enum class Role : std::uint8_t { Trustor, Trustee };

/// Raised by loaders on malformed input. Carries the 1-based line number when
/// the failure is tied to a specific line (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Raised when a dataset is well-formed but cannot satisfy a request
/// (missing files, not enough unlinked pairs, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Users and objects share one dense id space; users occupy [0, num_users).
/// Trust edges are directed user->user; interaction edges are stored as
/// (user, object) and object edges as (lo, hi), both undirected.
class HeteroGraph {
 public:
  HeteroGraph() = default;

  /// Validates all invariants and deduplicates edge sets. Throws
  /// std::invalid_argument on a violation.
  HeteroGraph(int num_users, int num_objects, std::vector<Edge> trust_edges,
              std::vector<Edge> interaction_edges, std::vector<Edge> object_edges = {});

  int num_users() const { return num_users_; }
  int num_objects() const { return num_objects_; }
  int num_nodes() const { return num_users_ + num_objects_; }
  NodeType node_type(NodeId id) const {
    return id < num_users_ ? NodeType::User : NodeType::Object;
  }
  std::vector<int> node_types() const;

  const std::vector<Edge>& trust_edges() const { return trust_edges_; }
  const std::vector<Edge>& interaction_edges() const { return interaction_edges_; }
  const std::vector<Edge>& object_edges() const { return object_edges_; }

  bool has_trust_edge(NodeId from, NodeId to) const;

  /// Same nodes, interactions and object edges; trust edges replaced.
  HeteroGraph with_trust_edges(std::vector<Edge> trust_edges) const;

 private:
  int num_users_ = 0;
  int num_objects_ = 0;
  std::vector<Edge> trust_edges_;
  std::vector<Edge> interaction_edges_;
  std::vector<Edge> object_edges_;
};

enum class Split : std::uint8_t { Train, Test };

struct TrustSample {
  NodeId trustor = 0;
  NodeId trustee = 0;
  int label = 1;  // 1 = trust, 0 = no-trust
  Split split = Split::Train;
  friend bool operator==(const TrustSample&, const TrustSample&) = default;
};

/// Symmetric-normalized adjacency of one role, D^-1/2 (A + I) D^-1/2, where
/// the degree is the self-looped row sum. Rows are targets, columns are the
/// neighbors they aggregate from.
struct GraphView {
  Role role = Role::Trustor;
  SparseRowMatrix normalized_adjacency;
  std::vector<int> node_type;  // NodeType as int, one per node

  int num_nodes() const { return static_cast<int>(normalized_adjacency.rows()); }
};

struct LoadStats {
  std::size_t skipped_self_trust = 0;
  std::size_t duplicate_edges = 0;
};

struct FilmTrustData {
  HeteroGraph graph;
  std::vector<TrustSample> positives;
  LoadStats stats;
};

/// FilmTrust-style whitespace files: "user item rating" and
/// "trustor trustee value". Raw ids are remapped in order of first
/// appearance (users from both files, then items).
FilmTrustData load_filmtrust(const std::filesystem::path& ratings_path,
                             const std::filesystem::path& trust_path);

struct SiotData {
  HeteroGraph graph;
  std::vector<TrustSample> positives;
  std::vector<std::string> user_corpus;                 // by dense user id
  std::vector<std::optional<std::string>> object_entity;  // by object index (id - num_users)
  std::vector<std::string> user_names;
  std::vector<std::string> object_names;
  LoadStats stats;
};

/// Loads trust.csv, interactions.csv, objects.csv (and object_edges.csv when
/// present). Users need strictly more than `min_user_comments` comment rows and
/// objects strictly more than `min_object_comments` to survive.
SiotData load_siot_csv(const std::filesystem::path& dir, int min_user_comments = 15,
                       int min_object_comments = 10);

/// Builds the role view. `augmented` holds extra user->user pairs (e.g. PPR
/// neighbors). When `augmented_weights` is given it must align with
/// `augmented` and replaces the unit weight of those pairs.
GraphView build_view(const HeteroGraph& graph, const std::vector<Edge>& augmented, Role role,
                     const std::vector<double>* augmented_weights = nullptr);

/// Splits positives floor(ratio * n) / rest into train / test and draws the
/// same number of unlinked ordered user pairs as negatives for each split.
std::vector<TrustSample> split_samples(const std::vector<TrustSample>& positives, int num_users,
                                       double ratio, std::uint64_t seed);

std::vector<Edge> train_trust_edges(const std::vector<TrustSample>& samples);

}  // namespace kgtrust
