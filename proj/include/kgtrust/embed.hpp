#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kgtrust/graph.hpp"

namespace kgtrust {

/// Dense per-node vectors, one row per node of the stage it belongs to.
struct EmbeddingTable {
  Eigen::MatrixXd vectors;

  int rows() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  bool all_finite() const { return vectors.allFinite(); }
};

struct KnowledgeTriple {
  int head = 0;
  int relation = 0;
  int tail = 0;
};

struct KnowledgeGraph {
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<KnowledgeTriple> triples;
  std::unordered_map<std::string, int> entity_index;

  int num_entities() const { return static_cast<int>(entity_names.size()); }
  int num_relations() const { return static_cast<int>(relation_names.size()); }
  std::optional<int> find_entity(const std::string& name) const;
};

/// Reads triples.csv (header row, then head_entity,relation,tail_entity).
KnowledgeGraph load_triples(const std::filesystem::path& path);

/// Keeps only triples whose head is one of `heads`.
std::vector<KnowledgeTriple> triples_with_heads(const std::vector<KnowledgeTriple>& triples,
                                                const std::vector<int>& heads);

struct TransEModel {
  Eigen::MatrixXd entity_vectors;    // num_entities x dim
  Eigen::MatrixXd relation_vectors;  // num_relations x dim

  int dim() const { return static_cast<int>(entity_vectors.cols()); }
};

/// -||h + r - t||^2
double transe_score(const TransEModel& model, const KnowledgeTriple& triple);

struct TransEOptions {
  int dim = 64;
  double margin = 1.0;
  int epochs = 100;
  int neg_per_pos = 1;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
};

/// Called after every completed epoch (1-based) with the renormalized model.
using TransEEpochHook = std::function<void(int epoch, const TransEModel&)>;

/// Uniform(-6/sqrt(d), 6/sqrt(d)) init with unit-norm entity and relation rows.
TransEModel transe_init(int num_entities, int num_relations, int dim, std::uint64_t seed);

/// SGD on max(0, margin - f(pos) + f(corrupt)) with head-or-tail corruption.
TransEModel transe_train(const std::vector<KnowledgeTriple>& triples, int num_entities,
                         int num_relations, const TransEOptions& options,
                         const TransEEpochHook& on_epoch = {});

/// Seeded Gaussian rows rescaled to unit norm.
EmbeddingTable random_unit_table(int rows, int dim, std::uint64_t seed);

/// Aligned objects (alignment[o] = entity id) copy their entity row from
/// `model`; everything else gets the seeded unit-norm random row.
EmbeddingTable init_objects(const HeteroGraph& graph, const std::vector<std::optional<int>>& alignment,
                            const TransEModel* model, int dim, std::uint64_t seed);

/// Rowwise h' = W h. `weight` is out_dim x in_dim.
EmbeddingTable project(const EmbeddingTable& table, const Eigen::MatrixXd& weight);

// ---------------------------------------------------------------------------
// User document embeddings

struct DocEmbedOptions {
  int dim = 64;
  int epochs = 10;
  int negatives = 5;
  int min_count = 2;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

/// Lowercased alphanumeric runs; every other ASCII byte separates tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Bag-of-words paragraph vectors trained with negative sampling. Word output
/// vectors are fit jointly over the corpus in content order; each user vector
/// is then inferred independently against the frozen words with a
/// content-seeded stream, so identical corpora map to identical vectors and
/// the result does not depend on user order. Empty corpora map to zero.
EmbeddingTable embed_users(const std::vector<std::string>& corpus, const DocEmbedOptions& options);

/// Reads "user_id v1 ... vd" lines keyed by user name. Users absent from the
/// file get a zero row.
EmbeddingTable load_user_vectors(const std::filesystem::path& path,
                                 const std::vector<std::string>& user_names);

}  // namespace kgtrust
