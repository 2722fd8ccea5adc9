#include "kgtrust/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "csv.hpp"
#include "kgtrust/seed.hpp"

namespace kgtrust {

std::optional<int> KnowledgeGraph::find_entity(const std::string& name) const {
  auto it = entity_index.find(name);
  if (it == entity_index.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph load_triples(const std::filesystem::path& path) {
  const auto table = detail::read_csv_file(path, 3);
  KnowledgeGraph kg;
  std::unordered_map<std::string, int> relation_index;
  auto entity = [&](const std::string& name) {
    auto [it, inserted] = kg.entity_index.try_emplace(name, kg.num_entities());
    if (inserted) kg.entity_names.push_back(name);
    return it->second;
  };
  for (const auto& row : table.rows) {
    int h = entity(row[0]);
    auto [rit, inserted] = relation_index.try_emplace(row[1], kg.num_relations());
    if (inserted) kg.relation_names.push_back(row[1]);
    int t = entity(row[2]);
    kg.triples.push_back({h, rit->second, t});
  }
  return kg;
}

std::vector<KnowledgeTriple> triples_with_heads(const std::vector<KnowledgeTriple>& triples,
                                                const std::vector<int>& heads) {
  std::vector<int> sorted = heads;
  std::sort(sorted.begin(), sorted.end());
  std::vector<KnowledgeTriple> out;
  for (const auto& t : triples) {
    if (std::binary_search(sorted.begin(), sorted.end(), t.head)) out.push_back(t);
  }
  return out;
}

double transe_score(const TransEModel& model, const KnowledgeTriple& triple) {
  return -(model.entity_vectors.row(triple.head) + model.relation_vectors.row(triple.relation) -
           model.entity_vectors.row(triple.tail))
              .squaredNorm();
}

namespace {

void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double norm = m.row(i).norm();
    if (norm > 0.0) m.row(i) /= norm;
  }
}

}  // namespace

TransEModel transe_init(int num_entities, int num_relations, int dim, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("TransE dimension must be positive");
  std::mt19937_64 rng(seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  TransEModel model;
  model.entity_vectors.resize(num_entities, dim);
  model.relation_vectors.resize(num_relations, dim);
  for (Eigen::Index i = 0; i < model.entity_vectors.size(); ++i) model.entity_vectors.data()[i] = uniform(rng);
  for (Eigen::Index i = 0; i < model.relation_vectors.size(); ++i) {
    model.relation_vectors.data()[i] = uniform(rng);
  }
  normalize_rows(model.entity_vectors);
  normalize_rows(model.relation_vectors);
  return model;
}

TransEModel transe_train(const std::vector<KnowledgeTriple>& triples, int num_entities,
                         int num_relations, const TransEOptions& options,
                         const TransEEpochHook& on_epoch) {
  if (triples.empty()) throw std::invalid_argument("TransE needs at least one triple");
  if (!(options.margin > 0.0)) throw std::invalid_argument("TransE margin must be positive");
  if (options.neg_per_pos < 1) throw std::invalid_argument("neg_per_pos must be >= 1");
  for (const auto& t : triples) {
    if (t.head < 0 || t.head >= num_entities || t.tail < 0 || t.tail >= num_entities ||
        t.relation < 0 || t.relation >= num_relations) {
      throw std::invalid_argument("triple id out of range");
    }
  }
  TransEModel model = transe_init(num_entities, num_relations, options.dim, options.seed);
  std::mt19937_64 rng(mix_seed(options.seed, 0x7a45e));
  std::uniform_int_distribution<int> pick_entity(0, num_entities - 1);
  std::bernoulli_distribution corrupt_head(0.5);
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto& E = model.entity_vectors;
  auto& R = model.relation_vectors;
  Eigen::RowVectorXd pos_diff(options.dim);
  Eigen::RowVectorXd neg_diff(options.dim);
  const double lr = options.learning_rate;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const KnowledgeTriple& pos = triples[idx];
      for (int n = 0; n < options.neg_per_pos; ++n) {
        KnowledgeTriple neg = pos;
        bool head = corrupt_head(rng);
        if (num_entities > 1) {
          int& slot = head ? neg.head : neg.tail;
          const int original = slot;
          do {
            slot = pick_entity(rng);
          } while (slot == original);
        }
        pos_diff = E.row(pos.head) + R.row(pos.relation) - E.row(pos.tail);
        neg_diff = E.row(neg.head) + R.row(neg.relation) - E.row(neg.tail);
        // loss = margin + d(pos) - d(neg), d = squared distance
        if (options.margin + pos_diff.squaredNorm() - neg_diff.squaredNorm() <= 0.0) continue;
        E.row(pos.head) -= 2.0 * lr * pos_diff;
        E.row(pos.tail) += 2.0 * lr * pos_diff;
        R.row(pos.relation) -= 2.0 * lr * pos_diff;
        E.row(neg.head) += 2.0 * lr * neg_diff;
        E.row(neg.tail) -= 2.0 * lr * neg_diff;
        R.row(neg.relation) += 2.0 * lr * neg_diff;
      }
    }
    normalize_rows(E);
    if (on_epoch) on_epoch(epoch, model);
  }
  return model;
}

EmbeddingTable random_unit_table(int rows, int dim, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingTable table{Eigen::MatrixXd(rows, dim)};
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dim; ++j) table.vectors(i, j) = normal(rng);
    table.vectors.row(i).normalize();
  }
  return table;
}

EmbeddingTable init_objects(const HeteroGraph& graph, const std::vector<std::optional<int>>& alignment,
                            const TransEModel* model, int dim, std::uint64_t seed) {
  if (model && model->dim() != dim) {
    throw std::invalid_argument("object dimension does not match the TransE model");
  }
  EmbeddingTable table = random_unit_table(graph.num_objects(), dim, seed);
  if (!model) return table;
  for (int o = 0; o < graph.num_objects() && o < static_cast<int>(alignment.size()); ++o) {
    const auto& entity = alignment[static_cast<std::size_t>(o)];
    if (!entity) continue;
    if (*entity < 0 || *entity >= model->entity_vectors.rows()) {
      throw std::invalid_argument("alignment refers to an unknown entity");
    }
    table.vectors.row(o) = model->entity_vectors.row(*entity);
  }
  return table;
}

EmbeddingTable project(const EmbeddingTable& table, const Eigen::MatrixXd& weight) {
  if (weight.cols() != table.vectors.cols()) {
    throw std::invalid_argument("projection expects input dim " + std::to_string(weight.cols()) +
                                ", got " + std::to_string(table.vectors.cols()));
  }
  return EmbeddingTable{table.vectors * weight.transpose()};
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<std::int64_t>& counts) {
    cumulative_.reserve(counts.size());
    double acc = 0.0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(acc);
    }
  }
  template <class Rng>
  int operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative_.back());
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u(rng));
    if (it == cumulative_.end()) --it;
    return static_cast<int>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

// One bag-of-words pass of a document against the output word vectors.
template <class Rng>
void dbow_pass(const std::vector<int>& words, Eigen::Ref<Eigen::RowVectorXd> doc,
               Eigen::MatrixXd& word_out, bool update_words, const NegativeSampler& sampler,
               int negatives, double lr, Rng& rng, Eigen::RowVectorXd& doc_grad) {
  for (int target : words) {
    doc_grad.setZero();
    for (int k = 0; k <= negatives; ++k) {
      int word = target;
      double label = 1.0;
      if (k > 0) {
        word = sampler(rng);
        if (word == target) continue;
        label = 0.0;
      }
      double g = (label - sigmoid(doc.dot(word_out.row(word)))) * lr;
      doc_grad += g * word_out.row(word);
      if (update_words) word_out.row(word) += g * doc;
    }
    doc += doc_grad;
  }
}

}  // namespace

EmbeddingTable embed_users(const std::vector<std::string>& corpus, const DocEmbedOptions& options) {
  if (options.dim <= 0) throw std::invalid_argument("embedding dimension must be positive");
  const int num_docs = static_cast<int>(corpus.size());
  const int dim = options.dim;

  std::vector<std::vector<std::string>> tokens(corpus.size());
  std::map<std::string, std::int64_t> freq;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    tokens[d] = tokenize(corpus[d]);
    for (const auto& t : tokens[d]) ++freq[t];
  }
  std::unordered_map<std::string, int> vocab;
  std::vector<std::int64_t> counts;
  for (const auto& [word, count] : freq) {
    if (count >= options.min_count) {
      vocab.emplace(word, static_cast<int>(counts.size()));
      counts.push_back(count);
    }
  }
  std::vector<std::vector<int>> docs(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& t : tokens[d]) {
      auto it = vocab.find(t);
      if (it != vocab.end()) docs[d].push_back(it->second);
    }
  }

  EmbeddingTable table{Eigen::MatrixXd::Zero(num_docs, dim)};
  if (counts.empty()) return table;
  const NegativeSampler sampler(counts);

  auto doc_seed = [&](int d) { return mix_seed(options.seed, fnv1a(corpus[static_cast<std::size_t>(d)])); };
  auto init_doc = [&](int d) {
    std::mt19937_64 rng(doc_seed(d));
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Eigen::RowVectorXd v(dim);
    for (int j = 0; j < dim; ++j) v(j) = u(rng) / dim;
    return v;
  };

  // Word vectors: joint fit, documents visited in content order.
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return corpus[static_cast<std::size_t>(a)] < corpus[static_cast<std::size_t>(b)]; });
  Eigen::MatrixXd word_out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(counts.size()), dim);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> joint(num_docs, dim);
  for (int d = 0; d < num_docs; ++d) joint.row(d) = init_doc(d);
  std::mt19937_64 rng(mix_seed(options.seed, 0xd0c));
  Eigen::RowVectorXd grad(dim);
  const double min_lr = options.learning_rate * 1e-4;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double lr = options.learning_rate -
                (options.learning_rate - min_lr) * epoch / std::max(options.epochs, 1);
    for (int d : order) {
      dbow_pass(docs[static_cast<std::size_t>(d)], joint.row(d), word_out, true, sampler,
                options.negatives, lr, rng, grad);
    }
  }

  // Final vectors: independent inference per document.
  for (int d = 0; d < num_docs; ++d) {
    if (docs[static_cast<std::size_t>(d)].empty()) continue;
    Eigen::RowVectorXd v = init_doc(d);
    std::mt19937_64 doc_rng(mix_seed(doc_seed(d), 0x1f));
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      double lr = options.learning_rate -
                  (options.learning_rate - min_lr) * epoch / std::max(options.epochs, 1);
      dbow_pass(docs[static_cast<std::size_t>(d)], v, word_out, false, sampler, options.negatives,
                lr, doc_rng, grad);
    }
    table.vectors.row(d) = v;
  }
  return table;
}

EmbeddingTable load_user_vectors(const std::filesystem::path& path,
                                 const std::vector<std::string>& user_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < user_names.size(); ++i) index.emplace(user_names[i], static_cast<int>(i));
  std::vector<std::pair<int, std::vector<double>>> rows;
  int dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name)) continue;
    std::vector<double> values;
    std::string tok;
    while (ss >> tok) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                             ": non-numeric value '" + tok + "'",
                         line_no);
      }
    }
    if (values.empty()) throw ParseError("user vector without values", line_no);
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                           ": inconsistent vector dimension",
                       line_no);
    }
    auto it = index.find(name);
    if (it != index.end()) rows.emplace_back(it->second, std::move(values));
  }
  if (dim < 0) throw DataError("no vectors in " + path.string());
  EmbeddingTable table{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(user_names.size()), dim)};
  for (const auto& [row, values] : rows) {
    for (int j = 0; j < dim; ++j) table.vectors(row, j) = values[static_cast<std::size_t>(j)];
  }
  return table;
}

}  // namespace kgtrust
