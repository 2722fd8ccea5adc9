#include "kgtrust/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "kgtrust/seed.hpp"

namespace kgtrust {

using nlohmann::json;

std::string ExperimentConfig::dataset_label() const {
  if (!dataset.name.empty()) return dataset.name;
  return dataset.kind == DatasetKind::FilmTrust ? "filmtrust" : "siot";
}

bool ExperimentConfig::resolved_trainable_inputs() const {
  if (trainable_inputs) return *trainable_inputs;
  return dataset.kind == DatasetKind::FilmTrust;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = {{"kind", c.dataset.kind == DatasetKind::FilmTrust ? "filmtrust" : "siot"},
                  {"path", c.dataset.path.string()},
                  {"name", c.dataset.name},
                  {"min_user_comments", c.dataset.min_user_comments},
                  {"min_object_comments", c.dataset.min_object_comments},
                  {"user_vectors", c.dataset.user_vectors.string()}};
  j["train_ratio"] = c.train_ratio;
  j["seed"] = c.seed;
  j["repeats"] = c.repeats;
  j["epochs"] = c.epochs;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir.string();
  j["save_checkpoints"] = c.save_checkpoints;
  j["input_dim"] = c.input_dim;
  j["latent_dim"] = c.latent_dim;
  j["layers"] = c.layers;
  j["predictor_hidden"] = c.predictor_hidden;
  j["dropout"] = c.dropout;
  j["trainable_inputs"] = c.trainable_inputs ? json(*c.trainable_inputs) : json("auto");
  j["ppr"] = {{"enabled", c.ppr.enabled},
              {"k", c.ppr.k},
              {"lambda", c.ppr.lambda},
              {"epsilon", c.ppr.epsilon},
              {"transition", c.ppr.transition == PprTransition::RandomWalk ? "walk" : "symmetric"},
              {"weighted", c.ppr.weighted}};
  j["roles"] = {{"trustor_enabled", c.roles.trustor_enabled},
                {"trustee_enabled", c.roles.trustee_enabled}};
  j["fusion"] = c.fusion == FusionMode::Gate ? "gate" : "concat";
  j["triples"] = {{"enabled", c.triples.enabled},
                  {"path", c.triples.path.string()},
                  {"full_kg", c.triples.full_kg},
                  {"epochs", c.triples.epochs},
                  {"margin", c.triples.margin},
                  {"learning_rate", c.triples.learning_rate}};
  j["doc"] = {{"epochs", c.doc.epochs},
              {"negatives", c.doc.negatives},
              {"min_count", c.doc.min_count},
              {"learning_rate", c.doc.learning_rate}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  return j;
}

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("config section '" + prefix_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + prefix_ + key + "' has the wrong type");
    }
  }

  void path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <typename E>
  void choice(const char* key, E& out, const std::map<std::string, E>& names) {
    if (!j_.contains(key)) return;
    std::string s;
    get(key, s);
    auto it = names.find(s);
    if (it == names.end()) throw ConfigError("config key '" + prefix_ + key + "' has unknown value '" + s + "'");
    out = it->second;
  }

  const json* section(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + prefix_ + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader top(j, "");
  if (const json* d = top.section("dataset")) {
    ObjectReader r(*d, "dataset.");
    r.choice("kind", c.dataset.kind,
             std::map<std::string, DatasetKind>{{"filmtrust", DatasetKind::FilmTrust}, {"siot", DatasetKind::Siot}});
    r.path("path", c.dataset.path);
    r.get("name", c.dataset.name);
    r.get("min_user_comments", c.dataset.min_user_comments);
    r.get("min_object_comments", c.dataset.min_object_comments);
    r.path("user_vectors", c.dataset.user_vectors);
    r.finish();
  }
  top.get("train_ratio", c.train_ratio);
  top.get("seed", c.seed);
  top.get("repeats", c.repeats);
  top.get("epochs", c.epochs);
  top.get("workers", c.workers);
  top.path("output_dir", c.output_dir);
  top.get("save_checkpoints", c.save_checkpoints);
  top.get("input_dim", c.input_dim);
  top.get("latent_dim", c.latent_dim);
  top.get("layers", c.layers);
  top.get("predictor_hidden", c.predictor_hidden);
  top.get("dropout", c.dropout);
  if (const json* t = top.section("trainable_inputs")) {
    if (t->is_boolean()) {
      c.trainable_inputs = t->get<bool>();
    } else if (!(t->is_string() && t->get<std::string>() == "auto")) {
      throw ConfigError("config key 'trainable_inputs' must be true, false or \"auto\"");
    }
  }
  if (const json* p = top.section("ppr")) {
    ObjectReader r(*p, "ppr.");
    r.get("enabled", c.ppr.enabled);
    r.get("k", c.ppr.k);
    r.get("lambda", c.ppr.lambda);
    r.get("epsilon", c.ppr.epsilon);
    r.choice("transition", c.ppr.transition,
             std::map<std::string, PprTransition>{{"walk", PprTransition::RandomWalk},
                                                  {"symmetric", PprTransition::Symmetric}});
    r.get("weighted", c.ppr.weighted);
    r.finish();
  }
  if (const json* p = top.section("roles")) {
    ObjectReader r(*p, "roles.");
    r.get("trustor_enabled", c.roles.trustor_enabled);
    r.get("trustee_enabled", c.roles.trustee_enabled);
    r.finish();
  }
  top.choice("fusion", c.fusion,
             std::map<std::string, FusionMode>{{"gate", FusionMode::Gate}, {"concat", FusionMode::Concat}});
  if (const json* p = top.section("triples")) {
    ObjectReader r(*p, "triples.");
    r.get("enabled", c.triples.enabled);
    r.path("path", c.triples.path);
    r.get("full_kg", c.triples.full_kg);
    r.get("epochs", c.triples.epochs);
    r.get("margin", c.triples.margin);
    r.get("learning_rate", c.triples.learning_rate);
    r.finish();
  }
  if (const json* p = top.section("doc")) {
    ObjectReader r(*p, "doc.");
    r.get("epochs", c.doc.epochs);
    r.get("negatives", c.doc.negatives);
    r.get("min_count", c.doc.min_count);
    r.get("learning_rate", c.doc.learning_rate);
    r.finish();
  }
  if (const json* p = top.section("optimizer")) {
    ObjectReader r(*p, "optimizer.");
    r.get("learning_rate", c.optimizer.learning_rate);
    r.get("weight_decay", c.optimizer.weight_decay);
    r.get("beta1", c.optimizer.beta1);
    r.get("beta2", c.optimizer.beta2);
    r.get("epsilon", c.optimizer.epsilon);
    r.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!c.dataset.path.empty(), "dataset.path is required");
  require(c.train_ratio > 0.0 && c.train_ratio < 1.0, "train_ratio must lie in (0, 1)");
  require(c.repeats >= 1, "repeats must be at least 1");
  require(c.epochs >= 0, "epochs must be non-negative");
  require(c.workers >= 1, "workers must be at least 1");
  require(c.input_dim >= 1 && c.latent_dim >= 1, "dimensions must be positive");
  require(c.layers >= 1, "layers must be at least 1");
  for (int h : c.predictor_hidden) require(h >= 1, "predictor_hidden widths must be positive");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
  require(c.ppr.k >= 1, "ppr.k must be at least 1");
  require(c.ppr.lambda > 0.0 && c.ppr.lambda < 1.0, "ppr.lambda must lie in (0, 1)");
  require(c.ppr.epsilon > 0.0, "ppr.epsilon must be positive");
  require(c.roles.trustor_enabled || c.roles.trustee_enabled, "at least one role must be enabled");
  require(c.triples.margin > 0.0, "triples.margin must be positive");
  require(c.triples.epochs >= 0, "triples.epochs must be non-negative");
  require(!(c.triples.enabled && c.dataset.kind == DatasetKind::FilmTrust),
          "FilmTrust has no object-entity alignment; disable triples");
  require(c.doc.epochs >= 0 && c.doc.negatives >= 1 && c.doc.min_count >= 1, "invalid doc settings");
  require(c.optimizer.learning_rate > 0.0 && c.optimizer.weight_decay >= 0.0, "invalid optimizer settings");
}

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& item : j.items()) flatten(item.value(), prefix.empty() ? item.key() : prefix + "." + item.key(), out);
  } else {
    out[prefix] = j;
  }
}

}  // namespace

std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::map<std::string, json> fa, fb;
  flatten(to_json(a), "", fa);
  flatten(to_json(b), "", fb);
  std::vector<std::string> out;
  for (const auto& [key, value] : fa) {
    if (fb.at(key) != value) out.push_back(key);
  }
  return out;
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::WoTriples: return "woTriples";
    case Variant::WoPpr: return "woPPR";
    case Variant::WoTrustee: return "woTrustee";
    case Variant::WoTrustor: return "woTrustor";
    case Variant::Concat: return "concat";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::WoTriples, Variant::WoPpr, Variant::WoTrustee, Variant::WoTrustor, Variant::Concat}) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown ablation variant '" + name + "'");
}

ExperimentConfig apply_variant(const ExperimentConfig& base, Variant v) {
  ExperimentConfig c = base;
  const bool both_roles = base.roles.trustor_enabled && base.roles.trustee_enabled;
  switch (v) {
    case Variant::WoTriples:
      if (!base.triples.enabled) throw ConfigError("woTriples needs a base config with triples enabled");
      c.triples.enabled = false;
      break;
    case Variant::WoPpr:
      if (!base.ppr.enabled) throw ConfigError("woPPR needs a base config with PPR enabled");
      c.ppr.enabled = false;
      break;
    case Variant::WoTrustee:
      if (!both_roles) throw ConfigError("woTrustee needs both roles enabled");
      c.roles.trustee_enabled = false;
      break;
    case Variant::WoTrustor:
      if (!both_roles) throw ConfigError("woTrustor needs both roles enabled");
      c.roles.trustor_enabled = false;
      break;
    case Variant::Concat:
      if (!both_roles || base.fusion != FusionMode::Gate) {
        throw ConfigError("concat needs both roles and gated fusion in the base config");
      }
      c.fusion = FusionMode::Concat;
      break;
  }
  return c;
}

SweepParam parse_sweep_param(const std::string& name) {
  for (SweepParam p : {SweepParam::PprK, SweepParam::LatentDim, SweepParam::TrainRatio}) {
    if (name == sweep_param_name(p)) return p;
  }
  throw ConfigError("unknown sweep parameter '" + name + "'");
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::PprK: return "ppr_k";
    case SweepParam::LatentDim: return "latent_dim";
    case SweepParam::TrainRatio: return "train_ratio";
  }
  return "unknown";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepParam p, double value) {
  ExperimentConfig c = base;
  auto as_int = [&](const char* what) {
    if (value != std::floor(value) || value < 1) {
      throw ConfigError(std::string(what) + " values must be positive integers");
    }
    return static_cast<int>(value);
  };
  switch (p) {
    case SweepParam::PprK: c.ppr.k = as_int("ppr_k"); break;
    case SweepParam::LatentDim: c.latent_dim = as_int("latent_dim"); break;
    case SweepParam::TrainRatio:
      if (!(value > 0.0 && value < 1.0)) throw ConfigError("train_ratio values must lie in (0, 1)");
      c.train_ratio = value;
      break;
  }
  return c;
}

PreparedData prepare_data(const ExperimentConfig& c) {
  validate(c);
  PreparedData data;
  data.kind = c.dataset.kind;
  if (c.dataset.kind == DatasetKind::FilmTrust) {
    auto ft = load_filmtrust(c.dataset.path / "ratings.txt", c.dataset.path / "trust.txt");
    data.graph = std::move(ft.graph);
    data.positives = std::move(ft.positives);
    data.stats = ft.stats;
    return data;
  }

  auto siot = load_siot_csv(c.dataset.path, c.dataset.min_user_comments, c.dataset.min_object_comments);
  data.graph = std::move(siot.graph);
  data.positives = std::move(siot.positives);
  data.stats = siot.stats;
  if (!c.dataset.user_vectors.empty()) {
    data.user_features = load_user_vectors(c.dataset.user_vectors, siot.user_names);
    if (data.user_features->dim() != c.input_dim) {
      throw ConfigError("user vector file has dim " + std::to_string(data.user_features->dim()) +
                        " but input_dim is " + std::to_string(c.input_dim));
    }
  } else {
    DocEmbedOptions doc;
    doc.dim = c.input_dim;
    doc.epochs = c.doc.epochs;
    doc.negatives = c.doc.negatives;
    doc.min_count = c.doc.min_count;
    doc.learning_rate = c.doc.learning_rate;
    doc.seed = c.seed;
    data.user_features = embed_users(siot.user_corpus, doc);
  }

  data.alignment.assign(siot.object_entity.size(), std::nullopt);
  if (c.triples.enabled) {
    const auto path = c.triples.path.empty() ? c.dataset.path / "triples.csv" : c.triples.path;
    const KnowledgeGraph kg = load_triples(path);
    std::vector<int> heads;
    for (std::size_t o = 0; o < siot.object_entity.size(); ++o) {
      if (!siot.object_entity[o]) continue;
      data.alignment[o] = kg.find_entity(*siot.object_entity[o]);
      if (data.alignment[o]) heads.push_back(*data.alignment[o]);
    }
    const auto triples = c.triples.full_kg ? kg.triples : triples_with_heads(kg.triples, heads);
    if (triples.empty()) throw DataError("no knowledge triples have an aligned object as head");
    TransEOptions opt;
    opt.dim = c.input_dim;
    opt.margin = c.triples.margin;
    opt.epochs = c.triples.epochs;
    opt.learning_rate = c.triples.learning_rate;
    opt.seed = mix_seed(c.seed, 0x7e);
    data.transe = transe_train(triples, kg.num_entities(), kg.num_relations(), opt);
  }
  return data;
}

namespace {

struct CellSetup {
  std::vector<TrustSample> train;
  std::vector<TrustSample> test;
  HeteroGraph graph;
  std::optional<GraphView> trustor_view;
  std::optional<GraphView> trustee_view;
  std::optional<ViewOperators> trustor_ops;
  std::optional<ViewOperators> trustee_ops;
  EmbeddingTable users;
  EmbeddingTable objects;
  ModelConfig model;

  PipelineInputs inputs() const {
    PipelineInputs in;
    in.graph = &graph;
    in.trustor_view = trustor_ops ? &*trustor_ops : nullptr;
    in.trustee_view = trustee_ops ? &*trustee_ops : nullptr;
    in.users = &users;
    in.objects = &objects;
    return in;
  }
};

// Views keep pointers into the setup, so it is built in place.
void setup_cell(CellSetup& s, const PreparedData& data, const ExperimentConfig& c, std::uint64_t seed) {
  const int num_users = data.graph.num_users();
  for (const auto& sample : split_samples(data.positives, num_users, c.train_ratio, seed)) {
    (sample.split == Split::Train ? s.train : s.test).push_back(sample);
  }
  s.graph = data.graph.with_trust_edges(train_trust_edges(s.train));
  Augmentation aug;
  if (c.ppr.enabled) {
    PprOptions opt;
    opt.lambda = c.ppr.lambda;
    opt.epsilon = c.ppr.epsilon;
    opt.transition = c.ppr.transition;
    aug = topk_augment(s.graph, c.ppr.k, opt);
  }
  const std::vector<double>* weights = c.ppr.weighted ? &aug.scores : nullptr;
  if (c.roles.trustor_enabled) {
    s.trustor_view = build_view(s.graph, aug.pairs, Role::Trustor, weights);
    s.trustor_ops = prepare_view(*s.trustor_view);
  }
  if (c.roles.trustee_enabled) {
    s.trustee_view = build_view(s.graph, aug.pairs, Role::Trustee, weights);
    s.trustee_ops = prepare_view(*s.trustee_view);
  }
  s.users = data.user_features ? *data.user_features
                               : random_unit_table(num_users, c.input_dim, mix_seed(seed, 0x75));
  const TransEModel* transe = c.triples.enabled && data.transe ? &*data.transe : nullptr;
  s.objects = init_objects(s.graph, data.alignment, transe, c.input_dim, mix_seed(seed, 0x6f));

  s.model.user_input_dim = s.users.dim();
  s.model.object_input_dim = s.objects.dim();
  s.model.latent_dim = c.latent_dim;
  s.model.num_layers = c.layers;
  s.model.trustor = c.roles.trustor_enabled;
  s.model.trustee = c.roles.trustee_enabled;
  s.model.fusion = c.fusion;
  s.model.predictor_hidden = c.predictor_hidden;
  s.model.trainable_inputs = c.resolved_trainable_inputs();
  s.model.dropout = c.dropout;
}

}  // namespace

CellResult run_cell(const PreparedData& data, const ExperimentConfig& config, std::uint64_t seed,
                    const std::string& variant, const CellOptions& options) {
  CellSetup s;
  setup_cell(s, data, config, seed);
  ModelParams params = init_model(s.model, mix_seed(seed, 0x70), &s.users, &s.objects);
  TrainOptions train;
  train.epochs = config.epochs;
  train.adam = config.optimizer;
  train.seed = seed;
  CellResult r;
  r.variant = variant;
  r.ratio = config.train_ratio;
  r.seed = seed;
  r.train = train_model(s.inputs(), params, s.train, s.test, train);
  if (!options.checkpoint_out.empty()) save_checkpoint(options.checkpoint_out, params);
  return r;
}

Metrics evaluate_checkpoint(const PreparedData& data, const ExperimentConfig& config, std::uint64_t seed,
                            const std::filesystem::path& checkpoint) {
  CellSetup s;
  setup_cell(s, data, config, seed);
  ModelParams params = load_checkpoint(checkpoint);
  const auto& m = params.config;
  if (m.latent_dim != s.model.latent_dim || m.trustor != s.model.trustor || m.trustee != s.model.trustee ||
      m.fusion != s.model.fusion || m.num_layers != s.model.num_layers) {
    throw ConfigError("checkpoint does not match the experiment config");
  }
  if (s.test.empty()) throw DataError("the split has no test samples");
  std::vector<int> labels;
  for (const auto& t : s.test) labels.push_back(t.label);
  const Matrix fused = fused_embeddings(s.inputs(), params);
  return metrics(predict_samples(fused, s.test, params.predictor), labels);
}

std::string metrics_header() { return "dataset,ratio,seed,variant,accuracy,f1"; }

std::string format_row(const MetricsRow& row) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", row.ratio);
  std::string out = row.dataset + "," + buf + "," + row.seed + "," + row.variant;
  std::snprintf(buf, sizeof buf, ",%.4f,%.4f", row.accuracy, row.f1);
  return out + buf;
}

void append_metrics(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot write " + path.string());
  if (fresh) out << metrics_header() << '\n';
  for (const auto& row : rows) out << format_row(row) << '\n';
}

void write_trace(const std::filesystem::path& path, const std::vector<EpochRecord>& trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss,test_acc\n";
  char buf[96];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.10f,%.6f\n", e.epoch, e.loss, e.test_accuracy);
    out << buf;
  }
}

std::vector<JobSummary> run_jobs(const PreparedData& data, const std::vector<ExperimentJob>& jobs) {
  if (jobs.empty()) return {};
  const ExperimentConfig& first = jobs.front().config;
  const std::filesystem::path out_dir = first.output_dir;

  struct Cell {
    std::size_t job;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    validate(jobs[j].config);
    for (std::uint64_t seed : derive_seeds(jobs[j].config.seed, jobs[j].config.repeats)) {
      cells.push_back({j, seed});
    }
  }

  auto cell_stem = [&](const Cell& cell) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", jobs[cell.job].config.train_ratio);
    return jobs[cell.job].variant + "-r" + buf + "-s" + std::to_string(cell.seed);
  };

  std::vector<CellResult> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        CellOptions opt;
        if (jobs[cells[i].job].config.save_checkpoints) {
          opt.checkpoint_out = out_dir / "checkpoints" / (cell_stem(cells[i]) + ".ckpt");
        }
        results[i] = run_cell(data, jobs[cells[i].job].config, cells[i].seed, jobs[cells[i].job].variant, opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (first.save_checkpoints) std::filesystem::create_directories(out_dir / "checkpoints");
  const int workers = std::min<int>(first.workers, static_cast<int>(cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<JobSummary> summaries(jobs.size());
  std::vector<MetricsRow> rows;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    summaries[j].variant = jobs[j].variant;
    summaries[j].ratio = jobs[j].config.train_ratio;
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& summary = summaries[cells[i].job];
    summary.cells.push_back(results[i]);
    write_trace(out_dir / "traces" / (cell_stem(cells[i]) + ".csv"), results[i].train.trace);
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& summary = summaries[j];
    const std::string label = jobs[j].config.dataset_label();
    for (const auto& cell : summary.cells) {
      summary.mean.accuracy += cell.train.best.accuracy / static_cast<double>(summary.cells.size());
      summary.mean.f1 += cell.train.best.f1 / static_cast<double>(summary.cells.size());
      rows.push_back({label, cell.ratio, std::to_string(cell.seed), cell.variant,
                      100.0 * cell.train.best.accuracy, 100.0 * cell.train.best.f1});
    }
    if (summary.cells.size() > 1) {
      rows.push_back({label, summary.ratio, "mean", summary.variant, 100.0 * summary.mean.accuracy,
                      100.0 * summary.mean.f1});
    }
  }
  append_metrics(out_dir / "metrics.csv", rows);
  return summaries;
}

std::vector<JobSummary> run(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  return run_jobs(data, {{config, "full"}});
}

std::vector<JobSummary> ablate(const ExperimentConfig& config, const std::vector<Variant>& variants,
                               bool include_base) {
  validate(config);
  std::vector<ExperimentJob> jobs;
  if (include_base) jobs.push_back({config, "full"});
  for (Variant v : variants) jobs.push_back({apply_variant(config, v), variant_name(v)});
  const PreparedData data = prepare_data(config);
  return run_jobs(data, jobs);
}

std::vector<JobSummary> sweep(const ExperimentConfig& config, SweepParam param, const std::vector<double>& values) {
  validate(config);
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentJob> jobs;
  for (double v : values) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    jobs.push_back({apply_sweep_value(config, param, v), std::string(sweep_param_name(param)) + "=" + buf});
  }
  const PreparedData data = prepare_data(config);
  return run_jobs(data, jobs);
}

}  // namespace kgtrust
