#include "kgtrust/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "kgtrust/seed.hpp"

namespace kgtrust {

const char* group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::Projection: return "projection";
    case ParamGroup::LayerWeight: return "layer_weight";
    case ParamGroup::TypeAttention: return "type_attention";
    case ParamGroup::NodeAttention: return "node_attention";
    case ParamGroup::Gate: return "gate";
    case ParamGroup::Predictor: return "predictor";
    case ParamGroup::Inputs: return "inputs";
  }
  return "unknown";
}

std::vector<ParamRef> ModelParams::tensors() {
  std::vector<ParamRef> out;
  const char* type_names[kNumNodeTypes] = {"user", "object"};
  for (int t = 0; t < kNumNodeTypes; ++t) {
    out.push_back({std::string("projection.") + type_names[t], &projection[t], ParamGroup::Projection, true});
  }
  auto add_encoder = [&](std::optional<RoleEncoder>& enc, const std::string& role) {
    if (!enc) return;
    for (std::size_t l = 0; l < enc->layers.size(); ++l) {
      auto& layer = enc->layers[l];
      const std::string prefix = role + ".layer" + std::to_string(l) + ".";
      for (int t = 0; t < kNumNodeTypes; ++t) {
        out.push_back({prefix + "weight." + type_names[t], &layer.weight[t], ParamGroup::LayerWeight, true});
      }
      for (int t = 0; t < kNumNodeTypes; ++t) {
        out.push_back({prefix + "type_attention." + type_names[t], &layer.type_attention[t],
                       ParamGroup::TypeAttention, true});
      }
      out.push_back({prefix + "node_attention", &layer.node_attention, ParamGroup::NodeAttention, true});
    }
  };
  add_encoder(trustor, "trustor");
  add_encoder(trustee, "trustee");
  if (gate) out.push_back({"gate", &gate->raw_gate, ParamGroup::Gate, false});
  for (std::size_t l = 0; l < predictor.layers.size(); ++l) {
    const std::string prefix = "predictor.layer" + std::to_string(l) + ".";
    out.push_back({prefix + "weight", &predictor.layers[l].weight, ParamGroup::Predictor, true});
    out.push_back({prefix + "bias", &predictor.layers[l].bias, ParamGroup::Predictor, false});
  }
  if (config.trainable_inputs) {
    out.push_back({"inputs.user", &user_inputs, ParamGroup::Inputs, true});
    out.push_back({"inputs.object", &object_inputs, ParamGroup::Inputs, true});
  }
  return out;
}

bool ModelParams::all_finite() {
  for (const auto& ref : tensors()) {
    if (!ref.value->allFinite()) return false;
  }
  return true;
}

namespace {

int fused_dim(const ModelConfig& c) {
  return c.trustor && c.trustee && c.fusion == FusionMode::Concat ? 2 * c.latent_dim : c.latent_dim;
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed, const EmbeddingTable* users,
                       const EmbeddingTable* objects) {
  if (!config.trustor && !config.trustee) throw std::invalid_argument("at least one role must be enabled");
  if (config.latent_dim <= 0 || config.num_layers < 1) throw std::invalid_argument("bad model dimensions");
  ModelParams p;
  p.config = config;
  std::mt19937_64 rng(mix_seed(seed, 0x6d6f64656c));
  p.projection[0] = glorot(config.latent_dim, config.user_input_dim, rng);
  p.projection[1] = glorot(config.latent_dim, config.object_input_dim, rng);
  if (config.trustor) p.trustor = init_encoder(Role::Trustor, config.latent_dim, config.num_layers, rng);
  if (config.trustee) p.trustee = init_encoder(Role::Trustee, config.latent_dim, config.num_layers, rng);
  if (config.trustor && config.trustee && config.fusion == FusionMode::Gate) {
    p.gate = GateParams{Matrix::Zero(1, config.latent_dim)};
  }
  p.predictor = init_predictor(2 * fused_dim(config), config.predictor_hidden, rng);
  if (config.trainable_inputs) {
    if (!users || !objects) throw std::invalid_argument("trainable inputs need initial tables");
    p.user_inputs = users->vectors;
    p.object_inputs = objects->vectors;
  }
  return p;
}

ForwardResult forward(const PipelineInputs& inputs, ModelParams& params,
                      const std::vector<TrustSample>& samples, const ForwardOptions& options) {
  if (samples.empty()) throw std::invalid_argument("forward: empty sample batch");
  const ModelConfig& cfg = params.config;
  if (!inputs.graph || (cfg.trustor && !inputs.trustor_view) || (cfg.trustee && !inputs.trustee_view)) {
    throw std::invalid_argument("forward: missing graph or view");
  }
  if (!cfg.trainable_inputs && (!inputs.users || !inputs.objects)) {
    throw std::invalid_argument("forward: missing input embeddings");
  }
  const int num_users = inputs.graph->num_users();

  ForwardResult r;
  r.tape = std::make_unique<Tape>();
  Tape& tape = *r.tape;
  auto refs = params.tensors();
  std::unordered_map<const Matrix*, Var> lookup;
  for (const auto& ref : refs) {
    Var v = options.record_grads ? tape.variable(*ref.value) : tape.constant(*ref.value);
    r.params.push_back(v);
    lookup.emplace(ref.value, v);
  }
  auto var_of = [&](const Matrix& m) { return lookup.at(&m); };

  Var users = cfg.trainable_inputs ? var_of(params.user_inputs) : tape.constant(inputs.users->vectors);
  Var objects =
      cfg.trainable_inputs ? var_of(params.object_inputs) : tape.constant(inputs.objects->vectors);
  if (users.rows() != num_users || objects.rows() != inputs.graph->num_objects()) {
    throw std::invalid_argument("forward: input tables do not match the graph");
  }
  if (users.cols() != params.projection[0].cols() || objects.cols() != params.projection[1].cols()) {
    throw std::invalid_argument("forward: input dims do not match the projections");
  }
  Var h0 = ad::vstack(ad::matmul(users, ad::transpose(var_of(params.projection[0]))),
                      ad::matmul(objects, ad::transpose(var_of(params.projection[1]))));

  PropagateOptions prop;
  if (options.dropout_rng && cfg.dropout > 0.0) {
    prop.dropout = cfg.dropout;
    prop.rng = options.dropout_rng;
  }
  auto layers_of = [&](const RoleEncoder& enc) {
    std::vector<LayerVars> layers;
    for (const auto& layer : enc.layers) {
      LayerVars lv;
      for (int t = 0; t < kNumNodeTypes; ++t) {
        lv.weight[t] = var_of(layer.weight[t]);
        lv.type_attention[t] = var_of(layer.type_attention[t]);
      }
      lv.node_attention = var_of(layer.node_attention);
      layers.push_back(lv);
    }
    return layers;
  };

  std::optional<Var> as_trustor;
  std::optional<Var> as_trustee;
  if (cfg.trustor) {
    Var h = encode_role(tape, h0, *inputs.trustor_view, layers_of(*params.trustor), prop,
                        options.keep_traces ? &r.trustor_trace : nullptr);
    as_trustor = ad::row_block(h, 0, num_users);
  }
  if (cfg.trustee) {
    Var h = encode_role(tape, h0, *inputs.trustee_view, layers_of(*params.trustee), prop,
                        options.keep_traces ? &r.trustee_trace : nullptr);
    as_trustee = ad::row_block(h, 0, num_users);
  }
  if (as_trustor && as_trustee) {
    r.fused = cfg.fusion == FusionMode::Gate
                  ? ad::gated_fuse(*as_trustor, *as_trustee, var_of(params.gate->raw_gate))
                  : ad::concat_cols(*as_trustor, *as_trustee);
  } else {
    r.fused = as_trustor ? *as_trustor : *as_trustee;
  }

  PredictorVars predictor;
  for (const auto& layer : params.predictor.layers) {
    predictor.weight.push_back(var_of(layer.weight));
    predictor.bias.push_back(var_of(layer.bias));
  }
  r.logits = pair_logits(tape, r.fused, samples, predictor);
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  r.loss = ad::softmax_cross_entropy(r.logits, labels);
  return r;
}

Gradients backward(ForwardResult& result) {
  if (!result.tape) throw std::logic_error("backward: no tape");
  result.tape->backward(result.loss);
  Gradients grads;
  grads.reserve(result.params.size());
  for (Var v : result.params) grads.push_back(v.grad());
  return grads;
}

Matrix fused_embeddings(const PipelineInputs& inputs, ModelParams& params) {
  // The predictor needs some sample; a single self pair is never scored.
  std::vector<TrustSample> dummy{{0, 0, 0, Split::Test}};
  ForwardOptions options;
  options.record_grads = false;
  return forward(inputs, params, dummy, options).fused.value();
}

std::vector<double> predict_samples(const Matrix& fused, const std::vector<TrustSample>& samples,
                                    const PredictorParams& predictor) {
  const Eigen::Index d = fused.cols();
  Matrix h(static_cast<Eigen::Index>(samples.size()), 2 * d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    h.row(static_cast<Eigen::Index>(i)) << fused.row(samples[i].trustor), fused.row(samples[i].trustee);
  }
  for (std::size_t l = 0; l < predictor.layers.size(); ++l) {
    Matrix next = h * predictor.layers[l].weight.transpose();
    next.rowwise() += predictor.layers[l].bias.row(0);
    if (l + 1 < predictor.layers.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  std::vector<double> p(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // softmax over two logits
    const double diff = h(static_cast<Eigen::Index>(i), 0) - h(static_cast<Eigen::Index>(i), 1);
    p[i] = 1.0 / (1.0 + std::exp(diff));
  }
  return p;
}

void adam_update(const std::vector<Matrix*>& tensors, const std::vector<bool>& decay,
                 const Gradients& grads, AdamState& state, const AdamOptions& options) {
  if (tensors.size() != grads.size() || tensors.size() != decay.size()) {
    throw std::invalid_argument("adam: tensor and gradient lists differ");
  }
  if (state.first.size() != tensors.size()) {
    state.first.clear();
    state.second.clear();
    for (const Matrix* t : tensors) {
      state.first.push_back(Matrix::Zero(t->rows(), t->cols()));
      state.second.push_back(Matrix::Zero(t->rows(), t->cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix& theta = *tensors[i];
    if (grads[i].rows() != theta.rows() || grads[i].cols() != theta.cols()) {
      throw std::invalid_argument("adam: gradient shape differs from parameter");
    }
    Matrix g = grads[i];
    if (decay[i] && options.weight_decay != 0.0) g += options.weight_decay * theta;
    state.first[i] = options.beta1 * state.first[i] + (1.0 - options.beta1) * g;
    state.second[i] = options.beta2 * state.second[i] + (1.0 - options.beta2) * g.cwiseAbs2();
    theta.array() -= options.learning_rate * (state.first[i].array() / c1) /
                     ((state.second[i].array() / c2).sqrt() + options.epsilon);
  }
}

void adam_step(ModelParams& params, const Gradients& grads, const AdamOptions& options) {
  std::vector<Matrix*> tensors;
  std::vector<bool> decay;
  for (const auto& ref : params.tensors()) {
    tensors.push_back(ref.value);
    decay.push_back(ref.decay);
  }
  adam_update(tensors, decay, grads, params.adam, options);
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

Matrix numeric_gradient(const std::function<double()>& loss, Matrix& param, double step) {
  Matrix g(param.rows(), param.cols());
  for (Eigen::Index k = 0; k < param.size(); ++k) {
    const double saved = param.data()[k];
    param.data()[k] = saved + step;
    const double up = loss();
    param.data()[k] = saved - step;
    const double down = loss();
    param.data()[k] = saved;
    g.data()[k] = (up - down) / (2.0 * step);
  }
  return g;
}

GradCheckReport grad_check(const PipelineInputs& inputs, ModelParams& params,
                           const std::vector<TrustSample>& samples, double tolerance,
                           const Gradients* analytic, std::size_t max_entries, double step) {
  Gradients computed;
  if (!analytic) {
    ForwardResult fr = forward(inputs, params, samples);
    computed = backward(fr);
    analytic = &computed;
  }
  auto refs = params.tensors();
  if (analytic->size() != refs.size()) throw std::invalid_argument("grad_check: gradient count mismatch");
  auto loss = [&] {
    ForwardOptions o;
    o.record_grads = false;
    return forward(inputs, params, samples, o).loss.value()(0, 0);
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<GroupError> groups;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Matrix& theta = *refs[i].value;
    const Matrix& a = (*analytic)[i];
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const GroupError& g) { return g.group == refs[i].group; });
    if (it == groups.end()) {
      groups.push_back({refs[i].group, 0.0, 0});
      it = groups.end() - 1;
    }
    const auto size = static_cast<std::size_t>(theta.size());
    const std::size_t stride = max_entries == 0 || size <= max_entries ? 1 : (size + max_entries - 1) / max_entries;
    for (std::size_t k = 0; k < size; k += stride) {
      const double saved = theta.data()[k];
      theta.data()[k] = saved + step;
      const double up = loss();
      theta.data()[k] = saved - step;
      const double down = loss();
      theta.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      it->max_relative_error = std::max(it->max_relative_error, relative_error(a.data()[k], numeric));
      ++it->checked;
    }
  }
  report.groups = groups;
  for (const auto& g : groups) report.max_relative_error = std::max(report.max_relative_error, g.max_relative_error);
  report.passed = report.max_relative_error < tolerance;
  return report;
}

TrainResult train_model(const PipelineInputs& inputs, ModelParams& params,
                        const std::vector<TrustSample>& train, const std::vector<TrustSample>& test,
                        const TrainOptions& options) {
  if (train.empty()) throw std::invalid_argument("train_model: no training samples");
  std::vector<int> test_labels;
  for (const auto& s : test) test_labels.push_back(s.label);
  std::mt19937_64 dropout_rng(mix_seed(options.seed, 0xd7));
  const bool use_dropout = params.config.dropout > 0.0;

  TrainResult result;
  result.best.accuracy = -1.0;
  auto consider = [&](const Metrics& m, int updates) {
    if (m.accuracy > result.best.accuracy) {
      result.best = m;
      result.best_epoch = updates;
    }
  };
  auto evaluate = [&](const Matrix& fused) {
    if (test.empty()) return Metrics{};
    return metrics(predict_samples(fused, test, params.predictor), test_labels);
  };

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    ForwardOptions fo;
    if (use_dropout) fo.dropout_rng = &dropout_rng;
    ForwardResult fr = forward(inputs, params, train, fo);
    const double loss = fr.loss.value()(0, 0);
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
    const Metrics m = evaluate(use_dropout ? fused_embeddings(inputs, params) : fr.fused.value());
    consider(m, epoch - 1);
    Gradients grads = backward(fr);
    adam_step(params, grads, options.adam);
    if (!params.all_finite()) {
      throw NumericalError("non-finite parameter after epoch " + std::to_string(epoch));
    }
    result.trace.push_back({epoch, loss, m.accuracy, m.f1});
  }
  result.final = evaluate(fused_embeddings(inputs, params));
  consider(result.final, options.epochs);
  return result;
}

void save_checkpoint(const std::filesystem::path& path, ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const ModelConfig& c = params.config;
  nlohmann::json config = {
      {"user_input_dim", c.user_input_dim}, {"object_input_dim", c.object_input_dim},
      {"latent_dim", c.latent_dim},         {"num_layers", c.num_layers},
      {"trustor", c.trustor},               {"trustee", c.trustee},
      {"fusion", c.fusion == FusionMode::Gate ? "gate" : "concat"},
      {"predictor_hidden", c.predictor_hidden},
      {"trainable_inputs", c.trainable_inputs}, {"dropout", c.dropout}};
  out << "kgtrust-checkpoint 1\n";
  out << "config " << config.dump() << "\n";
  out << std::setprecision(17);
  for (const auto& ref : params.tensors()) {
    out << "tensor " << ref.name << ' ' << ref.value->rows() << ' ' << ref.value->cols() << '\n';
    for (Eigen::Index r = 0; r < ref.value->rows(); ++r) {
      for (Eigen::Index col = 0; col < ref.value->cols(); ++col) {
        out << (col ? " " : "") << (*ref.value)(r, col);
      }
      out << '\n';
    }
  }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "kgtrust-checkpoint" || version != 1) {
    throw ParseError("not a version-1 kgtrust checkpoint: " + path.string(), 1);
  }
  std::string key;
  in >> key;
  if (key != "config") throw ParseError("checkpoint is missing its config line", 2);
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  ModelConfig c;
  c.user_input_dim = j.at("user_input_dim");
  c.object_input_dim = j.at("object_input_dim");
  c.latent_dim = j.at("latent_dim");
  c.num_layers = j.at("num_layers");
  c.trustor = j.at("trustor");
  c.trustee = j.at("trustee");
  c.fusion = j.at("fusion") == "gate" ? FusionMode::Gate : FusionMode::Concat;
  c.predictor_hidden = j.at("predictor_hidden").get<std::vector<int>>();
  c.trainable_inputs = j.at("trainable_inputs");
  c.dropout = j.at("dropout");

  // Shapes come from the config; trainable input tables take theirs from the file.
  ModelConfig shape = c;
  shape.trainable_inputs = false;
  ModelParams params = init_model(shape, 0, nullptr, nullptr);
  params.config.trainable_inputs = c.trainable_inputs;
  for (const auto& ref : params.tensors()) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "tensor" || name != ref.name) {
      throw ParseError("checkpoint tensor '" + ref.name + "' missing or out of order", 0);
    }
    if (ref.group != ParamGroup::Inputs && (rows != ref.value->rows() || cols != ref.value->cols())) {
      throw ParseError("checkpoint tensor '" + ref.name + "' has the wrong shape", 0);
    }
    ref.value->resize(rows, cols);
    for (Eigen::Index k = 0; k < rows * cols; ++k) {
      double v;
      if (!(in >> v)) throw ParseError("truncated checkpoint tensor '" + ref.name + "'", 0);
      (*ref.value)(k / cols, k % cols) = v;
    }
  }
  return params;
}

}  // namespace kgtrust
