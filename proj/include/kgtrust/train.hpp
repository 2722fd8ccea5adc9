#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgtrust/conv.hpp"
#include "kgtrust/embed.hpp"
#include "kgtrust/graph.hpp"
#include "kgtrust/predict.hpp"
#include "kgtrust/tape.hpp"

namespace kgtrust {

/// NaN/Inf detected in a loss or parameter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FusionMode { Gate, Concat };

struct ModelConfig {
  int user_input_dim = 64;
  int object_input_dim = 64;
  int latent_dim = 64;
  int num_layers = 2;
  bool trustor = true;
  bool trustee = true;
  FusionMode fusion = FusionMode::Gate;
  std::vector<int> predictor_hidden;
  /// Initial user/object vectors become parameters.
  bool trainable_inputs = false;
  double dropout = 0.0;
};

enum class ParamGroup { Projection, LayerWeight, TypeAttention, NodeAttention, Gate, Predictor, Inputs };
const char* group_name(ParamGroup group);

struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  ParamGroup group = ParamGroup::Projection;
  bool decay = true;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

struct ModelParams {
  ModelConfig config;
  std::array<Matrix, kNumNodeTypes> projection;  // latent x input dim, per node type
  std::optional<RoleEncoder> trustor;
  std::optional<RoleEncoder> trustee;
  std::optional<GateParams> gate;
  PredictorParams predictor;
  Matrix user_inputs;    // only with trainable_inputs
  Matrix object_inputs;  // only with trainable_inputs
  AdamState adam;

  /// Every trainable tensor in a fixed order.
  std::vector<ParamRef> tensors();
  bool all_finite();
};

/// Random initialization. With trainable inputs the given tables seed
/// user_inputs / object_inputs.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed,
                       const EmbeddingTable* users = nullptr, const EmbeddingTable* objects = nullptr);

/// Everything the forward pass reads besides parameters. Views must have been
/// prepared from the same graph.
struct PipelineInputs {
  const HeteroGraph* graph = nullptr;
  const ViewOperators* trustor_view = nullptr;
  const ViewOperators* trustee_view = nullptr;
  const EmbeddingTable* users = nullptr;
  const EmbeddingTable* objects = nullptr;
};

struct ForwardResult {
  std::unique_ptr<Tape> tape;
  Var loss;
  Var fused;                     // user rows of Z
  Var logits;                    // samples x 2
  std::vector<Var> params;       // aligned with ModelParams::tensors()
  std::vector<LayerTrace> trustor_trace;
  std::vector<LayerTrace> trustee_trace;
};

struct ForwardOptions {
  bool record_grads = true;
  std::mt19937_64* dropout_rng = nullptr;  // dropout only applies when set
  bool keep_traces = false;
};

/// project -> encode both roles -> fuse -> predictor -> mean cross-entropy.
ForwardResult forward(const PipelineInputs& inputs, ModelParams& params,
                      const std::vector<TrustSample>& samples, const ForwardOptions& options = {});

using Gradients = std::vector<Matrix>;

/// Gradients for every tensor of the forward's ModelParams (same order).
/// The tape is consumed; a second call throws std::logic_error.
Gradients backward(ForwardResult& result);

/// Fused user embeddings (num_users x fused dim) without recording gradients.
Matrix fused_embeddings(const PipelineInputs& inputs, ModelParams& params);

/// P(trust) for each sample under the current parameters.
std::vector<double> predict_samples(const Matrix& fused, const std::vector<TrustSample>& samples,
                                    const PredictorParams& predictor);

struct AdamOptions {
  double learning_rate = 0.005;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with L2 decay added to the gradient of decayed tensors.
void adam_update(const std::vector<Matrix*>& tensors, const std::vector<bool>& decay,
                 const Gradients& grads, AdamState& state, const AdamOptions& options);
void adam_step(ModelParams& params, const Gradients& grads, const AdamOptions& options = {});

// ---------------------------------------------------------------------------
// Gradient verification

struct GroupError {
  ParamGroup group;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GroupError> groups;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor) per entry.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central difference of `loss` with respect to every entry of `param`.
Matrix numeric_gradient(const std::function<double()>& loss, Matrix& param, double step = 1e-5);

/// Compares analytic gradients with central differences for every tensor.
/// `analytic` overrides the backward() result (used for negative controls).
/// `max_entries` caps how many entries of each tensor are perturbed
/// (evenly strided; 0 = all).
GradCheckReport grad_check(const PipelineInputs& inputs, ModelParams& params,
                           const std::vector<TrustSample>& samples, double tolerance,
                           const Gradients* analytic = nullptr, std::size_t max_entries = 0,
                           double step = 1e-5);

// ---------------------------------------------------------------------------
// Training loop

struct TrainOptions {
  int epochs = 200;
  AdamOptions adam;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double test_accuracy = 0.0;
  double test_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  Metrics best;       // best test accuracy over epochs, with its F1
  int best_epoch = 0;
  Metrics final;
};

/// Full-batch training. Row e of the trace holds the loss of update e and
/// the test metrics of the parameters that update started from. `final` holds
/// the evaluation after the last update.
TrainResult train_model(const PipelineInputs& inputs, ModelParams& params,
                        const std::vector<TrustSample>& train, const std::vector<TrustSample>& test,
                        const TrainOptions& options);

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace kgtrust
