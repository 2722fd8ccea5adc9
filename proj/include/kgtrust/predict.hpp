#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "kgtrust/graph.hpp"
#include "kgtrust/tape.hpp"

namespace kgtrust {

/// Affine layers over [z_i || z_j]; hidden layers use ReLU, the last layer
/// maps to two logits (index 0 = no trust, 1 = trust).
struct PredictorParams {
  struct Layer {
    Matrix weight;  // out x in
    Matrix bias;    // 1 x out
  };
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
};

PredictorParams init_predictor(int input_dim, const std::vector<int>& hidden, std::mt19937_64& rng);

/// softmax(MLP(z_i || z_j)); returns (p_no_trust, p_trust).
Eigen::Vector2d predict_pair(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                             const PredictorParams& params);

/// Mean cross-entropy of the samples' labels under predict_pair. Rows of Z are
/// indexed by user id.
double batch_loss(const std::vector<TrustSample>& samples, const Matrix& Z,
                  const PredictorParams& params);

struct PredictorVars {
  std::vector<Var> weight;
  std::vector<Var> bias;
};

PredictorVars record_predictor(Tape& tape, const PredictorParams& params, bool trainable);

/// Logits (samples x 2) for the ordered pairs.
Var pair_logits(Tape& tape, Var Z, const std::vector<TrustSample>& samples,
                const PredictorVars& predictor);

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// Predicted label is the argmax of (1 - p, p), so p > 0.5 means trust. F1 is
/// on the trust class and is 0 when there are no true positives.
Metrics metrics(const std::vector<double>& trust_probability, const std::vector<int>& labels);

}  // namespace kgtrust
