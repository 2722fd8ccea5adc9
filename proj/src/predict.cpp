#include "kgtrust/predict.hpp"

#include <cmath>
#include <stdexcept>

#include "kgtrust/conv.hpp"

namespace kgtrust {

PredictorParams init_predictor(int input_dim, const std::vector<int>& hidden, std::mt19937_64& rng) {
  PredictorParams p;
  int in = input_dim;
  std::vector<int> widths = hidden;
  widths.push_back(2);
  for (int out : widths) {
    p.layers.push_back({glorot(out, in, rng), Matrix::Zero(1, out)});
    in = out;
  }
  return p;
}

namespace {

Eigen::VectorXd mlp(const Eigen::VectorXd& x, const PredictorParams& params) {
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    h = layer.weight * h + layer.bias.row(0).transpose();
    if (l + 1 < params.layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

}  // namespace

Eigen::Vector2d predict_pair(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j,
                             const PredictorParams& params) {
  if (z_i.size() != z_j.size() || 2 * z_i.size() != params.input_dim()) {
    throw std::invalid_argument("predict_pair: embedding size does not match the predictor");
  }
  Eigen::VectorXd x(z_i.size() + z_j.size());
  x << z_i, z_j;
  const Eigen::VectorXd logits = mlp(x, params);
  const double hi = logits.maxCoeff();
  Eigen::Vector2d p((logits.array() - hi).exp().matrix());
  return p / p.sum();
}

double batch_loss(const std::vector<TrustSample>& samples, const Matrix& Z,
                  const PredictorParams& params) {
  if (samples.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& s : samples) {
    Eigen::VectorXd x(2 * Z.cols());
    x << Z.row(s.trustor).transpose(), Z.row(s.trustee).transpose();
    const Eigen::VectorXd logits = mlp(x, params);
    const double hi = logits.maxCoeff();
    const double log_z = hi + std::log((logits.array() - hi).exp().sum());
    total -= logits(s.label) - log_z;
  }
  return total / static_cast<double>(samples.size());
}

PredictorVars record_predictor(Tape& tape, const PredictorParams& params, bool trainable) {
  PredictorVars vars;
  for (const auto& layer : params.layers) {
    vars.weight.push_back(trainable ? tape.variable(layer.weight) : tape.constant(layer.weight));
    vars.bias.push_back(trainable ? tape.variable(layer.bias) : tape.constant(layer.bias));
  }
  return vars;
}

Var pair_logits(Tape& tape, Var Z, const std::vector<TrustSample>& samples,
                const PredictorVars& predictor) {
  (void)tape;
  std::vector<int> from;
  std::vector<int> to;
  from.reserve(samples.size());
  to.reserve(samples.size());
  for (const auto& s : samples) {
    from.push_back(s.trustor);
    to.push_back(s.trustee);
  }
  Var h = ad::concat_cols(ad::gather_rows(Z, from), ad::gather_rows(Z, to));
  for (std::size_t l = 0; l < predictor.weight.size(); ++l) {
    h = ad::add_row(ad::matmul(h, ad::transpose(predictor.weight[l])), predictor.bias[l]);
    if (l + 1 < predictor.weight.size()) h = ad::leaky_relu(h, 0.0);
  }
  return h;
}

Metrics metrics(const std::vector<double>& trust_probability, const std::vector<int>& labels) {
  if (trust_probability.empty()) throw std::invalid_argument("metrics: empty input");
  if (trust_probability.size() != labels.size()) {
    throw std::invalid_argument("metrics: predictions and labels differ in length");
  }
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = trust_probability[i] > 0.5;
    const bool actual = labels[i] == 1;
    if (predicted == actual) ++correct;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  m.f1 = tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  return m;
}

}  // namespace kgtrust
