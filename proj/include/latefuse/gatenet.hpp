#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "latefuse/core.hpp"
#include "latefuse/fusion.hpp"

namespace latefuse {

// One-hidden-layer rectifier MLP producing one gate logit per expert.
struct GateMLP {
  int input_dim = 0;   // modality_count * class_count + context_dim
  int hidden_dim = 0;
  int output_dim = 0;  // modality count
  Vec w1;              // hidden_dim x input_dim, row-major
  Vec b1;              // hidden_dim
  Vec w2;              // output_dim x hidden_dim, row-major
  Vec b2;              // output_dim

  static GateMLP zeros(int input_dim, int hidden_dim, int output_dim);
  bool operator==(const GateMLP&) const = default;
};

// Constant mode trains only the output bias and freezes everything else at
// zero, giving an input-independent gate; input-conditioned is the full MLP.
enum class GateMode { input_conditioned, constant };

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  int hidden_dim = 32;
  GateMode gate_mode = GateMode::input_conditioned;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training loss, one entry per epoch
  double final_train_accuracy = 0.0;
  std::optional<double> final_holdout_accuracy;
  std::uint64_t seed = 0;
};

// Expert score vectors concatenated in modality order, then context features.
Vec gate_input(const SampleRecord& sample);

// logits w = W2. relu(W1 . input + b1) + b2, weights z = stable_softmax(w)
std::pair<Vec, GatingWeights> gate_forward(const GateMLP& net, const Vec& input);

// Fused prediction y = sum_j z_j x_j together with the gate weights used.
std::pair<Vec, GatingWeights> gated_fuse(const GateMLP& net, const SampleRecord& sample);

struct GateGradients {
  Vec w1, b1, w2, b2;  // same shapes as the corresponding parameters
};

// Cross-entropy -ln y[label] and its analytic gradients w.r.t. all
// parameters, backpropagated through the weighted sum and softmax Jacobian.
std::pair<double, GateGradients> loss_and_grads(const GateMLP& net, const SampleRecord& sample);

// Max over parameters of |analytic - central difference| scaled by
// max(|analytic|, |numeric|, 1e-8).
double gradient_check(const GateMLP& net, const SampleRecord& sample, double h);

// Randomized gradient checks over `trials` freshly drawn (net, sample) pairs
// (dims, parameters, and probability-vector scores all derived from seed);
// returns the max relative error seen. corrupt_one is a negative-control
// hook that perturbs one analytic gradient entry per trial, which must make
// the check fail.
double gradient_check_trials(int trials, std::uint64_t seed, double h,
                             bool corrupt_one = false);

// Deterministic (train, holdout) index split: indices shuffled by seed, the
// last round(holdout_fraction * N) form the holdout.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::size_t sample_count, double holdout_fraction, std::uint64_t seed);

// Minibatch SGD with classical momentum on the mean cross-entropy of the
// gated fusion. Split, initialization, and shuffling all derive from
// config.seed; identical inputs give bit-identical results.
std::pair<GateMLP, TrainReport> train_gate(const MultimodalDataset& dataset,
                                           const TrainConfig& config,
                                           double holdout_fraction = 0.0);

struct FixedStrategy {
  GatingWeights weights;
};
struct AverageStrategy {};
struct ConcatLinearStrategy {
  LinearConcatModel model;
};
struct GatedStrategy {
  GateMLP net;
};
using Strategy = std::variant<FixedStrategy, AverageStrategy, ConcatLinearStrategy, GatedStrategy>;

struct EvalResult {
  double accuracy = 0.0;
  double mean_log_loss = 0.0;
  ConfusionMatrix confusion;
  // fixed/average: the constant weights; gated: mean weight per modality
  std::optional<Vec> mean_gate_weights;
};

EvalResult evaluate(const MultimodalDataset& dataset, const Strategy& strategy);

}  // namespace latefuse
