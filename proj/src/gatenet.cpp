#include "latefuse/gatenet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latefuse/rng.hpp"

namespace latefuse {

GateMLP GateMLP::zeros(int input_dim, int hidden_dim, int output_dim) {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
    throw InvalidInput("gate mlp: dimensions must be positive");
  GateMLP net;
  net.input_dim = input_dim;
  net.hidden_dim = hidden_dim;
  net.output_dim = output_dim;
  net.w1.assign(static_cast<std::size_t>(hidden_dim) * input_dim, 0.0);
  net.b1.assign(hidden_dim, 0.0);
  net.w2.assign(static_cast<std::size_t>(output_dim) * hidden_dim, 0.0);
  net.b2.assign(output_dim, 0.0);
  return net;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("train config: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw InvalidInput("train config: momentum must lie in [0, 1)");
  if (epochs <= 0) throw InvalidInput("train config: epochs must be positive");
  if (batch_size <= 0) throw InvalidInput("train config: batch size must be positive");
  if (!(init_scale > 0.0)) throw InvalidInput("train config: init scale must be positive");
  if (hidden_dim <= 0) throw InvalidInput("train config: hidden dim must be positive");
}

Vec gate_input(const SampleRecord& sample) {
  if (sample.scores.empty()) throw InvalidInput("gate input: sample has no expert scores");
  Vec u;
  for (const Vec& x : sample.scores) u.insert(u.end(), x.begin(), x.end());
  u.insert(u.end(), sample.context.begin(), sample.context.end());
  return u;
}

namespace {

struct ForwardState {
  Vec input;          // u
  Vec preactivation;  // a1 = W1 u + b1
  Vec hidden;         // relu(a1)
  Vec logits;         // w = W2 hidden + b2
  Vec gate;           // z = softmax(w)
};

ForwardState forward(const GateMLP& net, Vec input) {
  if (static_cast<int>(input.size()) != net.input_dim)
    throw InvalidInput("gate forward: input length does not match network input_dim");

  ForwardState st;
  st.preactivation.resize(net.hidden_dim);
  st.hidden.resize(net.hidden_dim);
  for (int t = 0; t < net.hidden_dim; ++t) {
    double acc = net.b1[t];
    const double* row = net.w1.data() + static_cast<std::size_t>(t) * net.input_dim;
    for (int j = 0; j < net.input_dim; ++j) acc += row[j] * input[j];
    st.preactivation[t] = acc;
    st.hidden[t] = acc > 0.0 ? acc : 0.0;
  }
  st.logits.resize(net.output_dim);
  for (int i = 0; i < net.output_dim; ++i) {
    double acc = net.b2[i];
    const double* row = net.w2.data() + static_cast<std::size_t>(i) * net.hidden_dim;
    for (int t = 0; t < net.hidden_dim; ++t) acc += row[t] * st.hidden[t];
    st.logits[i] = acc;
  }
  st.gate = stable_softmax(st.logits);
  st.input = std::move(input);
  return st;
}

void check_sample_shape(const GateMLP& net, const SampleRecord& sample) {
  if (sample.scores.empty() || static_cast<int>(sample.scores.size()) != net.output_dim)
    throw InvalidInput("gated fuse: sample modality count does not match gate output_dim");
}

double loss_only(const GateMLP& net, const SampleRecord& sample) {
  check_sample_shape(net, sample);
  const ForwardState st = forward(net, gate_input(sample));
  const Vec fused = fuse_weighted(sample.scores, GatingWeights{st.gate});
  return -std::log(std::max(fused[sample.label], kLogLossClamp));
}

}  // namespace

std::pair<Vec, GatingWeights> gate_forward(const GateMLP& net, const Vec& input) {
  ForwardState st = forward(net, input);
  return {std::move(st.logits), GatingWeights{std::move(st.gate)}};
}

std::pair<Vec, GatingWeights> gated_fuse(const GateMLP& net, const SampleRecord& sample) {
  check_sample_shape(net, sample);
  ForwardState st = forward(net, gate_input(sample));
  Vec fused = fuse_weighted(sample.scores, GatingWeights{st.gate});
  return {std::move(fused), GatingWeights{std::move(st.gate)}};
}

std::pair<double, GateGradients> loss_and_grads(const GateMLP& net, const SampleRecord& sample) {
  check_sample_shape(net, sample);
  if (sample.label < 0 || static_cast<std::size_t>(sample.label) >= sample.scores.front().size())
    throw InvalidInput("loss: label out of range");

  const ForwardState st = forward(net, gate_input(sample));
  const Vec& z = st.gate;
  const int n = net.output_dim;

  Vec fused = fuse_weighted(sample.scores, GatingWeights{z});
  const double p_label = fused[sample.label];
  const double loss = -std::log(std::max(p_label, kLogLossClamp));

  GateGradients g;
  g.w1.assign(net.w1.size(), 0.0);
  g.b1.assign(net.b1.size(), 0.0);
  g.w2.assign(net.w2.size(), 0.0);
  g.b2.assign(net.b2.size(), 0.0);

  // dL/dy[c] is nonzero only at the label; the clamp kills the gradient below it
  const double gy = p_label > kLogLossClamp ? -1.0 / p_label : 0.0;

  // through the weighted sum: dL/dz_j = gy * x_j[label]
  Vec dz(n);
  for (int j = 0; j < n; ++j) dz[j] = gy * sample.scores[j][sample.label];

  // softmax Jacobian: dL/dw_i = z_i (dz_i - sum_j dz_j z_j)
  double dot = 0.0;
  for (int j = 0; j < n; ++j) dot += dz[j] * z[j];
  Vec dw(n);
  for (int i = 0; i < n; ++i) dw[i] = z[i] * (dz[i] - dot);

  // output layer
  Vec dh(net.hidden_dim, 0.0);
  for (int i = 0; i < n; ++i) {
    g.b2[i] = dw[i];
    const double* w2row = net.w2.data() + static_cast<std::size_t>(i) * net.hidden_dim;
    double* gw2row = g.w2.data() + static_cast<std::size_t>(i) * net.hidden_dim;
    for (int t = 0; t < net.hidden_dim; ++t) {
      gw2row[t] = dw[i] * st.hidden[t];
      dh[t] += dw[i] * w2row[t];
    }
  }

  // hidden layer through the rectifier
  for (int t = 0; t < net.hidden_dim; ++t) {
    const double da = st.preactivation[t] > 0.0 ? dh[t] : 0.0;
    g.b1[t] = da;
    double* gw1row = g.w1.data() + static_cast<std::size_t>(t) * net.input_dim;
    for (int j = 0; j < net.input_dim; ++j) gw1row[j] = da * st.input[j];
  }

  return {loss, std::move(g)};
}

namespace {

double gradient_check_against(const GateMLP& net, const SampleRecord& sample, double h,
                              const GateGradients& grads) {
  GateMLP probe = net;
  const std::vector<std::pair<Vec*, const Vec*>> blocks = {
      {&probe.w1, &grads.w1}, {&probe.b1, &grads.b1},
      {&probe.w2, &grads.w2}, {&probe.b2, &grads.b2}};

  double max_rel = 0.0;
  for (auto& [params, analytic] : blocks) {
    for (std::size_t i = 0; i < params->size(); ++i) {
      const double saved = (*params)[i];
      (*params)[i] = saved + h;
      const double up = loss_only(probe, sample);
      (*params)[i] = saved - h;
      const double down = loss_only(probe, sample);
      (*params)[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = (*analytic)[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace

double gradient_check(const GateMLP& net, const SampleRecord& sample, double h) {
  if (!(h > 0.0)) throw InvalidInput("gradient check: step must be positive");
  const auto [loss, grads] = loss_and_grads(net, sample);
  (void)loss;
  return gradient_check_against(net, sample, h, grads);
}

double gradient_check_trials(int trials, std::uint64_t seed, double h, bool corrupt_one) {
  if (trials < 1) throw InvalidInput("gradient check: trials must be >= 1");
  if (!(h > 0.0)) throw InvalidInput("gradient check: step must be positive");

  constexpr std::uint64_t kTrialTag = 0x74726961;  // "tria"
  double max_rel = 0.0;

  for (int t = 0; t < trials; ++t) {
    CounterRng rng(CounterRng::derive(seed, kTrialTag + static_cast<std::uint64_t>(t)));
    const auto n = static_cast<int>(2 + rng.next_below(3));       // experts
    const auto c = static_cast<int>(2 + rng.next_below(4));       // classes
    const auto ctx = static_cast<int>(rng.next_below(4));         // context features
    const auto hidden = static_cast<int>(1 + rng.next_below(8));

    GateMLP net = GateMLP::zeros(n * c + ctx, hidden, n);
    for (Vec* block : {&net.w1, &net.b1, &net.w2, &net.b2})
      for (double& p : *block) p = rng.uniform(-1.0, 1.0);

    SampleRecord sample;
    sample.id = "trial" + std::to_string(t);
    sample.label = static_cast<int>(rng.next_below(c));
    for (int m = 0; m < n; ++m) {
      Vec x(c);
      double sum = 0.0;
      for (double& v : x) {
        v = rng.uniform(0.05, 1.0);  // bounded away from 0 so the loss stays smooth
        sum += v;
      }
      for (double& v : x) v /= sum;
      sample.scores.push_back(std::move(x));
    }
    for (int k = 0; k < ctx; ++k) sample.context.push_back(rng.uniform(-1.0, 1.0));

    auto [loss, grads] = loss_and_grads(net, sample);
    (void)loss;
    if (corrupt_one) grads.b2[0] += 0.5;
    max_rel = std::max(max_rel, gradient_check_against(net, sample, h, grads));
  }
  return max_rel;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::size_t sample_count, double holdout_fraction, std::uint64_t seed) {
  if (sample_count == 0) throw InvalidInput("split: no samples");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw InvalidInput("split: holdout fraction must lie in [0, 1)");

  const auto holdout_count = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(sample_count)));
  if (holdout_fraction > 0.0 && (holdout_count == 0 || holdout_count >= sample_count))
    throw InvalidInput("split: holdout split leaves an empty partition");

  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), 0);
  CounterRng split_rng(CounterRng::derive(seed, rng_tags::kHoldoutSplit));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.next_below(i)]);

  std::vector<std::size_t> train_idx(order.begin(), order.end() - holdout_count);
  std::vector<std::size_t> holdout_idx(order.end() - holdout_count, order.end());
  return {std::move(train_idx), std::move(holdout_idx)};
}

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, CounterRng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_below(i)]);
}

double subset_accuracy(const GateMLP& net, const MultimodalDataset& dataset,
                       const std::vector<std::size_t>& indices) {
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    const auto [fused, z] = gated_fuse(net, dataset.samples[i]);
    if (argmax_label(fused) == dataset.samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace

std::pair<GateMLP, TrainReport> train_gate(const MultimodalDataset& dataset,
                                           const TrainConfig& config,
                                           double holdout_fraction) {
  config.validate();
  if (dataset.samples.empty()) throw InvalidInput("train gate: empty dataset");

  auto [train_idx, holdout_idx] =
      holdout_split(dataset.samples.size(), holdout_fraction, config.seed);

  const int n = dataset.modality_count();
  const int input_dim = n * dataset.class_count + dataset.context_dim;
  GateMLP net = GateMLP::zeros(input_dim, config.hidden_dim, n);

  if (config.gate_mode == GateMode::input_conditioned) {
    CounterRng init_rng(CounterRng::derive(config.seed, rng_tags::kGateInit));
    for (Vec* block : {&net.w1, &net.b1, &net.w2, &net.b2})
      for (double& p : *block) p = init_rng.uniform(-config.init_scale, config.init_scale);
  }
  // constant mode keeps everything at zero; only b2 moves below

  GateGradients velocity;
  velocity.w1.assign(net.w1.size(), 0.0);
  velocity.b1.assign(net.b1.size(), 0.0);
  velocity.w2.assign(net.w2.size(), 0.0);
  velocity.b2.assign(net.b2.size(), 0.0);

  GateGradients batch;
  const bool full_net = config.gate_mode == GateMode::input_conditioned;

  TrainReport report;
  report.seed = config.seed;
  report.epoch_loss.reserve(config.epochs);

  std::vector<std::size_t> perm;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    perm = train_idx;
    CounterRng epoch_rng(CounterRng::derive(config.seed, rng_tags::kEpochBase + epoch));
    shuffle_indices(perm, epoch_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, perm.size());
      const double inv_batch = 1.0 / static_cast<double>(end - start);

      batch.w1.assign(net.w1.size(), 0.0);
      batch.b1.assign(net.b1.size(), 0.0);
      batch.w2.assign(net.w2.size(), 0.0);
      batch.b2.assign(net.b2.size(), 0.0);

      for (std::size_t i = start; i < end; ++i) {
        auto [loss, g] = loss_and_grads(net, dataset.samples[perm[i]]);
        loss_sum += loss;
        for (std::size_t k = 0; k < g.w1.size(); ++k) batch.w1[k] += g.w1[k];
        for (std::size_t k = 0; k < g.b1.size(); ++k) batch.b1[k] += g.b1[k];
        for (std::size_t k = 0; k < g.w2.size(); ++k) batch.w2[k] += g.w2[k];
        for (std::size_t k = 0; k < g.b2.size(); ++k) batch.b2[k] += g.b2[k];
      }

      auto apply = [&](Vec& param, Vec& vel, const Vec& grad) {
        for (std::size_t k = 0; k < param.size(); ++k) {
          vel[k] = config.momentum * vel[k] - config.learning_rate * grad[k] * inv_batch;
          param[k] += vel[k];
        }
      };
      if (full_net) {
        apply(net.w1, velocity.w1, batch.w1);
        apply(net.b1, velocity.b1, batch.b1);
        apply(net.w2, velocity.w2, batch.w2);
      }
      apply(net.b2, velocity.b2, batch.b2);
    }
    const double epoch_loss = loss_sum / static_cast<double>(perm.size());
    if (!std::isfinite(epoch_loss))
      throw Error("train gate: non-finite loss at epoch " + std::to_string(epoch));
    report.epoch_loss.push_back(epoch_loss);
  }

  report.final_train_accuracy = subset_accuracy(net, dataset, train_idx);
  if (!holdout_idx.empty())
    report.final_holdout_accuracy = subset_accuracy(net, dataset, holdout_idx);

  return {std::move(net), std::move(report)};
}

EvalResult evaluate(const MultimodalDataset& dataset, const Strategy& strategy) {
  if (dataset.samples.empty()) throw InvalidInput("evaluate: empty dataset");
  const std::size_t n_samples = dataset.samples.size();
  const auto n_modality = static_cast<std::size_t>(dataset.modality_count());

  if (const auto* fixed = std::get_if<FixedStrategy>(&strategy);
      fixed && fixed->weights.size() != n_modality)
    throw InvalidInput("evaluate: fixed weight count does not match dataset modalities");

  std::vector<int> predictions;
  std::vector<int> labels;
  predictions.reserve(n_samples);
  labels.reserve(n_samples);
  double loss_sum = 0.0;
  Vec gate_sum(n_modality, 0.0);
  bool has_gates = false;

  for (const SampleRecord& s : dataset.samples) {
    Vec fused;
    if (const auto* fixed = std::get_if<FixedStrategy>(&strategy)) {
      fused = fuse_weighted(s.scores, fixed->weights);
    } else if (std::holds_alternative<AverageStrategy>(strategy)) {
      fused = fuse_average(s.scores);
    } else if (const auto* concat = std::get_if<ConcatLinearStrategy>(&strategy)) {
      fused = fuse_concat_linear(s.scores, concat->model);
    } else {
      const auto& gated = std::get<GatedStrategy>(strategy);
      auto [y, z] = gated_fuse(gated.net, s);
      fused = std::move(y);
      for (std::size_t j = 0; j < n_modality; ++j) gate_sum[j] += z[j];
      has_gates = true;
    }
    predictions.push_back(argmax_label(fused));
    labels.push_back(s.label);
    loss_sum += log_loss(fused, s.label);
  }

  EvalResult result;
  result.accuracy = accuracy(predictions, labels);
  result.mean_log_loss = loss_sum / static_cast<double>(n_samples);
  result.confusion = confusion(predictions, labels, dataset.class_count);
  if (has_gates) {
    for (double& g : gate_sum) g /= static_cast<double>(n_samples);
    result.mean_gate_weights = std::move(gate_sum);
  } else if (const auto* fixed = std::get_if<FixedStrategy>(&strategy)) {
    result.mean_gate_weights = fixed->weights.values;
  } else if (std::holds_alternative<AverageStrategy>(strategy)) {
    result.mean_gate_weights = Vec(n_modality, 1.0 / static_cast<double>(n_modality));
  }
  return result;
}

}  // namespace latefuse
