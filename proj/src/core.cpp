#include "latefuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latefuse {

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool is_probability_vector(const Vec& v, double tol) {
  if (v.empty() || !all_finite(v)) return false;
  double sum = 0.0;
  for (double x : v) {
    if (x < 0.0) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

GatingWeights GatingWeights::checked(Vec v) {
  if (v.empty()) throw InvalidInput("gating weights: empty vector");
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0)
      throw InvalidInput("gating weights: entries must be finite and non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSimplexTol)
    throw InvalidInput("gating weights: sum differs from 1 by more than 1e-12");
  return GatingWeights{std::move(v)};
}

Vec stable_softmax(const Vec& logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  if (!all_finite(logits)) throw InvalidInput("softmax: non-finite input");

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

int argmax_label(const Vec& scores) {
  if (scores.empty()) throw InvalidInput("argmax: empty input");
  if (!all_finite(scores)) throw InvalidInput("argmax: non-finite input");
  // std::max_element keeps the first of equal entries: lowest-index tie-break
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw InvalidInput("accuracy: prediction/label lists must be non-empty and equal length");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++matches;
  return static_cast<double>(matches) / static_cast<double>(predictions.size());
}

double log_loss(const Vec& fused, int label) {
  if (!is_probability_vector(fused))
    throw InvalidInput("log_loss: input is not a probability vector");
  if (label < 0 || static_cast<std::size_t>(label) >= fused.size())
    throw InvalidInput("log_loss: label out of range");
  return -std::log(std::max(fused[static_cast<std::size_t>(label)], kLogLossClamp));
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int class_count) {
  if (class_count < 1) throw InvalidInput("confusion: class_count must be positive");
  if (predictions.size() != labels.size())
    throw InvalidInput("confusion: prediction/label lists must be equal length");
  ConfusionMatrix m;
  m.class_count = class_count;
  m.counts.assign(static_cast<std::size_t>(class_count) * class_count, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || t >= class_count || p < 0 || p >= class_count)
      throw InvalidInput("confusion: class index out of range");
    ++m.counts[static_cast<std::size_t>(t) * class_count + p];
  }
  return m;
}

void MultimodalDataset::validate() const {
  if (samples.empty()) throw InvalidInput("dataset: no samples");
  if (class_count < 2) throw InvalidInput("dataset: class_count must be >= 2");
  if (modality_names.empty()) throw InvalidInput("dataset: no modalities");
  if (context_dim < 0) throw InvalidInput("dataset: negative context_dim");

  const std::size_t n = modality_names.size();
  for (const SampleRecord& s : samples) {
    if (s.label < 0 || s.label >= class_count)
      throw InvalidInput("dataset: sample '" + s.id + "' has out-of-range label");
    if (s.scores.size() != n)
      throw InvalidInput("dataset: sample '" + s.id + "' has wrong modality count");
    for (const Vec& x : s.scores) {
      if (x.size() != static_cast<std::size_t>(class_count))
        throw InvalidInput("dataset: sample '" + s.id + "' has wrong score length");
      if (!is_probability_vector(x))
        throw InvalidInput("dataset: sample '" + s.id + "' scores are not a probability vector");
    }
    if (s.context.size() != static_cast<std::size_t>(context_dim))
      throw InvalidInput("dataset: sample '" + s.id + "' has wrong context length");
    if (!all_finite(s.context))
      throw InvalidInput("dataset: sample '" + s.id + "' has non-finite context");
  }
}

}  // namespace latefuse
