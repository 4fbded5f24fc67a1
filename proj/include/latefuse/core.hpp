#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latefuse/errors.hpp"

namespace latefuse {

// All real arithmetic is double precision.
using Vec = std::vector<double>;

// Ingestion tolerates file-format rounding; internal math holds 1e-12.
inline constexpr double kProbabilityTol = 1e-9;
inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kLogLossClamp = 1e-12;

bool all_finite(const Vec& v);
bool is_probability_vector(const Vec& v, double tol = kProbabilityTol);

// Per-expert mixture weights: entries >= 0, summing to 1 within kSimplexTol.
struct GatingWeights {
  Vec values;

  // Validating constructor for externally supplied weights. Internally
  // produced softmax outputs satisfy the invariant by construction and may
  // use aggregate initialization directly.
  static GatingWeights checked(Vec v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const GatingWeights&) const = default;
};

// e^{w_i - max(w)} / sum_j e^{w_j - max(w)}; output entries in (0,1], sum 1.
Vec stable_softmax(const Vec& logits);

// Index of the maximum entry; ties break to the lowest index.
int argmax_label(const Vec& scores);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// -ln(max(fused[label], kLogLossClamp)); fused must be a probability vector.
double log_loss(const Vec& fused, int label);

struct ConfusionMatrix {
  int class_count = 0;
  std::vector<std::int64_t> counts;  // row-major, row = true label, column = predicted

  std::int64_t at(int true_label, int predicted) const {
    return counts[static_cast<std::size_t>(true_label) * class_count + predicted];
  }
  std::int64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels, int class_count);

struct SampleRecord {
  std::string id;
  int label = 0;
  std::vector<Vec> scores;  // one probability vector per modality, dataset order
  Vec context;              // empty when the dataset has no context features

  bool operator==(const SampleRecord&) const = default;
};

struct MultimodalDataset {
  int class_count = 0;
  std::vector<std::string> modality_names;  // fixes the expert index order
  int context_dim = 0;
  std::vector<SampleRecord> samples;

  int modality_count() const { return static_cast<int>(modality_names.size()); }
  std::size_t size() const { return samples.size(); }

  // Schema uniformity: every sample carries the same modalities, score
  // lengths, and context dimension; scores are probability vectors.
  void validate() const;

  bool operator==(const MultimodalDataset&) const = default;
};

}  // namespace latefuse
