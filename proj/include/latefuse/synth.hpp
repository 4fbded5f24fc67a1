#pragma once

#include <cstdint>
#include <vector>

#include "latefuse/core.hpp"

namespace latefuse {

enum class SynthMode { vote, soft };

// Vote-mode score vectors put 1 - kVoteSmoothing on the voted class; the
// remainder is spread evenly so log-loss stays finite.
inline constexpr double kVoteSmoothing = 0.05;

struct SynthSpec {
  int class_count = 10;
  int modality_count = 2;
  int context_count = 1;
  // reliability[m][k]: probability expert m votes the true class in context k;
  // entries strictly inside (0, 1)
  std::vector<Vec> reliability;
  std::size_t sample_count = 1000;
  SynthMode mode = SynthMode::vote;
  double sharpness = 3.0;  // soft mode logit scale
  double noise = 0.5;      // soft mode logit noise sigma
  std::uint64_t seed = 0;

  void validate() const;
};

struct VoteRecord {
  std::vector<int> votes;  // per-modality voted class
  int context = 0;
  int label = 0;
};

// Labels and contexts are uniform; expert m votes the true class with
// probability reliability[m][context], otherwise a uniformly random wrong
// class. Each sample draws from its own counter-based stream, so generation
// is reproducible and order-independent.
MultimodalDataset generate(const SynthSpec& spec);

// Reads the votes back out of a vote-mode sample (argmax per expert score
// vector, context from its one-hot features).
VoteRecord recover_votes(const SampleRecord& sample);

// Exact posterior over classes by brute-force enumeration:
// P(c | votes, k) ∝ prod_m [ r[m][k] if vote_m == c else (1 - r[m][k])/(C-1) ].
Vec bayes_posterior(const VoteRecord& votes, const SynthSpec& spec);

// Accuracy of the argmax of bayes_posterior over the whole dataset; the
// reference no fusion strategy can beat under this generative model.
double bayes_accuracy(const MultimodalDataset& dataset, const SynthSpec& spec);

}  // namespace latefuse
