#pragma once

#include <cstdint>
#include <vector>

#include "latefuse/core.hpp"

namespace latefuse {

// y[c] = sum_j z[j] * experts[j][c]. With one-hot z the selected expert is
// returned exactly; with probability-vector experts the output is one too.
Vec fuse_weighted(const std::vector<Vec>& experts, const GatingWeights& z);

// Uniform mixture: identical to fuse_weighted with z = [1/n, ..., 1/n].
Vec fuse_average(const std::vector<Vec>& experts);

struct SweepGrid {
  double step = 0.1;
  int modality_count = 2;

  // 1/step as an exact integer; throws InvalidInput otherwise.
  int units() const;
};

// All weight vectors with entries k*step summing to 1, ordered descending in
// the leading modality's weight. Count is C(K+n-1, n-1) with K = 1/step.
std::vector<GatingWeights> enumerate_simplex_grid(int modality_count, double step);

struct SweepRow {
  GatingWeights weights;
  double accuracy = 0.0;
  double mean_log_loss = 0.0;
  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;   // one per grid point, grid order
  std::size_t best_row = 0;     // max accuracy; ties -> lexicographically smallest weights
  bool operator==(const SweepResult&) const = default;
};

// Evaluates every grid point over the dataset. Grid points are independent:
// with threads > 1 rows are computed concurrently and the result is
// bit-identical to the sequential run.
SweepResult run_weight_sweep(const MultimodalDataset& dataset, const SweepGrid& grid,
                             int threads = 1);

// Concatenation + multinomial logistic classifier (linear late fusion).
struct LinearConcatModel {
  int class_count = 0;
  int input_dim = 0;        // modality_count * class_count
  Vec weights;              // class_count x input_dim, row-major
  Vec bias;                 // class_count
  int epochs = 0;
  double learning_rate = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;  // mean cross-entropy after the last epoch
  bool operator==(const LinearConcatModel&) const = default;
};

// Full-batch gradient descent on mean cross-entropy of
// softmax(W * concat(x_1..x_n) + b). Deterministic given the arguments.
LinearConcatModel train_concat_linear(const MultimodalDataset& dataset, int epochs,
                                      double learning_rate, std::uint64_t seed,
                                      double l2 = 0.0);

Vec fuse_concat_linear(const std::vector<Vec>& experts, const LinearConcatModel& model);

}  // namespace latefuse
