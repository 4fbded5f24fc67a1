#include "latefuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace latefuse {

Vec fuse_weighted(const std::vector<Vec>& experts, const GatingWeights& z) {
  if (experts.empty() || experts.size() != z.size())
    throw InvalidInput("fuse_weighted: expert count must match weight count");
  const std::size_t c = experts.front().size();
  if (c == 0) throw InvalidInput("fuse_weighted: empty score vector");
  for (const Vec& x : experts)
    if (x.size() != c) throw InvalidInput("fuse_weighted: score length mismatch");

  Vec fused(c, 0.0);
  for (std::size_t j = 0; j < experts.size(); ++j) {
    const double w = z[j];
    const Vec& x = experts[j];
    for (std::size_t i = 0; i < c; ++i) fused[i] += w * x[i];
  }
  return fused;
}

Vec fuse_average(const std::vector<Vec>& experts) {
  if (experts.empty()) throw InvalidInput("fuse_average: no experts");
  const double n = static_cast<double>(experts.size());
  return fuse_weighted(experts, GatingWeights{Vec(experts.size(), 1.0 / n)});
}

int SweepGrid::units() const {
  if (!(step > 0.0) || step > 1.0) throw InvalidInput("sweep grid: step must be in (0, 1]");
  const auto k = static_cast<int>(std::llround(1.0 / step));
  if (k < 1 || std::abs(step * k - 1.0) > 1e-9)
    throw InvalidInput("sweep grid: 1/step must be an integer");
  return k;
}

namespace {

void enumerate_rec(int slots_left, int units_left, int units_total,
                   std::vector<int>& current, std::vector<GatingWeights>& out) {
  if (slots_left == 1) {
    current.push_back(units_left);
    Vec w(current.size());
    for (std::size_t i = 0; i < current.size(); ++i)
      w[i] = static_cast<double>(current[i]) / units_total;
    out.push_back(GatingWeights{std::move(w)});
    current.pop_back();
    return;
  }
  for (int k = units_left; k >= 0; --k) {
    current.push_back(k);
    enumerate_rec(slots_left - 1, units_left - k, units_total, current, out);
    current.pop_back();
  }
}

bool lex_less(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

SweepRow evaluate_grid_point(const MultimodalDataset& dataset, GatingWeights z) {
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (const SampleRecord& s : dataset.samples) {
    const Vec fused = fuse_weighted(s.scores, z);
    if (argmax_label(fused) == s.label) ++correct;
    loss_sum += log_loss(fused, s.label);
  }
  const double n = static_cast<double>(dataset.samples.size());
  return SweepRow{std::move(z), static_cast<double>(correct) / n, loss_sum / n};
}

}  // namespace

std::vector<GatingWeights> enumerate_simplex_grid(int modality_count, double step) {
  if (modality_count < 1) throw InvalidInput("simplex grid: modality count must be >= 1");
  const int units = SweepGrid{step, modality_count}.units();
  std::vector<GatingWeights> out;
  std::vector<int> current;
  enumerate_rec(modality_count, units, units, current, out);
  return out;
}

SweepResult run_weight_sweep(const MultimodalDataset& dataset, const SweepGrid& grid,
                             int threads) {
  if (dataset.samples.empty()) throw InvalidInput("sweep: empty dataset");
  if (grid.modality_count != dataset.modality_count())
    throw InvalidInput("sweep: grid modality count does not match dataset");
  if (threads < 1) throw InvalidInput("sweep: thread count must be >= 1");

  std::vector<GatingWeights> points = enumerate_simplex_grid(grid.modality_count, grid.step);

  SweepResult result;
  result.rows.resize(points.size());

  // Each row is self-contained and written to a distinct slot, so the
  // parallel result is bit-identical to the sequential one.
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < points.size(); i += stride)
      result.rows[i] = evaluate_grid_point(dataset, std::move(points[i]));
  };
  if (threads == 1 || points.size() < 2) {
    work(0, 1);
  } else {
    const std::size_t nthreads = std::min<std::size_t>(threads, points.size());
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work, t, nthreads);
    for (std::thread& t : pool) t.join();
  }

  result.best_row = 0;
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    const SweepRow& cand = result.rows[i];
    const SweepRow& best = result.rows[result.best_row];
    if (cand.accuracy > best.accuracy ||
        (cand.accuracy == best.accuracy && lex_less(cand.weights.values, best.weights.values)))
      result.best_row = i;
  }
  return result;
}

namespace {

Vec concat_scores(const std::vector<Vec>& experts) {
  Vec u;
  for (const Vec& x : experts) u.insert(u.end(), x.begin(), x.end());
  return u;
}

}  // namespace

LinearConcatModel train_concat_linear(const MultimodalDataset& dataset, int epochs,
                                      double learning_rate, std::uint64_t seed, double l2) {
  if (dataset.samples.empty()) throw InvalidInput("concat training: empty dataset");
  if (epochs <= 0) throw InvalidInput("concat training: epochs must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("concat training: learning rate must be positive");
  if (l2 < 0.0) throw InvalidInput("concat training: negative L2 coefficient");

  const int c = dataset.class_count;
  const int d = dataset.modality_count() * c;
  const std::size_t n = dataset.samples.size();

  std::vector<Vec> inputs;
  inputs.reserve(n);
  for (const SampleRecord& s : dataset.samples) inputs.push_back(concat_scores(s.scores));

  LinearConcatModel model;
  model.class_count = c;
  model.input_dim = d;
  model.weights.assign(static_cast<std::size_t>(c) * d, 0.0);
  model.bias.assign(c, 0.0);
  model.epochs = epochs;
  model.learning_rate = learning_rate;
  model.l2 = l2;
  model.seed = seed;

  Vec grad_w(model.weights.size());
  Vec grad_b(model.bias.size());
  Vec logits(c);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    double loss_sum = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
      const Vec& u = inputs[i];
      for (int k = 0; k < c; ++k) {
        double acc = model.bias[k];
        const double* row = model.weights.data() + static_cast<std::size_t>(k) * d;
        for (int j = 0; j < d; ++j) acc += row[j] * u[j];
        logits[k] = acc;
      }
      const Vec p = stable_softmax(logits);
      loss_sum += -std::log(std::max(p[dataset.samples[i].label], kLogLossClamp));
      for (int k = 0; k < c; ++k) {
        const double g = p[k] - (k == dataset.samples[i].label ? 1.0 : 0.0);
        grad_b[k] += g;
        double* grow = grad_w.data() + static_cast<std::size_t>(k) * d;
        for (int j = 0; j < d; ++j) grow[j] += g * u[j];
      }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < model.weights.size(); ++j)
      model.weights[j] -= learning_rate * (grad_w[j] * inv_n + l2 * model.weights[j]);
    for (int k = 0; k < c; ++k) model.bias[k] -= learning_rate * grad_b[k] * inv_n;
    model.final_loss = loss_sum * inv_n;
  }
  return model;
}

Vec fuse_concat_linear(const std::vector<Vec>& experts, const LinearConcatModel& model) {
  const Vec u = concat_scores(experts);
  if (static_cast<int>(u.size()) != model.input_dim)
    throw InvalidInput("concat fusion: input dimension mismatch");
  Vec logits(model.class_count);
  for (int k = 0; k < model.class_count; ++k) {
    double acc = model.bias[k];
    const double* row = model.weights.data() + static_cast<std::size_t>(k) * model.input_dim;
    for (int j = 0; j < model.input_dim; ++j) acc += row[j] * u[j];
    logits[k] = acc;
  }
  return stable_softmax(logits);
}

}  // namespace latefuse
