#include "latefuse/synth.hpp"

#include <cstdio>

#include "latefuse/rng.hpp"

namespace latefuse {

void SynthSpec::validate() const {
  if (class_count < 2) throw InvalidInput("synth spec: class_count must be >= 2");
  if (modality_count < 1) throw InvalidInput("synth spec: modality_count must be >= 1");
  if (context_count < 1) throw InvalidInput("synth spec: context_count must be >= 1");
  if (sample_count < 1) throw InvalidInput("synth spec: sample_count must be >= 1");
  if (reliability.size() != static_cast<std::size_t>(modality_count))
    throw InvalidInput("synth spec: reliability must have one row per modality");
  for (const Vec& row : reliability) {
    if (row.size() != static_cast<std::size_t>(context_count))
      throw InvalidInput("synth spec: reliability row length must equal context_count");
    for (double r : row)
      if (!(r > 0.0) || !(r < 1.0))
        throw InvalidInput("synth spec: reliability entries must lie strictly in (0, 1)");
  }
  if (!(sharpness > 0.0)) throw InvalidInput("synth spec: sharpness must be positive");
  if (noise < 0.0) throw InvalidInput("synth spec: noise must be non-negative");
}

namespace {

std::string sample_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%06zu", i);
  return buf;
}

int draw_vote(CounterRng& rng, int label, int class_count, double reliability) {
  if (rng.next_unit() < reliability) return label;
  // uniformly random wrong class
  const auto off = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(class_count - 1)));
  return off < label ? off : off + 1;
}

}  // namespace

MultimodalDataset generate(const SynthSpec& spec) {
  spec.validate();

  const int c = spec.class_count;
  MultimodalDataset ds;
  ds.class_count = c;
  ds.context_dim = spec.context_count;
  for (int m = 0; m < spec.modality_count; ++m)
    ds.modality_names.push_back("m" + std::to_string(m));
  ds.samples.reserve(spec.sample_count);

  const double smoothed_off = kVoteSmoothing / (c - 1);

  for (std::size_t i = 0; i < spec.sample_count; ++i) {
    CounterRng rng(CounterRng::derive(spec.seed, i));

    SampleRecord s;
    s.id = sample_id(i);
    const auto context = static_cast<int>(rng.next_below(spec.context_count));
    s.label = static_cast<int>(rng.next_below(c));
    s.context.assign(spec.context_count, 0.0);
    s.context[context] = 1.0;

    for (int m = 0; m < spec.modality_count; ++m) {
      const int vote = draw_vote(rng, s.label, c, spec.reliability[m][context]);
      if (spec.mode == SynthMode::vote) {
        Vec scores(c, smoothed_off);
        scores[vote] = 1.0 - kVoteSmoothing;
        s.scores.push_back(std::move(scores));
      } else {
        Vec logits(c);
        for (int k = 0; k < c; ++k)
          logits[k] = spec.sharpness * (k == vote ? 1.0 : 0.0) + spec.noise * rng.normal();
        s.scores.push_back(stable_softmax(logits));
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

VoteRecord recover_votes(const SampleRecord& sample) {
  VoteRecord rec;
  rec.label = sample.label;
  rec.context = sample.context.empty() ? 0 : argmax_label(sample.context);
  rec.votes.reserve(sample.scores.size());
  for (const Vec& x : sample.scores) rec.votes.push_back(argmax_label(x));
  return rec;
}

Vec bayes_posterior(const VoteRecord& votes, const SynthSpec& spec) {
  if (spec.mode != SynthMode::vote)
    throw UnsupportedMode("bayes oracle: only defined for vote-mode data");
  spec.validate();
  if (votes.votes.size() != static_cast<std::size_t>(spec.modality_count))
    throw InvalidInput("bayes oracle: vote count does not match modality count");
  if (votes.context < 0 || votes.context >= spec.context_count)
    throw InvalidInput("bayes oracle: context out of range");

  const int c = spec.class_count;
  Vec posterior(c, 1.0);
  for (int m = 0; m < spec.modality_count; ++m) {
    const int vote = votes.votes[m];
    if (vote < 0 || vote >= c) throw InvalidInput("bayes oracle: vote out of range");
    const double r = spec.reliability[m][votes.context];
    const double wrong = (1.0 - r) / (c - 1);
    for (int k = 0; k < c; ++k) posterior[k] *= (vote == k) ? r : wrong;
  }
  double sum = 0.0;
  for (double p : posterior) sum += p;
  for (double& p : posterior) p /= sum;
  return posterior;
}

double bayes_accuracy(const MultimodalDataset& dataset, const SynthSpec& spec) {
  if (spec.mode != SynthMode::vote)
    throw UnsupportedMode("bayes oracle: only defined for vote-mode data");
  if (dataset.modality_count() != spec.modality_count ||
      dataset.class_count != spec.class_count || dataset.context_dim != spec.context_count)
    throw InvalidInput("bayes oracle: dataset shape does not match spec");
  if (dataset.samples.empty()) throw InvalidInput("bayes oracle: empty dataset");

  std::size_t correct = 0;
  for (const SampleRecord& s : dataset.samples) {
    const Vec posterior = bayes_posterior(recover_votes(s), spec);
    if (argmax_label(posterior) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.samples.size());
}

}  // namespace latefuse
