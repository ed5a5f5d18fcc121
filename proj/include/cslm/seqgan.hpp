// Copyright 2026 The cslm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/lstm.hpp"
#include "cslm/model.hpp"
#include "cslm/rng.hpp"
#include "cslm/tensor.hpp"
#include "cslm/training.hpp"

namespace cslm {

using Sequence = std::vector<SymbolId>;

struct GanConfig {
  std::size_t sample_len = 20;
  std::size_t n_rollouts = 4;
  std::size_t g_steps = 1;
  std::size_t d_steps = 3;
  std::size_t n_rounds = 20;
  std::size_t mle_pretrain_epochs = 30;
  double sample_multiplier = 3.0;
  std::uint64_t seed = 1;

  std::size_t g_batch = 16;             // sequences per policy-gradient step
  double g_lr = 0.05;
  double baseline_decay = 0.9;
  std::size_t d_embed = 32;
  std::size_t d_hidden = 32;
  std::size_t d_batch = 32;             // balanced: half real, half generated
  std::size_t d_updates = 50;           // minibatch updates per d_step
  std::size_t d_pretrain_updates = 200;
  std::size_t d_pool = 256;             // generated sequences drawn per d_step
  double d_lr = 0.1;
  double held_out_fraction = 0.2;

  // Throws ConfigError.
  void validate() const;
};

struct SampleSet {
  std::vector<Sequence> sequences;
  std::uint64_t generator_id = 0;  // parameter fingerprint of the generator
  std::uint64_t seed = 0;
  std::size_t length = 0;
};

// Ancestral sampling from BOS for exactly `length` tokens with EOS
// renormalized away. For the dual model the language of each drawn token
// selects the next upstream cell.
SampleSet sample_sequences(const LanguageModel& generator, std::size_t n, std::size_t length,
                           Rng& rng);

std::vector<Utterance> to_utterances(std::span<const Sequence> sequences, const Vocabulary& vocab);

// One sequence per utterance: the utterance followed by as many of the next
// utterances (cyclically) as needed, cropped to length.
std::vector<Sequence> real_sequences(std::span<const Utterance> utterances, std::size_t length);

// Anything that assigns a sequence a probability of being real.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual double score(std::span<const SymbolId> sequence) const = 0;
};

class Discriminator final : public SequenceScorer {
 public:
  Discriminator(std::size_t symbol_count, std::size_t embed, std::size_t hidden,
                std::uint64_t seed);

  double score(std::span<const SymbolId> sequence) const override;

  // Binary cross-entropy of one labelled sequence; accumulates weight *
  // gradient and returns the unweighted loss.
  double accumulate_gradient(std::span<const SymbolId> sequence, bool real, double weight);

  std::vector<Parameter*> parameters();

  Parameter embedding;
  LstmCell cell;
  Parameter out_weight;  // [1 x H]
  Parameter out_bias;    // [1]

 private:
  double logit(std::span<const SymbolId> sequence, std::vector<LstmCache>* caches,
               std::vector<double>* h_last) const;
};

struct DiscriminatorReport {
  std::vector<double> losses;  // mean minibatch BCE per update
  double held_out_accuracy = 0.0;
};

struct DiscriminatorTraining {
  std::size_t updates = 50;
  std::size_t batch = 32;
  double lr = 0.1;
  double held_out_fraction = 0.2;
  double grad_clip_norm = 5.0;
};

// Balanced-minibatch SGD on binary cross-entropy. Both classes are split
// into train and held-out parts with rng; accuracy is the mean of the
// per-class held-out accuracies. Throws DataError when a class has fewer
// than two sequences.
DiscriminatorReport train_discriminator(Discriminator& disc, std::span<const Sequence> real,
                                        std::span<const Sequence> fake,
                                        const DiscriminatorTraining& options, Rng& rng);

// Reward for the token at position t (1-based) of sequence: the scorer's
// value on the full sequence when t == sample_len, otherwise the mean
// score of n_rollouts completions sampled from the generator.
double rollout_reward(const LanguageModel& generator, const SequenceScorer& scorer,
                      std::span<const SymbolId> sequence, std::size_t t, std::size_t n_rollouts,
                      Rng& rng);

// Same expectation computed by enumerating every completion. Throws
// std::length_error beyond max_completions.
double exact_rollout_reward(const LanguageModel& generator, const SequenceScorer& scorer,
                            std::span<const SymbolId> sequence, std::size_t t,
                            std::size_t max_completions = 1'000'000);

std::vector<double> sequence_rewards(const LanguageModel& generator, const SequenceScorer& scorer,
                                     std::span<const SymbolId> sequence, std::size_t n_rollouts,
                                     Rng& rng);

// Log-probability of a fixed-length sequence under the EOS-masked policy.
double sequence_log_prob(const LanguageModel& generator, std::span<const SymbolId> sequence);

struct RewardBaseline {
  double decay = 0.9;
  std::optional<double> value;

  // Folds in a batch mean (the first batch initializes it) and returns the
  // new value.
  double update(double batch_mean);
};

// One REINFORCE update: ascends sum_t (rewards[i][t] - baseline) *
// log p(x_t | x_<t), averaged over the batch. Returns the gradient norm.
double policy_gradient_step(LanguageModel& generator, std::span<const Sequence> sequences,
                            std::span<const std::vector<double>> rewards, double baseline,
                            double lr, double grad_clip_norm = 5.0);

struct GanRoundLog {
  std::size_t round = 0;
  double mean_reward = 0.0;
  double baseline = 0.0;
  double disc_accuracy = 0.0;
};

struct SeqGanResult {
  std::unique_ptr<LanguageModel> generator;
  std::unique_ptr<Discriminator> discriminator;
  TrainResult mle;
  double pretrain_disc_accuracy = 0.0;
  std::vector<GanRoundLog> rounds;
};

using RoundCallback = std::function<void(const GanRoundLog&, LanguageModel& generator,
                                         const Discriminator& disc)>;

// MLE-pretrains a generator for mle_pretrain_epochs, pretrains the
// discriminator, then alternates policy-gradient and discriminator steps
// for n_rounds.
SeqGanResult seqgan_train(const Vocabulary& vocab, const ModelConfig& generator_config,
                          const CorpusSplit& split, const GanConfig& gan,
                          const TrainConfig& mle_config, const RoundCallback& on_round = {});

// round(multiplier * train_tokens / sample_len).
std::size_t same_source_sample_count(double multiplier, std::size_t train_tokens,
                                     std::size_t sample_len);

struct SameSourceResult {
  std::unique_ptr<LanguageModel> model;
  std::optional<SeqGanResult> gan;
  SampleSet samples;
  TrainResult training;
};

// Trains a generator (SeqGAN, or MLE only when n_rounds == 0), samples the
// pretraining corpus from it, and pretrains then fine-tunes a freshly
// initialized language model. A zero multiplier is plain MLE.
SameSourceResult same_source_pretrain(const Vocabulary& vocab, const ModelConfig& lm_config,
                                      const CorpusSplit& split, const GanConfig& gan,
                                      const TrainConfig& pre_config,
                                      const TrainConfig& fine_config,
                                      const RoundCallback& on_round = {});

// Percentage of distinct n-grams of the generated sequences that never
// occur in the training sequences. Throws std::invalid_argument unless
// n is 2, 3 or 4 and DataError when nothing generated has n tokens.
double ngram_novelty(std::span<const Sequence> generated, std::span<const Sequence> train,
                     std::size_t n);

std::vector<Sequence> to_sequences(std::span<const Utterance> utterances);

// Decoded surface forms, one sequence per line, and the metadata sidecar.
void write_sample_set(std::ostream& text, std::ostream& meta, const SampleSet& samples,
                      const Vocabulary& vocab);

struct NoveltyColumn {
  std::string label;
  double bigram = 0.0, trigram = 0.0, quadgram = 0.0;
};

void write_novelty_table(std::ostream& out, std::span<const NoveltyColumn> columns);

}  // namespace cslm
