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

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/model.hpp"
#include "cslm/rng.hpp"

namespace cslm {

struct TrainConfig {
  double initial_lr = 1.0;
  double decay_rate = 0.98;
  std::size_t decay_start_epoch = 80;
  std::size_t total_epochs = 100;
  std::size_t batch_size = 32;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
  bool record_timing = false;  // seconds column stays 0 unless set

  // Throws ConfigError.
  void validate() const;
};

struct EpochLog {
  std::string phase;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-token NLL over the epoch's batches
  double dev_ppl = 0.0;     // NaN when there is no dev set
  double seconds = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // epoch whose parameters were kept
  double best_dev_ppl = 0.0;
};

// initial_lr for e <= decay_start_epoch, initial_lr * decay_rate^(e -
// decay_start_epoch) afterwards. Throws std::out_of_range outside
// [1, total_epochs].
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

// Clips the global gradient norm to clip_norm, applies theta -= lr * g and
// zeroes the gradients. Returns the norm before clipping. A non-finite
// gradient throws NumericalError and leaves the values untouched.
double sgd_step(std::span<Parameter* const> params, double lr, double clip_norm);

// Teacher-forced MLE. The train set is reshuffled every epoch from
// config.seed; the parameters of the best dev epoch are restored at the
// end. split.vocab_hash, when non-zero, must match the model.
TrainResult train_mle(LanguageModel& model, const CorpusSplit& split, const TrainConfig& config,
                      const std::string& phase = "train");

struct SamplingSchedule {
  double floor = 0.0;  // teacher-forcing probability at the last epoch

  double p_teacher(std::size_t epoch, std::size_t total_epochs) const;
};

// Draws a scorable symbol other than EOS from softmax(logits).
SymbolId sample_replacement(const Vocabulary& vocab, std::span<const double> logits, Rng& rng);

struct InputTrace {
  std::vector<SymbolId> inputs;  // inputs fed at positions 1..n
  std::vector<bool> replaced;
};

// One utterance under scheduled sampling: each input after BOS is replaced
// by a sample from the previous step's distribution with probability
// 1 - p_teacher. Accumulates weight * gradient and returns the NLL.
double accumulate_scheduled_gradient(LanguageModel& model, const Utterance& utterance,
                                     double weight, double p_teacher, Rng& rng,
                                     InputTrace* trace = nullptr);

TrainResult train_scheduled_sampling(LanguageModel& model, const CorpusSplit& split,
                                     const TrainConfig& config, const SamplingSchedule& schedule,
                                     const std::string& phase = "scheduled");

// exp(total NLL / total predicted symbols). Throws DataError for an empty
// set.
double perplexity(const LanguageModel& model, std::span<const Utterance> utterances);

enum class TransitionClass { eng_eng, eng_man, man_eng, man_man, utterance_initial, eos };

inline constexpr std::array<TransitionClass, 6> kTransitionClasses = {
    TransitionClass::eng_eng,           TransitionClass::eng_man, TransitionClass::man_eng,
    TransitionClass::man_man,           TransitionClass::utterance_initial,
    TransitionClass::eos};

const char* to_string(TransitionClass c);

struct NllBucket {
  double nll_sum = 0.0;
  std::size_t count = 0;

  std::optional<double> perplexity() const;  // empty when count == 0
};

struct DecomposedPerplexity {
  std::array<NllBucket, 6> buckets;

  const NllBucket& operator[](TransitionClass c) const {
    return buckets[static_cast<std::size_t>(c)];
  }
  NllBucket overall() const;
};

DecomposedPerplexity decomposed_perplexity(const LanguageModel& model,
                                           std::span<const Utterance> utterances);

struct EncodedCorpus {
  std::vector<Utterance> utterances;
  std::uint64_t vocab_hash = 0;
};

// MLE on the pretraining corpus (skipped when empty), then MLE on the
// fine-tune split. Both phases select on the fine-tune dev set. Throws
// DataError when the pretraining corpus was encoded with another
// vocabulary.
TrainResult pretrain_then_finetune(LanguageModel& model, const EncodedCorpus& pretrain,
                                   const CorpusSplit& finetune, const TrainConfig& config_pre,
                                   const TrainConfig& config_fine);

// TSV writers. Numbers use the shortest round-trip representation.
void write_epoch_log_tsv(std::ostream& out, std::span<const EpochLog> log);

struct PerplexityRow {
  std::string label;
  std::vector<double> values;
};

void write_perplexity_table(std::ostream& out, std::span<const std::string> columns,
                            std::span<const PerplexityRow> rows);

struct DecomposedRow {
  std::string label;
  DecomposedPerplexity value;
};

void write_decomposed_table(std::ostream& out, std::span<const DecomposedRow> rows);

std::string format_double(double value);

}  // namespace cslm
