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
#include "cslm/features.hpp"
#include "cslm/lstm.hpp"
#include "cslm/tensor.hpp"
#include "cslm/vocabulary.hpp"

namespace cslm {

enum class ModelKind { rnnlm, dual };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);  // throws ConfigError

// A categorical side feature appended to the cell input through its own
// embedding table.
struct FeatureChannel {
  std::string name;
  std::uint32_t cardinality = 0;
  std::size_t width = 8;

  friend bool operator==(const FeatureChannel&, const FeatureChannel&) = default;
};

// Channels for a feature schema: width 8 per category feature, 2 for "lang".
std::vector<FeatureChannel> default_channels(const FeatureSchema& schema);

struct ModelConfig {
  ModelKind kind = ModelKind::dual;
  std::size_t hidden = 32;
  std::size_t embed = 32;
  std::vector<FeatureChannel> features;
  std::uint64_t seed = 1;
  double weight_init = 0.05;
  double embed_init = 0.1;
};

// Recurrent state. The baseline uses cell[0] only; the dual model keeps the
// L0 cell's state in cell[0] and the L1 cell's in cell[1].
struct ModelState {
  LstmState cell[2];
};

struct StepInput {
  SymbolId symbol = Vocabulary::kBos;
  const FeatureVector* features = nullptr;
};

struct StepCache {
  SymbolId symbol = 0;
  int upstream = 0;  // dual: index of the cell that received the real token
  std::vector<long> feature_rows;  // per channel, -1 for an all-zero input
  LstmCache cell[2];
  std::vector<double> h_out[2];
};

// Common interface of the baseline RNNLM and the dual LSTM LM. step()
// consumes one input symbol and yields logits over the scorable union
// vocabulary (Vocabulary::scorable_size() entries, EOS last).
class LanguageModel {
 public:
  LanguageModel(Vocabulary vocab, ModelConfig config);
  virtual ~LanguageModel() = default;

  LanguageModel(const LanguageModel&) = default;
  LanguageModel& operator=(const LanguageModel&) = delete;

  ModelKind kind() const { return config_.kind; }
  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  std::size_t output_size() const { return vocab_.scorable_size(); }
  // Embedding width plus all feature channel widths.
  std::size_t input_size() const;

  virtual std::unique_ptr<LanguageModel> clone() const = 0;

  ModelState initial_state() const;

  // Number of LSTM cell invocations per consumed token.
  virtual int cells_per_step() const = 0;

  virtual void step(ModelState& state, const StepInput& input, std::span<double> logits,
                    StepCache* cache) const = 0;

  // Backpropagation through time over one sequence of cached steps starting
  // from the initial state; dlogits[t] is dL/dlogits at step t. Accumulates
  // into the parameters' grads.
  virtual void backward(std::span<const StepCache> caches,
                        std::span<const std::vector<double>> dlogits) = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  std::vector<const Parameter*> parameters() const;

  void zero_grad();

  // Embedding row(s) for one input token concatenated with its feature
  // channel rows. table selects the per-language embedding for the dual
  // model and is ignored by the baseline.
  std::vector<double> encode_input(SymbolId symbol, const FeatureVector* features,
                                   Lang table = Lang::l0) const;

 protected:
  // Fills the feature part of x (starting at the embedding width) and
  // returns the row used per channel.
  std::vector<long> encode_features(SymbolId symbol, const FeatureVector* features,
                                    std::span<double> x) const;
  void backward_features(const std::vector<long>& rows, std::span<const double> dx);
  void initialize_features(Rng& rng);
  void append_feature_params(std::vector<Parameter*>& out);

  std::vector<Parameter> feature_tables_;

 private:
  virtual std::span<const double> embedding_row(SymbolId symbol, Lang table) const = 0;

  Vocabulary vocab_;
  ModelConfig config_;
  std::uint64_t vocab_hash_;
};

// Baseline: one embedding over all input symbols, one LSTM, one projection
// onto the union vocabulary.
class RnnLm final : public LanguageModel {
 public:
  RnnLm(Vocabulary vocab, ModelConfig config);

  std::unique_ptr<LanguageModel> clone() const override;
  int cells_per_step() const override { return 1; }
  void step(ModelState& state, const StepInput& input, std::span<double> logits,
            StepCache* cache) const override;
  void backward(std::span<const StepCache> caches,
                std::span<const std::vector<double>> dlogits) override;
  std::vector<Parameter*> parameters() override;

  Parameter embedding;
  LstmCell cell;
  Parameter out_weight;
  Parameter out_bias;

 private:
  std::span<const double> embedding_row(SymbolId symbol, Lang table) const override;
};

// Dual LSTM LM. Each token is routed to the cell of its language (the
// upstream cell); the other cell (downstream) is then run on its language's
// dummy token, receiving the upstream cell's fresh hidden output as its
// incoming hidden state while keeping its own memory cell. Both cells'
// outputs are concatenated with a shared EOS logit and normalized jointly.
class DualLm final : public LanguageModel {
 public:
  DualLm(Vocabulary vocab, ModelConfig config);

  std::unique_ptr<LanguageModel> clone() const override;
  int cells_per_step() const override { return 2; }
  void step(ModelState& state, const StepInput& input, std::span<double> logits,
            StepCache* cache) const override;
  void backward(std::span<const StepCache> caches,
                std::span<const std::vector<double>> dlogits) override;
  std::vector<Parameter*> parameters() override;

  // Selector for an input symbol: the token's language; BOS is routed to
  // the L0 cell.
  Lang selector(SymbolId symbol) const;

  Parameter embedding[2];  // L0 table has an extra final row for BOS
  LstmCell cell[2];
  Parameter out_weight[2];
  Parameter out_bias[2];
  Parameter eos_weight[2];  // [1 x H] each
  Parameter eos_bias;       // [1]

 private:
  std::span<const double> embedding_row(SymbolId symbol, Lang table) const override;
  std::size_t embedding_index(SymbolId symbol, Lang table) const;
};

std::unique_ptr<LanguageModel> make_model(const Vocabulary& vocab, const ModelConfig& config);

// One dual-model step with an explicit selector bit; returns the union
// distribution. Throws std::invalid_argument("language/selector mismatch")
// when token.lang != b.
std::vector<double> dual_step(const DualLm& model, Lang b, const Token& token,
                              ModelState& state, const FeatureVector* features = nullptr);

// Distribution after one step of any model.
std::vector<double> step_distribution(const LanguageModel& model, ModelState& state,
                                      const StepInput& input);

struct SequenceNll {
  double nll = 0.0;
  std::size_t n_predicted = 0;
};

// Frames the utterance as BOS t1..tn EOS and scores t1..tn EOS from a zero
// state. Throws DataError for an empty utterance.
SequenceNll sequence_nll(const LanguageModel& model, const Utterance& utterance);

// Per-position negative log-likelihoods (n + 1 values, EOS last).
std::vector<double> token_nlls(const LanguageModel& model, const Utterance& utterance);

// Called before each step after the first with the previous step's
// logits; a returned symbol replaces the teacher-forced input (its feature
// annotations are dropped).
using InputOverride =
    std::function<std::optional<SymbolId>(std::size_t pos, std::span<const double> prev_logits)>;

// Teacher-forced NLL of one utterance; gradients of weight * NLL are
// accumulated. Returns the unweighted NLL.
double accumulate_nll_gradient(LanguageModel& model, const Utterance& utterance, double weight,
                               const InputOverride& override_input = {});

// Model checkpoint: text header followed by the parameter checkpoint.
//   CSLM-MODEL 1
//   kind=<rnnlm|dual>
//   hidden=<H>
//   embed=<D>
//   vocab_hash=<16 hex digits>
//   feature=<name>:<cardinality>:<width>     (one per channel)
//   END
void save_model(std::ostream& out, LanguageModel& model);
void save_model_file(const std::string& path, LanguageModel& model);

// FNV-1a over the serialized parameters.
std::uint64_t model_fingerprint(const LanguageModel& model);

struct ModelHeader {
  ModelConfig config;
  std::uint64_t vocab_hash = 0;
};

ModelHeader read_model_header(std::istream& in);
// Throws DataError when the vocabulary hash differs from the checkpoint's.
std::unique_ptr<LanguageModel> load_model(std::istream& in, const Vocabulary& vocab);
std::unique_ptr<LanguageModel> load_model_file(const std::string& path,
                                               const Vocabulary& vocab);

}  // namespace cslm
