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

#include "cslm/training.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cslm/errors.hpp"
#include "cslm/ops.hpp"

namespace cslm {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay_rate must be in (0, 1]");
  if (total_epochs < 1) throw ConfigError("total_epochs must be at least 1");
  if (decay_start_epoch > total_epochs) {
    throw ConfigError("decay_start_epoch exceeds total_epochs");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (std::isnan(grad_clip_norm)) throw ConfigError("grad_clip_norm is NaN");
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  if (epoch < 1 || epoch > config.total_epochs) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [1, " +
                            std::to_string(config.total_epochs) + "]");
  }
  if (epoch <= config.decay_start_epoch) return config.initial_lr;
  return config.initial_lr *
         std::pow(config.decay_rate, static_cast<double>(epoch - config.decay_start_epoch));
}

double sgd_step(std::span<Parameter* const> params, double lr, double clip_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    const double s = ops::squared_norm(p->grad.values());
    if (!std::isfinite(s)) {
      throw NumericalError("non-finite gradient in parameter " + p->name);
    }
    sq += s;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("gradient norm overflow");
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (Parameter* p : params) {
    auto value = p->value.values();
    auto grad = p->grad.values();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * scale * grad[i];
    p->zero_grad();
  }
  return norm;
}

double SamplingSchedule::p_teacher(std::size_t epoch, std::size_t total_epochs) const {
  if (total_epochs <= 1) return floor;
  const double t = static_cast<double>(epoch - 1) / static_cast<double>(total_epochs - 1);
  return 1.0 - (1.0 - floor) * t;
}

SymbolId sample_replacement(const Vocabulary& vocab, std::span<const double> logits, Rng& rng) {
  const auto probs = ops::softmax(logits.first(vocab.eos_scorable()));
  return vocab.from_scorable(ops::sample_categorical(probs, rng));
}

double accumulate_scheduled_gradient(LanguageModel& model, const Utterance& utterance,
                                     double weight, double p_teacher, Rng& rng,
                                     InputTrace* trace) {
  if (trace) *trace = {};
  const auto& vocab = model.vocab();
  auto choose = [&](std::size_t pos, std::span<const double> prev_logits) -> std::optional<SymbolId> {
    std::optional<SymbolId> sym;
    if (p_teacher < 1.0 && !rng.bernoulli(p_teacher)) {
      sym = sample_replacement(vocab, prev_logits, rng);
    }
    if (trace) {
      trace->inputs.push_back(sym.value_or(utterance.tokens[pos - 1].id));
      trace->replaced.push_back(sym.has_value());
    }
    return sym;
  };
  return accumulate_nll_gradient(model, utterance, weight, choose);
}

namespace {

using TeacherSchedule = std::function<double(std::size_t epoch)>;

void check_hash(const LanguageModel& model, std::uint64_t hash) {
  if (hash != 0 && hash != model.vocab_hash()) {
    throw DataError("vocabulary hash mismatch between model and corpus");
  }
}

TrainResult train_loop(LanguageModel& model, std::span<const Utterance> train,
                       std::span<const Utterance> dev, const TrainConfig& config,
                       const std::string& phase, const TeacherSchedule& teacher) {
  config.validate();
  if (train.empty()) throw DataError("empty training set");
  const auto params = model.parameters();
  zero_grads(params);

  TrainResult result;
  result.best_dev_ppl = std::numeric_limits<double>::infinity();
  ParameterSnapshot best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.total_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(config, epoch);
    Rng shuffle_rng(derive_seed(config.seed, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    // Separate stream so a pure teacher-forcing schedule matches MLE.
    Rng sample_rng(derive_seed(derive_seed(config.seed, 0x5353), epoch));
    const double p_teacher = teacher ? teacher(epoch) : 1.0;

    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::size_t batch_tokens = 0;
      for (std::size_t k = begin; k < end; ++k) batch_tokens += train[order[k]].tokens.size() + 1;
      const double weight = 1.0 / static_cast<double>(batch_tokens);
      for (std::size_t k = begin; k < end; ++k) {
        const Utterance& u = train[order[k]];
        loss_sum += p_teacher >= 1.0
                        ? accumulate_nll_gradient(model, u, weight)
                        : accumulate_scheduled_gradient(model, u, weight, p_teacher, sample_rng);
      }
      token_sum += batch_tokens;
      sgd_step(params, lr, config.grad_clip_norm);
    }
    const double train_loss = loss_sum / static_cast<double>(token_sum);
    if (!std::isfinite(train_loss)) {
      throw NumericalError(phase + " epoch " + std::to_string(epoch) + ": non-finite loss");
    }

    EpochLog entry{phase, epoch, lr, train_loss, std::numeric_limits<double>::quiet_NaN(), 0.0};
    if (!dev.empty()) {
      entry.dev_ppl = perplexity(model, dev);
      if (entry.dev_ppl < result.best_dev_ppl || result.best_epoch == 0) {
        result.best_dev_ppl = entry.dev_ppl;
        result.best_epoch = epoch;
        best = snapshot(params);
      }
    }
    if (config.record_timing) {
      entry.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(entry);
  }

  if (dev.empty()) {
    result.best_epoch = config.total_epochs;
    result.best_dev_ppl = std::numeric_limits<double>::quiet_NaN();
  } else {
    restore(params, best);
  }
  return result;
}

}  // namespace

TrainResult train_mle(LanguageModel& model, const CorpusSplit& split, const TrainConfig& config,
                      const std::string& phase) {
  check_hash(model, split.vocab_hash);
  return train_loop(model, split.train, split.dev, config, phase, {});
}

TrainResult train_scheduled_sampling(LanguageModel& model, const CorpusSplit& split,
                                     const TrainConfig& config, const SamplingSchedule& schedule,
                                     const std::string& phase) {
  check_hash(model, split.vocab_hash);
  if (!(schedule.floor >= 0.0 && schedule.floor <= 1.0)) {
    throw ConfigError("scheduled sampling floor must be in [0, 1]");
  }
  return train_loop(model, split.train, split.dev, config, phase, [&](std::size_t epoch) {
    return schedule.p_teacher(epoch, config.total_epochs);
  });
}

double perplexity(const LanguageModel& model, std::span<const Utterance> utterances) {
  if (utterances.empty()) throw DataError("perplexity of an empty set");
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& u : utterances) {
    const auto r = sequence_nll(model, u);
    nll += r.nll;
    count += r.n_predicted;
  }
  return std::exp(nll / static_cast<double>(count));
}

const char* to_string(TransitionClass c) {
  switch (c) {
    case TransitionClass::eng_eng: return "EngEng";
    case TransitionClass::eng_man: return "EngMan";
    case TransitionClass::man_eng: return "ManEng";
    case TransitionClass::man_man: return "ManMan";
    case TransitionClass::utterance_initial: return "UtteranceInitial";
    case TransitionClass::eos: return "EOS";
  }
  return "?";
}

std::optional<double> NllBucket::perplexity() const {
  if (count == 0) return std::nullopt;
  return std::exp(nll_sum / static_cast<double>(count));
}

NllBucket DecomposedPerplexity::overall() const {
  NllBucket total;
  for (const auto& b : buckets) {
    total.nll_sum += b.nll_sum;
    total.count += b.count;
  }
  return total;
}

DecomposedPerplexity decomposed_perplexity(const LanguageModel& model,
                                           std::span<const Utterance> utterances) {
  if (utterances.empty()) throw DataError("perplexity of an empty set");
  DecomposedPerplexity out;
  for (const auto& u : utterances) {
    const auto nlls = token_nlls(model, u);
    for (std::size_t pos = 0; pos < nlls.size(); ++pos) {
      TransitionClass c = TransitionClass::eos;
      if (pos == 0) {
        c = TransitionClass::utterance_initial;
      } else if (pos < u.tokens.size()) {
        const int from = bit(u.tokens[pos - 1].lang), to = bit(u.tokens[pos].lang);
        c = static_cast<TransitionClass>(2 * from + to);
      }
      auto& bucket = out.buckets[static_cast<std::size_t>(c)];
      bucket.nll_sum += nlls[pos];
      ++bucket.count;
    }
  }
  return out;
}

TrainResult pretrain_then_finetune(LanguageModel& model, const EncodedCorpus& pretrain,
                                   const CorpusSplit& finetune, const TrainConfig& config_pre,
                                   const TrainConfig& config_fine) {
  check_hash(model, finetune.vocab_hash);
  TrainResult result;
  if (!pretrain.utterances.empty()) {
    if (pretrain.vocab_hash != model.vocab_hash()) {
      throw DataError("pretraining corpus was encoded with a different vocabulary");
    }
    result = train_loop(model, pretrain.utterances, finetune.dev, config_pre, "pretrain", {});
  }
  auto fine = train_loop(model, finetune.train, finetune.dev, config_fine, "finetune", {});
  result.log.insert(result.log.end(), fine.log.begin(), fine.log.end());
  result.best_epoch = fine.best_epoch;
  result.best_dev_ppl = fine.best_dev_ppl;
  return result;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

void write_epoch_log_tsv(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch\tlr\ttrain_loss\tdev_ppl\tseconds\n";
  for (const auto& e : log) {
    out << e.epoch << '\t' << format_double(e.lr) << '\t' << format_double(e.train_loss) << '\t'
        << format_double(e.dev_ppl) << '\t' << format_double(e.seconds) << '\n';
  }
}

void write_perplexity_table(std::ostream& out, std::span<const std::string> columns,
                            std::span<const PerplexityRow> rows) {
  out << "model";
  for (const auto& c : columns) out << '\t' << c;
  out << '\n';
  for (const auto& r : rows) {
    if (r.values.size() != columns.size()) throw std::invalid_argument("row width mismatch");
    out << r.label;
    for (double v : r.values) out << '\t' << format_double(v);
    out << '\n';
  }
}

void write_decomposed_table(std::ostream& out, std::span<const DecomposedRow> rows) {
  out << "model";
  for (auto c : kTransitionClasses) out << '\t' << to_string(c);
  out << '\n';
  for (const auto& r : rows) {
    out << r.label;
    for (auto c : kTransitionClasses) {
      const auto ppl = r.value[c].perplexity();
      out << '\t' << (ppl ? format_double(*ppl) : std::string("n/a"));
    }
    out << '\n';
  }
}

}  // namespace cslm
