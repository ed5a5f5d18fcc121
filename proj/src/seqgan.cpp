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

#include "cslm/seqgan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "cslm/checkpoint.hpp"
#include "cslm/errors.hpp"
#include "cslm/ops.hpp"

namespace cslm {

void GanConfig::validate() const {
  if (sample_len < 2) throw ConfigError("sample_len must be at least 2");
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be at least 1");
  if (g_batch < 1) throw ConfigError("g_batch must be at least 1");
  if (d_batch < 2) throw ConfigError("d_batch must be at least 2");
  if (d_pool < 2) throw ConfigError("d_pool must be at least 2");
  if (!(sample_multiplier >= 0.0)) throw ConfigError("sample_multiplier must be non-negative");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw ConfigError("baseline_decay must be in [0, 1)");
  }
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0)) {
    throw ConfigError("held_out_fraction must be in (0, 1)");
  }
  if (!(g_lr > 0.0) || !(d_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (d_embed < 1 || d_hidden < 1) throw ConfigError("discriminator sizes must be positive");
}

namespace {

// Runs BOS followed by prefix; logits then hold the next-token scores.
void advance(const LanguageModel& gen, ModelState& state, std::span<const SymbolId> prefix,
             std::vector<double>& logits) {
  logits.resize(gen.output_size());
  gen.step(state, StepInput{}, logits, nullptr);
  for (SymbolId s : prefix) gen.step(state, StepInput{s, nullptr}, logits, nullptr);
}

// -log q(target) under the softmax restricted to non-EOS symbols, with its
// gradient over the full logit vector (zero at EOS).
ops::NllResult masked_nll(const Vocabulary& vocab, std::span<const double> logits,
                          SymbolId target) {
  const std::size_t eos = vocab.eos_scorable();
  auto r = ops::log_softmax_nll(logits.first(eos), vocab.to_scorable(target));
  r.grad.resize(logits.size(), 0.0);
  return r;
}

void check_position(std::span<const SymbolId> sequence, std::size_t t) {
  if (t < 1 || t > sequence.size()) {
    throw std::out_of_range("rollout position " + std::to_string(t) + " outside [1, " +
                            std::to_string(sequence.size()) + "]");
  }
}

}  // namespace

SampleSet sample_sequences(const LanguageModel& generator, std::size_t n, std::size_t length,
                           Rng& rng) {
  SampleSet out;
  out.generator_id = model_fingerprint(generator);
  out.seed = rng.seed();
  out.length = length;
  out.sequences.reserve(n);
  std::vector<double> logits(generator.output_size());
  for (std::size_t i = 0; i < n; ++i) {
    ModelState state = generator.initial_state();
    Sequence seq;
    seq.reserve(length);
    StepInput in;
    for (std::size_t k = 0; k < length; ++k) {
      generator.step(state, in, logits, nullptr);
      seq.push_back(sample_replacement(generator.vocab(), logits, rng));
      in = {seq.back(), nullptr};
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

std::vector<Utterance> to_utterances(std::span<const Sequence> sequences,
                                     const Vocabulary& vocab) {
  std::vector<Utterance> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) {
    Utterance u;
    for (SymbolId s : seq) {
      const auto lang = vocab.lang_of(s);
      if (!lang || !vocab.is_scorable(s)) {
        throw DataError("symbol " + std::to_string(s) + " is not a scorable token");
      }
      u.tokens.push_back({*lang, s});
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Sequence> to_sequences(std::span<const Utterance> utterances) {
  std::vector<Sequence> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) {
    Sequence seq;
    for (const auto& t : u.tokens) seq.push_back(t.id);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Sequence> real_sequences(std::span<const Utterance> utterances, std::size_t length) {
  std::size_t total = 0;
  for (const auto& u : utterances) total += u.tokens.size();
  if (total == 0) throw DataError("no tokens to build real sequences from");
  std::vector<Sequence> out;
  out.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (utterances[i].tokens.empty()) continue;
    Sequence seq;
    for (std::size_t j = i; seq.size() < length; j = (j + 1) % utterances.size()) {
      for (const auto& t : utterances[j].tokens) {
        if (seq.size() == length) break;
        seq.push_back(t.id);
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(std::size_t symbol_count, std::size_t embed, std::size_t hidden,
                             std::uint64_t seed)
    : embedding("disc.emb", Tensor({symbol_count, embed})),
      cell("disc.cell", embed, hidden),
      out_weight("disc.out.weight", Tensor({1, hidden})),
      out_bias("disc.out.bias", Tensor({1})) {
  Rng rng(seed);
  for (double& v : embedding.value.values()) v = rng.uniform(-0.1, 0.1);
  cell.initialize(rng, 0.05);
  for (double& v : out_weight.value.values()) v = rng.uniform(-0.05, 0.05);
}

std::vector<Parameter*> Discriminator::parameters() {
  return {&embedding, &cell.weight, &cell.bias, &out_weight, &out_bias};
}

double Discriminator::logit(std::span<const SymbolId> sequence, std::vector<LstmCache>* caches,
                            std::vector<double>* h_last) const {
  if (sequence.empty()) throw DataError("empty sequence");
  LstmState state = cell.zero_state(), next;
  if (caches) caches->resize(sequence.size());
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    if (sequence[t] >= embedding.value.rows()) {
      throw std::out_of_range("symbol " + std::to_string(sequence[t]) + " out of range");
    }
    cell.step(embedding.value.row(sequence[t]), state.h, state.c, next,
              caches ? &(*caches)[t] : nullptr);
    std::swap(state, next);
  }
  double z = out_bias.value[0];
  for (std::size_t k = 0; k < state.h.size(); ++k) z += out_weight.value[k] * state.h[k];
  if (h_last) *h_last = state.h;
  return z;
}

double Discriminator::score(std::span<const SymbolId> sequence) const {
  return ops::sigmoid(logit(sequence, nullptr, nullptr));
}

double Discriminator::accumulate_gradient(std::span<const SymbolId> sequence, bool real,
                                          double weight) {
  std::vector<LstmCache> caches;
  std::vector<double> h;
  const double z = logit(sequence, &caches, &h);
  const double y = real ? 1.0 : 0.0;
  // softplus(z) - y z, written to avoid overflow
  const double loss = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
  const double dz = weight * (ops::sigmoid(z) - y);

  const std::size_t H = h.size();
  std::vector<double> dh(H), dc(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    out_weight.grad[k] += dz * h[k];
    dh[k] = dz * out_weight.value[k];
  }
  out_bias.grad[0] += dz;
  std::vector<double> dx(cell.input_size());
  for (std::size_t t = sequence.size(); t-- > 0;) {
    std::vector<double> dh_prev(H, 0.0), dc_prev(H, 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    cell.backward(caches[t], dh, dc, dx, dh_prev, dc_prev);
    auto row = embedding.grad.row(sequence[t]);
    for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return loss;
}

DiscriminatorReport train_discriminator(Discriminator& disc, std::span<const Sequence> real,
                                        std::span<const Sequence> fake,
                                        const DiscriminatorTraining& options, Rng& rng) {
  if (real.size() < 2 || fake.size() < 2) {
    throw DataError("discriminator needs at least two real and two generated sequences");
  }
  auto partition = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    auto hold = static_cast<std::size_t>(std::llround(options.held_out_fraction * n));
    hold = std::clamp<std::size_t>(hold, 1, n - 1);
    return std::pair{std::vector<std::size_t>(idx.begin() + hold, idx.end()),
                     std::vector<std::size_t>(idx.begin(), idx.begin() + hold)};
  };
  const auto [real_train, real_held] = partition(real.size());
  const auto [fake_train, fake_held] = partition(fake.size());

  DiscriminatorReport report;
  const auto params = disc.parameters();
  zero_grads(params);
  const std::size_t half = std::max<std::size_t>(1, options.batch / 2);
  const double weight = 1.0 / static_cast<double>(2 * half);
  for (std::size_t u = 0; u < options.updates; ++u) {
    double loss = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
      loss += disc.accumulate_gradient(real[real_train[rng.uniform_index(real_train.size())]],
                                       true, weight);
      loss += disc.accumulate_gradient(fake[fake_train[rng.uniform_index(fake_train.size())]],
                                       false, weight);
    }
    report.losses.push_back(loss * weight);
    sgd_step(params, options.lr, options.grad_clip_norm);
  }

  auto accuracy = [&](std::span<const Sequence> set, const std::vector<std::size_t>& idx,
                      bool is_real) {
    double correct = 0.0;
    for (std::size_t i : idx) {
      const double p = disc.score(set[i]);
      if (p == 0.5) {
        correct += 0.5;
      } else if ((p > 0.5) == is_real) {
        correct += 1.0;
      }
    }
    return correct / static_cast<double>(idx.size());
  };
  report.held_out_accuracy =
      0.5 * (accuracy(real, real_held, true) + accuracy(fake, fake_held, false));
  return report;
}

// ---------------------------------------------------------------------------
// Rewards

double rollout_reward(const LanguageModel& generator, const SequenceScorer& scorer,
                      std::span<const SymbolId> sequence, std::size_t t, std::size_t n_rollouts,
                      Rng& rng) {
  check_position(sequence, t);
  if (t == sequence.size()) return scorer.score(sequence);
  if (n_rollouts < 1) throw std::invalid_argument("n_rollouts must be at least 1");
  ModelState start = generator.initial_state();
  std::vector<double> start_logits;
  advance(generator, start, sequence.first(t), start_logits);
  double total = 0.0;
  Sequence completion(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(t));
  for (std::size_t r = 0; r < n_rollouts; ++r) {
    ModelState state = start;
    std::vector<double> logits = start_logits;
    completion.resize(t);
    while (completion.size() < sequence.size()) {
      completion.push_back(sample_replacement(generator.vocab(), logits, rng));
      if (completion.size() < sequence.size()) {
        generator.step(state, StepInput{completion.back(), nullptr}, logits, nullptr);
      }
    }
    total += scorer.score(completion);
  }
  return total / static_cast<double>(n_rollouts);
}

double exact_rollout_reward(const LanguageModel& generator, const SequenceScorer& scorer,
                            std::span<const SymbolId> sequence, std::size_t t,
                            std::size_t max_completions) {
  check_position(sequence, t);
  if (t == sequence.size()) return scorer.score(sequence);
  const auto& vocab = generator.vocab();
  const std::size_t branching = vocab.eos_scorable();
  double count = 1.0;
  for (std::size_t k = t; k < sequence.size(); ++k) count *= static_cast<double>(branching);
  if (count > static_cast<double>(max_completions)) {
    throw std::length_error("too many completions to enumerate");
  }
  ModelState start = generator.initial_state();
  std::vector<double> start_logits;
  advance(generator, start, sequence.first(t), start_logits);
  Sequence seq(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(t));
  double expectation = 0.0;
  std::function<void(const ModelState&, const std::vector<double>&, double)> visit =
      [&](const ModelState& state, const std::vector<double>& logits, double prob) {
        const auto q = ops::softmax(std::span<const double>(logits).first(branching));
        for (std::size_t j = 0; j < branching; ++j) {
          seq.push_back(vocab.from_scorable(j));
          if (seq.size() == sequence.size()) {
            expectation += prob * q[j] * scorer.score(seq);
          } else {
            ModelState next = state;
            std::vector<double> next_logits(logits.size());
            generator.step(next, StepInput{seq.back(), nullptr}, next_logits, nullptr);
            visit(next, next_logits, prob * q[j]);
          }
          seq.pop_back();
        }
      };
  visit(start, start_logits, 1.0);
  return expectation;
}

std::vector<double> sequence_rewards(const LanguageModel& generator, const SequenceScorer& scorer,
                                     std::span<const SymbolId> sequence, std::size_t n_rollouts,
                                     Rng& rng) {
  std::vector<double> out;
  out.reserve(sequence.size());
  for (std::size_t t = 1; t <= sequence.size(); ++t) {
    out.push_back(rollout_reward(generator, scorer, sequence, t, n_rollouts, rng));
  }
  return out;
}

double sequence_log_prob(const LanguageModel& generator, std::span<const SymbolId> sequence) {
  ModelState state = generator.initial_state();
  std::vector<double> logits(generator.output_size());
  double lp = 0.0;
  StepInput in;
  for (SymbolId s : sequence) {
    generator.step(state, in, logits, nullptr);
    lp -= masked_nll(generator.vocab(), logits, s).loss;
    in = {s, nullptr};
  }
  return lp;
}

double RewardBaseline::update(double batch_mean) {
  value = value ? decay * *value + (1.0 - decay) * batch_mean : batch_mean;
  return *value;
}

double policy_gradient_step(LanguageModel& generator, std::span<const Sequence> sequences,
                            std::span<const std::vector<double>> rewards, double baseline,
                            double lr, double grad_clip_norm) {
  if (rewards.size() != sequences.size()) {
    throw std::invalid_argument("one reward vector per sequence required");
  }
  const auto params = generator.parameters();
  zero_grads(params);
  if (sequences.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    if (rewards[i].size() != seq.size()) {
      throw std::invalid_argument("one reward per position required");
    }
    if (seq.empty()) continue;
    ModelState state = generator.initial_state();
    std::vector<StepCache> caches(seq.size());
    std::vector<std::vector<double>> dlogits(seq.size());
    std::vector<double> logits(generator.output_size());
    StepInput in;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      generator.step(state, in, logits, &caches[t]);
      auto r = masked_nll(generator.vocab(), logits, seq[t]);
      const double adv = (rewards[i][t] - baseline) * scale;
      for (double& g : r.grad) g *= adv;
      dlogits[t] = std::move(r.grad);
      in = {seq[t], nullptr};
    }
    generator.backward(caches, dlogits);
  }
  return sgd_step(params, lr, grad_clip_norm);
}

// ---------------------------------------------------------------------------
// Pipelines

SeqGanResult seqgan_train(const Vocabulary& vocab, const ModelConfig& generator_config,
                          const CorpusSplit& split, const GanConfig& gan,
                          const TrainConfig& mle_config, const RoundCallback& on_round) {
  gan.validate();
  SeqGanResult result;
  result.generator = make_model(vocab, generator_config);
  if (gan.mle_pretrain_epochs > 0) {
    TrainConfig mc = mle_config;
    mc.total_epochs = gan.mle_pretrain_epochs;
    mc.decay_start_epoch = std::min(mc.decay_start_epoch, mc.total_epochs);
    result.mle = train_mle(*result.generator, split, mc, "generator");
  }
  if (gan.n_rounds == 0) return result;

  Rng rng(derive_seed(gan.seed, 0x5eb6a4));
  result.discriminator = std::make_unique<Discriminator>(vocab.size(), gan.d_embed, gan.d_hidden,
                                                         derive_seed(gan.seed, 0xd15c));
  auto& gen = *result.generator;
  auto& disc = *result.discriminator;
  const auto real = real_sequences(split.train, gan.sample_len);
  DiscriminatorTraining dt{gan.d_pretrain_updates, gan.d_batch, gan.d_lr, gan.held_out_fraction};
  auto fake = sample_sequences(gen, gan.d_pool, gan.sample_len, rng);
  result.pretrain_disc_accuracy =
      train_discriminator(disc, real, fake.sequences, dt, rng).held_out_accuracy;
  dt.updates = gan.d_updates;

  RewardBaseline baseline{gan.baseline_decay};
  double accuracy = result.pretrain_disc_accuracy;
  for (std::size_t round = 1; round <= gan.n_rounds; ++round) {
    GanRoundLog log{round};
    double reward_sum = 0.0;
    std::size_t reward_count = 0;
    for (std::size_t g = 0; g < gan.g_steps; ++g) {
      const auto batch = sample_sequences(gen, gan.g_batch, gan.sample_len, rng);
      std::vector<std::vector<double>> rewards;
      double batch_sum = 0.0;
      for (const auto& seq : batch.sequences) {
        rewards.push_back(sequence_rewards(gen, disc, seq, gan.n_rollouts, rng));
        for (double r : rewards.back()) batch_sum += r;
      }
      const std::size_t n = batch.sequences.size() * gan.sample_len;
      reward_sum += batch_sum;
      reward_count += n;
      log.baseline = baseline.update(batch_sum / static_cast<double>(n));
      policy_gradient_step(gen, batch.sequences, rewards, log.baseline, gan.g_lr);
    }
    for (std::size_t d = 0; d < gan.d_steps; ++d) {
      fake = sample_sequences(gen, gan.d_pool, gan.sample_len, rng);
      accuracy = train_discriminator(disc, real, fake.sequences, dt, rng).held_out_accuracy;
    }
    log.mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
    log.disc_accuracy = accuracy;
    result.rounds.push_back(log);
    if (on_round) on_round(log, gen, disc);
  }
  return result;
}

std::size_t same_source_sample_count(double multiplier, std::size_t train_tokens,
                                     std::size_t sample_len) {
  if (sample_len == 0) throw std::invalid_argument("sample_len must be positive");
  return static_cast<std::size_t>(
      std::llround(multiplier * static_cast<double>(train_tokens) / static_cast<double>(sample_len)));
}

SameSourceResult same_source_pretrain(const Vocabulary& vocab, const ModelConfig& lm_config,
                                      const CorpusSplit& split, const GanConfig& gan,
                                      const TrainConfig& pre_config,
                                      const TrainConfig& fine_config,
                                      const RoundCallback& on_round) {
  gan.validate();
  SameSourceResult result;
  if (gan.sample_multiplier == 0.0) {
    result.model = make_model(vocab, lm_config);
    result.training = train_mle(*result.model, split, fine_config, "finetune");
    return result;
  }
  result.gan = seqgan_train(vocab, lm_config, split, gan, fine_config, on_round);
  std::size_t train_tokens = 0;
  for (const auto& u : split.train) train_tokens += u.tokens.size();
  const std::size_t n = same_source_sample_count(gan.sample_multiplier, train_tokens, gan.sample_len);
  Rng rng(derive_seed(gan.seed, 0x5a3f1e));
  result.samples = sample_sequences(*result.gan->generator, n, gan.sample_len, rng);

  result.model = make_model(vocab, lm_config);
  EncodedCorpus corpus{to_utterances(result.samples.sequences, vocab), vocab.hash()};
  result.training = pretrain_then_finetune(*result.model, corpus, split, pre_config, fine_config);
  return result;
}

// ---------------------------------------------------------------------------
// Novelty and reports

double ngram_novelty(std::span<const Sequence> generated, std::span<const Sequence> train,
                     std::size_t n) {
  if (n < 2 || n > 4) throw std::invalid_argument("n-gram order must be 2, 3 or 4");
  auto collect = [n](std::span<const Sequence> seqs) {
    std::set<Sequence> grams;
    for (const auto& s : seqs) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        grams.emplace(s.begin() + static_cast<std::ptrdiff_t>(i),
                      s.begin() + static_cast<std::ptrdiff_t>(i + n));
      }
    }
    return grams;
  };
  const auto gen = collect(generated);
  if (gen.empty()) throw DataError("generated text has no " + std::to_string(n) + "-grams");
  const auto seen = collect(train);
  std::size_t fresh = 0;
  for (const auto& g : gen) fresh += !seen.contains(g);
  return 100.0 * static_cast<double>(fresh) / static_cast<double>(gen.size());
}

void write_sample_set(std::ostream& text, std::ostream& meta, const SampleSet& samples,
                      const Vocabulary& vocab) {
  for (const auto& u : to_utterances(samples.sequences, vocab)) {
    text << join_surface(decode(u, vocab)) << '\n';
  }
  meta << "generator=" << hex64(samples.generator_id) << "\tseed=" << samples.seed
       << "\tlength=" << samples.length << "\tcount=" << samples.sequences.size() << '\n';
}

void write_novelty_table(std::ostream& out, std::span<const NoveltyColumn> columns) {
  out << "ngram";
  for (const auto& c : columns) out << '\t' << c.label;
  out << '\n';
  const char* names[] = {"bigram", "trigram", "quadgram"};
  for (int row = 0; row < 3; ++row) {
    out << names[row];
    for (const auto& c : columns) {
      const double v = row == 0 ? c.bigram : row == 1 ? c.trigram : c.quadgram;
      out << '\t' << (std::isnan(v) ? std::string("n/a") : format_double(v));
    }
    out << '\n';
  }
}

}  // namespace cslm
