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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cslm/errors.hpp"
#include "cslm/training.hpp"
#include "reference_model.hpp"
#include "toy_corpus.hpp"

using namespace cslm;
using cslm::testing::memorization_split;
using cslm::testing::toy_corpus;

namespace {

Vocabulary word_vocab(std::size_t n0, std::size_t n1) {
  std::vector<std::string> w0, w1;
  for (std::size_t i = 0; i < n0; ++i) w0.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < n1; ++i) w1.push_back("h" + std::to_string(i));
  return Vocabulary(w0, w1);
}

Token word(const Vocabulary& v, Lang l, std::size_t i) {
  return {l, v.block_start(l) + 2 + static_cast<SymbolId>(i)};
}

void zero_all(LanguageModel& m) {
  for (Parameter* p : m.parameters()) p->value.fill(0.0);
}

void randomize(LanguageModel& m, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (Parameter* p : m.parameters()) {
    for (double& v : p->value.values()) v = rng.uniform(-scale, scale);
  }
}

// Three utterances exercising every transition class.
std::vector<Utterance> mixed_toy(const Vocabulary& v) {
  return {Utterance{{word(v, Lang::l0, 0), word(v, Lang::l1, 1), word(v, Lang::l1, 0)}, {}},
          Utterance{{word(v, Lang::l1, 1), word(v, Lang::l0, 1), word(v, Lang::l0, 0)}, {}},
          Utterance{{word(v, Lang::l0, 1)}, {}}};
}

TrainConfig short_config(std::size_t epochs, std::size_t batch_size = 32) {
  TrainConfig c;
  c.total_epochs = epochs;
  c.decay_start_epoch = epochs / 2;
  c.batch_size = batch_size;
  return c;
}

std::vector<double> parameter_values(LanguageModel& m) {
  std::vector<double> out;
  for (Parameter* p : m.parameters()) {
    auto v = p->value.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

TEST(LrSchedule, RecipeBoundaries) {
  TrainConfig c;
  EXPECT_EQ(lr_at_epoch(c, 1), 1.0);
  EXPECT_EQ(lr_at_epoch(c, 80), 1.0);
  EXPECT_EQ(lr_at_epoch(c, 81), 0.98);
  EXPECT_NEAR(lr_at_epoch(c, 90), 0.81707, 5e-6);
  EXPECT_EQ(lr_at_epoch(c, 90), std::pow(0.98, 10));
  EXPECT_THROW(lr_at_epoch(c, 0), std::out_of_range);
  EXPECT_THROW(lr_at_epoch(c, 101), std::out_of_range);
}

TEST(LrSchedule, NonIncreasing) {
  TrainConfig c;
  c.total_epochs = 300;
  c.decay_start_epoch = 37;
  c.decay_rate = 0.9;
  for (std::size_t e = 2; e <= c.total_epochs; ++e) {
    EXPECT_LE(lr_at_epoch(c, e), lr_at_epoch(c, e - 1));
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.decay_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.decay_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.decay_start_epoch = 101;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(SgdStep, Examples) {
  Parameter p("p", Tensor::vector({1.0}));
  p.grad[0] = 0.5;
  std::vector<Parameter*> ps = {&p};
  sgd_step(ps, 0.0, 0.0);
  EXPECT_EQ(p.value[0], 1.0);
  EXPECT_EQ(p.grad[0], 0.0);
  p.grad[0] = 0.5;
  EXPECT_EQ(sgd_step(ps, 1.0, 0.0), 0.5);
  EXPECT_EQ(p.value[0], 0.5);

  Parameter q("q", Tensor::vector({0.0, 0.0}));
  q.grad[0] = 6.0;
  q.grad[1] = 8.0;
  std::vector<Parameter*> qs = {&q};
  EXPECT_EQ(sgd_step(qs, 1.0, 5.0), 10.0);
  EXPECT_DOUBLE_EQ(q.value[0], -3.0);
  EXPECT_DOUBLE_EQ(q.value[1], -4.0);
}

TEST(SgdStep, ClippingPreservesDirection) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Parameter a("a", Tensor({3})), b("b", Tensor({2, 2}));
    std::vector<double> g;
    for (Parameter* p : {&a, &b}) {
      for (double& x : p->grad.values()) {
        x = rng.uniform(-10, 10);
        g.push_back(x);
      }
    }
    std::vector<Parameter*> ps = {&a, &b};
    const double norm = sgd_step(ps, -1.0, 1.0);  // value becomes the applied step
    std::vector<double> step;
    for (Parameter* p : ps) {
      for (double x : p->value.values()) step.push_back(x);
    }
    double step_norm = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      step_norm += step[i] * step[i];
      dot += step[i] * g[i];
    }
    step_norm = std::sqrt(step_norm);
    EXPECT_NEAR(step_norm, std::min(norm, 1.0), 1e-12);
    EXPECT_NEAR(dot / (step_norm * norm), 1.0, 1e-12);
  }
}

TEST(SgdStep, NonFiniteGradientAborts) {
  Parameter a("a", Tensor::vector({1.0})), b("bad", Tensor::vector({2.0}));
  a.grad[0] = 1.0;
  b.grad[0] = std::nan("");
  std::vector<Parameter*> ps = {&a, &b};
  try {
    sgd_step(ps, 1.0, 5.0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 2.0);
}

TEST(Perplexity, UniformModelOverHundredSymbols) {
  auto v = word_vocab(48, 49);
  ASSERT_EQ(v.scorable_size(), 100u);
  DualLm m(v, {.hidden = 4, .embed = 4});
  zero_all(m);
  std::vector<Utterance> set = mixed_toy(v);
  EXPECT_NEAR(perplexity(m, set), 100.0, 1e-6);
  EXPECT_THROW(perplexity(m, std::vector<Utterance>{}), DataError);
}

TEST(Perplexity, MatchesIndependentTrace) {
  auto v = word_vocab(2, 2);
  DualLm m(v, {.hidden = 3, .embed = 2, .seed = 21});
  randomize(m, 21, 0.8);
  const auto set = mixed_toy(v);
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& u : set) {
    for (double p : cslm::testing::reference_dual_probs(m, u)) {
      nll -= std::log(p);
      ++count;
    }
  }
  EXPECT_NEAR(perplexity(m, set), std::exp(nll / static_cast<double>(count)), 1e-9);
}

TEST(Perplexity, PermutationInvariant) {
  auto toy = toy_corpus(30, 5);
  RnnLm m(toy.vocab, {.kind = ModelKind::rnnlm, .hidden = 6, .embed = 6, .seed = 5});
  auto shuffled = toy.utterances;
  Rng rng(1);
  rng.shuffle(std::span<Utterance>(shuffled));
  EXPECT_NEAR(perplexity(m, shuffled), perplexity(m, toy.utterances), 1e-12);
}

TEST(DecomposedPerplexity, MatchesHandBucketing) {
  auto v = word_vocab(2, 2);
  DualLm m(v, {.hidden = 3, .embed = 2, .seed = 22});
  randomize(m, 22, 0.8);
  const auto set = mixed_toy(v);
  std::map<std::string, std::pair<double, int>> hand;
  for (const auto& u : set) {
    const auto probs = cslm::testing::reference_dual_probs(m, u);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      std::string key;
      if (i == u.tokens.size()) {
        key = "EOS";
      } else if (i == 0) {
        key = "UtteranceInitial";
      } else {
        key = std::string(short_name(u.tokens[i - 1].lang)) + short_name(u.tokens[i].lang);
      }
      hand[key].first -= std::log(probs[i]);
      hand[key].second += 1;
    }
  }
  const auto d = decomposed_perplexity(m, set);
  for (auto c : kTransitionClasses) {
    ASSERT_TRUE(hand.count(to_string(c))) << to_string(c);
    const auto [sum, n] = hand[to_string(c)];
    EXPECT_EQ(d[c].count, static_cast<std::size_t>(n)) << to_string(c);
    EXPECT_NEAR(*d[c].perplexity(), std::exp(sum / n), 1e-9) << to_string(c);
  }
}

TEST(DecomposedPerplexity, PartitionReconstructsOverall) {
  auto toy = toy_corpus(40, 9, 0.4);
  DualLm m(toy.vocab, {.hidden = 8, .embed = 8, .seed = 9});
  randomize(m, 9, 0.3);
  const auto d = decomposed_perplexity(m, toy.utterances);
  std::size_t total = 0, eos = toy.utterances.size(), tokens = 0;
  double weighted = 0.0;
  for (auto c : kTransitionClasses) {
    total += d[c].count;
    if (d[c].count) weighted += d[c].count * std::log(*d[c].perplexity());
  }
  for (const auto& u : toy.utterances) tokens += u.tokens.size();
  EXPECT_EQ(total, tokens + eos);
  EXPECT_EQ(total - d[TransitionClass::eos].count, tokens);
  EXPECT_NEAR(weighted / total, std::log(perplexity(m, toy.utterances)), 1e-9);
}

TEST(DecomposedPerplexity, MonolingualPopulatesOnlyEngEng) {
  auto toy = toy_corpus(20, 2, 0.0);
  RnnLm m(toy.vocab, {.kind = ModelKind::rnnlm, .hidden = 4, .embed = 4});
  const auto d = decomposed_perplexity(m, toy.utterances);
  EXPECT_GT(d[TransitionClass::eng_eng].count, 0u);
  EXPECT_GT(d[TransitionClass::utterance_initial].count, 0u);
  for (auto c : {TransitionClass::eng_man, TransitionClass::man_eng, TransitionClass::man_man}) {
    EXPECT_EQ(d[c].count, 0u);
    EXPECT_FALSE(d[c].perplexity().has_value());
  }
  std::ostringstream out;
  std::vector<DecomposedRow> rows = {{"rnnlm", d}};
  write_decomposed_table(out, rows);
  EXPECT_NE(out.str().find("\tn/a\tn/a\tn/a\t"), std::string::npos);
}

class Overfit : public ::testing::TestWithParam<ModelKind> {};

TEST_P(Overfit, MemorizesTenUtterances) {
  auto toy = cslm::testing::overfit_corpus();
  ASSERT_LT(cslm::testing::prefix_tree_floor(toy.utterances), 1.25);
  auto split = memorization_split(toy);
  auto m = make_model(toy.vocab, {.kind = GetParam(), .hidden = 16, .embed = 16, .seed = 3});
  TrainConfig c = short_config(200, 1);
  c.decay_start_epoch = 160;
  const auto r = train_mle(*m, split, c);
  ASSERT_EQ(r.log.size(), 200u);
  const double ppl = perplexity(*m, split.train);
  EXPECT_LT(ppl, 1.5);
  EXPECT_LE(r.best_dev_ppl, r.log.front().dev_ppl);
  EXPECT_DOUBLE_EQ(ppl, r.best_dev_ppl);
}

TEST_P(Overfit, FullBatchLossNonIncreasingAfterDecay) {
  auto toy = cslm::testing::overfit_corpus();
  auto split = memorization_split(toy);
  auto m = make_model(toy.vocab, {.kind = GetParam(), .hidden = 16, .embed = 16, .seed = 3});
  TrainConfig c = short_config(200, toy.utterances.size());
  c.decay_start_epoch = 160;
  const auto r = train_mle(*m, split, c);
  for (std::size_t e = c.decay_start_epoch; e < r.log.size(); ++e) {
    EXPECT_LE(r.log[e].train_loss, r.log[e - 1].train_loss + 1e-3) << "epoch " << e + 1;
  }
}

INSTANTIATE_TEST_SUITE_P(Models, Overfit, ::testing::Values(ModelKind::rnnlm, ModelKind::dual),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(TrainMle, DeterministicLogs) {
  auto toy = toy_corpus(30, 8);
  CorpusSplit split = split_corpus(toy.utterances, 8);
  split.vocab_hash = toy.vocab.hash();
  const TrainConfig c = short_config(4, 4);
  std::string logs[2];
  for (auto& log : logs) {
    DualLm m(toy.vocab, {.hidden = 8, .embed = 8, .seed = 8});
    auto r = train_mle(m, split, c);
    std::ostringstream out;
    write_epoch_log_tsv(out, r.log);
    log = out.str();
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(logs[0].substr(0, logs[0].find('\n')), "epoch\tlr\ttrain_loss\tdev_ppl\tseconds");
}

TEST(TrainMle, RejectsForeignVocabulary) {
  auto toy = toy_corpus(20, 1);
  auto split = memorization_split(toy);
  split.vocab_hash ^= 1;
  DualLm m(toy.vocab, {.hidden = 4, .embed = 4});
  EXPECT_THROW(train_mle(m, split, TrainConfig{}), DataError);
}

TEST(ScheduledSampling, LinearScheduleEndpoints) {
  SamplingSchedule s{.floor = 0.25};
  EXPECT_EQ(s.p_teacher(1, 11), 1.0);
  EXPECT_DOUBLE_EQ(s.p_teacher(6, 11), 0.625);
  EXPECT_DOUBLE_EQ(s.p_teacher(11, 11), 0.25);
}

TEST(ScheduledSampling, FullTeacherForcingEqualsMle) {
  auto toy = toy_corpus(20, 6);
  auto split = memorization_split(toy);
  const TrainConfig c = short_config(3, 5);
  DualLm a(toy.vocab, {.hidden = 6, .embed = 6, .seed = 6});
  DualLm b = a;
  auto ra = train_mle(a, split, c, "x");
  auto rb = train_scheduled_sampling(b, split, c, {.floor = 1.0}, "x");
  EXPECT_EQ(ra.log, rb.log);
  EXPECT_EQ(parameter_values(a), parameter_values(b));
}

TEST(ScheduledSampling, FloorZeroReplacesEveryInputAfterBos) {
  auto toy = toy_corpus(10, 7);
  DualLm m(toy.vocab, {.hidden = 6, .embed = 6, .seed = 7});
  Rng rng(7);
  for (const auto& u : toy.utterances) {
    InputTrace trace;
    accumulate_scheduled_gradient(m, u, 1.0, 0.0, rng, &trace);
    ASSERT_EQ(trace.inputs.size(), u.tokens.size());
    EXPECT_TRUE(std::all_of(trace.replaced.begin(), trace.replaced.end(), [](bool r) { return r; }));
    for (SymbolId s : trace.inputs) {
      EXPECT_TRUE(toy.vocab.is_scorable(s) && s != Vocabulary::kEos) << s;
    }
  }
}

TEST(ScheduledSampling, ReplacementsStayInScorableVocabulary) {
  auto v = word_vocab(3, 3);
  Rng rng(11);
  std::vector<double> logits(v.scorable_size());
  for (int i = 0; i < 2000; ++i) {
    for (double& x : logits) x = rng.uniform(-4, 4);
    logits[v.eos_scorable()] = 50.0;  // EOS is masked even when dominant
    const SymbolId s = sample_replacement(v, logits, rng);
    EXPECT_TRUE(v.is_scorable(s));
    EXPECT_NE(s, Vocabulary::kEos);
    EXPECT_NE(s, Vocabulary::kBos);
    EXPECT_FALSE(v.is_dummy(s));
  }
}

TEST(Pretraining, EmptyCorpusEqualsPlainTraining) {
  auto toy = toy_corpus(20, 12);
  auto split = memorization_split(toy);
  const TrainConfig c = short_config(3, 4);
  RnnLm a(toy.vocab, {.kind = ModelKind::rnnlm, .hidden = 6, .embed = 6, .seed = 12});
  RnnLm b = a;
  auto ra = train_mle(a, split, c, "finetune");
  auto rb = pretrain_then_finetune(b, EncodedCorpus{{}, toy.vocab.hash()}, split, c, c);
  EXPECT_EQ(ra.log, rb.log);
  EXPECT_EQ(parameter_values(a), parameter_values(b));
}

TEST(Pretraining, PhasesAreLoggedInOrder) {
  auto toy = toy_corpus(20, 13);
  auto split = memorization_split(toy);
  auto pre = toy_corpus(40, 14);
  // Re-encode the pretraining text with the fine-tune vocabulary.
  EncodedCorpus corpus{{}, toy.vocab.hash()};
  for (const auto& u : pre.utterances) {
    corpus.utterances.push_back(encode(decode(u, pre.vocab), toy.vocab));
  }
  const TrainConfig pc = short_config(2), fc = short_config(3);
  DualLm m(toy.vocab, {.hidden = 6, .embed = 6, .seed = 13});
  auto r = pretrain_then_finetune(m, corpus, split, pc, fc);
  ASSERT_EQ(r.log.size(), 5u);
  EXPECT_EQ(r.log[1].phase, "pretrain");
  EXPECT_EQ(r.log[2].phase, "finetune");
  EXPECT_EQ(r.log[2].epoch, 1u);

  corpus.vocab_hash = pre.vocab.hash();
  EXPECT_THROW(pretrain_then_finetune(m, corpus, split, pc, fc), DataError);
}

TEST(Reports, TablesAreExact) {
  std::ostringstream out;
  std::vector<std::string> cols = {"dev", "test"};
  std::vector<PerplexityRow> rows = {{"rnnlm", {12.5, 13.25}}, {"dual", {0.1, 1e21}}};
  write_perplexity_table(out, cols, rows);
  EXPECT_EQ(out.str(), "model\tdev\ttest\nrnnlm\t12.5\t13.25\ndual\t0.1\t1e+21\n");
  std::ostringstream log;
  std::vector<EpochLog> entries = {{"p", 1, 1.0, 2.5, std::nan(""), 0.0}};
  write_epoch_log_tsv(log, entries);
  EXPECT_EQ(log.str(), "epoch\tlr\ttrain_loss\tdev_ppl\tseconds\n1\t1\t2.5\tnan\t0\n");
}
