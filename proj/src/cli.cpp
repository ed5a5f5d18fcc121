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

#include "cslm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "cslm/checkpoint.hpp"
#include "cslm/errors.hpp"
#include "cslm/features.hpp"
#include "cslm/vocabulary.hpp"

namespace cslm::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + s + "' is not a valid number");
  }
  return value;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("'" + s + "' is not true or false");
}

PretrainMode parse_mode(const std::string& s) {
  for (auto m : {PretrainMode::none, PretrainMode::monolingual, PretrainMode::same_source_naive,
                 PretrainMode::same_source_scheduled, PretrainMode::same_source_seqgan}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown pretraining mode '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Key number_key(std::string name, T ExperimentConfig::*field) {
  return {std::move(name), [field](ExperimentConfig& c, const std::string& v) {
            c.*field = parse_number<T>(v);
          },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*field);
            else return std::to_string(c.*field);
          }};
}

template <typename S, typename T>
Key nested_key(std::string name, S ExperimentConfig::*group, T S::*field) {
  return {std::move(name), [group, field](ExperimentConfig& c, const std::string& v) {
            c.*group.*field = parse_number<T>(v);
          },
          [group, field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*group.*field);
            else return std::to_string(c.*group.*field);
          }};
}

Key path_key(std::string name, fs::path ExperimentConfig::*field) {
  return {std::move(name),
          [field](ExperimentConfig& c, const std::string& v) { c.*field = fs::path(v); },
          [field](const ExperimentConfig& c) { return (c.*field).generic_string(); }};
}

const std::vector<Key>& registry() {
  using C = ExperimentConfig;
  static const std::vector<Key> keys = {
      path_key("data.dir", &C::data_dir),
      path_key("data.mono0", &C::mono0),
      path_key("data.mono1", &C::mono1),
      path_key("output.dir", &C::output_dir),
      number_key("seed", &C::seed),
      {"model.kind", [](C& c, const std::string& v) { c.model_kind = parse_model_kind(v); },
       [](const C& c) { return std::string(to_string(c.model_kind)); }},
      number_key("model.hidden", &C::hidden),
      number_key("model.embed", &C::embed),
      {"model.features", [](C& c, const std::string& v) { c.features = split_list(v); },
       [](const C& c) {
         std::string out;
         for (const auto& f : c.features) out += (out.empty() ? "" : ",") + f;
         return out;
       }},
      nested_key("train.lr", &C::train, &TrainConfig::initial_lr),
      nested_key("train.decay", &C::train, &TrainConfig::decay_rate),
      nested_key("train.decay_start", &C::train, &TrainConfig::decay_start_epoch),
      nested_key("train.epochs", &C::train, &TrainConfig::total_epochs),
      nested_key("train.batch", &C::train, &TrainConfig::batch_size),
      nested_key("train.clip", &C::train, &TrainConfig::grad_clip_norm),
      {"pretrain.mode", [](C& c, const std::string& v) { c.pretrain = parse_mode(v); },
       [](const C& c) { return std::string(to_string(c.pretrain)); }},
      number_key("pretrain.epochs", &C::pretrain_epochs),
      number_key("pretrain.decay_start", &C::pretrain_decay_start),
      number_key("scheduled.floor", &C::scheduled_floor),
      nested_key("gan.sample_len", &C::gan, &GanConfig::sample_len),
      nested_key("gan.n_rollouts", &C::gan, &GanConfig::n_rollouts),
      nested_key("gan.g_steps", &C::gan, &GanConfig::g_steps),
      nested_key("gan.d_steps", &C::gan, &GanConfig::d_steps),
      nested_key("gan.n_rounds", &C::gan, &GanConfig::n_rounds),
      nested_key("gan.mle_epochs", &C::gan, &GanConfig::mle_pretrain_epochs),
      nested_key("gan.multiplier", &C::gan, &GanConfig::sample_multiplier),
      nested_key("gan.g_batch", &C::gan, &GanConfig::g_batch),
      nested_key("gan.g_lr", &C::gan, &GanConfig::g_lr),
      nested_key("gan.baseline_decay", &C::gan, &GanConfig::baseline_decay),
      nested_key("gan.d_embed", &C::gan, &GanConfig::d_embed),
      nested_key("gan.d_hidden", &C::gan, &GanConfig::d_hidden),
      nested_key("gan.d_batch", &C::gan, &GanConfig::d_batch),
      nested_key("gan.d_updates", &C::gan, &GanConfig::d_updates),
      nested_key("gan.d_pretrain_updates", &C::gan, &GanConfig::d_pretrain_updates),
      nested_key("gan.d_pool", &C::gan, &GanConfig::d_pool),
      nested_key("gan.d_lr", &C::gan, &GanConfig::d_lr),
      nested_key("gan.held_out", &C::gan, &GanConfig::held_out_fraction),
      {"log.timing", [](C& c, const std::string& v) { c.log_timing = parse_bool(v); },
       [](const C& c) { return std::string(c.log_timing ? "true" : "false"); }},
  };
  return keys;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + path.string());
}

const char* kSplitNames[] = {"train", "dev", "test"};

fs::path split_text(const fs::path& dir, const std::string& name) {
  return dir / "splits" / (name + ".txt");
}

fs::path split_features(const fs::path& dir, const std::string& name) {
  return dir / "splits" / (name + ".features.tsv");
}

// Keeps only the features the model declares.
void attach_selected(std::vector<Utterance>& utterances, const FeatureFile& file,
                     const std::vector<FeatureChannel>& channels) {
  FeatureFile selected;
  for (const auto& d : file.schema) {
    for (const auto& ch : channels) {
      if (ch.name == d.name) selected.schema.push_back(d);
    }
  }
  if (selected.schema.empty()) return;
  for (const auto& utt : file.utterances) {
    std::vector<FeatureVector> tokens;
    for (const auto& fv : utt) {
      FeatureVector kept;
      for (const auto& [name, id] : fv.values) {
        for (const auto& ch : channels) {
          if (ch.name == name) kept.values.emplace_back(name, id);
        }
      }
      tokens.push_back(std::move(kept));
    }
    selected.utterances.push_back(std::move(tokens));
  }
  attach_features(utterances, selected);
}

std::vector<Utterance> load_split(const fs::path& text, const fs::path& features,
                                  const Vocabulary& vocab,
                                  const std::vector<FeatureChannel>& channels) {
  auto utterances = encode_all(read_tokenized_corpus_file(text.string()), vocab);
  const bool wants_file = std::any_of(channels.begin(), channels.end(),
                                      [](const FeatureChannel& c) { return c.name != "lang"; });
  if (wants_file && fs::exists(features)) {
    attach_selected(utterances, load_features_file(features.string(), token_counts(utterances)),
                    channels);
  }
  return utterances;
}

std::vector<FeatureChannel> resolve_channels(const ExperimentConfig& config) {
  FeatureSchema schema;
  const fs::path features = split_features(config.data_dir, "train");
  std::optional<FeatureSchema> declared;
  if (fs::exists(features)) {
    std::istringstream header(read_text(features).substr(0, read_text(features).find('\n')) + "\n");
    declared = load_features(header, {}).schema;
  }
  for (const auto& name : config.features) {
    std::optional<FeatureDecl> decl;
    if (declared) {
      for (const auto& d : *declared) {
        if (d.name == name) decl = d;
      }
    }
    if (!decl && name == "lang") decl = FeatureDecl{"lang", 2};
    if (!decl) throw ConfigError("feature '" + name + "' is not declared by the prepared data");
    schema.push_back(*decl);
  }
  return default_channels(schema);
}

void write_phase_logs(const fs::path& dir, const std::vector<EpochLog>& log) {
  std::vector<std::string> phases;
  for (const auto& e : log) {
    if (std::find(phases.begin(), phases.end(), e.phase) == phases.end()) {
      phases.push_back(e.phase);
    }
  }
  for (const auto& phase : phases) {
    std::vector<EpochLog> part;
    std::copy_if(log.begin(), log.end(), std::back_inserter(part),
                 [&](const EpochLog& e) { return e.phase == phase; });
    std::ostringstream out;
    write_epoch_log_tsv(out, part);
    write_text(dir / (phase + ".tsv"), out.str());
  }
}

std::string checkpoint_bytes(LanguageModel& model) {
  std::ostringstream out;
  save_model(out, model);
  return out.str();
}

std::unique_ptr<LanguageModel> load_checkpoint(const fs::path& path, const Vocabulary& vocab) {
  std::istringstream in(read_text(path));
  return load_model(in, vocab);
}

NoveltyColumn novelty_column(std::string label, std::span<const Sequence> generated,
                             std::span<const Sequence> reference, std::ostream* messages) {
  NoveltyColumn col{std::move(label)};
  double* slots[] = {&col.bigram, &col.trigram, &col.quadgram};
  for (std::size_t n = 2; n <= 4; ++n) {
    try {
      *slots[n - 2] = ngram_novelty(generated, reference, n);
    } catch (const DataError& e) {
      *slots[n - 2] = std::numeric_limits<double>::quiet_NaN();
      if (messages) *messages << "novelty: " << e.what() << '\n';
    }
  }
  return col;
}

}  // namespace

const char* to_string(PretrainMode mode) {
  switch (mode) {
    case PretrainMode::none: return "none";
    case PretrainMode::monolingual: return "monolingual";
    case PretrainMode::same_source_naive: return "same-source-naive";
    case PretrainMode::same_source_scheduled: return "same-source-scheduled";
    case PretrainMode::same_source_seqgan: return "same-source-seqgan";
  }
  return "?";
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

void ExperimentConfig::apply(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : settings) {
    const auto& keys = registry();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == key; });
    if (it == keys.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->set(*this, value);
    } catch (const Error& e) {
      errors.push_back(key + ": " + e.what());
    }
  }
  train.seed = seed;
  gan.seed = seed;
  train.record_timing = log_timing;
  auto check = [&](const std::function<void()>& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  check([&] { train.validate(); });
  check([&] { gan.validate(); });
  if (hidden < 1 || embed < 1) errors.push_back("model.hidden and model.embed must be positive");
  if (pretrain_epochs < 1) errors.push_back("pretrain.epochs must be at least 1");
  if (pretrain_decay_start > pretrain_epochs) {
    errors.push_back("pretrain.decay_start exceeds pretrain.epochs");
  }
  if (!(scheduled_floor >= 0.0 && scheduled_floor <= 1.0)) {
    errors.push_back("scheduled.floor must be in [0, 1]");
  }
  if (pretrain == PretrainMode::monolingual && (mono0.empty() || mono1.empty())) {
    errors.push_back("pretrain.mode=monolingual needs data.mono0 and data.mono1");
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

std::string ExperimentConfig::resolved() const {
  std::string out;
  for (const auto& k : registry()) out += k.name + " = " + k.get(*this) + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      errors.push_back(origin + ":" + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError("override '" + text + "' is not key=value");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

// ---------------------------------------------------------------------------

void cmd_prep(const PrepOptions& options) {
  const auto surface = read_tokenized_corpus_file(options.corpus.string());
  if (surface.empty()) throw DataError("corpus " + options.corpus.string() + " is empty");
  const auto idx = split_indices(surface.size(), options.seed, options.split);
  const auto parts = apply_split(surface, idx);
  const Vocabulary vocab = Vocabulary::build(parts[0], options.min_count);

  write_text(options.out_dir / "vocab.tsv", vocab.serialize());
  CorpusStats stats;
  SplitStats* slots[] = {&stats.train, &stats.dev, &stats.test};
  for (int s = 0; s < 3; ++s) {
    std::string text;
    for (const auto& u : parts[s]) text += join_surface(u) + "\n";
    write_text(split_text(options.out_dir, kSplitNames[s]), text);
    *slots[s] = surface_stats(parts[s]);
  }
  if (options.features) {
    std::vector<std::size_t> counts;
    for (const auto& u : surface) counts.push_back(u.size());
    const FeatureFile file = load_features_file(options.features->string(), counts);
    const auto feature_parts = apply_split(file.utterances, idx);
    for (int s = 0; s < 3; ++s) {
      std::ostringstream out;
      write_features(out, FeatureFile{file.schema, feature_parts[s]});
      write_text(split_features(options.out_dir, kSplitNames[s]), out.str());
    }
  }
  std::ostringstream out;
  write_stats_tsv(out, stats);
  write_text(options.out_dir / "stats.tsv", out.str());
}

void cmd_synth(const SynthOptions& options) {
  std::string text;
  for (const auto& line : synth_corpus(options.params)) text += line + "\n";
  write_text(options.out, text);
}

void cmd_train(const ExperimentConfig& config, std::ostream& progress) {
  if (config.data_dir.empty()) throw ConfigError("data.dir is required");
  if (config.output_dir.empty()) throw ConfigError("output.dir is required");
  const fs::path& out = config.output_dir;
  const Vocabulary vocab = Vocabulary::read_file((config.data_dir / "vocab.tsv").string());
  const auto channels = resolve_channels(config);

  CorpusSplit split;
  std::vector<Utterance>* parts[] = {&split.train, &split.dev, &split.test};
  for (int s = 0; s < 3; ++s) {
    *parts[s] = load_split(split_text(config.data_dir, kSplitNames[s]),
                           split_features(config.data_dir, kSplitNames[s]), vocab, channels);
  }
  split.seed = config.seed;
  split.vocab_hash = vocab.hash();
  if (split.train.empty() || split.dev.empty()) throw DataError("train or dev split is empty");

  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "logs");
  fs::create_directories(out / "reports");
  write_text(out / "config.resolved", config.resolved());
  write_text(out / "vocab.tsv", vocab.serialize());
  for (const char* name : kSplitNames) {
    write_text(split_text(out, name), read_text(split_text(config.data_dir, name)));
    if (fs::exists(split_features(config.data_dir, name))) {
      write_text(split_features(out, name), read_text(split_features(config.data_dir, name)));
    }
  }

  const ModelConfig mc{.kind = config.model_kind, .hidden = config.hidden, .embed = config.embed,
                       .features = channels, .seed = config.seed};
  TrainConfig fine = config.train;
  TrainConfig pre = fine;
  pre.total_epochs = config.pretrain_epochs;
  pre.decay_start_epoch = config.pretrain_decay_start;
  const std::string label =
      std::string(to_string(config.model_kind)) +
      (config.pretrain == PretrainMode::none ? "" : std::string("+") + to_string(config.pretrain));
  progress << "training " << label << " on " << split.train.size() << " utterances\n";

  std::unique_ptr<LanguageModel> model;
  TrainResult result;
  std::optional<SampleSet> samples;
  auto save_samples = [&](const SampleSet& s) {
    std::ostringstream text, meta;
    write_sample_set(text, meta, s, vocab);
    write_text(out / "reports" / "pretrain_samples.txt", text.str());
    write_text(out / "reports" / "pretrain_samples.txt.meta", meta.str());
    samples = s;
  };

  switch (config.pretrain) {
    case PretrainMode::none: {
      model = make_model(vocab, mc);
      result = train_mle(*model, split, fine, "train");
      break;
    }
    case PretrainMode::monolingual: {
      EncodedCorpus corpus{{}, vocab.hash()};
      for (const auto& path : {config.mono0, config.mono1}) {
        auto encoded = encode_all(read_tokenized_corpus_file(path.string()), vocab);
        corpus.utterances.insert(corpus.utterances.end(), encoded.begin(), encoded.end());
      }
      model = make_model(vocab, mc);
      result = pretrain_then_finetune(*model, corpus, split, pre, fine);
      break;
    }
    case PretrainMode::same_source_scheduled: {
      auto generator = make_model(vocab, mc);
      TrainConfig gen_config = fine;
      gen_config.total_epochs = config.gan.mle_pretrain_epochs;
      gen_config.decay_start_epoch = std::min(gen_config.decay_start_epoch, gen_config.total_epochs);
      auto gen_result = train_scheduled_sampling(*generator, split, gen_config,
                                                 {config.scheduled_floor}, "generator");
      write_text(out / "checkpoints" / "generator.ckpt", checkpoint_bytes(*generator));
      std::size_t tokens = 0;
      for (const auto& u : split.train) tokens += u.tokens.size();
      Rng rng(derive_seed(config.seed, 0x5a3f1e));
      save_samples(sample_sequences(
          *generator,
          same_source_sample_count(config.gan.sample_multiplier, tokens, config.gan.sample_len),
          config.gan.sample_len, rng));
      model = make_model(vocab, mc);
      result = pretrain_then_finetune(
          *model, EncodedCorpus{to_utterances(samples->sequences, vocab), vocab.hash()}, split, pre,
          fine);
      result.log.insert(result.log.begin(), gen_result.log.begin(), gen_result.log.end());
      break;
    }
    case PretrainMode::same_source_naive:
    case PretrainMode::same_source_seqgan: {
      GanConfig gan = config.gan;
      if (config.pretrain == PretrainMode::same_source_naive) gan.n_rounds = 0;
      auto on_round = [&](const GanRoundLog& log, LanguageModel& generator, const Discriminator&) {
        progress << "gan round " << log.round << " reward " << format_double(log.mean_reward)
                 << " disc_acc " << format_double(log.disc_accuracy) << '\n';
        write_text(out / "checkpoints" / ("generator.round" + std::to_string(log.round) + ".ckpt"),
                   checkpoint_bytes(generator));
      };
      auto r = same_source_pretrain(vocab, mc, split, gan, pre, fine, on_round);
      model = std::move(r.model);
      result = std::move(r.training);
      if (r.gan) {
        result.log.insert(result.log.begin(), r.gan->mle.log.begin(), r.gan->mle.log.end());
        write_text(out / "checkpoints" / "generator.ckpt", checkpoint_bytes(*r.gan->generator));
        if (r.gan->discriminator) {
          std::ostringstream d;
          write_parameters(d, r.gan->discriminator->parameters());
          write_text(out / "checkpoints" / "discriminator.params", d.str());
          std::ostringstream g;
          g << "round\tmean_reward\tbaseline\tdisc_accuracy\n";
          g << "0\tnan\tnan\t" << format_double(r.gan->pretrain_disc_accuracy) << '\n';
          for (const auto& log : r.gan->rounds) {
            g << log.round << '\t' << format_double(log.mean_reward) << '\t'
              << format_double(log.baseline) << '\t' << format_double(log.disc_accuracy) << '\n';
          }
          write_text(out / "logs" / "gan.tsv", g.str());
        }
      }
      if (!r.samples.sequences.empty()) save_samples(r.samples);
      break;
    }
  }

  write_phase_logs(out / "logs", result.log);
  write_text(out / "checkpoints" / "model.ckpt", checkpoint_bytes(*model));

  std::vector<std::string> columns = {"dev"};
  std::vector<PerplexityRow> rows = {{label, {perplexity(*model, split.dev)}}};
  std::vector<DecomposedRow> decomposed = {{label + "/dev", decomposed_perplexity(*model, split.dev)}};
  if (!split.test.empty()) {
    columns.push_back("test");
    rows[0].values.push_back(perplexity(*model, split.test));
    decomposed.push_back({label + "/test", decomposed_perplexity(*model, split.test)});
  }
  std::ostringstream ppl, dec;
  write_perplexity_table(ppl, columns, rows);
  write_decomposed_table(dec, decomposed);
  write_text(out / "reports" / "perplexity.tsv", ppl.str());
  write_text(out / "reports" / "decomposed.tsv", dec.str());
  if (samples) {
    const auto train_seqs = to_sequences(split.train);
    std::vector<NoveltyColumn> cols = {
        novelty_column(label, samples->sequences, train_seqs, &progress)};
    std::ostringstream nov;
    write_novelty_table(nov, cols);
    write_text(out / "reports" / "novelty.tsv", nov.str());
  }
  progress << "dev perplexity " << format_double(rows[0].values[0]) << '\n';
}

void cmd_eval(const EvalOptions& options, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::read_file((options.experiment / "vocab.tsv").string());
  const fs::path ckpt = options.checkpoint.value_or(options.experiment / "checkpoints" / "model.ckpt");
  const auto model = load_checkpoint(ckpt, vocab);
  const bool named = options.split == "train" || options.split == "dev" || options.split == "test";
  const fs::path text = named ? split_text(options.experiment, options.split) : fs::path(options.split);
  const fs::path features = named ? split_features(options.experiment, options.split)
                                  : fs::path(options.split + ".features.tsv");
  const auto utterances = load_split(text, features, vocab, model->config().features);
  if (utterances.empty()) throw DataError("evaluation set " + text.string() + " is empty");
  const std::string label = ckpt.stem().string();

  std::ostringstream report;
  if (options.decompose) {
    std::vector<DecomposedRow> rows = {{label, decomposed_perplexity(*model, utterances)}};
    write_decomposed_table(report, rows);
  } else {
    const std::vector<std::string> columns = {named ? options.split : text.stem().string()};
    std::vector<PerplexityRow> rows = {{label, {perplexity(*model, utterances)}}};
    write_perplexity_table(report, columns, rows);
  }
  if (options.out) {
    write_text(*options.out, report.str());
  } else {
    out << report.str();
  }
}

void cmd_sample(const SampleOptions& options, std::ostream& messages) {
  if (options.out.empty()) throw ConfigError("sample output path is required");
  const Vocabulary vocab = Vocabulary::read_file((options.experiment / "vocab.tsv").string());
  const fs::path ckpt = options.checkpoint.value_or(options.experiment / "checkpoints" / "model.ckpt");
  const auto model = load_checkpoint(ckpt, vocab);
  if (options.length < 1) throw ConfigError("sample length must be positive");
  Rng rng(options.seed);
  const SampleSet samples = sample_sequences(*model, options.n, options.length, rng);
  std::ostringstream text, meta;
  write_sample_set(text, meta, samples, vocab);
  write_text(options.out, text.str());
  write_text(options.out.string() + ".meta", meta.str());

  const auto train = encode_all(
      read_tokenized_corpus_file(split_text(options.experiment, "train").string()), vocab);
  const auto train_seqs = to_sequences(train);
  std::vector<NoveltyColumn> cols = {
      novelty_column(ckpt.stem().string(), samples.sequences, train_seqs, &messages)};
  std::ostringstream nov;
  write_novelty_table(nov, cols);
  write_text(options.novelty.value_or(fs::path(options.out.string() + ".novelty.tsv")), nov.str());
}

void cmd_analyze(const AnalyzeOptions& options, std::ostream& out) {
  const auto corpus = read_tokenized_corpus_file(options.corpus.string());
  std::map<std::pair<std::string, Lang>, SymbolId> ids;
  auto intern = [&](const std::vector<std::vector<SurfaceToken>>& utts) {
    std::vector<Sequence> seqs;
    for (const auto& u : utts) {
      Sequence s;
      for (const auto& t : u) {
        s.push_back(ids.emplace(std::pair{t.text, t.lang}, static_cast<SymbolId>(ids.size()))
                        .first->second);
      }
      seqs.push_back(std::move(s));
    }
    return seqs;
  };
  const auto seqs = intern(corpus);
  const auto stats = surface_stats(corpus);
  out << "stat\tvalue\n";
  out << "utterances\t" << stats.utterances << '\n';
  out << "tokens\t" << stats.tokens << '\n';
  out << "l0_tokens\t" << stats.l0_tokens << '\n';
  out << "l1_tokens\t" << stats.l1_tokens << '\n';
  out << "switch_rate\t" << format_double(switch_rate(corpus)) << '\n';
  const char* names[] = {"bigram", "trigram", "quadgram"};
  for (std::size_t n = 2; n <= 4; ++n) {
    std::set<Sequence> types;
    for (const auto& s : seqs) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        types.emplace(s.begin() + static_cast<std::ptrdiff_t>(i),
                      s.begin() + static_cast<std::ptrdiff_t>(i + n));
      }
    }
    out << names[n - 2] << "_types\t" << types.size() << '\n';
  }
  if (options.reference) {
    const auto ref = intern(read_tokenized_corpus_file(options.reference->string()));
    const auto col = novelty_column("", seqs, ref, nullptr);
    const double values[] = {col.bigram, col.trigram, col.quadgram};
    for (int i = 0; i < 3; ++i) {
      out << "novel_" << names[i] << "_pct\t"
          << (std::isnan(values[i]) ? std::string("n/a") : format_double(values[i])) << '\n';
    }
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 3;
  return 1;
}

}  // namespace cslm::cli
