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

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cslm/cli.hpp"
#include "cslm/corpus.hpp"

namespace {

using namespace cslm;
using namespace cslm::cli;

int run(int argc, char** argv) {
  CLI::App app{"Code-switching language model toolkit"};
  app.require_subcommand(1);

  PrepOptions prep;
  std::string prep_split = "80/10/10";
  std::string prep_features;
  auto* prep_cmd = app.add_subcommand("prep", "Split a corpus and build the vocabulary");
  prep_cmd->add_option("corpus", prep.corpus, "Tokenizable corpus, one utterance per line")->required();
  prep_cmd->add_option("out_dir", prep.out_dir, "Output data directory")->required();
  prep_cmd->add_option("--min-count", prep.min_count, "Minimum train count for a vocabulary entry");
  prep_cmd->add_option("--seed", prep.seed, "Split seed");
  prep_cmd->add_option("--split", prep_split, "train/dev/test percentages");
  prep_cmd->add_option("--features", prep_features, "Per-token feature TSV aligned with the corpus");

  SynthOptions synth;
  std::size_t synth_vocab = synth.params.vocab_size_l0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic code-switched corpus");
  synth_cmd->add_option("out", synth.out, "Output corpus file")->required();
  synth_cmd->add_option("--seed", synth.params.seed, "Generator seed");
  synth_cmd->add_option("--n", synth.params.n_utterances, "Number of utterances");
  synth_cmd->add_option("--switch-prob", synth.params.switch_prob, "Per-boundary switch probability");
  synth_cmd->add_option("--mean-len", synth.params.mean_len, "Mean utterance length");
  synth_cmd->add_option("--vocab-size", synth_vocab, "Words per language");

  std::string config_path;
  std::vector<std::string> overrides;
  std::string train_data, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model into an experiment directory");
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  train_cmd->add_option("--data", train_data, "Prepared data directory (data.dir)");
  train_cmd->add_option("--out", train_out, "Experiment directory (output.dir)");

  EvalOptions eval;
  std::string eval_ckpt, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Report perplexity of a checkpoint");
  eval_cmd->add_option("experiment", eval.experiment, "Experiment directory")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint (default checkpoints/model.ckpt)");
  eval_cmd->add_option("--split", eval.split, "train, dev, test or a corpus file");
  eval_cmd->add_flag("--decompose", eval.decompose, "Break perplexity down by transition class");
  eval_cmd->add_option("--out", eval_out, "Write the report here instead of stdout");

  SampleOptions sample;
  std::string sample_ckpt, sample_novelty;
  auto* sample_cmd = app.add_subcommand("sample", "Sample sequences and report n-gram novelty");
  sample_cmd->add_option("experiment", sample.experiment, "Experiment directory")->required();
  sample_cmd->add_option("--out", sample.out, "Sample corpus file")->required();
  sample_cmd->add_option("--checkpoint", sample_ckpt, "Checkpoint (default checkpoints/model.ckpt)");
  sample_cmd->add_option("--n", sample.n, "Number of sequences");
  sample_cmd->add_option("--len", sample.length, "Tokens per sequence");
  sample_cmd->add_option("--seed", sample.seed, "Sampling seed");
  sample_cmd->add_option("--novelty", sample_novelty, "Novelty TSV (default <out>.novelty.tsv)");

  AnalyzeOptions analyze;
  std::string analyze_ref;
  auto* analyze_cmd = app.add_subcommand("analyze", "Corpus statistics as TSV");
  analyze_cmd->add_option("corpus", analyze.corpus, "Corpus file")->required();
  analyze_cmd->add_option("--reference", analyze_ref, "Report n-gram novelty against this corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (prep_cmd->parsed()) {
    prep.split = parse_split_percent(prep_split);
    if (!prep_features.empty()) prep.features = prep_features;
    cmd_prep(prep);
  } else if (synth_cmd->parsed()) {
    synth.params.vocab_size_l0 = synth_vocab;
    synth.params.vocab_size_l1 = synth_vocab;
    cmd_synth(synth);
  } else if (train_cmd->parsed()) {
    std::vector<std::pair<std::string, std::string>> settings;
    if (!config_path.empty()) settings = read_config_file(config_path);
    if (!train_data.empty()) settings.emplace_back("data.dir", train_data);
    if (!train_out.empty()) settings.emplace_back("output.dir", train_out);
    for (const auto& o : overrides) settings.push_back(parse_override(o));
    ExperimentConfig config;
    config.apply(settings);
    cmd_train(config, std::cerr);
  } else if (eval_cmd->parsed()) {
    if (!eval_ckpt.empty()) eval.checkpoint = eval_ckpt;
    if (!eval_out.empty()) eval.out = eval_out;
    cmd_eval(eval, std::cout);
  } else if (sample_cmd->parsed()) {
    if (!sample_ckpt.empty()) sample.checkpoint = sample_ckpt;
    if (!sample_novelty.empty()) sample.novelty = sample_novelty;
    cmd_sample(sample, std::cerr);
  } else if (analyze_cmd->parsed()) {
    if (!analyze_ref.empty()) analyze.reference = analyze_ref;
    cmd_analyze(analyze, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cslm::cli::exit_code_for(e);
  }
}
