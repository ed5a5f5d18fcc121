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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cslm/model.hpp"
#include "cslm/seqgan.hpp"
#include "cslm/synth.hpp"
#include "cslm/training.hpp"

namespace cslm::cli {

namespace fs = std::filesystem;

enum class PretrainMode {
  none,
  monolingual,
  same_source_naive,
  same_source_scheduled,
  same_source_seqgan
};

const char* to_string(PretrainMode mode);

struct ExperimentConfig {
  fs::path data_dir;    // output of `prep`
  fs::path output_dir;  // experiment directory
  fs::path mono0;       // monolingual corpora for PretrainMode::monolingual
  fs::path mono1;
  std::uint64_t seed = 1;
  ModelKind model_kind = ModelKind::dual;
  std::size_t hidden = 32;
  std::size_t embed = 32;
  std::vector<std::string> features;  // channel names; "lang" needs no file
  TrainConfig train;
  PretrainMode pretrain = PretrainMode::none;
  std::size_t pretrain_epochs = 100;
  std::size_t pretrain_decay_start = 80;
  double scheduled_floor = 0.0;
  GanConfig gan;
  bool log_timing = false;

  // Applies "key = value" settings; collects every problem (unknown key,
  // malformed value, failed validation) into one ConfigError.
  void apply(const std::vector<std::pair<std::string, std::string>>& settings);

  // Every key with its value, one "key = value" line each, in a fixed
  // order. Feeding the output back through apply reproduces the config.
  std::string resolved() const;

  static std::vector<std::string> keys();
};

// Parses "key = value" lines; '#' starts a comment. Throws ConfigError.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin);
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path);

// Splits "key=value" flag overrides. Throws ConfigError.
std::pair<std::string, std::string> parse_override(const std::string& text);

struct PrepOptions {
  fs::path corpus;
  fs::path out_dir;
  std::optional<fs::path> features;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
  SplitPercent split = kDefaultSplit;
};

// Writes vocab.tsv, splits/{train,dev,test}.txt (and .features.tsv when
// features are given) and stats.tsv.
void cmd_prep(const PrepOptions& options);

struct SynthOptions {
  fs::path out;
  SynthParams params;
};

void cmd_synth(const SynthOptions& options);

// Runs one experiment into config.output_dir.
void cmd_train(const ExperimentConfig& config, std::ostream& progress);

struct EvalOptions {
  fs::path experiment;                 // supplies vocab.tsv and defaults
  std::optional<fs::path> checkpoint;  // default: checkpoints/model.ckpt
  std::string split = "dev";           // split name or path to a corpus file
  bool decompose = false;
  std::optional<fs::path> out;         // default: stdout
};

void cmd_eval(const EvalOptions& options, std::ostream& out);

struct SampleOptions {
  fs::path experiment;
  std::optional<fs::path> checkpoint;
  std::size_t n = 100;
  std::size_t length = 20;
  std::uint64_t seed = 1;
  fs::path out;                        // samples; metadata goes to out + ".meta"
  std::optional<fs::path> novelty;     // default: out + ".novelty.tsv"
};

void cmd_sample(const SampleOptions& options, std::ostream& messages);

struct AnalyzeOptions {
  fs::path corpus;
  std::optional<fs::path> reference;  // adds novelty of corpus vs reference
};

void cmd_analyze(const AnalyzeOptions& options, std::ostream& out);

// Maps the error hierarchy onto process exit codes.
int exit_code_for(const std::exception& e);

}  // namespace cslm::cli
