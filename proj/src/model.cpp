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

#include "cslm/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cslm/checkpoint.hpp"
#include "cslm/errors.hpp"
#include "cslm/ops.hpp"

namespace cslm {
namespace {

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void init_uniform(Tensor& t, Rng& rng, double scale) {
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::rnnlm ? "rnnlm" : "dual"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "rnnlm") return ModelKind::rnnlm;
  if (s == "dual") return ModelKind::dual;
  throw ConfigError("unknown model kind '" + s + "' (expected rnnlm or dual)");
}

std::vector<FeatureChannel> default_channels(const FeatureSchema& schema) {
  std::vector<FeatureChannel> out;
  for (const auto& d : schema) out.push_back({d.name, d.cardinality, d.name == "lang" ? 2u : 8u});
  return out;
}

// ---------------------------------------------------------------------------
// LanguageModel

LanguageModel::LanguageModel(Vocabulary vocab, ModelConfig config)
    : vocab_(std::move(vocab)), config_(std::move(config)), vocab_hash_(vocab_.hash()) {
  if (config_.hidden == 0 || config_.embed == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  for (const auto& ch : config_.features) {
    if (ch.cardinality == 0 || ch.width == 0) {
      throw ConfigError("feature channel " + ch.name + " needs positive cardinality and width");
    }
    feature_tables_.emplace_back("feat." + ch.name, Tensor({ch.cardinality, ch.width}));
  }
}

std::size_t LanguageModel::input_size() const {
  std::size_t n = config_.embed;
  for (const auto& ch : config_.features) n += ch.width;
  return n;
}

ModelState LanguageModel::initial_state() const {
  ModelState s;
  for (auto& c : s.cell) {
    c.h.assign(config_.hidden, 0.0);
    c.c.assign(config_.hidden, 0.0);
  }
  return s;
}

std::vector<const Parameter*> LanguageModel::parameters() const {
  auto mutable_params = const_cast<LanguageModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void LanguageModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::vector<double> LanguageModel::encode_input(SymbolId symbol, const FeatureVector* features,
                                                Lang table) const {
  std::vector<double> x(input_size(), 0.0);
  auto row = embedding_row(symbol, table);
  std::copy(row.begin(), row.end(), x.begin());
  encode_features(symbol, features, std::span<double>(x).subspan(config_.embed));
  return x;
}

std::vector<long> LanguageModel::encode_features(SymbolId symbol, const FeatureVector* features,
                                                 std::span<double> x) const {
  const auto& channels = config_.features;
  if (features) {
    for (const auto& [name, id] : features->values) {
      const bool declared = std::any_of(channels.begin(), channels.end(),
                                        [&](const FeatureChannel& c) { return c.name == name; });
      if (!declared) throw ConfigError("undeclared feature '" + name + "'");
    }
  }
  std::vector<long> rows(channels.size(), -1);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const auto& ch = channels[j];
    if (features) {
      for (const auto& [name, id] : features->values) {
        if (name != ch.name) continue;
        if (id >= ch.cardinality) {
          throw DataError("feature " + name + "=" + std::to_string(id) + " exceeds cardinality " +
                          std::to_string(ch.cardinality));
        }
        rows[j] = id;
      }
    }
    // The language id is recoverable from the token itself, so tokens
    // without feature annotations (e.g. sampled text) still get it.
    if (rows[j] < 0 && ch.name == "lang") {
      if (auto l = vocab_.lang_of(symbol)) rows[j] = bit(*l);
    }
    if (rows[j] >= 0) {
      auto r = feature_tables_[j].value.row(static_cast<std::size_t>(rows[j]));
      std::copy(r.begin(), r.end(), x.begin() + static_cast<std::ptrdiff_t>(offset));
    } else {
      std::fill_n(x.begin() + static_cast<std::ptrdiff_t>(offset), ch.width, 0.0);
    }
    offset += ch.width;
  }
  return rows;
}

void LanguageModel::backward_features(const std::vector<long>& rows, std::span<const double> dx) {
  std::size_t offset = 0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const std::size_t w = config_.features[j].width;
    if (rows[j] >= 0) {
      add_into(feature_tables_[j].grad.row(static_cast<std::size_t>(rows[j])),
               dx.subspan(offset, w));
    }
    offset += w;
  }
}

void LanguageModel::initialize_features(Rng& rng) {
  for (auto& t : feature_tables_) init_uniform(t.value, rng, config_.embed_init);
}

void LanguageModel::append_feature_params(std::vector<Parameter*>& out) {
  for (auto& t : feature_tables_) out.push_back(&t);
}

// ---------------------------------------------------------------------------
// RnnLm

RnnLm::RnnLm(Vocabulary vocab, ModelConfig config)
    : LanguageModel(std::move(vocab), std::move(config)) {
  const auto& cfg = this->config();
  embedding = Parameter("emb", Tensor({this->vocab().size(), cfg.embed}));
  cell = LstmCell("cell", input_size(), cfg.hidden);
  out_weight = Parameter("out.weight", Tensor({output_size(), cfg.hidden}));
  out_bias = Parameter("out.bias", Tensor({output_size()}));

  Rng rng(cfg.seed);
  init_uniform(embedding.value, rng, cfg.embed_init);
  cell.initialize(rng, cfg.weight_init);
  init_uniform(out_weight.value, rng, cfg.weight_init);
  initialize_features(rng);
}

std::unique_ptr<LanguageModel> RnnLm::clone() const { return std::make_unique<RnnLm>(*this); }

std::span<const double> RnnLm::embedding_row(SymbolId symbol, Lang) const {
  if (symbol >= vocab().size()) throw std::out_of_range("symbol out of range");
  return embedding.value.row(symbol);
}

void RnnLm::step(ModelState& state, const StepInput& input, std::span<double> logits,
                 StepCache* cache) const {
  if (logits.size() != output_size()) throw ShapeError("rnnlm step: logits size");
  std::vector<double> x(input_size());
  auto row = embedding_row(input.symbol, Lang::l0);
  std::copy(row.begin(), row.end(), x.begin());
  auto rows = encode_features(input.symbol, input.features,
                              std::span<double>(x).subspan(config().embed));
  LstmState next;
  cell.step(x, state.cell[0].h, state.cell[0].c, next, cache ? &cache->cell[0] : nullptr);
  state.cell[0] = std::move(next);
  ops::affine(out_weight.value, state.cell[0].h, out_bias.value, logits);
  if (cache) {
    cache->symbol = input.symbol;
    cache->upstream = 0;
    cache->feature_rows = std::move(rows);
    cache->h_out[0] = state.cell[0].h;
  }
}

void RnnLm::backward(std::span<const StepCache> caches,
                     std::span<const std::vector<double>> dlogits) {
  const std::size_t H = config().hidden;
  const std::size_t D = config().embed;
  std::vector<double> carry_dh(H, 0.0), carry_dc(H, 0.0);
  for (std::size_t t = caches.size(); t-- > 0;) {
    const StepCache& c = caches[t];
    std::vector<double> dh = carry_dh;
    ops::affine_backward(out_weight.value, c.h_out[0], dlogits[t], out_weight.grad,
                         out_bias.grad, dh);
    std::vector<double> dx(input_size(), 0.0), dh_prev(H, 0.0), dc_prev(H, 0.0);
    cell.backward(c.cell[0], dh, carry_dc, dx, dh_prev, dc_prev);
    add_into(embedding.grad.row(c.symbol), std::span<const double>(dx).subspan(0, D));
    backward_features(c.feature_rows, std::span<const double>(dx).subspan(D));
    carry_dh = std::move(dh_prev);
    carry_dc = std::move(dc_prev);
  }
}

std::vector<Parameter*> RnnLm::parameters() {
  std::vector<Parameter*> out = {&embedding, &cell.weight, &cell.bias, &out_weight, &out_bias};
  append_feature_params(out);
  return out;
}

// ---------------------------------------------------------------------------
// DualLm

DualLm::DualLm(Vocabulary vocab, ModelConfig config)
    : LanguageModel(std::move(vocab), std::move(config)) {
  const auto& cfg = this->config();
  const auto& v = this->vocab();
  for (int b = 0; b < 2; ++b) {
    const Lang l = lang_from_bit(b);
    const std::string s = std::to_string(b);
    const std::size_t rows = v.block_size(l) + (l == Lang::l0 ? 1 : 0);
    embedding[b] = Parameter("emb" + s, Tensor({rows, cfg.embed}));
    cell[b] = LstmCell("cell" + s, input_size(), cfg.hidden);
    const std::size_t outputs = v.scorable_end(l) - v.scorable_begin(l);
    out_weight[b] = Parameter("out" + s + ".weight", Tensor({outputs, cfg.hidden}));
    out_bias[b] = Parameter("out" + s + ".bias", Tensor({outputs}));
    eos_weight[b] = Parameter("eos.weight" + s, Tensor({1, cfg.hidden}));
  }
  eos_bias = Parameter("eos.bias", Tensor({1}));

  Rng rng(cfg.seed);
  for (int b = 0; b < 2; ++b) init_uniform(embedding[b].value, rng, cfg.embed_init);
  for (int b = 0; b < 2; ++b) cell[b].initialize(rng, cfg.weight_init);
  for (int b = 0; b < 2; ++b) {
    init_uniform(out_weight[b].value, rng, cfg.weight_init);
    init_uniform(eos_weight[b].value, rng, cfg.weight_init);
  }
  initialize_features(rng);
}

std::unique_ptr<LanguageModel> DualLm::clone() const { return std::make_unique<DualLm>(*this); }

Lang DualLm::selector(SymbolId symbol) const {
  if (symbol == Vocabulary::kBos) return Lang::l0;
  auto l = vocab().lang_of(symbol);
  if (!l) throw std::invalid_argument("symbol " + std::to_string(symbol) + " is not an input");
  return *l;
}

std::size_t DualLm::embedding_index(SymbolId symbol, Lang table) const {
  const auto& v = vocab();
  if (symbol == Vocabulary::kBos && table == Lang::l0) return v.block_size(Lang::l0);
  auto l = v.lang_of(symbol);
  if (!l || *l != table) {
    throw std::invalid_argument("symbol " + std::to_string(symbol) +
                                " has no row in embedding table " + std::to_string(bit(table)));
  }
  return symbol - v.block_start(table);
}

std::span<const double> DualLm::embedding_row(SymbolId symbol, Lang table) const {
  return embedding[bit(table)].value.row(embedding_index(symbol, table));
}

void DualLm::step(ModelState& state, const StepInput& input, std::span<double> logits,
                  StepCache* cache) const {
  if (logits.size() != output_size()) throw ShapeError("dual step: logits size");
  const auto& v = vocab();
  const std::size_t D = config().embed;
  const Lang up_lang = selector(input.symbol);
  const int up = bit(up_lang);
  const int down = 1 - up;

  std::vector<double> x_up(input_size()), x_down(input_size());
  auto row_up = embedding_row(input.symbol, up_lang);
  std::copy(row_up.begin(), row_up.end(), x_up.begin());
  auto row_down = embedding_row(v.dummy(other(up_lang)), other(up_lang));
  std::copy(row_down.begin(), row_down.end(), x_down.begin());
  auto rows = encode_features(input.symbol, input.features, std::span<double>(x_up).subspan(D));
  std::copy(x_up.begin() + static_cast<std::ptrdiff_t>(D), x_up.end(),
            x_down.begin() + static_cast<std::ptrdiff_t>(D));

  LstmState next_up, next_down;
  cell[up].step(x_up, state.cell[up].h, state.cell[up].c, next_up,
                cache ? &cache->cell[up] : nullptr);
  // Downstream: the upstream cell's fresh hidden output, own memory.
  cell[down].step(x_down, next_up.h, state.cell[down].c, next_down,
                  cache ? &cache->cell[down] : nullptr);
  state.cell[up] = std::move(next_up);
  state.cell[down] = std::move(next_down);

  for (int b = 0; b < 2; ++b) {
    const Lang l = lang_from_bit(b);
    auto part = logits.subspan(v.scorable_begin(l), v.scorable_end(l) - v.scorable_begin(l));
    ops::affine(out_weight[b].value, state.cell[b].h, out_bias[b].value, part);
  }
  logits[v.eos_scorable()] = dot(eos_weight[0].value.values(), state.cell[0].h) +
                             dot(eos_weight[1].value.values(), state.cell[1].h) +
                             eos_bias.value[0];
  if (cache) {
    cache->symbol = input.symbol;
    cache->upstream = up;
    cache->feature_rows = std::move(rows);
    cache->h_out[0] = state.cell[0].h;
    cache->h_out[1] = state.cell[1].h;
  }
}

void DualLm::backward(std::span<const StepCache> caches,
                      std::span<const std::vector<double>> dlogits) {
  const auto& v = vocab();
  const std::size_t H = config().hidden;
  const std::size_t D = config().embed;
  const std::size_t eos = v.eos_scorable();
  std::vector<double> carry_dh[2] = {std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};
  std::vector<double> carry_dc[2] = {std::vector<double>(H, 0.0), std::vector<double>(H, 0.0)};

  for (std::size_t t = caches.size(); t-- > 0;) {
    const StepCache& c = caches[t];
    const auto& dl = dlogits[t];
    const int up = c.upstream;
    const int down = 1 - up;

    std::vector<double> dh[2] = {carry_dh[0], carry_dh[1]};
    const double g_eos = dl[eos];
    for (int b = 0; b < 2; ++b) {
      const Lang l = lang_from_bit(b);
      auto part = std::span<const double>(dl).subspan(v.scorable_begin(l),
                                                       v.scorable_end(l) - v.scorable_begin(l));
      ops::affine_backward(out_weight[b].value, c.h_out[b], part, out_weight[b].grad,
                           out_bias[b].grad, dh[b]);
      if (g_eos != 0.0) {
        for (std::size_t k = 0; k < H; ++k) {
          eos_weight[b].grad[k] += g_eos * c.h_out[b][k];
          dh[b][k] += g_eos * eos_weight[b].value[k];
        }
      }
    }
    eos_bias.grad[0] += g_eos;

    std::vector<double> dx_down(input_size(), 0.0), dh_from_down(H, 0.0), dc_down_prev(H, 0.0);
    cell[down].backward(c.cell[down], dh[down], carry_dc[down], dx_down, dh_from_down,
                        dc_down_prev);
    add_into(dh[up], dh_from_down);

    std::vector<double> dx_up(input_size(), 0.0), dh_up_prev(H, 0.0), dc_up_prev(H, 0.0);
    cell[up].backward(c.cell[up], dh[up], carry_dc[up], dx_up, dh_up_prev, dc_up_prev);

    const Lang up_lang = lang_from_bit(up), down_lang = lang_from_bit(down);
    add_into(embedding[up].grad.row(embedding_index(c.symbol, up_lang)),
             std::span<const double>(dx_up).subspan(0, D));
    add_into(embedding[down].grad.row(embedding_index(v.dummy(down_lang), down_lang)),
             std::span<const double>(dx_down).subspan(0, D));
    backward_features(c.feature_rows, std::span<const double>(dx_up).subspan(D));
    backward_features(c.feature_rows, std::span<const double>(dx_down).subspan(D));

    carry_dh[up] = std::move(dh_up_prev);
    carry_dc[up] = std::move(dc_up_prev);
    // The downstream cell's previous hidden state was replaced, not read.
    std::fill(carry_dh[down].begin(), carry_dh[down].end(), 0.0);
    carry_dc[down] = std::move(dc_down_prev);
  }
}

std::vector<Parameter*> DualLm::parameters() {
  std::vector<Parameter*> out = {&embedding[0], &embedding[1]};
  for (int b = 0; b < 2; ++b) {
    out.push_back(&cell[b].weight);
    out.push_back(&cell[b].bias);
  }
  for (int b = 0; b < 2; ++b) {
    out.push_back(&out_weight[b]);
    out.push_back(&out_bias[b]);
  }
  out.push_back(&eos_weight[0]);
  out.push_back(&eos_weight[1]);
  out.push_back(&eos_bias);
  append_feature_params(out);
  return out;
}

// ---------------------------------------------------------------------------
// Free functions

std::unique_ptr<LanguageModel> make_model(const Vocabulary& vocab, const ModelConfig& config) {
  if (config.kind == ModelKind::rnnlm) return std::make_unique<RnnLm>(vocab, config);
  return std::make_unique<DualLm>(vocab, config);
}

std::vector<double> dual_step(const DualLm& model, Lang b, const Token& token,
                              ModelState& state, const FeatureVector* features) {
  if (token.lang != b) throw std::invalid_argument("language/selector mismatch");
  auto actual = model.vocab().lang_of(token.id);
  if (!actual || *actual != token.lang) throw std::invalid_argument("language/selector mismatch");
  std::vector<double> logits(model.output_size());
  model.step(state, {token.id, features}, logits, nullptr);
  return ops::softmax(logits);
}

std::vector<double> step_distribution(const LanguageModel& model, ModelState& state,
                                      const StepInput& input) {
  std::vector<double> logits(model.output_size());
  model.step(state, input, logits, nullptr);
  return ops::softmax(logits);
}

namespace {

const FeatureVector* features_at(const Utterance& u, std::size_t i) {
  return u.has_features() ? &u.features[i] : nullptr;
}

std::size_t target_at(const Vocabulary& v, const Utterance& u, std::size_t pos) {
  return pos < u.tokens.size() ? v.to_scorable(u.tokens[pos].id) : v.eos_scorable();
}

}  // namespace

std::vector<double> token_nlls(const LanguageModel& model, const Utterance& utterance) {
  if (utterance.tokens.empty()) throw DataError("empty utterance");
  const auto& v = model.vocab();
  ModelState state = model.initial_state();
  std::vector<double> logits(model.output_size());
  std::vector<double> out;
  out.reserve(utterance.tokens.size() + 1);
  for (std::size_t pos = 0; pos <= utterance.tokens.size(); ++pos) {
    StepInput in;
    if (pos > 0) in = {utterance.tokens[pos - 1].id, features_at(utterance, pos - 1)};
    model.step(state, in, logits, nullptr);
    const std::size_t target = target_at(v, utterance, pos);
    out.push_back(ops::log_sum_exp(logits) - logits[target]);
  }
  return out;
}

SequenceNll sequence_nll(const LanguageModel& model, const Utterance& utterance) {
  const auto nlls = token_nlls(model, utterance);
  SequenceNll r;
  for (double x : nlls) r.nll += x;
  r.n_predicted = nlls.size();
  return r;
}

double accumulate_nll_gradient(LanguageModel& model, const Utterance& utterance, double weight,
                               const InputOverride& override_input) {
  if (utterance.tokens.empty()) throw DataError("empty utterance");
  const auto& v = model.vocab();
  const std::size_t steps = utterance.tokens.size() + 1;
  ModelState state = model.initial_state();
  std::vector<StepCache> caches(steps);
  std::vector<std::vector<double>> dlogits(steps);
  std::vector<double> logits(model.output_size());
  double total = 0.0;
  for (std::size_t pos = 0; pos < steps; ++pos) {
    StepInput in;
    if (pos > 0) {
      in = {utterance.tokens[pos - 1].id, features_at(utterance, pos - 1)};
      if (override_input) {
        if (auto sym = override_input(pos, logits)) in = {*sym, nullptr};
      }
    }
    model.step(state, in, logits, &caches[pos]);
    auto r = ops::log_softmax_nll(logits, target_at(v, utterance, pos));
    total += r.loss;
    for (double& g : r.grad) g *= weight;
    dlogits[pos] = std::move(r.grad);
  }
  model.backward(caches, dlogits);
  return total;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(std::ostream& out, LanguageModel& model) {
  const auto& cfg = model.config();
  out << "CSLM-MODEL 1\n"
      << "kind=" << to_string(cfg.kind) << '\n'
      << "hidden=" << cfg.hidden << '\n'
      << "embed=" << cfg.embed << '\n'
      << "vocab_hash=" << hex64(model.vocab_hash()) << '\n';
  for (const auto& ch : cfg.features) {
    out << "feature=" << ch.name << ':' << ch.cardinality << ':' << ch.width << '\n';
  }
  out << "END\n";
  write_parameters(out, model.parameters());
}

void save_model_file(const std::string& path, LanguageModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  save_model(out, model);
}

std::uint64_t model_fingerprint(const LanguageModel& model) {
  return parameter_fingerprint(model.parameters());
}

ModelHeader read_model_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "CSLM-MODEL 1") {
    throw DataError("not a model checkpoint");
  }
  ModelHeader h;
  while (std::getline(in, line) && line != "END") {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint header: bad line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "kind") {
        h.config.kind = parse_model_kind(value);
      } else if (key == "hidden") {
        h.config.hidden = std::stoul(value);
      } else if (key == "embed") {
        h.config.embed = std::stoul(value);
      } else if (key == "vocab_hash") {
        h.vocab_hash = std::stoull(value, nullptr, 16);
      } else if (key == "feature") {
        const auto c1 = value.find(':'), c2 = value.rfind(':');
        if (c1 == std::string::npos || c1 == c2) throw DataError("bad feature line");
        h.config.features.push_back({value.substr(0, c1),
                                     static_cast<std::uint32_t>(std::stoul(value.substr(c1 + 1, c2 - c1 - 1))),
                                     std::stoul(value.substr(c2 + 1))});
      } else {
        throw DataError("unknown key");
      }
    } catch (const std::exception& e) {
      throw DataError("checkpoint header: cannot parse '" + line + "'");
    }
  }
  if (line != "END") throw DataError("checkpoint header: missing END");
  return h;
}

std::unique_ptr<LanguageModel> load_model(std::istream& in, const Vocabulary& vocab) {
  ModelHeader h = read_model_header(in);
  if (h.vocab_hash != vocab.hash()) {
    throw DataError("vocabulary hash mismatch: checkpoint " + hex64(h.vocab_hash) +
                    ", vocabulary " + hex64(vocab.hash()));
  }
  auto model = make_model(vocab, h.config);
  auto params = model->parameters();
  load_parameters(in, params);
  return model;
}

std::unique_ptr<LanguageModel> load_model_file(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  return load_model(in, vocab);
}

}  // namespace cslm
