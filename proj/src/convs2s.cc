// Copyright 2026 The XSumForge Authors.
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

#include "xsumforge/convs2s.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xsumforge/binary_io.h"

namespace xsf {

namespace {

constexpr char kCheckpointMagic[8] = {'X', 'S', 'F', 'C', 'K', 'P', 'T', '1'};

bool conditions_decoder(Variant v) {
  return v == Variant::kEncTDecTD || v == Variant::kEncTTDDecTD;
}

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& x : t.mutable_values()) x = rng.normal() * stddev;
  return t;
}

// Gain initialized to the per-unit norm so that the effective weight
// equals v at step zero.
Tensor initial_gain(const Tensor& v, NormAxis axis) {
  const int64_t r = v.dim(0), c = v.dim(1);
  const int64_t units = axis == NormAxis::kRows ? r : c;
  Tensor g = Tensor::zeros({units}, true);
  auto gv = g.mutable_values();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const double x = v.at(i, j);
      gv[axis == NormAxis::kRows ? i : j] += x * x;
    }
  for (double& x : gv) x = std::sqrt(x);
  return g;
}

LinearParams init_linear(int in, int out, Rng& rng) {
  LinearParams p;
  p.v = gaussian({in, out}, std::sqrt(1.0 / in), rng);
  p.g = initial_gain(p.v, NormAxis::kCols);
  p.b = Tensor::zeros({out}, true);
  return p;
}

ConvParams init_conv(int k, int d, double dropout, Rng& rng) {
  ConvParams p;
  const int fan_in = k * d;
  p.v = gaussian({2 * d, k * d}, std::sqrt(4.0 * (1.0 - dropout) / fan_in), rng);
  p.g = initial_gain(p.v, NormAxis::kRows);
  p.b = Tensor::zeros({2 * d}, true);
  return p;
}

void check_positions(std::span<const int> positions, int limit,
                     const char* side) {
  for (int p : positions) {
    if (p < 0 || p >= limit) {
      throw Error(ErrorCode::kPositionOverflow,
                  std::string(side) + " position " + std::to_string(p) +
                      " not in [0," + std::to_string(limit) + ")");
    }
  }
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kPlain: return "plain";
    case Variant::kEncT: return "enc_t";
    case Variant::kEncTDecTD: return "enc_t_dec_tD";
    case Variant::kEncTTD: return "enc_ttD";
    case Variant::kEncTTDDecTD: return "enc_ttD_dec_tD";
  }
  return "plain";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kPlain, Variant::kEncT, Variant::kEncTDecTD,
                    Variant::kEncTTD, Variant::kEncTTDDecTD}) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown variant '" + std::string(name) + "'");
}

int ModelConfig::encoder_topic_width() const {
  return variant == Variant::kPlain ? 0 : f_prime;
}

int ModelConfig::decoder_topic_width() const {
  return conditions_decoder(variant) ? f_prime : 0;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, "model config: " + msg);
  };
  if (vocab_size <= kNumSpecials) fail("vocab_size must exceed the specials");
  if (f < 1 || d < 1 || k < 1) fail("f, d and k must be positive");
  if (enc_layers < 0 || dec_layers < 0) fail("layer counts must be >= 0");
  if (variant != Variant::kPlain && f_prime < 1) {
    fail("topic variants need f_prime >= 1");
  }
  if (max_source_positions < 1 || max_target_positions < 1) {
    fail("max positions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"f", c.f},
                     {"f_prime", c.f_prime},
                     {"d", c.d},
                     {"k", c.k},
                     {"enc_layers", c.enc_layers},
                     {"dec_layers", c.dec_layers},
                     {"max_source_positions", c.max_source_positions},
                     {"max_target_positions", c.max_target_positions},
                     {"variant", std::string(variant_name(c.variant))},
                     {"dropout", c.dropout},
                     {"residual_scaling", c.residual_scaling},
                     {"layer_norm", c.layer_norm}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("vocab_size", c.vocab_size);
  get("f", c.f);
  get("f_prime", c.f_prime);
  get("d", c.d);
  get("k", c.k);
  get("enc_layers", c.enc_layers);
  get("dec_layers", c.dec_layers);
  get("max_source_positions", c.max_source_positions);
  get("max_target_positions", c.max_target_positions);
  if (j.contains("variant")) {
    c.variant = parse_variant(j.at("variant").get<std::string>());
  }
  get("dropout", c.dropout);
  get("residual_scaling", c.residual_scaling);
  get("layer_norm", c.layer_norm);
}

// --- parameters ----------------------------------------------------------

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  p.config = config;
  const int E = config.encoder_width();
  const int G = config.decoder_width();
  p.word_emb = gaussian({config.vocab_size, config.f}, 0.1, rng);
  p.pos_src = gaussian({config.max_source_positions, config.f}, 0.1, rng);
  p.pos_tgt = gaussian({config.max_target_positions, config.f}, 0.1, rng);
  p.enc_in = init_linear(E, config.d, rng);
  for (int l = 0; l < config.enc_layers; ++l) {
    p.enc_conv.push_back(init_conv(config.k, config.d, config.dropout, rng));
  }
  p.enc_out = init_linear(config.d, E, rng);
  p.dec_in = init_linear(G, config.d, rng);
  for (int l = 0; l < config.dec_layers; ++l) {
    p.dec_conv.push_back(init_conv(config.k, config.d, config.dropout, rng));
    p.attn_in.push_back(init_linear(config.d, E, rng));
    p.attn_out.push_back(init_linear(E, config.d, rng));
  }
  p.out = init_linear(config.d, config.vocab_size, rng);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto lin = [&out](const std::string& name, const LinearParams& l) {
    out.emplace_back(name + ".v", l.v);
    out.emplace_back(name + ".g", l.g);
    out.emplace_back(name + ".b", l.b);
  };
  auto conv = [&out](const std::string& name, const ConvParams& c) {
    out.emplace_back(name + ".v", c.v);
    out.emplace_back(name + ".g", c.g);
    out.emplace_back(name + ".b", c.b);
  };
  out.emplace_back("word_emb", word_emb);
  out.emplace_back("pos_src", pos_src);
  out.emplace_back("pos_tgt", pos_tgt);
  lin("enc.in", enc_in);
  for (size_t l = 0; l < enc_conv.size(); ++l) {
    conv("enc.conv" + std::to_string(l), enc_conv[l]);
  }
  lin("enc.out", enc_out);
  lin("dec.in", dec_in);
  for (size_t l = 0; l < dec_conv.size(); ++l) {
    conv("dec.conv" + std::to_string(l), dec_conv[l]);
    lin("dec.attn_in" + std::to_string(l), attn_in[l]);
    lin("dec.attn_out" + std::to_string(l), attn_out[l]);
  }
  lin("dec.out", this->out);
  return out;
}

int64_t ModelParams::num_values() const {
  int64_t n = 0;
  for (const auto& [name, t] : named()) n += t.size();
  return n;
}

ModelParams ModelParams::clone() const {
  ModelParams c;
  c.config = config;
  c.word_emb = word_emb.clone();
  c.pos_src = pos_src.clone();
  c.pos_tgt = pos_tgt.clone();
  auto lin = [](const LinearParams& l) {
    return LinearParams{l.v.clone(), l.g.clone(), l.b.clone()};
  };
  auto conv = [](const ConvParams& x) {
    return ConvParams{x.v.clone(), x.g.clone(), x.b.clone()};
  };
  c.enc_in = lin(enc_in);
  c.enc_out = lin(enc_out);
  c.dec_in = lin(dec_in);
  c.out = lin(out);
  for (const auto& x : enc_conv) c.enc_conv.push_back(conv(x));
  for (const auto& x : dec_conv) c.dec_conv.push_back(conv(x));
  for (const auto& x : attn_in) c.attn_in.push_back(lin(x));
  for (const auto& x : attn_out) c.attn_out.push_back(lin(x));
  return c;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named()) t.zero_grad();
}

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::write_string(out, nlohmann::json(config).dump());
  const auto params = named();
  binio::write<uint64_t>(out, params.size());
  for (const auto& [name, t] : params) {
    binio::write_string(out, name);
    binio::write<uint64_t>(out, t.shape().size());
    for (int64_t d : t.shape()) binio::write<int64_t>(out, d);
    binio::write_span<double>(out, t.values());
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic), kCheckpointMagic)) {
    throw Error(ErrorCode::kFormatError, path + " is not a checkpoint");
  }
  ModelConfig config;
  try {
    config = nlohmann::json::parse(binio::read_string(in)).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("checkpoint config: ") + e.what());
  }
  // Shapes come from the config; blobs must match them by name and size.
  ModelParams p = init(config, 0);
  auto slots = p.named();
  const auto count = binio::read<uint64_t>(in);
  if (count != slots.size()) {
    throw Error(ErrorCode::kFormatError, "checkpoint parameter count mismatch");
  }
  for (auto& [name, t] : slots) {
    const std::string stored = binio::read_string(in, 4096);
    if (stored != name) {
      throw Error(ErrorCode::kFormatError,
                  "expected parameter " + name + ", found " + stored);
    }
    const auto rank = binio::read<uint64_t>(in);
    Shape shape(rank);
    for (auto& dim : shape) dim = binio::read<int64_t>(in);
    if (shape != t.shape()) {
      throw Error(ErrorCode::kFormatError, "shape mismatch for " + name);
    }
    binio::read_into<double>(in, t.mutable_values());
  }
  return p;
}

// --- network -------------------------------------------------------------

ConvS2S::ConvS2S(Tape& tape, const ModelParams& params, RunMode mode)
    : tape_(tape), params_(params), mode_(mode) {
  if (mode_.training && params.config.dropout > 0 && mode_.rng == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "training with dropout needs an rng");
  }
  enc_in_ = resolve(params.enc_in);
  enc_out_ = resolve(params.enc_out);
  dec_in_ = resolve(params.dec_in);
  out_ = resolve(params.out);
  for (const auto& c : params.enc_conv) enc_conv_.push_back(resolve(c));
  for (const auto& c : params.dec_conv) dec_conv_.push_back(resolve(c));
  for (const auto& l : params.attn_in) attn_in_.push_back(resolve(l));
  for (const auto& l : params.attn_out) attn_out_.push_back(resolve(l));
}

ConvS2S::Resolved ConvS2S::resolve(const LinearParams& p) {
  return {weight_norm(tape_, p.v, p.g, NormAxis::kCols), p.b};
}

ConvS2S::Resolved ConvS2S::resolve(const ConvParams& p) {
  return {weight_norm(tape_, p.v, p.g, NormAxis::kRows), p.b};
}

Tensor ConvS2S::drop(const Tensor& x) {
  if (!mode_.training || params_.config.dropout == 0.0) return x;
  return dropout(tape_, x, params_.config.dropout, true, *mode_.rng);
}

Tensor ConvS2S::block_output(const Tensor& h, const Tensor& residual) {
  Tensor out = add(tape_, h, residual);
  if (params_.config.residual_scaling) out = scale(tape_, out, std::sqrt(0.5));
  if (params_.config.layer_norm) out = layer_norm(tape_, out);
  return out;
}

Tensor ConvS2S::embed_source(std::span<const int> ids,
                             std::span<const int> positions,
                             const TopicVectors* topics) {
  const ModelConfig& c = params_.config;
  if (ids.size() != positions.size()) {
    throw Error(ErrorCode::kShapeMismatch, "ids and positions differ in length");
  }
  check_positions(positions, c.max_source_positions, "source");
  Tensor xp = add(tape_, embedding(tape_, params_.word_emb, ids),
                  embedding(tape_, params_.pos_src, positions));
  if (c.encoder_topic_width() == 0) return xp;

  if (topics == nullptr || !topics->word_topics ||
      topics->word_topics->num_topics != c.f_prime ||
      static_cast<int>(topics->doc_topic.size()) != c.f_prime) {
    throw Error(ErrorCode::kInvalidArgument,
                "variant " + std::string(variant_name(c.variant)) +
                    " needs topic vectors of width " + std::to_string(c.f_prime));
  }
  const WordTopicTable& table = *topics->word_topics;
  const bool times_doc =
      c.variant == Variant::kEncTTD || c.variant == Variant::kEncTTDDecTD;
  const auto m = static_cast<int64_t>(ids.size());
  const int K = c.f_prime;
  Tensor block = Tensor::zeros({m, K});
  auto bv = block.mutable_values();
  for (int64_t i = 0; i < m; ++i) {
    if (ids[i] < 0 || ids[i] >= table.vocab_size) {
      throw Error(ErrorCode::kIndexOutOfVocab, "no topic row for token id " +
                                                   std::to_string(ids[i]));
    }
    const auto row = table.row(ids[i]);
    for (int k = 0; k < K; ++k) {
      bv[i * K + k] = times_doc ? row[k] * topics->doc_topic[k] : row[k];
    }
  }
  return concat_cols(tape_, xp, block);
}

Tensor ConvS2S::embed_target_prefix(std::span<const int> ids,
                                    std::span<const int> positions,
                                    std::span<const double> doc_topic) {
  const ModelConfig& c = params_.config;
  if (ids.size() != positions.size()) {
    throw Error(ErrorCode::kShapeMismatch, "ids and positions differ in length");
  }
  check_positions(positions, c.max_target_positions, "target");
  Tensor xp = add(tape_, embedding(tape_, params_.word_emb, ids),
                  embedding(tape_, params_.pos_tgt, positions));
  const int K = c.decoder_topic_width();
  if (K == 0) return xp;
  if (static_cast<int>(doc_topic.size()) != K) {
    throw Error(ErrorCode::kInvalidArgument,
                "decoder topic vector must have width " + std::to_string(K));
  }
  const auto n = static_cast<int64_t>(ids.size());
  Tensor block = Tensor::zeros({n, K});
  auto bv = block.mutable_values();
  for (int64_t i = 0; i < n; ++i) {
    std::copy(doc_topic.begin(), doc_topic.end(), bv.begin() + i * K);
  }
  return concat_cols(tape_, xp, block);
}

EncoderOut ConvS2S::encode(const Tensor& e) {
  if (e.rank() != 2 || e.dim(0) < 1) {
    throw Error(ErrorCode::kShapeMismatch, "encoder input must be [m>=1, E]");
  }
  Tensor h = linear(tape_, drop(e), enc_in_.w, enc_in_.b);
  for (const auto& conv : enc_conv_) {
    const Tensor residual = h;
    Tensor y = conv1d(tape_, drop(h), conv.w, conv.b, PadMode::kSymmetric);
    h = block_output(glu(tape_, y), residual);
  }
  EncoderOut out;
  out.z_u = linear(tape_, h, enc_out_.w, enc_out_.b);
  out.e = e;
  out.values = add(tape_, out.z_u, e);
  return out;
}

AttentionOut ConvS2S::attend(int layer, const Tensor& h, const Tensor& g,
                             const EncoderOut& enc) {
  const int E = params_.config.encoder_width();
  Tensor g_ext = g;
  if (g.dim(1) < E) {
    g_ext = concat_cols(tape_, g, Tensor::zeros({g.dim(0), E - g.dim(1)}));
  } else if (g.dim(1) != E) {
    throw Error(ErrorCode::kShapeMismatch, "decoder embedding wider than encoder");
  }
  const Resolved& in = attn_in_.at(layer);
  const Resolved& out = attn_out_.at(layer);
  Tensor summary = add(tape_, linear(tape_, h, in.w, in.b), g_ext);
  Tensor scores = matmul_nt(tape_, summary, enc.z_u);
  AttentionOut res;
  res.attention = softmax_rows(tape_, scores);
  Tensor context = matmul(tape_, res.attention, enc.values);
  res.context = linear(tape_, context, out.w, out.b);
  return res;
}

DecoderOut ConvS2S::decode(const Tensor& g, const EncoderOut& enc) {
  if (g.rank() != 2 || g.dim(0) < 1) {
    throw Error(ErrorCode::kShapeMismatch, "decoder input must be [n>=1, G]");
  }
  DecoderOut out;
  Tensor h = linear(tape_, drop(g), dec_in_.w, dec_in_.b);
  for (size_t l = 0; l < dec_conv_.size(); ++l) {
    const Tensor residual = h;
    Tensor y = conv1d(tape_, drop(h), dec_conv_[l].w, dec_conv_[l].b,
                      PadMode::kCausal);
    Tensor state = glu(tape_, y);
    AttentionOut att = attend(static_cast<int>(l), state, g, enc);
    state = add(tape_, state, att.context);
    h = block_output(state, residual);
    out.attention.push_back(att.attention);
  }
  out.logits = linear(tape_, drop(h), out_.w, out_.b);
  return out;
}

DecoderOut ConvS2S::teacher_forced(const EncodedPair& pair,
                                   std::span<const int> target,
                                   const TopicVectors* topics) {
  Tensor e = embed_source(pair.source_ids, pair.source_positions, topics);
  EncoderOut enc = encode(e);
  std::vector<int> inputs(target.size());
  std::vector<int> positions(target.size());
  for (size_t i = 0; i < target.size(); ++i) {
    inputs[i] = i == 0 ? kBosId : target[i - 1];
    positions[i] = static_cast<int>(i);
  }
  const std::span<const double> doc_topic =
      topics ? std::span<const double>(topics->doc_topic) : std::span<const double>();
  Tensor g = embed_target_prefix(inputs, positions, doc_topic);
  return decode(g, enc);
}

Tensor forward_loss(Tape& tape, const ModelParams& params,
                    const EncodedPair& pair, const TopicVectors* topics,
                    RunMode mode) {
  const BatchItem item{&pair, topics};
  return forward_batch_loss(tape, params, std::span<const BatchItem>(&item, 1),
                            mode);
}

Tensor forward_batch_loss(Tape& tape, const ModelParams& params,
                          std::span<const BatchItem> batch, RunMode mode,
                          int pad_targets_to) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  size_t width = static_cast<size_t>(std::max(pad_targets_to, 0));
  for (const auto& item : batch) width = std::max(width, item.pair->target_ids.size());
  if (width == 0) throw Error(ErrorCode::kInvalidArgument, "empty targets");

  ConvS2S net(tape, params, mode);
  std::vector<Tensor> logits;
  std::vector<int> targets;
  std::vector<bool> mask;
  for (const auto& item : batch) {
    std::vector<int> padded = item.pair->target_ids;
    padded.resize(width, kPadId);
    logits.push_back(net.teacher_forced(*item.pair, padded, item.topics).logits);
    for (int t : padded) {
      targets.push_back(t);
      mask.push_back(t == kPadId);
    }
  }
  Tensor all = logits.size() == 1 ? logits.front() : concat_rows(tape, logits);
  return softmax_xent(tape, all, targets, mask).loss;
}

// --- decoding ------------------------------------------------------------

DecodeSession::DecodeSession(const ModelParams& params,
                             const EncodedPair& source,
                             const TopicVectors* topics)
    : tape_(Tape::inference()), net_(tape_, params) {
  if (topics) doc_topic_ = topics->doc_topic;
  enc_ = net_.encode(
      net_.embed_source(source.source_ids, source.source_positions, topics));
}

DecoderOut DecodeSession::run(std::span<const int> prefix) {
  if (prefix.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "decoder prefix must start with BOS");
  }
  std::vector<int> positions(prefix.size());
  for (size_t i = 0; i < prefix.size(); ++i) positions[i] = static_cast<int>(i);
  const int K = net_.config().decoder_topic_width();
  Tensor g = net_.embed_target_prefix(
      prefix, positions,
      K ? std::span<const double>(doc_topic_) : std::span<const double>());
  return net_.decode(g, enc_);
}

std::vector<double> DecodeSession::step_logits(std::span<const int> prefix) {
  const DecoderOut out = run(prefix);
  const int64_t T = out.logits.dim(1);
  const auto v = out.logits.values();
  const int64_t last = out.logits.dim(0) - 1;
  return std::vector<double>(v.begin() + last * T, v.begin() + (last + 1) * T);
}

}  // namespace xsf
