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

// Topic-conditioned convolutional encoder-decoder.
//
// Encoder input e_i = [(x_i + p_i); topic block] where the topic block is
// t'_i (enc_t), t'_i * t_D (enc_ttD) or absent (plain). Decoder input
// g_i = [(x'_i + p'_i); t_D] when the variant conditions the decoder.
// Both stacks are GLU convolutions with residual connections; every
// decoder layer attends over the encoder output z^u with values z^u + e.
// Attention scores live in the encoder embedding width E = f + f'_enc; a
// decoder embedding narrower than E is zero-extended before being added
// to the projected decoder state.

#ifndef XSUMFORGE_CONVS2S_H_
#define XSUMFORGE_CONVS2S_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xsumforge/corpus.h"
#include "xsumforge/diffcore.h"
#include "xsumforge/topiclda.h"

namespace xsf {

enum class Variant { kPlain, kEncT, kEncTDecTD, kEncTTD, kEncTTDDecTD };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // kInvalidArgument

struct ModelConfig {
  int vocab_size = 0;  // T; the output layer predicts over the full vocabulary
  int f = 512;
  int f_prime = 512;
  int d = 512;
  int k = 3;
  int enc_layers = 4;
  int dec_layers = 4;
  int max_source_positions = kMaxSourceTokens;
  int max_target_positions = kMaxTargetTokens;
  Variant variant = Variant::kEncTTDDecTD;
  double dropout = 0.2;
  bool residual_scaling = false;  // multiply residual sums by sqrt(0.5)
  bool layer_norm = false;        // normalize each block output

  int encoder_topic_width() const;
  int decoder_topic_width() const;
  int encoder_width() const { return f + encoder_topic_width(); }
  int decoder_width() const { return f + decoder_topic_width(); }
  void validate() const;  // kInvalidArgument
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// W = g * v / ||v||, one norm per output unit.
struct LinearParams {
  Tensor v;  // [in, out]
  Tensor g;  // [out]
  Tensor b;  // [out]
};

struct ConvParams {
  Tensor v;  // [2d, k*d]
  Tensor g;  // [2d]
  Tensor b;  // [2d]
};

struct ModelParams {
  ModelConfig config;
  Tensor word_emb;  // [V, f], shared by encoder and decoder
  Tensor pos_src;   // [max_source_positions, f]
  Tensor pos_tgt;   // [max_target_positions, f]
  LinearParams enc_in;   // E -> d
  std::vector<ConvParams> enc_conv;
  LinearParams enc_out;  // d -> E
  LinearParams dec_in;   // G -> d
  std::vector<ConvParams> dec_conv;
  std::vector<LinearParams> attn_in;   // d -> E, per decoder layer
  std::vector<LinearParams> attn_out;  // E -> d, per decoder layer
  LinearParams out;                    // d -> T

  // Gaussian init: std sqrt(4(1-dropout)/fan_in) for convolutions,
  // sqrt(1/fan_in) for linear maps, 0.1 for lookup tables; gains start at
  // ||v|| and biases at zero.
  static ModelParams init(const ModelConfig& config, uint64_t seed);

  // Stable, checkpoint-order list of (name, handle) pairs.
  std::vector<std::pair<std::string, Tensor>> named() const;
  int64_t num_values() const;

  ModelParams clone() const;
  void zero_grad();

  // Magic, config JSON, then named float64 blobs (little-endian).
  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);
};

struct RunMode {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

struct EncoderOut {
  Tensor z_u;     // [m, E]
  Tensor e;       // [m, E]
  Tensor values;  // z_u + e
};

struct AttentionOut {
  Tensor context;    // [n, d], projected back to the conv width
  Tensor attention;  // [n, m]
};

struct DecoderOut {
  Tensor logits;  // [n, T]
  std::vector<Tensor> attention;  // one [n, m] map per decoder layer
};

// The network with its weight-normalized matrices resolved once on a tape.
class ConvS2S {
 public:
  ConvS2S(Tape& tape, const ModelParams& params, RunMode mode = {});

  const ModelConfig& config() const { return params_.config; }

  // kPositionOverflow, kInvalidArgument when topic inputs are missing or
  // the wrong width for the active variant.
  Tensor embed_source(std::span<const int> ids, std::span<const int> positions,
                      const TopicVectors* topics);
  Tensor embed_target_prefix(std::span<const int> ids,
                             std::span<const int> positions,
                             std::span<const double> doc_topic);

  EncoderOut encode(const Tensor& e);
  AttentionOut attend(int layer, const Tensor& h, const Tensor& g,
                      const EncoderOut& enc);
  DecoderOut decode(const Tensor& g, const EncoderOut& enc);

  // Teacher-forced logits for `target` (decoder input is BOS + target[:-1]).
  DecoderOut teacher_forced(const EncodedPair& pair, std::span<const int> target,
                            const TopicVectors* topics);

 private:
  struct Resolved {
    Tensor w;
    Tensor b;
  };
  Resolved resolve(const LinearParams& p);
  Resolved resolve(const ConvParams& p);
  Tensor drop(const Tensor& x);
  Tensor block_output(const Tensor& h, const Tensor& residual);

  Tape& tape_;
  const ModelParams& params_;
  RunMode mode_;
  Resolved enc_in_, enc_out_, dec_in_, out_;
  std::vector<Resolved> enc_conv_, dec_conv_, attn_in_, attn_out_;
};

struct BatchItem {
  const EncodedPair* pair = nullptr;
  const TopicVectors* topics = nullptr;
};

// Mean token NLL over non-PAD targets of one pair.
Tensor forward_loss(Tape& tape, const ModelParams& params,
                    const EncodedPair& pair, const TopicVectors* topics,
                    RunMode mode = {});

// Targets are right-padded with PAD to the longest target in the batch (or
// to pad_targets_to, if larger); the loss is the mean NLL over every
// non-PAD target token in the batch.
Tensor forward_batch_loss(Tape& tape, const ModelParams& params,
                          std::span<const BatchItem> batch, RunMode mode = {},
                          int pad_targets_to = 0);

// Encodes one source once and scores decoder prefixes against it. Holds
// its own non-recording tape; params must outlive the session.
class DecodeSession {
 public:
  DecodeSession(const ModelParams& params, const EncodedPair& source,
                const TopicVectors* topics);
  DecodeSession(const DecodeSession&) = delete;
  DecodeSession& operator=(const DecodeSession&) = delete;

  const EncoderOut& encoder_out() const { return enc_; }

  // Full decoder pass over a BOS-initial prefix.
  DecoderOut run(std::span<const int> prefix);
  // Logits (width T) predicting the token after the prefix.
  std::vector<double> step_logits(std::span<const int> prefix);

 private:
  Tape tape_;
  ConvS2S net_;
  std::vector<double> doc_topic_;
  EncoderOut enc_;
};

}  // namespace xsf

#endif  // XSUMFORGE_CONVS2S_H_
