#pragma once

#include <cstdint>
#include <vector>

#include "xdoc/rng.hpp"
#include "xdoc/tape.hpp"

namespace xdoc {

struct EncoderConfig {
  int64_t n_layers = 12;
  int64_t hidden = 768;
  int64_t n_heads = 12;
  int64_t ffn_dim = 3072;
  double dropout = 0.1;
  double layernorm_eps = 1e-5;
  int64_t l_max = 512;

  static EncoderConfig base();
  static EncoderConfig toy();
  void validate() const;
  int64_t head_dim() const { return hidden / n_heads; }
};

struct EncoderLayerParams {
  Parameter* wq = nullptr;
  Parameter* bq = nullptr;
  Parameter* wk = nullptr;
  Parameter* bk = nullptr;
  Parameter* wv = nullptr;
  Parameter* bv = nullptr;
  Parameter* wo = nullptr;
  Parameter* bo = nullptr;
  Parameter* ln1_g = nullptr;
  Parameter* ln1_b = nullptr;
  Parameter* ffn_w1 = nullptr;
  Parameter* ffn_b1 = nullptr;
  Parameter* ffn_w2 = nullptr;
  Parameter* ffn_b2 = nullptr;
  Parameter* ln2_g = nullptr;
  Parameter* ln2_b = nullptr;
};

struct MlmHead {
  Parameter* transform_w = nullptr;  // [H, H]
  Parameter* transform_b = nullptr;
  Parameter* ln_g = nullptr;
  Parameter* ln_b = nullptr;
  Parameter* out_w = nullptr;  // [H, v], only when untied
  Parameter* out_b = nullptr;  // [v]
  Parameter* word = nullptr;   // projection table when tied
  bool tied = true;
};

struct EncoderState {
  EncoderConfig cfg;
  std::vector<EncoderLayerParams> layers;
  MlmHead head;
};

// dropout is active only when training with an rng attached
struct ForwardCtx {
  bool training = false;
  Rng* rng = nullptr;
};

// registers all transformer + MLM head parameters in the shared group;
// word_table backs the tied output projection
EncoderState make_encoder_state(ParameterStore& store, const EncoderConfig& cfg, Rng& init,
                                Parameter* word_table, bool tie_head = true);

// post-LayerNorm residual blocks; pad keys are excluded from every softmax
Value encoder_forward(Tape& tape, Value emb, const std::vector<uint8_t>& attention,
                      const EncoderState& state, const ForwardCtx& ctx = {});

// linear H->H, GELU, LayerNorm, projection to vocab logits
Value mlm_logits(Tape& tape, Value hidden, const EncoderState& state);

// inverted dropout via a scaled keep mask; identity when not training or p=0
Value dropout(Tape& tape, Value x, double p, const ForwardCtx& ctx);

}  // namespace xdoc
