#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "xdoc/embeddings.hpp"
#include "xdoc/encoder.hpp"

namespace xdoc {

enum class Format { Plain = 0, Doc = 1, Web = 2 };

const char* format_name(Format f);
Format format_by_name(const std::string& name);

// One example ready for the model: an encoded sequence plus the prior that
// matches its format, one entry per position (specials carry the zero box
// or the empty path).
struct ModelInput {
  Format format = Format::Plain;
  EncodedSeq seq;
  std::vector<Box> boxes;        // doc only, length l_max
  std::vector<XPathSeq> xpaths;  // web only, length l_max
};

struct ModelConfig {
  EmbeddingConfig emb;
  EncoderConfig enc;
  AdaptiveSpec doc_adaptive{true, 1};
  AdaptiveSpec web_adaptive{true, 1};
  bool symmetric_adaptive = false;  // branches share every linear after the first
  bool tied_head = true;
  // LayerNorm over the summed embedding before dropout; the norm covers the
  // full sum including the adaptive addition.
  bool embed_layernorm = true;

  static ModelConfig toy();
  static ModelConfig base();
  // base sized so the sharing arithmetic lands on the published accounting
  static ModelConfig base_compat();
  void validate() const;
};

ModelConfig preset_by_name(const std::string& name);

// Full model state. The store owns every Parameter; tables, adaptives and
// the encoder hold pointers into it.
struct XDocModel {
  ModelConfig cfg;
  ParameterStore params;
  EmbeddingTables tables;
  AdaptiveLayer doc_adaptive;
  AdaptiveLayer web_adaptive;
  EncoderState encoder;
  Parameter* emb_ln_g = nullptr;
  Parameter* emb_ln_b = nullptr;
};

// Registers and initializes all parameters; weights ~ N(0, 0.02) from seed.
std::unique_ptr<XDocModel> make_model(const ModelConfig& cfg, uint64_t seed);

// Branch embedding, then embedding LayerNorm and dropout when configured.
Value embed_input(Tape& tape, const XDocModel& m, const ModelInput& in,
                  const ForwardCtx& ctx = {});

// embed_input through the shared encoder stack.
Value model_forward(Tape& tape, const XDocModel& m, const ModelInput& in,
                    const ForwardCtx& ctx = {});

// Scalar MLM loss for one corrupted example: mean CE over active positions.
Value model_mlm_loss(Tape& tape, const XDocModel& m, const ModelInput& corrupted,
                     std::span<const int32_t> labels, std::span<const uint8_t> active,
                     const ForwardCtx& ctx = {});

}  // namespace xdoc
