#include "xdoc/model.hpp"

#include "xdoc/error.hpp"

namespace xdoc {

const char* format_name(Format f) {
  switch (f) {
    case Format::Plain: return "plain";
    case Format::Doc: return "doc";
    case Format::Web: return "web";
  }
  return "?";
}

Format format_by_name(const std::string& name) {
  if (name == "plain") return Format::Plain;
  if (name == "doc") return Format::Doc;
  if (name == "web") return Format::Web;
  throw ConfigError("unknown format '" + name + "' (expected plain|doc|web)");
}

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.enc = EncoderConfig::toy();
  cfg.emb.vocab_size = 256;  // stand-in; callers override from the loaded vocabulary
  cfg.emb.hidden = cfg.enc.hidden;
  cfg.emb.l_max = cfg.enc.l_max;
  cfg.emb.bins = 64;
  cfg.emb.share_xy_tables = false;
  cfg.emb.max_depth = 8;
  cfg.emb.xpath_unit = 8;
  cfg.emb.n_tags = 30;
  cfg.emb.max_sub = 16;
  return cfg;
}

ModelConfig ModelConfig::base() {
  ModelConfig cfg;
  cfg.enc = EncoderConfig::base();
  cfg.emb.vocab_size = 50265;
  cfg.emb.hidden = cfg.enc.hidden;
  cfg.emb.l_max = cfg.enc.l_max;
  cfg.emb.bins = 1024;
  cfg.emb.share_xy_tables = false;
  cfg.emb.max_depth = 50;
  cfg.emb.xpath_unit = 32;
  cfg.emb.n_tags = 30;
  cfg.emb.max_sub = 256;
  return cfg;
}

ModelConfig ModelConfig::base_compat() {
  ModelConfig cfg = base();
  cfg.emb.share_xy_tables = true;
  cfg.emb.n_tags = 256;
  cfg.emb.max_sub = 1024;
  return cfg;
}

void ModelConfig::validate() const {
  enc.validate();
  if (emb.hidden != enc.hidden) {
    throw ConfigError("embedding hidden " + std::to_string(emb.hidden) +
                      " != encoder hidden " + std::to_string(enc.hidden));
  }
  if (emb.l_max != enc.l_max) {
    throw ConfigError("embedding l_max " + std::to_string(emb.l_max) + " != encoder l_max " +
                      std::to_string(enc.l_max));
  }
  if (emb.vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  if (symmetric_adaptive && (!doc_adaptive.enabled || !web_adaptive.enabled)) {
    throw ConfigError("symmetric adaptive layers require both branches enabled");
  }
  if (symmetric_adaptive && doc_adaptive.n_relu < 1) {
    throw ConfigError("symmetric adaptive layers need at least one shared tail linear");
  }
  if (doc_adaptive.enabled && doc_adaptive.n_relu < 0) throw ConfigError("doc n_relu < 0");
  if (web_adaptive.enabled && web_adaptive.n_relu < 0) throw ConfigError("web n_relu < 0");
  if (!web_adaptive.enabled && emb.max_depth * emb.xpath_unit != emb.hidden) {
    throw ConfigError("disabled web adaptive requires max_depth*xpath_unit == hidden");
  }
}

ModelConfig preset_by_name(const std::string& name) {
  if (name == "toy") return ModelConfig::toy();
  if (name == "base") return ModelConfig::base();
  if (name == "base_compat") return ModelConfig::base_compat();
  throw ConfigError("unknown preset '" + name + "' (expected toy|base|base_compat)");
}

std::unique_ptr<XDocModel> make_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  auto m = std::make_unique<XDocModel>();
  m->cfg = cfg;
  Rng init(seed);
  m->tables = make_embedding_tables(m->params, cfg.emb, init);

  const int64_t h = cfg.emb.hidden;
  if (cfg.doc_adaptive.enabled) {
    if (cfg.symmetric_adaptive) {
      m->doc_adaptive =
          AdaptiveLayer::create(m->params, "doc_adaptive", ParamGroup::Doc, h, h,
                                cfg.doc_adaptive.n_relu, init, "adaptive_shared",
                                ParamGroup::AdaptiveShared);
    } else {
      m->doc_adaptive = AdaptiveLayer::create(m->params, "doc_adaptive", ParamGroup::Doc, h, h,
                                              cfg.doc_adaptive.n_relu, init);
    }
  } else {
    m->doc_adaptive = AdaptiveLayer::disabled(h);
  }

  const int64_t xpath_dim = cfg.emb.max_depth * cfg.emb.xpath_unit;
  if (cfg.web_adaptive.enabled) {
    if (cfg.symmetric_adaptive) {
      m->web_adaptive = AdaptiveLayer::create_sharing_tail(m->params, "web_adaptive",
                                                           ParamGroup::Web, xpath_dim, init,
                                                           m->doc_adaptive);
    } else {
      m->web_adaptive = AdaptiveLayer::create(m->params, "web_adaptive", ParamGroup::Web,
                                              xpath_dim, h, cfg.web_adaptive.n_relu, init);
    }
  } else {
    m->web_adaptive = AdaptiveLayer::disabled(h);
  }

  if (cfg.embed_layernorm) {
    m->emb_ln_g = m->params.add("emb_ln.g", Tensor::full({h}, 1.0), ParamGroup::Shared, true);
    m->emb_ln_b = m->params.add("emb_ln.b", Tensor::zeros({h}), ParamGroup::Shared, true);
  }

  m->encoder = make_encoder_state(m->params, cfg.enc, init, m->tables.word, cfg.tied_head);
  return m;
}

namespace {

void check_priors(const XDocModel& m, const ModelInput& in) {
  const bool want_boxes = in.format == Format::Doc;
  const bool want_paths = in.format == Format::Web;
  if (want_boxes != !in.boxes.empty()) {
    throw ConfigError(std::string("format ") + format_name(in.format) +
                      (want_boxes ? " requires boxes" : " must not carry boxes"));
  }
  if (want_paths != !in.xpaths.empty()) {
    throw ConfigError(std::string("format ") + format_name(in.format) +
                      (want_paths ? " requires xpaths" : " must not carry xpaths"));
  }
  if (in.seq.l_max() != m.cfg.emb.l_max) {
    throw ArityError("input length " + std::to_string(in.seq.l_max()) + " != model l_max " +
                     std::to_string(m.cfg.emb.l_max));
  }
}

}  // namespace

Value embed_input(Tape& tape, const XDocModel& m, const ModelInput& in, const ForwardCtx& ctx) {
  check_priors(m, in);
  Value e;
  switch (in.format) {
    case Format::Plain:
      e = embed_plain(tape, in.seq, m.tables);
      break;
    case Format::Doc:
      e = embed_doc(tape, in.seq, in.boxes, m.tables, m.doc_adaptive);
      break;
    case Format::Web:
      e = embed_web(tape, in.seq, in.xpaths, m.tables, m.web_adaptive);
      break;
  }
  if (m.cfg.embed_layernorm) {
    e = tape.layer_norm(e, tape.leaf(*m.emb_ln_g), tape.leaf(*m.emb_ln_b),
                        m.cfg.enc.layernorm_eps);
  }
  return dropout(tape, e, m.cfg.enc.dropout, ctx);
}

Value model_forward(Tape& tape, const XDocModel& m, const ModelInput& in, const ForwardCtx& ctx) {
  Value e = embed_input(tape, m, in, ctx);
  return encoder_forward(tape, e, in.seq.attention, m.encoder, ctx);
}

Value model_mlm_loss(Tape& tape, const XDocModel& m, const ModelInput& corrupted,
                     std::span<const int32_t> labels, std::span<const uint8_t> active,
                     const ForwardCtx& ctx) {
  Value h = model_forward(tape, m, corrupted, ctx);
  Value logits = mlm_logits(tape, h, m.encoder);
  return tape.masked_cross_entropy(logits, labels, active);
}

}  // namespace xdoc
