#include "xdoc/encoder.hpp"

#include <cmath>

#include "xdoc/error.hpp"

namespace xdoc {

EncoderConfig EncoderConfig::base() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::toy() {
  EncoderConfig cfg;
  cfg.n_layers = 2;
  cfg.hidden = 64;
  cfg.n_heads = 4;
  cfg.ffn_dim = 128;
  cfg.dropout = 0.0;
  cfg.l_max = 64;
  return cfg;
}

void EncoderConfig::validate() const {
  if (n_layers < 0) throw ConfigError("encoder: n_layers must be >= 0");
  if (hidden < 1 || n_heads < 1 || ffn_dim < 1 || l_max < 2) {
    throw ConfigError("encoder: hidden, n_heads, ffn_dim and l_max must be positive");
  }
  if (hidden % n_heads != 0) {
    throw ConfigError("encoder: hidden " + std::to_string(hidden) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
  if (layernorm_eps <= 0.0) throw ConfigError("encoder: layernorm_eps must be positive");
}

namespace {

Tensor normal_init(std::vector<int64_t> shape, Rng& rng, double std = 0.02) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * std;
  return t;
}

}  // namespace

EncoderState make_encoder_state(ParameterStore& store, const EncoderConfig& cfg, Rng& init,
                                Parameter* word_table, bool tie_head) {
  cfg.validate();
  if (word_table == nullptr) throw ConfigError("encoder: word table required for the MLM head");
  if (word_table->value.rank() != 2 || word_table->value.dim(1) != cfg.hidden) {
    throw ConfigError("encoder: word table shape " + word_table->value.shape_str() +
                      " incompatible with hidden " + std::to_string(cfg.hidden));
  }
  const int64_t h = cfg.hidden, f = cfg.ffn_dim, v = word_table->value.dim(0);
  EncoderState state;
  state.cfg = cfg;

  auto lin = [&](const std::string& name, int64_t in, int64_t out) {
    return store.add(name, normal_init({in, out}, init), ParamGroup::Shared);
  };
  auto bias = [&](const std::string& name, int64_t n) {
    return store.add(name, Tensor({n}), ParamGroup::Shared, /*no_decay=*/true);
  };
  auto ln_gamma = [&](const std::string& name) {
    return store.add(name, Tensor::full({h}, 1.0), ParamGroup::Shared, true);
  };

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "enc." + std::to_string(l) + ".";
    EncoderLayerParams lp;
    lp.wq = lin(p + "attn.wq", h, h);
    lp.bq = bias(p + "attn.bq", h);
    lp.wk = lin(p + "attn.wk", h, h);
    lp.bk = bias(p + "attn.bk", h);
    lp.wv = lin(p + "attn.wv", h, h);
    lp.bv = bias(p + "attn.bv", h);
    lp.wo = lin(p + "attn.wo", h, h);
    lp.bo = bias(p + "attn.bo", h);
    lp.ln1_g = ln_gamma(p + "ln1.g");
    lp.ln1_b = bias(p + "ln1.b", h);
    lp.ffn_w1 = lin(p + "ffn.w1", h, f);
    lp.ffn_b1 = bias(p + "ffn.b1", f);
    lp.ffn_w2 = lin(p + "ffn.w2", f, h);
    lp.ffn_b2 = bias(p + "ffn.b2", h);
    lp.ln2_g = ln_gamma(p + "ln2.g");
    lp.ln2_b = bias(p + "ln2.b", h);
    state.layers.push_back(lp);
  }

  MlmHead& head = state.head;
  head.tied = tie_head;
  head.word = word_table;
  head.transform_w = lin("head.transform_w", h, h);
  head.transform_b = bias("head.transform_b", h);
  head.ln_g = ln_gamma("head.ln_g");
  head.ln_b = bias("head.ln_b", h);
  if (!tie_head) head.out_w = lin("head.out_w", h, v);
  head.out_b = bias("head.out_b", v);
  return state;
}

Value dropout(Tape& tape, Value x, double p, const ForwardCtx& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (ctx.rng == nullptr) throw ConfigError("dropout: training forward needs an rng");
  const Tensor& t = x.tensor();
  Tensor mask(t.shape());
  const double keep = 1.0 - p;
  for (int64_t i = 0; i < mask.size(); ++i) {
    mask[i] = ctx.rng->uniform() < p ? 0.0 : 1.0 / keep;
  }
  return tape.mul_elem(x, std::move(mask));
}

Value encoder_forward(Tape& tape, Value emb, const std::vector<uint8_t>& attention,
                      const EncoderState& state, const ForwardCtx& ctx) {
  const EncoderConfig& cfg = state.cfg;
  const Tensor& te = emb.tensor();
  if (te.rank() != 2 || te.dim(1) != cfg.hidden) {
    throw ShapeError("encoder: embedding shape " + te.shape_str() + " vs hidden " +
                     std::to_string(cfg.hidden));
  }
  const int64_t L = te.dim(0);
  if (static_cast<int64_t>(attention.size()) != L) {
    throw ShapeError("encoder: attention mask length " + std::to_string(attention.size()) +
                     " vs " + std::to_string(L) + " positions");
  }
  bool any = false;
  for (uint8_t a : attention) any = any || a;
  if (!any) throw MaskError("encoder: attention mask is all-false");

  // one row of key flags per query position
  std::vector<uint8_t> key_mask(static_cast<size_t>(L) * static_cast<size_t>(L));
  for (int64_t i = 0; i < L; ++i) {
    for (int64_t j = 0; j < L; ++j) {
      key_mask[static_cast<size_t>(i * L + j)] = attention[static_cast<size_t>(j)];
    }
  }

  const int64_t dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Value x = emb;
  for (const EncoderLayerParams& lp : state.layers) {
    Value q = tape.add_bias(tape.matmul(x, tape.leaf(*lp.wq)), tape.leaf(*lp.bq));
    Value k = tape.add_bias(tape.matmul(x, tape.leaf(*lp.wk)), tape.leaf(*lp.bk));
    Value v = tape.add_bias(tape.matmul(x, tape.leaf(*lp.wv)), tape.leaf(*lp.bv));

    std::vector<Value> heads;
    heads.reserve(static_cast<size_t>(cfg.n_heads));
    for (int64_t hidx = 0; hidx < cfg.n_heads; ++hidx) {
      Value qh = tape.slice_cols(q, hidx * dh, dh);
      Value kh = tape.slice_cols(k, hidx * dh, dh);
      Value vh = tape.slice_cols(v, hidx * dh, dh);
      Value scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
      Value probs = tape.masked_softmax(scores, key_mask);
      heads.push_back(tape.matmul(probs, vh));
    }
    Value ctx_all = tape.concat_cols(heads);
    Value attn_out = tape.add_bias(tape.matmul(ctx_all, tape.leaf(*lp.wo)), tape.leaf(*lp.bo));
    attn_out = dropout(tape, attn_out, cfg.dropout, ctx);
    x = tape.layer_norm(tape.add(x, attn_out), tape.leaf(*lp.ln1_g), tape.leaf(*lp.ln1_b),
                        cfg.layernorm_eps);

    Value f = tape.add_bias(tape.matmul(x, tape.leaf(*lp.ffn_w1)), tape.leaf(*lp.ffn_b1));
    f = tape.gelu(f);
    f = tape.add_bias(tape.matmul(f, tape.leaf(*lp.ffn_w2)), tape.leaf(*lp.ffn_b2));
    f = dropout(tape, f, cfg.dropout, ctx);
    x = tape.layer_norm(tape.add(x, f), tape.leaf(*lp.ln2_g), tape.leaf(*lp.ln2_b),
                        cfg.layernorm_eps);
  }
  return x;
}

Value mlm_logits(Tape& tape, Value hidden, const EncoderState& state) {
  const MlmHead& head = state.head;
  Value h = tape.add_bias(tape.matmul(hidden, tape.leaf(*head.transform_w)),
                          tape.leaf(*head.transform_b));
  h = tape.gelu(h);
  h = tape.layer_norm(h, tape.leaf(*head.ln_g), tape.leaf(*head.ln_b), state.cfg.layernorm_eps);
  Value logits = head.tied ? tape.matmul_nt(h, tape.leaf(*head.word))
                           : tape.matmul(h, tape.leaf(*head.out_w));
  return tape.add_bias(logits, tape.leaf(*head.out_b));
}

}  // namespace xdoc
