#include "xdoc/param_count.hpp"

#include <cinttypes>
#include <cstdio>

namespace xdoc {

namespace {

int64_t linear_params(int64_t in, int64_t out) { return in * out + out; }

// Linear (ReLU Linear)^k from in_dim to hidden; the tail linears are hidden
// to hidden
int64_t adaptive_head_params(int64_t in_dim, int64_t hidden) {
  return linear_params(in_dim, hidden);
}

int64_t adaptive_tail_params(int64_t hidden, int n_relu) {
  return static_cast<int64_t>(n_relu) * linear_params(hidden, hidden);
}

}  // namespace

double ParamBreakdown::consolidation_ratio() const {
  double separate = static_cast<double>(text_model()) + static_cast<double>(doc_model()) +
                    static_cast<double>(web_model());
  return static_cast<double>(unified()) / separate;
}

ParamBreakdown count_params(const ModelConfig& cfg) {
  cfg.validate();
  const EmbeddingConfig& e = cfg.emb;
  const EncoderConfig& enc = cfg.enc;
  const int64_t h = e.hidden;

  ParamBreakdown b;
  b.word = e.vocab_size * h;
  b.pos1d = e.l_max * h;
  b.twod = (e.share_xy_tables ? 4 : 6) * static_cast<int64_t>(e.bins) * h;
  b.xpath = e.max_depth * e.xpath_unit * (e.n_tags + e.max_sub);

  // per layer: q, k, v, and output projections; two-linear ffn; two layer
  // norms with gain and bias
  const int64_t per_layer = 4 * linear_params(h, h) + linear_params(h, enc.ffn_dim) +
                            linear_params(enc.ffn_dim, h) + 4 * h;
  b.transformer = enc.n_layers * per_layer;
  b.embed_norm = cfg.embed_layernorm ? 2 * h : 0;

  // transform linear, its layer norm, the output bias, and the untied output
  // matrix when the word table is not reused
  b.head = linear_params(h, h) + 2 * h + e.vocab_size;
  if (!cfg.tied_head) b.head += e.vocab_size * h;

  const int64_t xpath_dim = e.max_depth * e.xpath_unit;
  if (cfg.doc_adaptive.enabled) {
    b.doc_adaptive = adaptive_head_params(h, h);
    if (!cfg.symmetric_adaptive)
      b.doc_adaptive += adaptive_tail_params(h, cfg.doc_adaptive.n_relu);
  }
  if (cfg.web_adaptive.enabled) {
    b.web_adaptive = adaptive_head_params(xpath_dim, h);
    if (!cfg.symmetric_adaptive)
      b.web_adaptive += adaptive_tail_params(h, cfg.web_adaptive.n_relu);
  }
  if (cfg.symmetric_adaptive)
    b.adaptive_shared = adaptive_tail_params(h, cfg.doc_adaptive.n_relu);
  return b;
}

std::string format_param_report(const ParamBreakdown& b) {
  char line[96];
  std::string out;
  auto row = [&](const char* name, int64_t n) {
    std::snprintf(line, sizeof(line), "  %-16s %12" PRId64 "\n", name, n);
    out += line;
  };
  out += "components\n";
  row("word", b.word);
  row("pos1d", b.pos1d);
  row("transformer", b.transformer);
  row("embed_norm", b.embed_norm);
  row("head", b.head);
  row("twod", b.twod);
  row("xpath", b.xpath);
  row("doc_adaptive", b.doc_adaptive);
  row("web_adaptive", b.web_adaptive);
  row("adaptive_shared", b.adaptive_shared);
  out += "deployments\n";
  row("text", b.text_model());
  row("doc", b.doc_model());
  row("web", b.web_model());
  row("unified", b.unified());
  std::snprintf(line, sizeof(line), "  %-16s %12.4f\n", "unified/separate",
                b.consolidation_ratio());
  out += line;
  return out;
}

}  // namespace xdoc
