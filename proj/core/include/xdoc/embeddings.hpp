#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xdoc/dom.hpp"
#include "xdoc/rng.hpp"
#include "xdoc/tape.hpp"
#include "xdoc/tokenizer.hpp"

namespace xdoc {

// coordinate bins in [0, bins); w and h always derived from l,r,t,b
struct Box {
  int32_t l = 0, r = 0, t = 0, b = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

// raw pixel box (l,t,r,b) scaled to floor(c/extent*(bins-1)), then clamped
Box normalize_box(int64_t l, int64_t t, int64_t r, int64_t b, int64_t page_w, int64_t page_h,
                  int32_t bins);

// pre-binned coordinates in reading order (l, r, t, b)
Box box_from_bins(int32_t l, int32_t r, int32_t t, int32_t b, int32_t bins);

struct AdaptiveSpec {
  bool enabled = true;
  int n_relu = 1;  // k: Linear (ReLU Linear)^k; k=0 is a single linear map
};

// the lightweight projection in front of the shared encoder; inner width
// equals the output width
class AdaptiveLayer {
 public:
  AdaptiveLayer() = default;

  static AdaptiveLayer disabled(int64_t hidden);
  static AdaptiveLayer create(ParameterStore& store, const std::string& prefix, ParamGroup group,
                              int64_t in_dim, int64_t hidden, int n_relu, Rng& init,
                              const std::string& tail_prefix = {},
                              ParamGroup tail_group = ParamGroup::Shared);
  // symmetry mode: own first linear, every later linear aliased from donor
  static AdaptiveLayer create_sharing_tail(ParameterStore& store, const std::string& prefix,
                                           ParamGroup group, int64_t in_dim, Rng& init,
                                           const AdaptiveLayer& donor);

  Value forward(Tape& tape, Value x) const;  // [n, in_dim] -> [n, hidden]

  bool enabled() const { return enabled_; }
  int n_relu() const { return static_cast<int>(weights_.size()) - 1; }
  int64_t in_dim() const { return in_dim_; }
  int64_t out_dim() const { return hidden_; }
  std::span<Parameter* const> weights() const { return weights_; }
  std::span<Parameter* const> biases() const { return biases_; }

 private:
  std::vector<Parameter*> weights_;
  std::vector<Parameter*> biases_;
  bool enabled_ = false;
  int64_t in_dim_ = 0;
  int64_t hidden_ = 0;
};

struct EmbeddingConfig {
  int64_t vocab_size = 0;
  int64_t hidden = 0;
  int64_t l_max = 0;
  int32_t bins = 1024;        // B
  bool share_xy_tables = false;
  int64_t max_depth = 50;     // D
  int64_t xpath_unit = 32;    // u
  int64_t n_tags = 30;        // reserved tags + UNK + PAD
  int64_t max_sub = 256;      // S
  int32_t pad_word_id = 0;    // word row zeroed at init
  int32_t pad_tag_id = 29;    // fills depths beyond a path's length
};

struct EmbeddingTables {
  Parameter* word = nullptr;   // [v, H]
  Parameter* pos1d = nullptr;  // [L_max, H]
  // six coordinate tables, each [B, H]; left/right and top/bottom may alias
  Parameter* left = nullptr;
  Parameter* right = nullptr;
  Parameter* top = nullptr;
  Parameter* bottom = nullptr;
  Parameter* width = nullptr;
  Parameter* height = nullptr;
  std::vector<Parameter*> tag;  // D tables [n_tags, u]
  std::vector<Parameter*> sub;  // D tables [S, u]
  EmbeddingConfig cfg;
};

// registers and initializes every table; weights ~ N(0, 0.02), PAD word row 0
EmbeddingTables make_embedding_tables(ParameterStore& store, const EmbeddingConfig& cfg,
                                      Rng& init);

// WordEmb(s_i) + 1DEmb(i), one row per position
Value embed_plain(Tape& tape, const EncodedSeq& seq, const EmbeddingTables& tables);

// LeftEmb(l)+RightEmb(r)+TopEmb(t)+BottomEmb(b)+WidthEmb(w)+HeightEmb(h)
Value two_d_embedding(Tape& tape, std::span<const Box> boxes, const EmbeddingTables& tables);

// [ts_1; ...; ts_D] with ts_j = TagEmb_j(tag_j) + SubEmb_j(sub_j); depths past
// the path take the PAD tag and subscript 0
Value xpath_embedding(Tape& tape, std::span<const XPathSeq> paths, const EmbeddingTables& tables);

// embed_plain + DocAdaptive[2DEmb(box_i)]
Value embed_doc(Tape& tape, const EncodedSeq& seq, std::span<const Box> boxes,
                const EmbeddingTables& tables, const AdaptiveLayer& doc_adaptive);

// embed_plain + WebAdaptive[XPathEmb(xpath_i)]
Value embed_web(Tape& tape, const EncodedSeq& seq, std::span<const XPathSeq> paths,
                const EmbeddingTables& tables, const AdaptiveLayer& web_adaptive);

}  // namespace xdoc
