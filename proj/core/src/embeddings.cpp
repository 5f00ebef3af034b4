#include "xdoc/embeddings.hpp"

#include <algorithm>
#include <cmath>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

Tensor normal_init(std::vector<int64_t> shape, Rng& rng, double std = 0.02) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * std;
  return t;
}

}  // namespace

Box normalize_box(int64_t l, int64_t t, int64_t r, int64_t b, int64_t page_w, int64_t page_h,
                  int32_t bins) {
  if (bins < 2) throw ConfigError("normalize_box: need at least 2 bins");
  if (page_w <= 0 || page_h <= 0) {
    throw GeometryError("normalize_box: page dimensions must be positive, got " +
                        std::to_string(page_w) + "x" + std::to_string(page_h));
  }
  if (l > r || t > b) {
    throw GeometryError("normalize_box: inverted box (l,t,r,b)=(" + std::to_string(l) + "," +
                        std::to_string(t) + "," + std::to_string(r) + "," + std::to_string(b) +
                        ")");
  }
  if (l < 0 || t < 0 || r > page_w || b > page_h) {
    throw GeometryError("normalize_box: box (l,t,r,b)=(" + std::to_string(l) + "," +
                        std::to_string(t) + "," + std::to_string(r) + "," + std::to_string(b) +
                        ") outside page " + std::to_string(page_w) + "x" +
                        std::to_string(page_h));
  }
  auto scale = [bins](int64_t c, int64_t extent) {
    const double x = std::floor(static_cast<double>(c) / static_cast<double>(extent) *
                                static_cast<double>(bins - 1));
    return static_cast<int32_t>(std::clamp<double>(x, 0.0, static_cast<double>(bins - 1)));
  };
  Box box;
  box.l = scale(l, page_w);
  box.r = scale(r, page_w);
  box.t = scale(t, page_h);
  box.b = scale(b, page_h);
  box.w = box.r - box.l;
  box.h = box.b - box.t;
  return box;
}

Box box_from_bins(int32_t l, int32_t r, int32_t t, int32_t b, int32_t bins) {
  if (l > r || t > b) {
    throw GeometryError("box_from_bins: inverted box (l,r,t,b)=(" + std::to_string(l) + "," +
                        std::to_string(r) + "," + std::to_string(t) + "," + std::to_string(b) +
                        ")");
  }
  if (l < 0 || t < 0 || r >= bins || b >= bins) {
    throw GeometryError("box_from_bins: bins out of [0," + std::to_string(bins) + ")");
  }
  Box box;
  box.l = l;
  box.r = r;
  box.t = t;
  box.b = b;
  box.w = r - l;
  box.h = b - t;
  return box;
}

AdaptiveLayer AdaptiveLayer::disabled(int64_t hidden) {
  AdaptiveLayer a;
  a.enabled_ = false;
  a.hidden_ = hidden;
  a.in_dim_ = hidden;
  return a;
}

AdaptiveLayer AdaptiveLayer::create(ParameterStore& store, const std::string& prefix,
                                    ParamGroup group, int64_t in_dim, int64_t hidden, int n_relu,
                                    Rng& init, const std::string& tail_prefix,
                                    ParamGroup tail_group) {
  if (n_relu < 0) throw ConfigError("adaptive layer: n_relu must be >= 0");
  if (in_dim < 1 || hidden < 1) throw ConfigError("adaptive layer: bad dimensions");
  AdaptiveLayer a;
  a.enabled_ = true;
  a.in_dim_ = in_dim;
  a.hidden_ = hidden;
  const std::string tp = tail_prefix.empty() ? prefix : tail_prefix;
  const ParamGroup tg = tail_prefix.empty() ? group : tail_group;
  for (int i = 0; i <= n_relu; ++i) {
    const std::string pfx = i == 0 ? prefix : tp;
    const ParamGroup grp = i == 0 ? group : tg;
    const int64_t in = i == 0 ? in_dim : hidden;
    a.weights_.push_back(
        store.add(pfx + ".w" + std::to_string(i), normal_init({in, hidden}, init), grp));
    a.biases_.push_back(
        store.add(pfx + ".b" + std::to_string(i), Tensor({hidden}), grp, /*no_decay=*/true));
  }
  return a;
}

AdaptiveLayer AdaptiveLayer::create_sharing_tail(ParameterStore& store, const std::string& prefix,
                                                 ParamGroup group, int64_t in_dim, Rng& init,
                                                 const AdaptiveLayer& donor) {
  if (!donor.enabled_) throw ConfigError("adaptive layer: cannot share the tail of a disabled layer");
  AdaptiveLayer a;
  a.enabled_ = true;
  a.in_dim_ = in_dim;
  a.hidden_ = donor.hidden_;
  a.weights_.push_back(
      store.add(prefix + ".w0", normal_init({in_dim, donor.hidden_}, init), group));
  a.biases_.push_back(store.add(prefix + ".b0", Tensor({donor.hidden_}), group, true));
  for (size_t i = 1; i < donor.weights_.size(); ++i) {
    a.weights_.push_back(donor.weights_[i]);
    a.biases_.push_back(donor.biases_[i]);
  }
  return a;
}

Value AdaptiveLayer::forward(Tape& tape, Value x) const {
  const Tensor& tx = x.tensor();
  if (tx.rank() != 2) throw RankError("adaptive layer: expected rank-2 input, got " + tx.shape_str());
  if (!enabled_) {
    if (tx.dim(1) != hidden_) {
      throw ConfigError("adaptive layer disabled but input width " + std::to_string(tx.dim(1)) +
                        " differs from hidden " + std::to_string(hidden_));
    }
    return x;
  }
  if (tx.dim(1) != in_dim_) {
    throw ShapeError("adaptive layer: input width " + std::to_string(tx.dim(1)) + ", expected " +
                     std::to_string(in_dim_));
  }
  Value h = tape.add_bias(tape.matmul(x, tape.leaf(*weights_[0])), tape.leaf(*biases_[0]));
  for (size_t i = 1; i < weights_.size(); ++i) {
    h = tape.add_bias(tape.matmul(tape.relu(h), tape.leaf(*weights_[i])), tape.leaf(*biases_[i]));
  }
  return h;
}

EmbeddingTables make_embedding_tables(ParameterStore& store, const EmbeddingConfig& cfg,
                                      Rng& init) {
  if (cfg.vocab_size < 1 || cfg.hidden < 1 || cfg.l_max < 2) {
    throw ConfigError("embedding tables: vocab_size, hidden and l_max must be set");
  }
  if (cfg.bins < 2 || cfg.max_depth < 1 || cfg.xpath_unit < 1 || cfg.n_tags < 2 ||
      cfg.max_sub < 1) {
    throw ConfigError("embedding tables: bad branch dimensions");
  }
  if (cfg.pad_tag_id < 0 || cfg.pad_tag_id >= cfg.n_tags) {
    throw ConfigError("embedding tables: pad tag id out of range");
  }
  EmbeddingTables t;
  t.cfg = cfg;

  Tensor word = normal_init({cfg.vocab_size, cfg.hidden}, init);
  if (cfg.pad_word_id >= 0 && cfg.pad_word_id < cfg.vocab_size) {
    for (int64_t j = 0; j < cfg.hidden; ++j) word.at(cfg.pad_word_id, j) = 0.0;
  }
  t.word = store.add("shared.word_emb", std::move(word), ParamGroup::Shared);
  t.pos1d = store.add("shared.pos1d_emb", normal_init({cfg.l_max, cfg.hidden}, init),
                      ParamGroup::Shared);

  auto table = [&](const std::string& name) {
    return store.add(name, normal_init({cfg.bins, cfg.hidden}, init), ParamGroup::Doc);
  };
  if (cfg.share_xy_tables) {
    Parameter* x = table("doc.x_emb");
    Parameter* y = table("doc.y_emb");
    t.left = x;
    t.right = x;
    t.top = y;
    t.bottom = y;
  } else {
    t.left = table("doc.left_emb");
    t.right = table("doc.right_emb");
    t.top = table("doc.top_emb");
    t.bottom = table("doc.bottom_emb");
  }
  t.width = table("doc.width_emb");
  t.height = table("doc.height_emb");

  t.tag.reserve(static_cast<size_t>(cfg.max_depth));
  t.sub.reserve(static_cast<size_t>(cfg.max_depth));
  for (int64_t j = 0; j < cfg.max_depth; ++j) {
    t.tag.push_back(store.add("web.tag_emb." + std::to_string(j),
                              normal_init({cfg.n_tags, cfg.xpath_unit}, init), ParamGroup::Web));
    t.sub.push_back(store.add("web.sub_emb." + std::to_string(j),
                              normal_init({cfg.max_sub, cfg.xpath_unit}, init), ParamGroup::Web));
  }
  return t;
}

Value embed_plain(Tape& tape, const EncodedSeq& seq, const EmbeddingTables& tables) {
  const int64_t l = seq.l_max();
  if (l != tables.cfg.l_max) {
    throw ArityError("embed: sequence length " + std::to_string(l) + " vs configured L_max " +
                     std::to_string(tables.cfg.l_max));
  }
  std::vector<int32_t> positions(static_cast<size_t>(l));
  for (int64_t i = 0; i < l; ++i) positions[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  Value words = tape.gather_rows(tape.leaf(*tables.word), seq.ids);
  Value pos = tape.gather_rows(tape.leaf(*tables.pos1d), positions);
  return tape.add(words, pos);
}

Value two_d_embedding(Tape& tape, std::span<const Box> boxes, const EmbeddingTables& tables) {
  const size_t n = boxes.size();
  std::vector<int32_t> l(n), r(n), t(n), b(n), w(n), h(n);
  for (size_t i = 0; i < n; ++i) {
    l[i] = boxes[i].l;
    r[i] = boxes[i].r;
    t[i] = boxes[i].t;
    b[i] = boxes[i].b;
    w[i] = boxes[i].w;
    h[i] = boxes[i].h;
  }
  Value sum = tape.gather_rows(tape.leaf(*tables.left), l);
  sum = tape.add(sum, tape.gather_rows(tape.leaf(*tables.right), r));
  sum = tape.add(sum, tape.gather_rows(tape.leaf(*tables.top), t));
  sum = tape.add(sum, tape.gather_rows(tape.leaf(*tables.bottom), b));
  sum = tape.add(sum, tape.gather_rows(tape.leaf(*tables.width), w));
  sum = tape.add(sum, tape.gather_rows(tape.leaf(*tables.height), h));
  return sum;
}

Value xpath_embedding(Tape& tape, std::span<const XPathSeq> paths, const EmbeddingTables& tables) {
  const EmbeddingConfig& cfg = tables.cfg;
  for (const XPathSeq& p : paths) {
    if (p.depth() > cfg.max_depth) {
      throw DepthOverflowError("xpath_embedding: path depth " + std::to_string(p.depth()) +
                                   " exceeds D=" + std::to_string(cfg.max_depth),
                               "");
    }
    if (p.tags.size() != p.subs.size()) {
      throw ArityError("xpath_embedding: tags/subs length mismatch");
    }
  }
  const size_t n = paths.size();
  std::vector<Value> parts;
  parts.reserve(static_cast<size_t>(cfg.max_depth));
  std::vector<int32_t> tag_ids(n), sub_ids(n);
  for (int64_t j = 0; j < cfg.max_depth; ++j) {
    for (size_t i = 0; i < n; ++i) {
      if (j < paths[i].depth()) {
        tag_ids[i] = paths[i].tags[static_cast<size_t>(j)];
        sub_ids[i] = paths[i].subs[static_cast<size_t>(j)];
      } else {
        tag_ids[i] = cfg.pad_tag_id;
        sub_ids[i] = 0;
      }
    }
    Value ts = tape.add(tape.gather_rows(tape.leaf(*tables.tag[static_cast<size_t>(j)]), tag_ids),
                        tape.gather_rows(tape.leaf(*tables.sub[static_cast<size_t>(j)]), sub_ids));
    parts.push_back(ts);
  }
  return tape.concat_cols(parts);
}

Value embed_doc(Tape& tape, const EncodedSeq& seq, std::span<const Box> boxes,
                const EmbeddingTables& tables, const AdaptiveLayer& doc_adaptive) {
  if (static_cast<int64_t>(boxes.size()) != seq.l_max()) {
    throw ArityError("embed_doc: " + std::to_string(boxes.size()) + " boxes for " +
                     std::to_string(seq.l_max()) + " positions");
  }
  Value base = embed_plain(tape, seq, tables);
  Value twod = two_d_embedding(tape, boxes, tables);
  return tape.add(base, doc_adaptive.forward(tape, twod));
}

Value embed_web(Tape& tape, const EncodedSeq& seq, std::span<const XPathSeq> paths,
                const EmbeddingTables& tables, const AdaptiveLayer& web_adaptive) {
  if (static_cast<int64_t>(paths.size()) != seq.l_max()) {
    throw ArityError("embed_web: " + std::to_string(paths.size()) + " xpaths for " +
                     std::to_string(seq.l_max()) + " positions");
  }
  Value base = embed_plain(tape, seq, tables);
  Value xp = xpath_embedding(tape, paths, tables);
  return tape.add(base, web_adaptive.forward(tape, xp));
}

}  // namespace xdoc
