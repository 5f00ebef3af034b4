#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "xdoc/dom.hpp"
#include "xdoc/model.hpp"
#include "xdoc/tokenizer.hpp"

namespace xdoc {

struct PlainRecord {
  std::string text;  // nonempty after trimming
};

struct DocWord {
  std::string text;
  std::array<int64_t, 4> box{};  // pixels, (l, t, r, b)
};

struct DocRecord {
  int64_t page_w = 0, page_h = 0;
  std::vector<DocWord> words;
};

struct WebRecord {
  std::vector<TextNodeRecord> nodes;  // text with its tag/subscript chain
};

// JSON Lines of {"text": ...}, or raw text with one document per
// blank-line-separated block; mode is picked from the first record.
std::vector<PlainRecord> load_plain(const std::string& path);

// JSON Lines of {"page_w", "page_h", "words": [{"text", "box": [l,t,r,b]}]}.
// Boxes are validated against the page; errors name the word index.
std::vector<DocRecord> load_doc(const std::string& path);

enum class WebErrorPolicy { Abort, Skip };

// A directory of .html files (filename order) run through the DOM parser,
// or JSON Lines of pre-extracted {"nodes": [{"text", "tags", "subs"}]}.
std::vector<WebRecord> load_web(const std::string& path,
                                WebErrorPolicy policy = WebErrorPolicy::Abort);

// Tokenizes each word/node and replicates its normalized box or xpath onto
// every subword; specials carry the zero box / empty path. Truncation keeps
// ids and priors in lockstep.
ModelInput to_model_input(const PlainRecord& rec, const Vocab& vocab, const EmbeddingConfig& cfg);
ModelInput to_model_input(const DocRecord& rec, const Vocab& vocab, const EmbeddingConfig& cfg);
ModelInput to_model_input(const WebRecord& rec, const Vocab& vocab, const TagVocab& tags,
                          const EmbeddingConfig& cfg);

// Lossless JSON round trip, for debugging and golden files.
std::string debug_serialize(const ModelInput& in);
ModelInput debug_deserialize(const std::string& json);

// In-memory tri-format corpus, already converted.
struct Corpus {
  std::vector<ModelInput> plain, doc, web;
  const std::vector<ModelInput>& of(Format f) const;
  std::array<int64_t, 3> sizes() const;
};

// Deterministic synthetic corpus: each record cycles a small palette of
// words from the built-in list, so masked tokens are recoverable from the
// rest of the record.
struct GenConfig {
  int n_plain = 50;
  int n_doc = 50;
  int n_web = 50;
  int words_per_record = 12;
  uint64_t seed = 1;
  bool emit_html_dir = true;  // also write web pages as .html files
};

const std::vector<std::string>& synthetic_word_list();

// Writes plain.jsonl, doc.jsonl, web.jsonl (and web_html/ when enabled)
// under dir, plus vocab.txt covering every generated word.
void generate_corpus(const std::string& dir, const GenConfig& cfg);

// vocabulary-free random example with in-bounds ids and priors; the last two
// positions stay padded. Used by audits and benchmarks.
ModelInput random_model_input(const ModelConfig& cfg, Format fmt, Rng& rng);

// The vocabulary matching synthetic_word_list: specials first, then words.
void write_synthetic_vocab(const std::string& path);

}  // namespace xdoc
