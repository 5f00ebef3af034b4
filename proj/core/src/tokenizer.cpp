#include "xdoc/tokenizer.hpp"

#include <cctype>
#include <fstream>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

std::string fold_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

Vocab Vocab::load(const std::string& path, TokenizerOptions opts) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocab file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens), std::move(opts));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, TokenizerOptions opts) {
  Vocab v;
  v.opts_ = std::move(opts);
  v.tokens_ = std::move(tokens);
  v.ids_.reserve(v.tokens_.size());
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    const std::string& tok = v.tokens_[i];
    if (tok.empty()) {
      throw FormatError("empty vocab token at line " + std::to_string(i + 1));
    }
    if (!v.ids_.emplace(tok, static_cast<int32_t>(i)).second) {
      throw FormatError("duplicate vocab token \"" + tok + "\" at line " + std::to_string(i + 1));
    }
  }
  auto special = [&](const char* name) {
    auto it = v.ids_.find(name);
    if (it == v.ids_.end()) {
      throw SchemaError("vocab missing special token " + std::string(name));
    }
    return it->second;
  };
  v.pad_ = special(kPadToken);
  v.unk_ = special(kUnkToken);
  v.cls_ = special(kClsToken);
  v.sep_ = special(kSepToken);
  v.mask_ = special(kMaskToken);
  return v;
}

int32_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int32_t id) const {
  if (id < 0 || id >= size()) {
    throw IndexError("token id " + std::to_string(id) + " out of vocab of size " +
                     std::to_string(size()), id);
  }
  return tokens_[static_cast<size_t>(id)];
}

std::vector<std::string> tokenize(const std::string& text, const Vocab& vocab) {
  const TokenizerOptions& opts = vocab.options();
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string word = text.substr(i, j - i);
    i = j;
    if (opts.lowercase) word = fold_ascii(word);

    std::vector<std::string> pieces;
    size_t start = 0;
    bool failed = false;
    while (start < word.size()) {
      size_t end = word.size();
      std::string match;
      while (end > start) {
        std::string candidate = word.substr(start, end - start);
        if (start > 0) candidate = opts.continuation + candidate;
        if (vocab.id(candidate) >= 0) {
          match = std::move(candidate);
          break;
        }
        --end;
      }
      if (match.empty()) {
        failed = true;
        break;
      }
      pieces.push_back(std::move(match));
      start = end;
    }
    if (failed) {
      out.emplace_back(kUnkToken);
    } else {
      for (auto& p : pieces) out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<int32_t> token_ids(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) {
    const int32_t id = vocab.id(t);
    ids.push_back(id >= 0 ? id : vocab.unk_id());
  }
  return ids;
}

EncodedSeq encode_ids(const std::vector<int32_t>& ids, const Vocab& vocab, int64_t l_max) {
  if (l_max < 2) throw ConfigError("encode: L_max must be at least 2");
  EncodedSeq seq;
  const int64_t keep = std::min<int64_t>(static_cast<int64_t>(ids.size()), l_max - 2);
  seq.n_real = static_cast<int32_t>(keep + 2);
  seq.ids.assign(static_cast<size_t>(l_max), vocab.pad_id());
  seq.attention.assign(static_cast<size_t>(l_max), 0);
  seq.ids[0] = vocab.cls_id();
  for (int64_t k = 0; k < keep; ++k) seq.ids[static_cast<size_t>(1 + k)] = ids[static_cast<size_t>(k)];
  seq.ids[static_cast<size_t>(keep + 1)] = vocab.sep_id();
  for (int64_t k = 0; k < seq.n_real; ++k) seq.attention[static_cast<size_t>(k)] = 1;
  return seq;
}

EncodedSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, int64_t l_max) {
  return encode_ids(token_ids(tokens, vocab), vocab, l_max);
}

}  // namespace xdoc
