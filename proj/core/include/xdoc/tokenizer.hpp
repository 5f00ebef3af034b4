#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace xdoc {

struct TokenizerOptions {
  bool lowercase = true;  // ASCII-only case fold before matching
  std::string continuation = "##";
};

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";

class Vocab {
 public:
  // one token per line, line number = id
  static Vocab load(const std::string& path, TokenizerOptions opts = {});
  static Vocab from_tokens(std::vector<std::string> tokens, TokenizerOptions opts = {});

  int32_t id(const std::string& token) const;  // -1 when absent
  const std::string& token(int32_t id) const;
  int32_t size() const { return static_cast<int32_t>(tokens_.size()); }

  int32_t pad_id() const { return pad_; }
  int32_t unk_id() const { return unk_; }
  int32_t cls_id() const { return cls_; }
  int32_t sep_id() const { return sep_; }
  int32_t mask_id() const { return mask_; }
  bool is_special(int32_t id) const {
    return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
  }

  const TokenizerOptions& options() const { return opts_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> ids_;
  int32_t pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, mask_ = -1;
  TokenizerOptions opts_;
};

struct EncodedSeq {
  std::vector<int32_t> ids;        // length L_max
  std::vector<uint8_t> attention;  // 1 = real token, aligned with ids
  int32_t n_real = 0;

  int64_t l_max() const { return static_cast<int64_t>(ids.size()); }
};

// whitespace pre-split, optional case fold, then greedy longest-match per word;
// a word that cannot be covered becomes a single [UNK]
std::vector<std::string> tokenize(const std::string& text, const Vocab& vocab);

std::vector<int32_t> token_ids(const std::vector<std::string>& tokens, const Vocab& vocab);

// [CLS] + first (L_max-2) tokens + [SEP], padded with [PAD] to L_max
EncodedSeq encode(const std::vector<std::string>& tokens, const Vocab& vocab, int64_t l_max);
EncodedSeq encode_ids(const std::vector<int32_t>& ids, const Vocab& vocab, int64_t l_max);

}  // namespace xdoc
