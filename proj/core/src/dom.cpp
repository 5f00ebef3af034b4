#include "xdoc/dom.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

bool is_void_tag(const std::string& tag) {
  return tag == "br" || tag == "img" || tag == "hr" || tag == "input" || tag == "meta" ||
         tag == "link";
}

bool is_raw_text_tag(const std::string& tag) { return tag == "script" || tag == "style"; }

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

class Parser {
 public:
  explicit Parser(const std::string& src) : src_(src) {}

  DomNode parse_document() {
    skip_intertag_junk();
    if (eof() || peek() != '<') {
      throw ParseError("expected root element at offset " + std::to_string(pos_), pos_);
    }
    DomNode root = parse_element();
    if (root.tag != "html") {
      throw ParseError("root element must be <html>, got <" + root.tag + ">", 0);
    }
    skip_intertag_junk();
    if (!eof()) {
      throw ParseError("trailing content after </html> at offset " + std::to_string(pos_), pos_);
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }
  bool starts_with(const char* s) const { return src_.compare(pos_, std::strlen(s), s) == 0; }

  void skip_comment() {
    const size_t at = pos_;
    const size_t end = src_.find("-->", pos_ + 4);
    if (end == std::string::npos) {
      throw ParseError("unterminated comment starting at offset " + std::to_string(at), at);
    }
    pos_ = end + 3;
  }

  void skip_declaration() {
    const size_t at = pos_;
    const size_t end = src_.find('>', pos_);
    if (end == std::string::npos) {
      throw ParseError("unterminated declaration starting at offset " + std::to_string(at), at);
    }
    pos_ = end + 1;
  }

  void skip_intertag_junk() {
    for (;;) {
      while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
      if (!eof() && starts_with("<!--")) {
        skip_comment();
      } else if (!eof() && starts_with("<!")) {
        skip_declaration();
      } else {
        return;
      }
    }
  }

  std::string read_tag_name() {
    const size_t at = pos_;
    std::string name;
    while (!eof()) {
      const char c = peek();
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
        name.push_back(c);
      } else if (c >= 'A' && c <= 'Z') {
        name.push_back(static_cast<char>(c - 'A' + 'a'));
      } else {
        break;
      }
      ++pos_;
    }
    if (name.empty()) {
      throw ParseError("expected tag name at offset " + std::to_string(at), at);
    }
    return name;
  }

  // consume attributes up to '>' or '/>'; returns true when self-closed
  bool skip_attributes() {
    while (!eof()) {
      const char c = peek();
      if (c == '>') {
        ++pos_;
        return false;
      }
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
        pos_ += 2;
        return true;
      }
      if (c == '"' || c == '\'') {
        const size_t q = src_.find(c, pos_ + 1);
        if (q == std::string::npos) {
          throw ParseError("unterminated attribute value at offset " + std::to_string(pos_), pos_);
        }
        pos_ = q + 1;
      } else {
        ++pos_;
      }
    }
    throw ParseError("unexpected end of input inside a tag", src_.size());
  }

  void consume_raw_text(DomNode& node) {
    const std::string close = "</" + node.tag;
    const size_t end = src_.find(close, pos_);
    if (end == std::string::npos) {
      throw ParseError("unexpected end of input inside <" + node.tag + ">", src_.size());
    }
    pos_ = end + close.size();
    while (!eof() && peek() != '>') ++pos_;
    if (eof()) throw ParseError("unexpected end of input inside </" + node.tag + ">", src_.size());
    ++pos_;  // '>'
  }

  DomNode parse_element() {
    ++pos_;  // '<'
    DomNode node = DomNode::element(read_tag_name());
    const bool self_closed = skip_attributes();
    if (self_closed || is_void_tag(node.tag)) return node;
    if (is_raw_text_tag(node.tag)) {
      consume_raw_text(node);
      return node;
    }
    for (;;) {
      if (eof()) {
        throw ParseError("unexpected end of input, unclosed <" + node.tag + ">", src_.size());
      }
      if (starts_with("<!--")) {
        skip_comment();
        continue;
      }
      if (starts_with("</")) {
        const size_t at = pos_;
        pos_ += 2;
        const std::string name = read_tag_name();
        if (name != node.tag) {
          throw ParseError("mismatched close tag </" + name + "> at offset " +
                               std::to_string(at) + ", expected </" + node.tag + ">",
                           at);
        }
        while (!eof() && peek() != '>') ++pos_;
        if (eof()) throw ParseError("unexpected end of input in close tag", src_.size());
        ++pos_;
        return node;
      }
      if (peek() == '<') {
        node.children.push_back(parse_element());
        continue;
      }
      const size_t next = src_.find('<', pos_);
      const size_t end = next == std::string::npos ? src_.size() : next;
      node.children.push_back(DomNode::text_node(src_.substr(pos_, end - pos_)));
      pos_ = end;
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
};

}  // namespace

const std::vector<std::string>& TagVocab::default_reserved() {
  static const std::vector<std::string> tags = {
      "html", "body", "div",     "span",   "li",     "ul",  "ol",     "a",
      "p",    "table", "tr",     "td",     "th",     "h1",  "h2",     "h3",
      "h4",   "h5",   "h6",      "section", "header", "footer", "nav", "button",
      "img",  "form", "input",   "label"};
  return tags;
}

TagVocab TagVocab::make_default() { return TagVocab(default_reserved()); }

TagVocab::TagVocab(std::vector<std::string> reserved) {
  names_ = std::move(reserved);
  for (size_t i = 0; i < names_.size(); ++i) {
    if (!by_name_.emplace(names_[i], static_cast<int32_t>(i)).second) {
      throw ConfigError("duplicate reserved tag: " + names_[i]);
    }
  }
  names_.push_back("[UNK]");
  names_.push_back("[PAD]");
}

int32_t TagVocab::id(const std::string& tag) const {
  auto it = by_name_.find(tag);
  return it == by_name_.end() ? unk_id() : it->second;
}

const std::string& TagVocab::name(int32_t id) const {
  if (id < 0 || id >= size()) {
    throw IndexError("tag id " + std::to_string(id) + " out of range " + std::to_string(size()),
                     id);
  }
  return names_[static_cast<size_t>(id)];
}

DomNode parse_html(const std::string& source) { return Parser(source).parse_document(); }

std::vector<int32_t> assign_subscripts(const DomNode& parent) {
  std::unordered_map<std::string, int32_t> totals;
  for (const DomNode& c : parent.children) {
    if (c.kind == DomNode::Kind::Element) ++totals[c.tag];
  }
  std::unordered_map<std::string, int32_t> seen;
  std::vector<int32_t> subs;
  for (const DomNode& c : parent.children) {
    if (c.kind != DomNode::Kind::Element) continue;
    if (totals[c.tag] >= 2) {
      subs.push_back(++seen[c.tag]);
    } else {
      subs.push_back(0);
    }
  }
  return subs;
}

namespace {

void apply_depth_policy(std::vector<std::string>& tags, std::vector<int32_t>& subs,
                        int64_t max_depth, DepthPolicy policy) {
  if (static_cast<int64_t>(tags.size()) <= max_depth) return;
  if (policy == DepthPolicy::Strict) {
    throw DepthOverflowError("xpath chain exceeds max depth " + std::to_string(max_depth) + ": " +
                                 xpath_to_string(tags, subs),
                             xpath_to_string(tags, subs));
  }
  const size_t drop = tags.size() - static_cast<size_t>(max_depth);
  tags.erase(tags.begin(), tags.begin() + static_cast<std::ptrdiff_t>(drop));
  subs.erase(subs.begin(), subs.begin() + static_cast<std::ptrdiff_t>(drop));
}

void walk(const DomNode& node, const TagVocab& reserved, int64_t max_depth, DepthPolicy policy,
          std::vector<std::string>& tags, std::vector<int32_t>& subs,
          std::vector<TextNodeRecord>& out) {
  const std::vector<int32_t> child_subs = assign_subscripts(node);
  size_t elem_idx = 0;
  for (const DomNode& c : node.children) {
    if (c.kind == DomNode::Kind::Text) {
      std::string t = trim(c.text);
      if (!t.empty()) {
        TextNodeRecord rec;
        rec.text = std::move(t);
        rec.tags = tags;
        rec.subs = subs;
        apply_depth_policy(rec.tags, rec.subs, max_depth, policy);
        out.push_back(std::move(rec));
      }
      continue;
    }
    const int32_t sub = child_subs[elem_idx++];
    const bool keep = reserved.is_reserved(c.tag);
    if (keep) {
      tags.push_back(c.tag);
      subs.push_back(sub);
    }
    walk(c, reserved, max_depth, policy, tags, subs, out);
    if (keep) {
      tags.pop_back();
      subs.pop_back();
    }
  }
}

}  // namespace

std::vector<TextNodeRecord> extract_text_nodes(const DomNode& root, const TagVocab& reserved,
                                               int64_t max_depth, DepthPolicy policy) {
  if (max_depth < 1) throw ConfigError("extract_text_nodes: max depth must be positive");
  std::vector<TextNodeRecord> out;
  std::vector<std::string> tags;
  std::vector<int32_t> subs;
  if (reserved.is_reserved(root.tag)) {
    tags.push_back(root.tag);
    subs.push_back(0);
  }
  walk(root, reserved, max_depth, policy, tags, subs, out);
  return out;
}

XPathSeq make_xpath_seq(const std::vector<std::string>& tags, const std::vector<int32_t>& subs,
                        const TagVocab& vocab, int64_t max_depth, int32_t max_sub,
                        DepthPolicy policy) {
  if (tags.size() != subs.size()) {
    throw ArityError("xpath: " + std::to_string(tags.size()) + " tags vs " +
                     std::to_string(subs.size()) + " subscripts");
  }
  if (max_sub < 1) throw ConfigError("xpath: max subscript bound must be positive");
  std::vector<std::string> t = tags;
  std::vector<int32_t> s = subs;
  apply_depth_policy(t, s, max_depth, policy);
  XPathSeq seq;
  seq.tags.reserve(t.size());
  seq.subs.reserve(s.size());
  for (size_t i = 0; i < t.size(); ++i) {
    if (s[i] < 0) {
      throw IndexError("xpath: negative subscript " + std::to_string(s[i]), s[i]);
    }
    seq.tags.push_back(vocab.id(t[i]));
    seq.subs.push_back(std::min(s[i], max_sub - 1));
  }
  return seq;
}

std::string xpath_to_string(const std::vector<std::string>& tags,
                            const std::vector<int32_t>& subs) {
  if (tags.size() != subs.size()) {
    throw ArityError("xpath: " + std::to_string(tags.size()) + " tags vs " +
                     std::to_string(subs.size()) + " subscripts");
  }
  std::string out;
  for (size_t i = 0; i < tags.size(); ++i) {
    out += "/" + tags[i];
    if (subs[i] != 0) out += "[" + std::to_string(subs[i]) + "]";
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<int32_t>> xpath_from_string(const std::string& s) {
  std::vector<std::string> tags;
  std::vector<int32_t> subs;
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '/') throw ParseError("xpath string: expected '/' at offset " + std::to_string(i), i);
    ++i;
    std::string tag;
    while (i < s.size() && s[i] != '/' && s[i] != '[') tag.push_back(s[i++]);
    if (tag.empty()) throw ParseError("xpath string: empty tag at offset " + std::to_string(i), i);
    int32_t sub = 0;
    if (i < s.size() && s[i] == '[') {
      ++i;
      std::string digits;
      while (i < s.size() && s[i] != ']') digits.push_back(s[i++]);
      if (i == s.size() || digits.empty() ||
          digits.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError("xpath string: bad subscript near offset " + std::to_string(i), i);
      }
      sub = static_cast<int32_t>(std::stol(digits));
      ++i;  // ']'
    }
    tags.push_back(std::move(tag));
    subs.push_back(sub);
  }
  return {std::move(tags), std::move(subs)};
}

const DomNode* select(const DomNode& root, const std::vector<std::string>& tags,
                      const std::vector<int32_t>& subs) {
  if (tags.empty() || tags.size() != subs.size()) return nullptr;
  if (root.tag != tags[0] || subs[0] != 0) return nullptr;
  const DomNode* cur = &root;
  for (size_t depth = 1; depth < tags.size(); ++depth) {
    const std::string& want = tags[depth];
    const int32_t sub = subs[depth];
    const std::vector<int32_t> child_subs = assign_subscripts(*cur);
    const DomNode* next = nullptr;
    size_t elem_idx = 0;
    int matches = 0;
    for (const DomNode& c : cur->children) {
      if (c.kind != DomNode::Kind::Element) continue;
      const int32_t csub = child_subs[elem_idx++];
      if (c.tag == want && csub == sub) {
        next = &c;
        ++matches;
      }
    }
    if (matches != 1) return nullptr;
    cur = next;
  }
  return cur;
}

}  // namespace xdoc
