#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace xdoc {

struct DomNode {
  enum class Kind { Element, Text };
  Kind kind = Kind::Element;
  std::string tag;   // element name, lowercase
  std::string text;  // text fragment (Kind::Text)
  std::vector<DomNode> children;

  static DomNode element(std::string tag) {
    DomNode n;
    n.tag = std::move(tag);
    return n;
  }
  static DomNode text_node(std::string text) {
    DomNode n;
    n.kind = Kind::Text;
    n.text = std::move(text);
    return n;
  }
};

// reserved tag names plus [UNK] (any other tag) and [PAD] (unused depth slots)
class TagVocab {
 public:
  static const std::vector<std::string>& default_reserved();
  static TagVocab make_default();
  explicit TagVocab(std::vector<std::string> reserved);

  int32_t size() const { return static_cast<int32_t>(names_.size()); }
  int32_t id(const std::string& tag) const;  // unk_id() when not reserved
  bool is_reserved(const std::string& tag) const { return by_name_.count(tag) > 0; }
  int32_t unk_id() const { return size() - 2; }
  int32_t pad_id() const { return size() - 1; }
  const std::string& name(int32_t id) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> by_name_;
};

// tag/subscript id pairs for one node, root first, length <= max depth
struct XPathSeq {
  std::vector<int32_t> tags;
  std::vector<int32_t> subs;

  int64_t depth() const { return static_cast<int64_t>(tags.size()); }
  bool operator==(const XPathSeq&) const = default;
};

enum class DepthPolicy {
  TruncateKeepLeaf,  // drop pairs nearest the root, keep the leafmost D
  Strict,            // raise DepthOverflowError
};

struct TextNodeRecord {
  std::string text;
  std::vector<std::string> tags;
  std::vector<int32_t> subs;
};

// strict subset parser: nested lowercase tags, void elements self-terminate,
// script/style bodies and comments are skipped, attributes are discarded
DomNode parse_html(const std::string& source);

// subscript per element child: 1..k in document order when the tag occurs
// k >= 2 times among the siblings, 0 when unique
std::vector<int32_t> assign_subscripts(const DomNode& parent);

// one record per nonempty text fragment in document order; tags outside the
// reserved set are dropped from the chain before the depth policy applies
std::vector<TextNodeRecord> extract_text_nodes(const DomNode& root, const TagVocab& reserved,
                                               int64_t max_depth,
                                               DepthPolicy policy = DepthPolicy::TruncateKeepLeaf);

// map a tag/sub chain to table ids; unknown tags become the UNK id and
// subscripts clamp to max_sub - 1
XPathSeq make_xpath_seq(const std::vector<std::string>& tags, const std::vector<int32_t>& subs,
                        const TagVocab& vocab, int64_t max_depth, int32_t max_sub,
                        DepthPolicy policy = DepthPolicy::TruncateKeepLeaf);

// "/html/body/div/span[2]" form; subscript 0 renders without brackets
std::string xpath_to_string(const std::vector<std::string>& tags, const std::vector<int32_t>& subs);
std::pair<std::vector<std::string>, std::vector<int32_t>> xpath_from_string(const std::string& s);

// walk the chain from the root; returns nullptr when no unique node matches
const DomNode* select(const DomNode& root, const std::vector<std::string>& tags,
                      const std::vector<int32_t>& subs);

}  // namespace xdoc
