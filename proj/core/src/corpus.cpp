#include "xdoc/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "xdoc/error.hpp"
#include "xdoc/rng.hpp"

namespace xdoc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string at_line(const std::string& path, size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

json parse_json_line(const std::string& path, size_t line_no, const std::string& line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw FormatError(at_line(path, line_no) + ": expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw FormatError(at_line(path, line_no) + ": " + e.what());
  }
}

void warn_empty(const std::string& path) {
  std::fprintf(stderr, "warning: corpus file %s holds no records\n", path.c_str());
}

}  // namespace

std::vector<PlainRecord> load_plain(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<PlainRecord> out;

  size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) {
    warn_empty(path);
    return out;
  }

  if (trim(lines[first]).front() == '{') {
    for (size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      json j = parse_json_line(path, i + 1, lines[i]);
      if (!j.contains("text") || !j["text"].is_string()) {
        throw SchemaError(at_line(path, i + 1) + ": missing string field \"text\"");
      }
      std::string text = trim(j["text"].get<std::string>());
      if (text.empty()) throw SchemaError(at_line(path, i + 1) + ": empty \"text\"");
      out.push_back({std::move(text)});
    }
  } else {
    std::string block;
    auto flush = [&] {
      std::string t = trim(block);
      if (!t.empty()) out.push_back({std::move(t)});
      block.clear();
    };
    for (const std::string& line : lines) {
      if (trim(line).empty()) {
        flush();
      } else {
        if (!block.empty()) block += ' ';
        block += line;
      }
    }
    flush();
  }
  if (out.empty()) warn_empty(path);
  return out;
}

std::vector<DocRecord> load_doc(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<DocRecord> out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    json j = parse_json_line(path, i + 1, lines[i]);
    if (!j.contains("page_w") || !j.contains("page_h") || !j.contains("words") ||
        !j["words"].is_array()) {
      throw SchemaError(at_line(path, i + 1) + ": need page_w, page_h and a words array");
    }
    DocRecord rec;
    rec.page_w = j["page_w"].get<int64_t>();
    rec.page_h = j["page_h"].get<int64_t>();
    size_t wi = 0;
    for (const json& w : j["words"]) {
      if (!w.contains("text") || !w["text"].is_string() || !w.contains("box") ||
          !w["box"].is_array() || w["box"].size() != 4) {
        throw SchemaError(at_line(path, i + 1) + " word " + std::to_string(wi) +
                          ": need text and a 4-entry box");
      }
      DocWord word;
      word.text = w["text"].get<std::string>();
      for (size_t k = 0; k < 4; ++k) word.box[k] = w["box"][k].get<int64_t>();
      try {
        normalize_box(word.box[0], word.box[1], word.box[2], word.box[3], rec.page_w, rec.page_h,
                      2);
      } catch (const GeometryError& e) {
        throw GeometryError(at_line(path, i + 1) + " word " + std::to_string(wi) + ": " +
                            e.what());
      }
      rec.words.push_back(std::move(word));
      ++wi;
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) warn_empty(path);
  return out;
}

namespace {

WebRecord web_record_from_html(const std::string& source) {
  static const TagVocab reserved = TagVocab::make_default();
  DomNode root = parse_html(source);
  WebRecord rec;
  // full chains here; depth policy applies when ids are built
  rec.nodes = extract_text_nodes(root, reserved, std::numeric_limits<int64_t>::max());
  return rec;
}

}  // namespace

std::vector<WebRecord> load_web(const std::string& path, WebErrorPolicy policy) {
  std::vector<WebRecord> out;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".html") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) warn_empty(path);
    for (const std::string& file : files) {
      std::ifstream f(file);
      std::stringstream ss;
      ss << f.rdbuf();
      try {
        out.push_back(web_record_from_html(ss.str()));
      } catch (const ParseError& e) {
        if (policy == WebErrorPolicy::Abort) {
          throw ParseError(file + ": " + e.what(), e.offset());
        }
        std::fprintf(stderr, "warning: skipping %s: %s\n", file.c_str(), e.what());
      }
    }
    return out;
  }

  const std::vector<std::string> lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    json j = parse_json_line(path, i + 1, lines[i]);
    if (!j.contains("nodes") || !j["nodes"].is_array()) {
      throw SchemaError(at_line(path, i + 1) + ": need a nodes array");
    }
    WebRecord rec;
    size_t ni = 0;
    for (const json& n : j["nodes"]) {
      if (!n.contains("text") || !n["text"].is_string() || !n.contains("tags") ||
          !n["tags"].is_array() || !n.contains("subs") || !n["subs"].is_array()) {
        throw SchemaError(at_line(path, i + 1) + " node " + std::to_string(ni) +
                          ": need text, tags and subs");
      }
      TextNodeRecord node;
      node.text = n["text"].get<std::string>();
      for (const json& t : n["tags"]) node.tags.push_back(t.get<std::string>());
      for (const json& s : n["subs"]) node.subs.push_back(s.get<int32_t>());
      if (node.tags.size() != node.subs.size()) {
        throw SchemaError(at_line(path, i + 1) + " node " + std::to_string(ni) +
                          ": tags and subs lengths differ");
      }
      rec.nodes.push_back(std::move(node));
      ++ni;
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) warn_empty(path);
  return out;
}

namespace {

// tokenizes unit texts and pairs every resulting subword with its unit's
// prior index; truncation then keeps ids and priors aligned for free
struct FlatPieces {
  std::vector<int32_t> ids;
  std::vector<size_t> owner;
};

template <typename Units>
FlatPieces flatten(const Units& units, const Vocab& vocab) {
  FlatPieces flat;
  for (size_t u = 0; u < units.size(); ++u) {
    for (int32_t id : token_ids(tokenize(units[u].text, vocab), vocab)) {
      flat.ids.push_back(id);
      flat.owner.push_back(u);
    }
  }
  return flat;
}

}  // namespace

ModelInput to_model_input(const PlainRecord& rec, const Vocab& vocab, const EmbeddingConfig& cfg) {
  ModelInput in;
  in.format = Format::Plain;
  in.seq = encode(tokenize(rec.text, vocab), vocab, cfg.l_max);
  return in;
}

ModelInput to_model_input(const DocRecord& rec, const Vocab& vocab, const EmbeddingConfig& cfg) {
  ModelInput in;
  in.format = Format::Doc;
  std::vector<Box> word_boxes;
  word_boxes.reserve(rec.words.size());
  for (const DocWord& w : rec.words) {
    word_boxes.push_back(
        normalize_box(w.box[0], w.box[1], w.box[2], w.box[3], rec.page_w, rec.page_h, cfg.bins));
  }
  FlatPieces flat = flatten(rec.words, vocab);
  in.seq = encode_ids(flat.ids, vocab, cfg.l_max);
  in.boxes.assign(static_cast<size_t>(cfg.l_max), Box{});
  const size_t kept = std::min(flat.ids.size(), static_cast<size_t>(cfg.l_max - 2));
  for (size_t i = 0; i < kept; ++i) in.boxes[i + 1] = word_boxes[flat.owner[i]];
  return in;
}

ModelInput to_model_input(const WebRecord& rec, const Vocab& vocab, const TagVocab& tags,
                          const EmbeddingConfig& cfg) {
  ModelInput in;
  in.format = Format::Web;
  std::vector<XPathSeq> node_paths;
  node_paths.reserve(rec.nodes.size());
  for (const TextNodeRecord& n : rec.nodes) {
    node_paths.push_back(make_xpath_seq(n.tags, n.subs, tags, cfg.max_depth,
                                        static_cast<int32_t>(cfg.max_sub)));
  }
  FlatPieces flat = flatten(rec.nodes, vocab);
  in.seq = encode_ids(flat.ids, vocab, cfg.l_max);
  in.xpaths.assign(static_cast<size_t>(cfg.l_max), XPathSeq{});
  const size_t kept = std::min(flat.ids.size(), static_cast<size_t>(cfg.l_max - 2));
  for (size_t i = 0; i < kept; ++i) in.xpaths[i + 1] = node_paths[flat.owner[i]];
  return in;
}

std::string debug_serialize(const ModelInput& in) {
  json j;
  j["format"] = format_name(in.format);
  j["ids"] = in.seq.ids;
  j["attention"] = std::vector<int>(in.seq.attention.begin(), in.seq.attention.end());
  j["n_real"] = in.seq.n_real;
  if (in.format == Format::Doc) {
    json boxes = json::array();
    for (const Box& b : in.boxes) boxes.push_back({b.l, b.r, b.t, b.b});
    j["boxes"] = std::move(boxes);
  }
  if (in.format == Format::Web) {
    json paths = json::array();
    for (const XPathSeq& p : in.xpaths) paths.push_back({{"tags", p.tags}, {"subs", p.subs}});
    j["xpaths"] = std::move(paths);
  }
  return j.dump();
}

ModelInput debug_deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model input: ") + e.what());
  }
  ModelInput in;
  in.format = format_by_name(j.at("format").get<std::string>());
  in.seq.ids = j.at("ids").get<std::vector<int32_t>>();
  for (int a : j.at("attention").get<std::vector<int>>()) {
    in.seq.attention.push_back(static_cast<uint8_t>(a));
  }
  in.seq.n_real = j.at("n_real").get<int32_t>();
  if (in.format == Format::Doc) {
    for (const json& b : j.at("boxes")) {
      Box box;
      box.l = b.at(0).get<int32_t>();
      box.r = b.at(1).get<int32_t>();
      box.t = b.at(2).get<int32_t>();
      box.b = b.at(3).get<int32_t>();
      box.w = box.r - box.l;
      box.h = box.b - box.t;
      in.boxes.push_back(box);
    }
  }
  if (in.format == Format::Web) {
    for (const json& p : j.at("xpaths")) {
      XPathSeq path;
      path.tags = p.at("tags").get<std::vector<int32_t>>();
      path.subs = p.at("subs").get<std::vector<int32_t>>();
      in.xpaths.push_back(std::move(path));
    }
  }
  return in;
}

const std::vector<ModelInput>& Corpus::of(Format f) const {
  switch (f) {
    case Format::Plain: return plain;
    case Format::Doc: return doc;
    case Format::Web: return web;
  }
  throw ConfigError("bad format");
}

std::array<int64_t, 3> Corpus::sizes() const {
  return {static_cast<int64_t>(plain.size()), static_cast<int64_t>(doc.size()),
          static_cast<int64_t>(web.size())};
}

const std::vector<std::string>& synthetic_word_list() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w;
    for (int i = 0; i < 64; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "word%02d", i);
      w.emplace_back(buf);
    }
    return w;
  }();
  return words;
}

namespace {

// each record cycles a small per-record palette, so a masked token is
// recoverable from the rest of its own record; convergence smoke tests
// depend on that redundancy
std::vector<std::string> synthetic_words(Rng& rng, int n_words) {
  const auto& words = synthetic_word_list();
  const size_t n_palette = 2 + static_cast<size_t>(rng.below(2));
  std::vector<size_t> palette;
  palette.reserve(n_palette);
  for (size_t i = 0; i < n_palette; ++i)
    palette.push_back(static_cast<size_t>(rng.below(words.size())));
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n_words));
  for (int i = 0; i < n_words; ++i)
    out.push_back(words[palette[static_cast<size_t>(i) % n_palette]]);
  return out;
}

std::string synthetic_sentence(Rng& rng, int n_words) {
  std::string s;
  for (const std::string& w : synthetic_words(rng, n_words)) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

std::string synthetic_html(Rng& rng, int n_words) {
  const std::vector<std::string> ws = synthetic_words(rng, n_words);
  std::string html = "<html><body><div>";
  for (size_t k = 0; k < ws.size(); k += 3) {
    html += "<p>";
    for (size_t j = k; j < std::min(ws.size(), k + 3); ++j) {
      if (j > k) html += ' ';
      html += ws[j];
    }
    html += "</p>";
  }
  html += "</div></body></html>";
  return html;
}

}  // namespace

ModelInput random_model_input(const ModelConfig& cfg, Format fmt, Rng& rng) {
  const int64_t l = cfg.emb.l_max;
  ModelInput in;
  in.format = fmt;
  in.seq.ids.assign(static_cast<size_t>(l), cfg.emb.pad_word_id);
  in.seq.attention.assign(static_cast<size_t>(l), 0);
  const int64_t n_real = l - 2;
  in.seq.n_real = static_cast<int32_t>(n_real);
  for (int64_t i = 0; i < n_real; ++i) {
    in.seq.ids[static_cast<size_t>(i)] =
        5 + static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.emb.vocab_size - 5)));
    in.seq.attention[static_cast<size_t>(i)] = 1;
  }
  if (fmt == Format::Doc) {
    in.boxes.assign(static_cast<size_t>(l), Box{});
    for (int64_t i = 1; i + 1 < n_real; ++i) {
      const int32_t bins = cfg.emb.bins;
      int32_t x0 = static_cast<int32_t>(rng.below(static_cast<uint64_t>(bins)));
      int32_t x1 = x0 + static_cast<int32_t>(rng.below(static_cast<uint64_t>(bins - x0)));
      int32_t y0 = static_cast<int32_t>(rng.below(static_cast<uint64_t>(bins)));
      int32_t y1 = y0 + static_cast<int32_t>(rng.below(static_cast<uint64_t>(bins - y0)));
      in.boxes[static_cast<size_t>(i)] = box_from_bins(x0, x1, y0, y1, bins);
    }
  } else if (fmt == Format::Web) {
    in.xpaths.assign(static_cast<size_t>(l), XPathSeq{});
    for (int64_t i = 1; i + 1 < n_real; ++i) {
      XPathSeq p;
      const int64_t depth =
          1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(cfg.emb.max_depth)));
      for (int64_t d = 0; d < depth; ++d) {
        p.tags.push_back(
            static_cast<int32_t>(rng.below(static_cast<uint64_t>(cfg.emb.n_tags - 1))));
        p.subs.push_back(static_cast<int32_t>(rng.below(3)));
      }
      in.xpaths[static_cast<size_t>(i)] = p;
    }
  }
  return in;
}

void write_synthetic_vocab(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write vocabulary: " + path);
  f << kPadToken << '\n' << kUnkToken << '\n' << kClsToken << '\n' << kSepToken << '\n'
    << kMaskToken << '\n';
  for (const std::string& w : synthetic_word_list()) f << w << '\n';
}

void generate_corpus(const std::string& dir, const GenConfig& cfg) {
  if (cfg.n_plain < 0 || cfg.n_doc < 0 || cfg.n_web < 0 || cfg.words_per_record <= 0) {
    throw ConfigError("corpus generator needs nonnegative counts and a positive record length");
  }
  fs::create_directories(dir);
  Rng rng(cfg.seed);

  {
    std::ofstream f(dir + "/plain.jsonl", std::ios::trunc);
    for (int i = 0; i < cfg.n_plain; ++i) {
      json j;
      j["text"] = synthetic_sentence(rng, cfg.words_per_record);
      f << j.dump() << '\n';
    }
  }
  {
    std::ofstream f(dir + "/doc.jsonl", std::ios::trunc);
    for (int i = 0; i < cfg.n_doc; ++i) {
      json j;
      j["page_w"] = 1000;
      j["page_h"] = 1000;
      json words = json::array();
      std::istringstream ss(synthetic_sentence(rng, cfg.words_per_record));
      std::string w;
      int k = 0;
      while (ss >> w) {
        const int64_t col = k % 4, row = (k / 4) % 10;
        json jw;
        jw["text"] = w;
        jw["box"] = {40 + col * 230, 50 + row * 90, 210 + col * 230, 110 + row * 90};
        words.push_back(std::move(jw));
        ++k;
      }
      j["words"] = std::move(words);
      f << j.dump() << '\n';
    }
  }
  {
    std::ofstream nodes_out(dir + "/web.jsonl", std::ios::trunc);
    if (cfg.emit_html_dir) fs::create_directories(dir + "/web_html");
    for (int i = 0; i < cfg.n_web; ++i) {
      const std::string html = synthetic_html(rng, cfg.words_per_record);
      if (cfg.emit_html_dir) {
        char name[32];
        std::snprintf(name, sizeof(name), "page%04d.html", i);
        std::ofstream hf(dir + "/web_html/" + name, std::ios::trunc);
        hf << html << '\n';
      }
      WebRecord rec = web_record_from_html(html);
      json j;
      json nodes = json::array();
      for (const TextNodeRecord& n : rec.nodes) {
        nodes.push_back({{"text", n.text}, {"tags", n.tags}, {"subs", n.subs}});
      }
      j["nodes"] = std::move(nodes);
      nodes_out << j.dump() << '\n';
    }
  }
  write_synthetic_vocab(dir + "/vocab.txt");
}

}  // namespace xdoc
