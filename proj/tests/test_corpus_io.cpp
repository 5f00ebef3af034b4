#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xdoc/corpus.hpp"
#include "xdoc/error.hpp"

using namespace xdoc;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  std::string path;
  TempFile(const std::string& name, const std::string& content)
      : path("/tmp/xdoc_corpus_" + name) {
    std::ofstream f(path, std::ios::trunc);
    f << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/xdoc_corpusdir_" + name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  void file(const std::string& name, const std::string& content) const {
    std::ofstream f(path + "/" + name, std::ios::trunc);
    f << content;
  }
};

Vocab piece_vocab() {
  return Vocab::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "foo", "##bar", "baz",
                             "qux", "personal"});
}

EmbeddingConfig small_cfg(int64_t l_max = 12) {
  EmbeddingConfig cfg;
  cfg.vocab_size = 10;
  cfg.hidden = 8;
  cfg.l_max = l_max;
  cfg.bins = 16;
  cfg.max_depth = 4;
  cfg.xpath_unit = 2;
  cfg.max_sub = 8;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("plain corpus loading") {
  SUBCASE("json lines") {
    TempFile tf("plain.jsonl",
                "{\"text\":\"hello world\"}\n\n{\"text\":\"  padded  \"}\n{\"text\":\"third\"}\n");
    auto recs = load_plain(tf.path);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].text == "hello world");
    CHECK(recs[1].text == "padded");
    CHECK(recs[2].text == "third");
  }
  SUBCASE("blank-line blocks") {
    TempFile tf("plain.txt", "first doc\nsecond line\n\n\nsecond doc\n\nthird\n");
    auto recs = load_plain(tf.path);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].text == "first doc second line");
    CHECK(recs[1].text == "second doc");
    CHECK(recs[2].text == "third");
  }
  SUBCASE("malformed json names the line") {
    TempFile tf("bad.jsonl", "{\"text\":\"ok\"}\n{oops\n");
    try {
      load_plain(tf.path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("missing text key names the line") {
    TempFile tf("nokey.jsonl", "{\"text\":\"ok\"}\n{\"body\":\"nope\"}\n");
    try {
      load_plain(tf.path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("empty text rejected") {
    TempFile tf("empty.jsonl", "{\"text\":\"   \"}\n");
    CHECK_THROWS_AS(load_plain(tf.path), SchemaError);
  }
  SUBCASE("empty file yields an empty stream") {
    TempFile tf("none.txt", "");
    CHECK(load_plain(tf.path).empty());
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_plain("/tmp/xdoc_no_such_corpus"), ConfigError); }
}

TEST_CASE("doc corpus loading") {
  SUBCASE("single word record") {
    TempFile tf("doc.jsonl",
                "{\"page_w\":595,\"page_h\":842,\"words\":[{\"text\":\"PERSONAL\","
                "\"box\":[240,80,275,100]}]}\n");
    auto recs = load_doc(tf.path);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].page_w == 595);
    REQUIRE(recs[0].words.size() == 1);
    CHECK(recs[0].words[0].text == "PERSONAL");
    CHECK(recs[0].words[0].box == std::array<int64_t, 4>{240, 80, 275, 100});
  }
  SUBCASE("inverted box names the word") {
    TempFile tf("bad.jsonl",
                "{\"page_w\":500,\"page_h\":500,\"words\":[{\"text\":\"a\",\"box\":[1,1,2,2]},"
                "{\"text\":\"b\",\"box\":[300,100,200,150]}]}\n");
    try {
      load_doc(tf.path);
      FAIL("expected GeometryError");
    } catch (const GeometryError& e) {
      CHECK(std::string(e.what()).find("word 1") != std::string::npos);
    }
  }
  SUBCASE("out-of-page box rejected") {
    TempFile tf("oob.jsonl",
                "{\"page_w\":100,\"page_h\":100,\"words\":[{\"text\":\"a\",\"box\":[0,0,150,50]}]}\n");
    CHECK_THROWS_AS(load_doc(tf.path), GeometryError);
  }
  SUBCASE("empty words list accepted") {
    TempFile tf("nowords.jsonl", "{\"page_w\":10,\"page_h\":10,\"words\":[]}\n");
    auto recs = load_doc(tf.path);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].words.empty());
  }
  SUBCASE("schema violations name the position") {
    TempFile tf("badword.jsonl",
                "{\"page_w\":10,\"page_h\":10,\"words\":[{\"text\":\"a\",\"box\":[1,1,2]}]}\n");
    try {
      load_doc(tf.path);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(std::string(e.what()).find("word 0") != std::string::npos);
    }
  }
}

TEST_CASE("web corpus loading") {
  SUBCASE("html directory in filename order") {
    TempDir td("html");
    td.file("b.html", "<html><body><p>second page</p></body></html>");
    td.file("a.html", "<html><body><span>first</span><span>page</span></body></html>");
    td.file("notes.txt", "ignored");
    auto recs = load_web(td.path);
    REQUIRE(recs.size() == 2);
    REQUIRE(recs[0].nodes.size() == 2);
    CHECK(recs[0].nodes[0].text == "first");
    CHECK(recs[0].nodes[1].subs == std::vector<int32_t>{0, 0, 2});
    CHECK(recs[1].nodes[0].text == "second page");
  }
  SUBCASE("abort policy surfaces the file name") {
    TempDir td("badhtml");
    td.file("ok.html", "<html><body><p>fine</p></body></html>");
    td.file("zz.html", "<html><body><p>unclosed</body></html>");
    try {
      load_web(td.path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("zz.html") != std::string::npos);
    }
  }
  SUBCASE("skip policy logs and continues") {
    TempDir td("skiphtml");
    td.file("ok.html", "<html><body><p>fine</p></body></html>");
    td.file("zz.html", "<html><body><p>unclosed</body></html>");
    auto recs = load_web(td.path, WebErrorPolicy::Skip);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].nodes[0].text == "fine");
  }
  SUBCASE("pre-extracted jsonl passes through") {
    TempFile tf("web.jsonl",
                "{\"nodes\":[{\"text\":\"Tom\",\"tags\":[\"html\",\"body\",\"div\",\"span\"],"
                "\"subs\":[0,0,0,2]}]}\n");
    auto recs = load_web(tf.path);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].nodes.size() == 1);
    CHECK(recs[0].nodes[0].text == "Tom");
    CHECK(recs[0].nodes[0].tags == std::vector<std::string>{"html", "body", "div", "span"});
    CHECK(recs[0].nodes[0].subs == std::vector<int32_t>{0, 0, 0, 2});
  }
  SUBCASE("mismatched tags and subs rejected") {
    TempFile tf("badweb.jsonl",
                "{\"nodes\":[{\"text\":\"x\",\"tags\":[\"html\"],\"subs\":[0,0]}]}\n");
    CHECK_THROWS_AS(load_web(tf.path), SchemaError);
  }
}

TEST_CASE("model input conversion") {
  Vocab v = piece_vocab();
  EmbeddingConfig cfg = small_cfg();

  SUBCASE("plain record carries no priors") {
    ModelInput in = to_model_input(PlainRecord{"foo baz"}, v, cfg);
    CHECK(in.format == Format::Plain);
    CHECK(in.boxes.empty());
    CHECK(in.xpaths.empty());
    CHECK(in.seq.l_max() == 12);
    CHECK(in.seq.ids[0] == v.cls_id());
    CHECK(in.seq.ids[1] == 5);
    CHECK(in.seq.ids[2] == 7);
    CHECK(in.seq.ids[3] == v.sep_id());
    CHECK(in.seq.n_real == 4);
  }

  SUBCASE("multi-piece words share one box") {
    DocRecord rec;
    rec.page_w = 100;
    rec.page_h = 100;
    rec.words.push_back({"foobar", {10, 10, 50, 30}});
    rec.words.push_back({"baz", {60, 10, 90, 30}});
    ModelInput in = to_model_input(rec, v, cfg);
    CHECK(in.format == Format::Doc);
    REQUIRE(in.boxes.size() == 12);
    // [CLS] foo ##bar baz [SEP]
    CHECK(in.seq.ids[1] == 5);
    CHECK(in.seq.ids[2] == 6);
    CHECK(in.seq.ids[3] == 7);
    Box first = normalize_box(10, 10, 50, 30, 100, 100, cfg.bins);
    Box second = normalize_box(60, 10, 90, 30, 100, 100, cfg.bins);
    CHECK(in.boxes[1] == first);
    CHECK(in.boxes[2] == first);
    CHECK(in.boxes[3] == second);
    CHECK(in.boxes[0] == Box{});
    CHECK(in.boxes[4] == Box{});   // [SEP]
    CHECK(in.boxes[11] == Box{});  // padding
  }

  SUBCASE("truncation keeps ids and boxes in lockstep") {
    DocRecord rec;
    rec.page_w = 100;
    rec.page_h = 100;
    for (int i = 0; i < 8; ++i) {
      rec.words.push_back({i % 2 ? "foobar" : "baz", {10, 10, 50, 30}});
    }
    EmbeddingConfig short_cfg = small_cfg(6);  // room for 4 pieces
    ModelInput in = to_model_input(rec, v, short_cfg);
    CHECK(in.seq.n_real == 6);
    REQUIRE(in.boxes.size() == 6);
    // pieces: baz foo ##bar baz ... -> kept 4
    CHECK(in.seq.ids[1] == 7);
    CHECK(in.seq.ids[2] == 5);
    CHECK(in.seq.ids[3] == 6);
    CHECK(in.seq.ids[4] == 7);
    CHECK(in.seq.ids[5] == v.sep_id());
    for (int i = 1; i <= 4; ++i) CHECK(in.boxes[static_cast<size_t>(i)].w > 0);
    CHECK(in.boxes[5] == Box{});
  }

  SUBCASE("web nodes replicate their xpath over subwords") {
    TagVocab tags = TagVocab::make_default();
    WebRecord rec;
    rec.nodes.push_back({"foobar", {"html", "body", "span"}, {0, 0, 2}});
    rec.nodes.push_back({"qux", {"html", "body", "marquee"}, {0, 0, 0}});
    ModelInput in = to_model_input(rec, v, tags, cfg);
    CHECK(in.format == Format::Web);
    REQUIRE(in.xpaths.size() == 12);
    XPathSeq first = make_xpath_seq({"html", "body", "span"}, {0, 0, 2}, tags, cfg.max_depth,
                                    static_cast<int32_t>(cfg.max_sub));
    CHECK(in.xpaths[1] == first);
    CHECK(in.xpaths[2] == first);
    CHECK(in.xpaths[3].tags.back() == tags.unk_id());  // marquee is not reserved
    CHECK(in.xpaths[0] == XPathSeq{});
    CHECK(in.xpaths[4] == XPathSeq{});
  }
}

TEST_CASE("debug serialization round trips") {
  Vocab v = piece_vocab();
  EmbeddingConfig cfg = small_cfg();
  TagVocab tags = TagVocab::make_default();

  auto same = [](const ModelInput& a, const ModelInput& b) {
    CHECK(a.format == b.format);
    CHECK(a.seq.ids == b.seq.ids);
    CHECK(a.seq.attention == b.seq.attention);
    CHECK(a.seq.n_real == b.seq.n_real);
    CHECK(a.boxes == b.boxes);
    CHECK(a.xpaths == b.xpaths);
  };

  ModelInput p = to_model_input(PlainRecord{"foo baz qux"}, v, cfg);
  same(p, debug_deserialize(debug_serialize(p)));

  DocRecord dr;
  dr.page_w = 100;
  dr.page_h = 100;
  dr.words.push_back({"foobar", {10, 10, 50, 30}});
  ModelInput d = to_model_input(dr, v, cfg);
  same(d, debug_deserialize(debug_serialize(d)));

  WebRecord wr;
  wr.nodes.push_back({"personal qux", {"html", "body", "div"}, {0, 0, 3}});
  ModelInput w = to_model_input(wr, v, tags, cfg);
  same(w, debug_deserialize(debug_serialize(w)));

  CHECK_THROWS_AS(debug_deserialize("{not json"), FormatError);
}

TEST_CASE("synthetic corpus generator") {
  TempDir td("gen");
  GenConfig gc;
  gc.n_plain = 7;
  gc.n_doc = 5;
  gc.n_web = 4;
  gc.seed = 42;
  generate_corpus(td.path, gc);

  Vocab v = Vocab::load(td.path + "/vocab.txt");
  auto plain = load_plain(td.path + "/plain.jsonl");
  auto doc = load_doc(td.path + "/doc.jsonl");
  auto web = load_web(td.path + "/web.jsonl");
  auto web_html = load_web(td.path + "/web_html");
  CHECK(plain.size() == 7);
  CHECK(doc.size() == 5);
  CHECK(web.size() == 4);
  REQUIRE(web_html.size() == 4);

  SUBCASE("every generated word is a single known token") {
    for (const auto& r : plain) {
      for (const std::string& tok : tokenize(r.text, v)) {
        CHECK(v.id(tok) >= 5);  // no specials, no [UNK]
      }
    }
    for (const auto& r : doc) {
      for (const auto& w : r.words) CHECK(tokenize(w.text, v).size() == w.text.size() / 7 + 1);
    }
  }

  SUBCASE("pre-extracted jsonl matches reparsing the html files") {
    for (size_t i = 0; i < web.size(); ++i) {
      REQUIRE(web[i].nodes.size() == web_html[i].nodes.size());
      for (size_t n = 0; n < web[i].nodes.size(); ++n) {
        CHECK(web[i].nodes[n].text == web_html[i].nodes[n].text);
        CHECK(web[i].nodes[n].tags == web_html[i].nodes[n].tags);
        CHECK(web[i].nodes[n].subs == web_html[i].nodes[n].subs);
      }
    }
  }

  SUBCASE("sibling paragraphs get 1-based subscripts") {
    REQUIRE(web[0].nodes.size() == 4);  // 12 words in blocks of 3
    CHECK(web[0].nodes[0].tags == std::vector<std::string>{"html", "body", "div", "p"});
    CHECK(web[0].nodes[0].subs == std::vector<int32_t>{0, 0, 0, 1});
    CHECK(web[0].nodes[3].subs == std::vector<int32_t>{0, 0, 0, 4});
  }

  SUBCASE("generation is deterministic") {
    TempDir td2("gen2");
    generate_corpus(td2.path, gc);
    for (const char* f : {"/plain.jsonl", "/doc.jsonl", "/web.jsonl", "/vocab.txt"}) {
      CHECK(slurp(td.path + f) == slurp(td2.path + f));
    }
  }

  SUBCASE("records convert cleanly to model inputs") {
    EmbeddingConfig cfg;
    cfg.vocab_size = v.size();
    cfg.hidden = 8;
    cfg.l_max = 32;
    cfg.bins = 64;
    cfg.max_depth = 8;
    cfg.xpath_unit = 1;
    cfg.max_sub = 16;
    TagVocab tags = TagVocab::make_default();
    Corpus corpus;
    for (const auto& r : plain) corpus.plain.push_back(to_model_input(r, v, cfg));
    for (const auto& r : doc) corpus.doc.push_back(to_model_input(r, v, cfg));
    for (const auto& r : web) corpus.web.push_back(to_model_input(r, v, tags, cfg));
    CHECK(corpus.sizes() == std::array<int64_t, 3>{7, 5, 4});
    CHECK(corpus.of(Format::Doc)[0].boxes.size() == 32);
    CHECK(corpus.of(Format::Web)[0].xpaths.size() == 32);
    for (const ModelInput& in : corpus.doc) {
      CHECK(in.seq.n_real == 14);  // 12 single-piece words + CLS/SEP
    }
  }
}
