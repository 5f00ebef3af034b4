#include <benchmark/benchmark.h>

#include "xdoc/corpus.hpp"
#include "xdoc/model.hpp"
#include "xdoc/pretrain.hpp"
#include "xdoc/tokenizer.hpp"

using namespace xdoc;

namespace {

const XDocModel& toy_model() {
  static auto model = make_model(ModelConfig::toy(), 1);
  return *model;
}

XDocModel& toy_model_mut() {
  static auto model = make_model(ModelConfig::toy(), 2);
  return *model;
}

ModelInput input_for(Format fmt) {
  Rng rng(17 + static_cast<uint64_t>(fmt));
  return random_model_input(toy_model().cfg, fmt, rng);
}

}  // namespace

static void BM_Tokenize(benchmark::State& state) {
  std::vector<std::string> words = synthetic_word_list();
  words.insert(words.begin(), {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"});
  Vocab vocab = Vocab::from_tokens(words);
  std::string text;
  for (int i = 0; i < 64; ++i) text += synthetic_word_list()[static_cast<size_t>(i % 64)] + " ";
  for (auto _ : state) {
    auto toks = tokenize(text, vocab);
    benchmark::DoNotOptimize(encode(toks, vocab, 128).n_real);
  }
}
BENCHMARK(BM_Tokenize);

static void BM_MaskCorruption(benchmark::State& state) {
  std::vector<std::string> words = synthetic_word_list();
  words.insert(words.begin(), {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"});
  Vocab vocab = Vocab::from_tokens(words);
  Rng data(3);
  std::vector<std::string> toks;
  for (int i = 0; i < 126; ++i)
    toks.push_back(synthetic_word_list()[data.below(64)]);
  EncodedSeq seq = encode(toks, vocab, 128);
  Rng mask(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_mlm_mask(seq, vocab, mask).ids.data());
  }
}
BENCHMARK(BM_MaskCorruption);

static void BM_EmbedFormat(benchmark::State& state) {
  const Format fmt = static_cast<Format>(state.range(0));
  const XDocModel& m = toy_model();
  ModelInput in = input_for(fmt);
  for (auto _ : state) {
    Tape tape;
    Value e = embed_input(tape, m, in);
    benchmark::DoNotOptimize(e.tensor().at(0, 0));
  }
  state.SetLabel(format_name(fmt));
}
BENCHMARK(BM_EmbedFormat)->Arg(0)->Arg(1)->Arg(2);

// the branch projection alone, the piece the timing split isolates
static void BM_AdaptiveProjection(benchmark::State& state) {
  const Format fmt = static_cast<Format>(state.range(0));
  const XDocModel& m = toy_model();
  ModelInput in = input_for(fmt);
  for (auto _ : state) {
    Tape tape;
    Value prior = (fmt == Format::Doc) ? two_d_embedding(tape, in.boxes, m.tables)
                                       : xpath_embedding(tape, in.xpaths, m.tables);
    Value projected = (fmt == Format::Doc) ? m.doc_adaptive.forward(tape, prior)
                                           : m.web_adaptive.forward(tape, prior);
    benchmark::DoNotOptimize(projected.tensor().at(0, 0));
  }
  state.SetLabel(format_name(fmt));
}
BENCHMARK(BM_AdaptiveProjection)->Arg(1)->Arg(2);

static void BM_EncoderForward(benchmark::State& state) {
  const XDocModel& m = toy_model();
  ModelInput in = input_for(Format::Doc);
  for (auto _ : state) {
    Tape tape;
    Value h = model_forward(tape, m, in);
    benchmark::DoNotOptimize(h.tensor().at(0, 0));
  }
}
BENCHMARK(BM_EncoderForward);

static void BM_LossBackward(benchmark::State& state) {
  XDocModel& m = toy_model_mut();
  ModelInput in = input_for(Format::Web);
  std::vector<int32_t> labels(in.seq.ids.size(), -1);
  std::vector<uint8_t> active(in.seq.ids.size(), 0);
  for (size_t i = 1; i < 12; i += 2) {
    labels[i] = 6;
    active[i] = 1;
  }
  for (auto _ : state) {
    Tape tape;
    Value loss = model_mlm_loss(tape, m, in, labels, active);
    tape.backward(loss);
    benchmark::DoNotOptimize(m.params.items()[0]->grad[0]);
    m.params.zero_grads();
  }
}
BENCHMARK(BM_LossBackward);

static void BM_AdamwStep(benchmark::State& state) {
  XDocModel& m = toy_model_mut();
  Rng g(9);
  OptimizerState opt;
  for (auto _ : state) {
    state.PauseTiming();
    for (const auto& p : m.params.items())
      for (int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] = g.normal() * 1e-3;
    state.ResumeTiming();
    adamw_step(m.params, opt, 1e-4);
  }
}
BENCHMARK(BM_AdamwStep);

BENCHMARK_MAIN();
