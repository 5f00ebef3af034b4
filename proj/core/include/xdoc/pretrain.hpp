#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xdoc/model.hpp"
#include "xdoc/rng.hpp"
#include "xdoc/tape.hpp"
#include "xdoc/tokenizer.hpp"

namespace xdoc {

struct MlmPolicy {
  double select_p = 0.15;    // per-token corruption probability
  double mask_frac = 0.80;   // selected -> [MASK]
  double random_frac = 0.10; // selected -> uniform random non-special id
  // remaining selected tokens keep their original id
};

// Corrupted ids plus recovery targets. labels[i] = original id where the
// position was selected, -1 elsewhere; active mirrors the selection.
struct MlmExample {
  std::vector<int32_t> ids;
  std::vector<int32_t> labels;
  std::vector<uint8_t> active;
};

// Independently corrupts each real non-special position. Draw order is one
// uniform per eligible position, then per selection one uniform for the
// bucket and, inside the random bucket, one integer draw.
MlmExample apply_mlm_mask(const EncodedSeq& seq, const Vocab& vocab, Rng& rng,
                          const MlmPolicy& policy = {});

// Linear 0 -> base_lr over the first warmup_frac of total_steps, then
// constant; with decay_after_warmup, linear base_lr -> 0 at total_steps.
double lr_at_step(int64_t step, int64_t total_steps, double base_lr, double warmup_frac = 0.05,
                  bool decay_after_warmup = false);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; skipped for no_decay parameters
};

struct MomentSlot {
  int64_t step = 0;  // updates applied to this parameter (bias correction)
  Tensor m, v;
};

struct OptimizerState {
  AdamHyper hyper;
  std::unordered_map<std::string, MomentSlot> slots;  // keyed by parameter name
};

// One AdamW update over exactly the given parameters; every grad is scanned
// for non-finite values first and a hit aborts the whole step untouched.
// Grads of updated parameters are zeroed afterwards.
void adamw_step(std::span<Parameter* const> params, OptimizerState& opt, double lr);
void adamw_step(ParameterStore& store, OptimizerState& opt, double lr);

struct SamplerConfig {
  std::array<int, 3> ratio{1, 1, 1};  // plain : doc : web
  int batch_size = 0;                 // divisible by ratio sum
  uint64_t seed = 0;
};

struct BatchItem {
  Format format;
  int64_t index;  // into that format's corpus
};

// Deterministic format-balanced batches: each batch is ratio-sum sized
// blocks of [plain x p, doc x d, web x w]; within a format, examples follow
// a per-epoch seeded shuffle and reshuffle on wraparound.
class Sampler {
 public:
  struct Cursor {
    int64_t epoch = 0;
    int64_t pos = 0;
    bool operator==(const Cursor&) const = default;
  };

  Sampler(const SamplerConfig& cfg, const std::array<int64_t, 3>& corpus_sizes);

  std::vector<BatchItem> next_batch();
  bool format_active(Format f) const { return cfg_.ratio[static_cast<size_t>(f)] > 0; }

  const SamplerConfig& config() const { return cfg_; }
  std::array<Cursor, 3> cursors() const { return cur_; }
  void restore(const std::array<Cursor, 3>& cursors);

 private:
  void reshuffle(size_t fmt);
  int64_t draw(size_t fmt);

  SamplerConfig cfg_;
  std::array<int64_t, 3> sizes_{};
  std::array<Cursor, 3> cur_{};
  std::array<std::vector<int64_t>, 3> perm_;
};

}  // namespace xdoc
