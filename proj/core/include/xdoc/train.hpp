#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "xdoc/checkpoint.hpp"
#include "xdoc/corpus.hpp"
#include "xdoc/model.hpp"
#include "xdoc/pretrain.hpp"

namespace xdoc {

struct TrainConfig {
  std::string preset = "toy";
  std::array<int, 3> ratio{1, 1, 1};  // plain : doc : web
  int batch_size = 12;
  int64_t total_steps = 200;
  double lr = 5e-5;
  double weight_decay = 0.01;
  double warmup_frac = 0.05;
  bool decay_after_warmup = false;
  uint64_t seed = 1;
  bool symmetric_adaptive = false;
  int doc_n_relu = 1;  // -1 disables the branch's adaptive layer
  int web_n_relu = 1;

  std::string vocab;
  std::string plain, doc, web;  // corpus paths; optional for zero-ratio formats

  std::string checkpoint_dir;
  int64_t checkpoint_every = 0;  // 0 = only the final checkpoint
  int64_t log_every = 1;
  std::string loss_csv;  // empty = stdout
  std::string resume;

  void validate() const;
};

// key=value lines; '#' starts a comment; unknown keys are errors
TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text, const std::string& origin);

// canonical text of the fields that determine the numeric trajectory;
// stored in checkpoints and compared on resume
std::string train_config_echo(const TrainConfig& cfg);

struct LossPoint {
  int64_t step = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

// Owns model, optimizer, corpus, sampler and rng streams; one step() is
// sample -> corrupt -> forward per example -> batch loss over all active
// positions -> backward -> AdamW on the groups whose formats are present.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  LossPoint step();
  int64_t step_index() const { return step_; }

  const XDocModel& model() const { return *model_; }
  XDocModel& model() { return *model_; }
  const Corpus& corpus() const { return corpus_; }
  const Vocab& vocab() const { return vocab_; }
  const TrainConfig& config() const { return cfg_; }

  void save(const std::string& path) const;
  void resume_from(const std::string& path);

 private:
  TrainConfig cfg_;
  Vocab vocab_;
  TagVocab tags_ = TagVocab::make_default();
  Corpus corpus_;
  std::unique_ptr<XDocModel> model_;
  OptimizerState opt_;
  std::unique_ptr<Sampler> sampler_;
  Rng mask_rng_, drop_rng_;
  std::vector<Parameter*> update_set_;
  int64_t step_ = 0;
};

struct TrainResult {
  std::vector<LossPoint> curve;
  std::string final_checkpoint;  // empty when no checkpoint_dir configured
};

// Full loop: runs to total_steps, logs CSV rows (step,loss,lr), writes
// cadence checkpoints plus a final one, resumes first when configured.
TrainResult train(const TrainConfig& cfg);

}  // namespace xdoc
