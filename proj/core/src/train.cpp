#include "xdoc/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xdoc/error.hpp"

namespace xdoc {

void TrainConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (warmup_frac < 0.0 || warmup_frac > 1.0) throw ConfigError("warmup_frac must be in [0,1]");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  if (vocab.empty()) throw ConfigError("vocab path is required");
  if (ratio[0] > 0 && plain.empty()) throw ConfigError("plain ratio > 0 needs a plain corpus");
  if (ratio[1] > 0 && doc.empty()) throw ConfigError("doc ratio > 0 needs a doc corpus");
  if (ratio[2] > 0 && web.empty()) throw ConfigError("web ratio > 0 needs a web corpus");
}

namespace {

std::array<int, 3> parse_ratio(const std::string& v, const std::string& origin) {
  std::array<int, 3> r{};
  char extra;
  if (std::sscanf(v.c_str(), "%d:%d:%d%c", &r[0], &r[1], &r[2], &extra) != 3) {
    throw ConfigError(origin + ": ratio must look like p:d:w, got '" + v + "'");
  }
  return r;
}

bool parse_bool(const std::string& v, const std::string& origin) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError(origin + ": expected a boolean, got '" + v + "'");
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto strip = [](std::string s) {
      size_t sb = s.find_first_not_of(" \t");
      if (sb == std::string::npos) return std::string();
      size_t se = s.find_last_not_of(" \t");
      return s.substr(sb, se - sb + 1);
    };
    key = strip(key);
    val = strip(val);
    try {
      if (key == "preset") cfg.preset = val;
      else if (key == "ratio") cfg.ratio = parse_ratio(val, where);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "total_steps") cfg.total_steps = std::stoll(val);
      else if (key == "lr") cfg.lr = std::stod(val);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
      else if (key == "warmup_frac") cfg.warmup_frac = std::stod(val);
      else if (key == "decay_after_warmup") cfg.decay_after_warmup = parse_bool(val, where);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "symmetric_adaptive") cfg.symmetric_adaptive = parse_bool(val, where);
      else if (key == "doc_n_relu") cfg.doc_n_relu = std::stoi(val);
      else if (key == "web_n_relu") cfg.web_n_relu = std::stoi(val);
      else if (key == "vocab") cfg.vocab = val;
      else if (key == "plain") cfg.plain = val;
      else if (key == "doc") cfg.doc = val;
      else if (key == "web") cfg.web = val;
      else if (key == "checkpoint_dir") cfg.checkpoint_dir = val;
      else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoll(val);
      else if (key == "log_every") cfg.log_every = std::stoll(val);
      else if (key == "loss_csv") cfg.loss_csv = val;
      else if (key == "resume") cfg.resume = val;
      else throw ConfigError(where + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError(where + ": bad value '" + val + "' for " + key);
    } catch (const std::out_of_range&) {
      throw ConfigError(where + ": value out of range for " + key);
    }
  }
  return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open train config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_train_config_text(ss.str(), path);
}

std::string train_config_echo(const TrainConfig& cfg) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "preset=%s\nratio=%d:%d:%d\nbatch_size=%d\ntotal_steps=%" PRId64
                "\nlr=%.17g\nweight_decay=%.17g\nwarmup_frac=%.17g\ndecay_after_warmup=%d\n"
                "seed=%" PRIu64 "\nsymmetric_adaptive=%d\ndoc_n_relu=%d\nweb_n_relu=%d\n",
                cfg.preset.c_str(), cfg.ratio[0], cfg.ratio[1], cfg.ratio[2], cfg.batch_size,
                cfg.total_steps, cfg.lr, cfg.weight_decay, cfg.warmup_frac,
                cfg.decay_after_warmup ? 1 : 0, cfg.seed, cfg.symmetric_adaptive ? 1 : 0,
                cfg.doc_n_relu, cfg.web_n_relu);
  return buf;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      vocab_(Vocab::load(cfg.vocab)),
      mask_rng_(mix_seed(cfg.seed, 1)),
      drop_rng_(mix_seed(cfg.seed, 2)) {
  ModelConfig mcfg = preset_by_name(cfg_.preset);
  mcfg.emb.vocab_size = vocab_.size();
  mcfg.emb.pad_word_id = vocab_.pad_id();
  mcfg.symmetric_adaptive = cfg_.symmetric_adaptive;
  mcfg.doc_adaptive = cfg_.doc_n_relu < 0 ? AdaptiveSpec{false, 0}
                                          : AdaptiveSpec{true, cfg_.doc_n_relu};
  mcfg.web_adaptive = cfg_.web_n_relu < 0 ? AdaptiveSpec{false, 0}
                                          : AdaptiveSpec{true, cfg_.web_n_relu};
  model_ = make_model(mcfg, mix_seed(cfg_.seed, 0));

  if (!cfg_.plain.empty()) {
    for (const auto& r : load_plain(cfg_.plain)) {
      corpus_.plain.push_back(to_model_input(r, vocab_, mcfg.emb));
    }
  }
  if (!cfg_.doc.empty()) {
    for (const auto& r : load_doc(cfg_.doc)) {
      corpus_.doc.push_back(to_model_input(r, vocab_, mcfg.emb));
    }
  }
  if (!cfg_.web.empty()) {
    for (const auto& r : load_web(cfg_.web)) {
      corpus_.web.push_back(to_model_input(r, vocab_, tags_, mcfg.emb));
    }
  }

  SamplerConfig scfg;
  scfg.ratio = cfg_.ratio;
  scfg.batch_size = cfg_.batch_size;
  scfg.seed = mix_seed(cfg_.seed, 3);
  sampler_ = std::make_unique<Sampler>(scfg, corpus_.sizes());

  const bool doc_present = cfg_.ratio[1] > 0;
  const bool web_present = cfg_.ratio[2] > 0;
  for (const auto& p : model_->params.items()) {
    const bool include = p->group == ParamGroup::Shared ||
                         (p->group == ParamGroup::Doc && doc_present) ||
                         (p->group == ParamGroup::Web && web_present) ||
                         (p->group == ParamGroup::AdaptiveShared && (doc_present || web_present));
    if (include) update_set_.push_back(p.get());
  }
}

LossPoint Trainer::step() {
  if (step_ >= cfg_.total_steps) throw ConfigError("training already ran to total_steps");
  const std::vector<BatchItem> batch = sampler_->next_batch();

  struct Corrupted {
    ModelInput input;
    MlmExample ex;
    int64_t n_active = 0;
  };
  std::vector<Corrupted> items;
  items.reserve(batch.size());
  int64_t total_active = 0;
  for (const BatchItem& it : batch) {
    Corrupted c;
    c.input = corpus_.of(it.format)[static_cast<size_t>(it.index)];
    c.ex = apply_mlm_mask(c.input.seq, vocab_, mask_rng_);
    c.input.seq.ids = c.ex.ids;
    for (uint8_t a : c.ex.active) c.n_active += a;
    total_active += c.n_active;
    items.push_back(std::move(c));
  }

  const double lr = lr_at_step(step_ + 1, cfg_.total_steps, cfg_.lr, cfg_.warmup_frac,
                               cfg_.decay_after_warmup);
  double loss_value = 0.0;
  if (total_active > 0) {
    Tape tape;
    ForwardCtx ctx{true, &drop_rng_};
    Value batch_loss;
    for (const Corrupted& c : items) {
      if (c.n_active == 0) continue;  // corruption skipped this example entirely
      Value term = tape.scale(
          model_mlm_loss(tape, *model_, c.input, c.ex.labels, c.ex.active, ctx),
          static_cast<double>(c.n_active) / static_cast<double>(total_active));
      batch_loss = batch_loss.valid() ? tape.add(batch_loss, term) : term;
    }
    loss_value = batch_loss.tensor().item();
    if (!std::isfinite(loss_value)) {
      throw NumericFault("loss is not finite at step " + std::to_string(step_ + 1));
    }
    tape.backward(batch_loss);
    opt_.hyper.weight_decay = cfg_.weight_decay;
    adamw_step(update_set_, opt_, lr);
  }
  ++step_;
  return {step_, loss_value, lr};
}

void Trainer::save(const std::string& path) const {
  TrainerSnapshot snap;
  snap.step = step_;
  snap.config_echo = train_config_echo(cfg_);
  snap.mask_rng = mask_rng_.serialize();
  snap.dropout_rng = drop_rng_.serialize();
  snap.sampler = sampler_->cursors();
  save_checkpoint(path, *model_, opt_, snap);
}

void Trainer::resume_from(const std::string& path) {
  TrainerSnapshot snap = load_checkpoint(path, *model_, opt_);
  if (snap.config_echo != train_config_echo(cfg_)) {
    throw ConfigError("checkpoint " + path + " was written under a different run config");
  }
  step_ = snap.step;
  mask_rng_.deserialize(snap.mask_rng);
  drop_rng_.deserialize(snap.dropout_rng);
  sampler_->restore(snap.sampler);
}

TrainResult train(const TrainConfig& cfg) {
  Trainer trainer(cfg);
  if (!cfg.resume.empty()) trainer.resume_from(cfg.resume);

  std::ofstream csv_file;
  std::ostream* csv = nullptr;
  if (!cfg.loss_csv.empty()) {
    const std::filesystem::path parent = std::filesystem::path(cfg.loss_csv).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    csv_file.open(cfg.loss_csv, trainer.step_index() > 0 ? std::ios::app : std::ios::trunc);
    if (!csv_file) throw ConfigError("cannot open loss csv: " + cfg.loss_csv);
    csv = &csv_file;
  }
  if (csv && trainer.step_index() == 0) *csv << "step,loss,lr\n";

  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
  }
  auto ckpt_name = [&](int64_t s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%06" PRId64 ".bin", s);
    return cfg.checkpoint_dir + "/" + buf;
  };

  TrainResult result;
  while (trainer.step_index() < cfg.total_steps) {
    LossPoint p = trainer.step();
    if (p.step % cfg.log_every == 0 || p.step == cfg.total_steps) {
      result.curve.push_back(p);
      if (csv) {
        char row[96];
        std::snprintf(row, sizeof(row), "%" PRId64 ",%.17g,%.17g\n", p.step, p.loss, p.lr);
        *csv << row;
      }
    }
    if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        p.step % cfg.checkpoint_every == 0 && p.step != cfg.total_steps) {
      trainer.save(ckpt_name(p.step));
    }
  }
  if (!cfg.checkpoint_dir.empty()) {
    result.final_checkpoint = ckpt_name(cfg.total_steps);
    trainer.save(result.final_checkpoint);
  }
  return result;
}

}  // namespace xdoc
