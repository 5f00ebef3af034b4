#include "xdoc/pretrain.hpp"

#include <cmath>

#include "xdoc/error.hpp"

namespace xdoc {

MlmExample apply_mlm_mask(const EncodedSeq& seq, const Vocab& vocab, Rng& rng,
                          const MlmPolicy& policy) {
  if (policy.select_p < 0.0 || policy.select_p > 1.0 || policy.mask_frac < 0.0 ||
      policy.random_frac < 0.0 || policy.mask_frac + policy.random_frac > 1.0) {
    throw ConfigError("mlm policy fractions out of range");
  }
  const int64_t l = seq.l_max();
  MlmExample out;
  out.ids = seq.ids;
  out.labels.assign(static_cast<size_t>(l), -1);
  out.active.assign(static_cast<size_t>(l), 0);

  std::vector<int32_t> candidates;
  candidates.reserve(static_cast<size_t>(vocab.size()));
  for (int32_t id = 0; id < vocab.size(); ++id) {
    if (!vocab.is_special(id)) candidates.push_back(id);
  }

  for (int64_t i = 0; i < l; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (!seq.attention[si]) continue;
    const int32_t orig = seq.ids[si];
    if (vocab.is_special(orig)) continue;
    if (rng.uniform() >= policy.select_p) continue;
    out.labels[si] = orig;
    out.active[si] = 1;
    const double bucket = rng.uniform();
    if (bucket < policy.mask_frac) {
      out.ids[si] = vocab.mask_id();
    } else if (bucket < policy.mask_frac + policy.random_frac) {
      if (candidates.empty()) throw ConfigError("vocabulary has no non-special tokens");
      out.ids[si] = candidates[rng.below(candidates.size())];
    }
  }
  return out;
}

double lr_at_step(int64_t step, int64_t total_steps, double base_lr, double warmup_frac,
                  bool decay_after_warmup) {
  if (step < 0 || total_steps < 0 || step > total_steps) {
    throw ConfigError("lr_at_step: need 0 <= step <= total_steps");
  }
  const double warmup = warmup_frac * static_cast<double>(total_steps);
  if (warmup > 0.0 && static_cast<double>(step) < warmup) {
    return base_lr * static_cast<double>(step) / warmup;
  }
  if (!decay_after_warmup) return base_lr;
  const double rest = static_cast<double>(total_steps) - warmup;
  if (rest <= 0.0) return base_lr;
  return base_lr * (static_cast<double>(total_steps - step)) / rest;
}

void adamw_step(std::span<Parameter* const> params, OptimizerState& opt, double lr) {
  for (const Parameter* p : params) {
    for (int64_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NumericFault("non-finite gradient in " + p->name + "; step aborted");
      }
    }
  }
  const AdamHyper& h = opt.hyper;
  for (Parameter* p : params) {
    MomentSlot& slot = opt.slots[p->name];
    if (slot.step == 0) {
      slot.m = Tensor::zeros(p->value.shape());
      slot.v = Tensor::zeros(p->value.shape());
    }
    slot.step += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(slot.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(slot.step));
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      slot.m[i] = h.beta1 * slot.m[i] + (1.0 - h.beta1) * g;
      slot.v[i] = h.beta2 * slot.v[i] + (1.0 - h.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      double next = p->value[i] - lr * mhat / (std::sqrt(vhat) + h.eps);
      if (!p->no_decay && h.weight_decay != 0.0) {
        next -= lr * h.weight_decay * p->value[i];
      }
      p->value[i] = next;
    }
    p->zero_grad();
  }
}

void adamw_step(ParameterStore& store, OptimizerState& opt, double lr) {
  std::vector<Parameter*> all;
  all.reserve(store.count());
  for (const auto& p : store.items()) all.push_back(p.get());
  adamw_step(all, opt, lr);
}

Sampler::Sampler(const SamplerConfig& cfg, const std::array<int64_t, 3>& corpus_sizes)
    : cfg_(cfg), sizes_(corpus_sizes) {
  int sum = 0;
  for (int r : cfg_.ratio) {
    if (r < 0) throw ConfigError("sampler ratio entries must be nonnegative");
    sum += r;
  }
  if (sum == 0) throw ConfigError("sampler ratio must not be all zero");
  if (cfg_.batch_size <= 0 || cfg_.batch_size % sum != 0) {
    throw ConfigError("batch size " + std::to_string(cfg_.batch_size) +
                      " not divisible by ratio sum " + std::to_string(sum));
  }
  for (size_t f = 0; f < 3; ++f) {
    if (cfg_.ratio[f] > 0 && sizes_[f] <= 0) {
      throw ConfigError(std::string("nonzero ratio for ") +
                        format_name(static_cast<Format>(f)) + " but its corpus is empty");
    }
    if (cfg_.ratio[f] > 0) reshuffle(f);
  }
}

void Sampler::reshuffle(size_t fmt) {
  auto& p = perm_[fmt];
  p.resize(static_cast<size_t>(sizes_[fmt]));
  for (int64_t i = 0; i < sizes_[fmt]; ++i) p[static_cast<size_t>(i)] = i;
  Rng r(mix_seed(mix_seed(cfg_.seed, static_cast<uint64_t>(fmt) + 1),
                 static_cast<uint64_t>(cur_[fmt].epoch)));
  r.shuffle(p);
}

int64_t Sampler::draw(size_t fmt) {
  if (cur_[fmt].pos >= sizes_[fmt]) {
    cur_[fmt].epoch += 1;
    cur_[fmt].pos = 0;
    reshuffle(fmt);
  }
  return perm_[fmt][static_cast<size_t>(cur_[fmt].pos++)];
}

std::vector<BatchItem> Sampler::next_batch() {
  const int sum = cfg_.ratio[0] + cfg_.ratio[1] + cfg_.ratio[2];
  const int blocks = cfg_.batch_size / sum;
  std::vector<BatchItem> batch;
  batch.reserve(static_cast<size_t>(cfg_.batch_size));
  for (int b = 0; b < blocks; ++b) {
    for (size_t f = 0; f < 3; ++f) {
      for (int k = 0; k < cfg_.ratio[f]; ++k) {
        batch.push_back({static_cast<Format>(f), draw(f)});
      }
    }
  }
  return batch;
}

void Sampler::restore(const std::array<Cursor, 3>& cursors) {
  for (size_t f = 0; f < 3; ++f) {
    if (cursors[f].epoch < 0 || cursors[f].pos < 0 ||
        (cfg_.ratio[f] > 0 && cursors[f].pos > sizes_[f])) {
      throw ConfigError("sampler cursor out of range");
    }
  }
  cur_ = cursors;
  for (size_t f = 0; f < 3; ++f) {
    if (cfg_.ratio[f] > 0) reshuffle(f);
  }
}

}  // namespace xdoc
