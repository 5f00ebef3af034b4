#pragma once

#include <cstdint>
#include <string>

#include "xdoc/model.hpp"

namespace xdoc {

// closed-form parameter tally for a model configuration, bucketed by the
// component the parameters belong to
struct ParamBreakdown {
  int64_t word = 0;
  int64_t pos1d = 0;
  int64_t transformer = 0;
  int64_t embed_norm = 0;
  int64_t head = 0;
  int64_t twod = 0;             // coordinate tables
  int64_t xpath = 0;            // per-depth tag and subscript tables
  int64_t doc_adaptive = 0;     // owned by the doc branch
  int64_t web_adaptive = 0;     // owned by the web branch
  int64_t adaptive_shared = 0;  // symmetric tail, counted once

  // the format-agnostic trunk every deployment carries
  int64_t shared() const { return word + pos1d + transformer + embed_norm + head; }

  // single-format deployments: trunk plus that format's tables and projection
  int64_t text_model() const { return shared(); }
  int64_t doc_model() const { return shared() + twod + doc_adaptive + adaptive_shared; }
  int64_t web_model() const { return shared() + xpath + web_adaptive + adaptive_shared; }

  // one model serving all three formats
  int64_t unified() const {
    return shared() + twod + xpath + doc_adaptive + web_adaptive + adaptive_shared;
  }

  // unified size over the sum of three single-format models
  double consolidation_ratio() const;
};

ParamBreakdown count_params(const ModelConfig& cfg);

// pretty table with per-bucket and per-deployment totals
std::string format_param_report(const ParamBreakdown& b);

}  // namespace xdoc
