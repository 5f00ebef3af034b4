#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xdoc/tape.hpp"

namespace xdoc {

struct GradCheckOptions {
  double step = 1e-5;
  double rel_tol = 1e-4;
  // coordinates checked per parameter: the largest analytic gradients first,
  // so the finite-difference noise floor does not dominate the relative error
  int max_coords_per_param = 6;
};

struct CoordResult {
  std::string param;
  int64_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct CheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_coord = -1;
  int64_t n_checked = 0;
  int64_t n_skipped_kink = 0;
  std::vector<CoordResult> failures;
};

// build must construct the scalar loss on the given tape, reading parameters
// through tape.leaf(). It is invoked many times and must be deterministic;
// two evaluations that disagree bitwise raise DeterminismError.
CheckReport grad_check(const std::function<Value(Tape&)>& build, ParameterStore& params,
                       const GradCheckOptions& opts = {});

}  // namespace xdoc
