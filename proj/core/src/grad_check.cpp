#include "xdoc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

struct Eval {
  double value = 0.0;
  std::vector<uint8_t> relu_sides;
};

Eval evaluate(const std::function<Value(Tape&)>& build) {
  Tape tape;
  KinkMonitor km;
  tape.set_kink_monitor(&km);
  Value loss = build(tape);
  Eval e;
  e.value = loss.tensor().item();
  e.relu_sides = std::move(km.active_sides);
  return e;
}

}  // namespace

CheckReport grad_check(const std::function<Value(Tape&)>& build, ParameterStore& params,
                       const GradCheckOptions& opts) {
  if (opts.step <= 0.0 || opts.rel_tol <= 0.0 || opts.max_coords_per_param < 1) {
    throw ConfigError("grad_check: step, rel_tol and max_coords_per_param must be positive");
  }

  const double f0 = evaluate(build).value;
  const double f1 = evaluate(build).value;
  if (std::memcmp(&f0, &f1, sizeof(double)) != 0) {
    throw DeterminismError("grad_check: two forward passes disagree");
  }
  if (!std::isfinite(f0)) throw NumericFault("grad_check: non-finite loss");

  params.zero_grads();
  {
    Tape tape;
    Value loss = build(tape);
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.count());
  for (const auto& p : params.items()) {
    if (!p->grad.all_finite()) {
      throw NumericFault("grad_check: non-finite analytic gradient in " + p->name);
    }
    analytic.push_back(p->grad);
  }

  CheckReport report;
  for (size_t pi = 0; pi < params.count(); ++pi) {
    Parameter& p = *params.items()[pi];
    const Tensor& g = analytic[pi];
    const int64_t n = p.value.size();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), int64_t{0});
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      return std::fabs(g[a]) > std::fabs(g[b]);
    });
    const int64_t take = std::min<int64_t>(n, opts.max_coords_per_param);
    for (int64_t ci = 0; ci < take; ++ci) {
      const int64_t c = order[static_cast<size_t>(ci)];
      const double saved = p.value[c];
      p.value[c] = saved + opts.step;
      const Eval hi = evaluate(build);
      p.value[c] = saved - opts.step;
      const Eval lo = evaluate(build);
      p.value[c] = saved;
      // a relu switching sides between the two evaluations puts the kink
      // inside the central-difference interval
      if (hi.relu_sides != lo.relu_sides) {
        ++report.n_skipped_kink;
        continue;
      }
      CoordResult cr;
      cr.param = p.name;
      cr.coord = c;
      cr.analytic = g[c];
      cr.numeric = (hi.value - lo.value) / (2.0 * opts.step);
      const double denom = std::max({std::fabs(cr.analytic), std::fabs(cr.numeric), 1e-8});
      cr.rel_err = std::fabs(cr.analytic - cr.numeric) / denom;
      ++report.n_checked;
      if (cr.rel_err > report.max_rel_err) {
        report.max_rel_err = cr.rel_err;
        report.worst_param = cr.param;
        report.worst_coord = cr.coord;
      }
      if (cr.rel_err > opts.rel_tol) {
        report.pass = false;
        report.failures.push_back(cr);
      }
    }
  }
  return report;
}

}  // namespace xdoc
