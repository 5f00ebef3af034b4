#include "xdoc/tape.hpp"

#include <algorithm>
#include <cmath>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

constexpr double kMaskSurrogate = -1e30;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// C[m,n] += A[m,k] * B[k,n]
void mm_ab_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      const double* brow = b + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void mm_abt_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_atb_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t r = 0; r < m; ++r) {
    const double* arow = a + r * k;
    const double* brow = b + r * n;
    for (int64_t i = 0; i < k; ++i) {
      const double ari = arow[i];
      if (ari == 0.0) continue;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += ari * brow[j];
    }
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw RankError(std::string(op) + ": expected rank-2 tensor, got shape " + t.shape_str());
  }
}

}  // namespace

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Shared: return "shared";
    case ParamGroup::Doc: return "doc";
    case ParamGroup::Web: return "web";
    case ParamGroup::AdaptiveShared: return "adaptive_shared";
  }
  return "?";
}

Parameter* ParameterStore::add(std::string name, Tensor init, ParamGroup group, bool no_decay) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(init), group, no_decay));
  Parameter* p = params_.back().get();
  by_name_.emplace(p->name, p);
  return p;
}

Parameter* ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

int64_t ParameterStore::total_size() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

int64_t ParameterStore::group_size(ParamGroup g) const {
  int64_t n = 0;
  for (const auto& p : params_) {
    if (p->group == g) n += p->value.size();
  }
  return n;
}

void ParameterStore::zero_grads() {
  for (const auto& p : params_) p->zero_grad();
}

const Tensor& Value::tensor() const {
  if (!tape_) throw ConfigError("tensor() on empty Value");
  return tape_->value_of(id_);
}

int32_t Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int32_t>(nodes_.size() - 1);
}

Value Tape::make(Tensor value, std::vector<int32_t> parents,
                 std::function<void(Tape&, const Tensor&, const ParentAdj&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  return Value(this, push(std::move(n)));
}

void Tape::check_same_tape(Value v) const {
  if (v.tape_ != this) throw ConfigError("Value does not belong to this tape");
}

Value Tape::leaf(Parameter& p) {
  auto it = leaf_ids_.find(&p);
  if (it != leaf_ids_.end()) return Value(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  int32_t id = push(std::move(n));
  leaf_ids_.emplace(&p, id);
  return Value(this, id);
}

Value Tape::input(Tensor t) {
  Node n;
  n.value = std::move(t);
  return Value(this, push(std::move(n)));
}

Value Tape::add(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) {
    throw ShapeError("add: shape " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  out.add_(tb);
  return make(std::move(out), {a.id_, b.id_},
              [](Tape&, const Tensor& g, const ParentAdj& padj) {
                padj(0).add_(g);
                padj(1).add_(g);
              });
}

Value Tape::sub(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  if (!ta.same_shape(tb)) {
    throw ShapeError("sub: shape " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  return make(std::move(out), {a.id_, b.id_},
              [](Tape&, const Tensor& g, const ParentAdj& padj) {
                padj(0).add_(g);
                Tensor& db = padj(1);
                for (int64_t i = 0; i < g.size(); ++i) db[i] -= g[i];
              });
}

Value Tape::scale(Value a, double s) {
  check_same_tape(a);
  Tensor out = a.tensor();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make(std::move(out), {a.id_},
              [s](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor& da = padj(0);
                for (int64_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
              });
}

Value Tape::add_bias(Value m, Value bias) {
  check_same_tape(m);
  check_same_tape(bias);
  const Tensor& tm = m.tensor();
  const Tensor& tb = bias.tensor();
  require_rank2(tm, "add_bias");
  if (tb.rank() != 1 || tb.dim(0) != tm.dim(1)) {
    throw ShapeError("add_bias: bias " + tb.shape_str() + " vs matrix " + tm.shape_str());
  }
  Tensor out = tm;
  const int64_t r = tm.dim(0), c = tm.dim(1);
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out.at(i, j) += tb[j];
  }
  return make(std::move(out), {m.id_, bias.id_},
              [r, c](Tape&, const Tensor& g, const ParentAdj& padj) {
                padj(0).add_(g);
                Tensor& db = padj(1);
                for (int64_t i = 0; i < r; ++i) {
                  for (int64_t j = 0; j < c; ++j) db[j] += g.at(i, j);
                }
              });
}

Value Tape::mul_elem(Value a, Tensor mask) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  if (!ta.same_shape(mask)) {
    throw ShapeError("mul_elem: shape " + ta.shape_str() + " vs " + mask.shape_str());
  }
  Tensor out = ta;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make(std::move(out), {a.id_},
              [mask = std::move(mask)](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor& da = padj(0);
                for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * mask[i];
              });
}

Value Tape::relu(Value a) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  if (kink_) {
    kink_->active_sides.reserve(kink_->active_sides.size() + static_cast<size_t>(ta.size()));
    for (int64_t i = 0; i < ta.size(); ++i) {
      kink_->min_abs_preact = std::min(kink_->min_abs_preact, std::fabs(ta[i]));
      kink_->active_sides.push_back(ta[i] > 0.0 ? 1 : 0);
    }
  }
  Tensor out = ta;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  const int32_t ain = a.id_;
  return make(std::move(out), {a.id_},
              [ain](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& x = t.value_of(ain);
                Tensor& da = padj(0);
                // derivative at exactly 0 is 0
                for (int64_t i = 0; i < g.size(); ++i) da[i] += x[i] > 0.0 ? g[i] : 0.0;
              });
}

Value Tape::gelu(Value a) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  Tensor out = ta;
  for (int64_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  const int32_t ain = a.id_;
  return make(std::move(out), {a.id_},
              [ain](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& x = t.value_of(ain);
                Tensor& da = padj(0);
                for (int64_t i = 0; i < g.size(); ++i) {
                  const double xi = x[i];
                  const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
                  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
                  da[i] += g[i] * (cdf + xi * pdf);
                }
              });
}

Value Tape::matmul(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  require_rank2(ta, "matmul");
  require_rank2(tb, "matmul");
  if (ta.dim(1) != tb.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree, " + ta.shape_str() + " x " + tb.shape_str());
  }
  const int64_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  mm_ab_acc(ta.data(), tb.data(), out.data(), m, k, n);
  const int32_t ain = a.id_, bin = b.id_;
  return make(std::move(out), {a.id_, b.id_},
              [ain, bin, m, k, n](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& av = t.value_of(ain);
                const Tensor& bv = t.value_of(bin);
                mm_abt_acc(g.data(), bv.data(), padj(0).data(), m, n, k);  // dA = g * B^T
                mm_atb_acc(av.data(), g.data(), padj(1).data(), m, k, n);  // dB = A^T * g
              });
}

Value Tape::matmul_nt(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  require_rank2(ta, "matmul_nt");
  require_rank2(tb, "matmul_nt");
  if (ta.dim(1) != tb.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " + ta.shape_str() + " x " +
                     tb.shape_str() + "^T");
  }
  const int64_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(0);
  Tensor out({m, n});
  mm_abt_acc(ta.data(), tb.data(), out.data(), m, k, n);
  const int32_t ain = a.id_, bin = b.id_;
  return make(std::move(out), {a.id_, b.id_},
              [ain, bin, m, k, n](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& av = t.value_of(ain);
                const Tensor& bv = t.value_of(bin);
                mm_ab_acc(g.data(), bv.data(), padj(0).data(), m, n, k);   // dA = g * B
                mm_atb_acc(g.data(), av.data(), padj(1).data(), m, n, k);  // dB = g^T * A
              });
}

Value Tape::slice_cols(Value a, int64_t begin, int64_t count) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  require_rank2(ta, "slice_cols");
  const int64_t r = ta.dim(0), c = ta.dim(1);
  if (begin < 0 || count < 0 || begin + count > c) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of " + ta.shape_str());
  }
  Tensor out({r, count});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < count; ++j) out.at(i, j) = ta.at(i, begin + j);
  }
  return make(std::move(out), {a.id_},
              [r, begin, count](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor& da = padj(0);
                for (int64_t i = 0; i < r; ++i) {
                  for (int64_t j = 0; j < count; ++j) da.at(i, begin + j) += g.at(i, j);
                }
              });
}

Value Tape::concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::vector<int32_t> parents;
  std::vector<int64_t> widths;
  int64_t r = -1, total = 0;
  for (const Value& v : parts) {
    check_same_tape(v);
    const Tensor& t = v.tensor();
    require_rank2(t, "concat_cols");
    if (r < 0) r = t.dim(0);
    if (t.dim(0) != r) {
      throw ShapeError("concat_cols: row mismatch, " + std::to_string(r) + " vs " +
                       std::to_string(t.dim(0)));
    }
    parents.push_back(v.id_);
    widths.push_back(t.dim(1));
    total += t.dim(1);
  }
  Tensor out({r, total});
  int64_t off = 0;
  for (size_t p = 0; p < parents.size(); ++p) {
    const Tensor& t = value_of(parents[p]);
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < widths[p]; ++j) out.at(i, off + j) = t.at(i, j);
    }
    off += widths[p];
  }
  return make(std::move(out), std::move(parents),
              [r, widths](Tape&, const Tensor& g, const ParentAdj& padj) {
                int64_t off = 0;
                for (size_t p = 0; p < widths.size(); ++p) {
                  Tensor& dp = padj(p);
                  for (int64_t i = 0; i < r; ++i) {
                    for (int64_t j = 0; j < widths[p]; ++j) dp.at(i, j) += g.at(i, off + j);
                  }
                  off += widths[p];
                }
              });
}

Value Tape::reshape(Value a, std::vector<int64_t> shape) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  Tensor out(std::move(shape), std::vector<double>(ta.data(), ta.data() + ta.size()));
  std::vector<int64_t> old_shape = ta.shape();
  return make(std::move(out), {a.id_},
              [old_shape](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor gr(old_shape, std::vector<double>(g.data(), g.data() + g.size()));
                padj(0).add_(gr);
              });
}

Value Tape::gather_rows(Value table, std::span<const int32_t> ids) {
  check_same_tape(table);
  const Tensor& tt = table.tensor();
  require_rank2(tt, "gather_rows");
  const int64_t v = tt.dim(0), h = tt.dim(1);
  std::vector<int32_t> idv(ids.begin(), ids.end());
  for (int32_t id : idv) {
    if (id < 0 || id >= v) {
      throw IndexError("gather_rows: id " + std::to_string(id) + " out of table " + tt.shape_str(),
                       id);
    }
  }
  const int64_t n = static_cast<int64_t>(idv.size());
  Tensor out({n, h});
  for (int64_t i = 0; i < n; ++i) {
    const double* src = tt.data() + static_cast<int64_t>(idv[static_cast<size_t>(i)]) * h;
    std::copy(src, src + h, out.data() + i * h);
  }
  return make(std::move(out), {table.id_},
              [idv = std::move(idv), h](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor& dt = padj(0);
                for (size_t i = 0; i < idv.size(); ++i) {
                  double* dst = dt.data() + static_cast<int64_t>(idv[i]) * h;
                  const double* src = g.data() + static_cast<int64_t>(i) * h;
                  for (int64_t j = 0; j < h; ++j) dst[j] += src[j];
                }
              });
}

Value Tape::masked_softmax(Value x, std::vector<uint8_t> mask) {
  check_same_tape(x);
  const Tensor& tx = x.tensor();
  if (tx.rank() < 1) throw RankError("masked_softmax: scalar input");
  if (static_cast<int64_t>(mask.size()) != tx.size()) {
    throw ShapeError("masked_softmax: mask length " + std::to_string(mask.size()) +
                     " vs tensor " + tx.shape_str());
  }
  const int64_t rows = tx.rows(), n = tx.cols();
  Tensor out(tx.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = tx.data() + r * n;
    const uint8_t* mr = mask.data() + r * n;
    double* yr = out.data() + r * n;
    double mx = kMaskSurrogate;
    bool any = false;
    for (int64_t j = 0; j < n; ++j) {
      const double xv = mr[j] ? xr[j] : kMaskSurrogate;
      if (xv > mx) mx = xv;
      any = any || mr[j];
    }
    if (!any) throw MaskError("masked_softmax: fully masked row " + std::to_string(r));
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double e = mr[j] ? std::exp(xr[j] - mx) : 0.0;
      yr[j] = e;
      sum += e;
    }
    for (int64_t j = 0; j < n; ++j) yr[j] = mr[j] ? yr[j] / sum : 0.0;
  }
  Value outv = make(std::move(out), {x.id_}, nullptr);
  const int32_t self = outv.id_;
  nodes_[static_cast<size_t>(self)].backprop =
      [self, mask = std::move(mask), rows, n](Tape& t, const Tensor& g, const ParentAdj& padj) {
        const Tensor& y = t.value_of(self);
        Tensor& dx = padj(0);
        for (int64_t r = 0; r < rows; ++r) {
          const double* yr = y.data() + r * n;
          const double* gr = g.data() + r * n;
          const uint8_t* mr = mask.data() + r * n;
          double dot = 0.0;
          for (int64_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
          double* dr = dx.data() + r * n;
          for (int64_t j = 0; j < n; ++j) {
            if (mr[j]) dr[j] += yr[j] * (gr[j] - dot);
          }
        }
      };
  return outv;
}

Value Tape::layer_norm(Value x, Value gamma, Value beta, double eps) {
  check_same_tape(x);
  check_same_tape(gamma);
  check_same_tape(beta);
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
  const Tensor& tx = x.tensor();
  const Tensor& tg = gamma.tensor();
  const Tensor& tb = beta.tensor();
  if (tx.rank() < 1) throw RankError("layer_norm: scalar input");
  const int64_t h = tx.cols();
  if (tg.rank() != 1 || tg.dim(0) != h || tb.rank() != 1 || tb.dim(0) != h) {
    throw ShapeError("layer_norm: gamma " + tg.shape_str() + " / beta " + tb.shape_str() +
                     " vs last dim " + std::to_string(h));
  }
  const int64_t rows = tx.rows();
  Tensor out(tx.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = tx.data() + r * h;
    double* yr = out.data() + r * h;
    double mu = 0.0;
    for (int64_t j = 0; j < h; ++j) mu += xr[j];
    mu /= static_cast<double>(h);
    double var = 0.0;
    for (int64_t j = 0; j < h; ++j) {
      const double d = xr[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < h; ++j) yr[j] = tg[j] * ((xr[j] - mu) * inv) + tb[j];
  }
  const int32_t xin = x.id_, gin = gamma.id_;
  return make(
      std::move(out), {x.id_, gamma.id_, beta.id_},
      [xin, gin, rows, h, eps](Tape& t, const Tensor& g, const ParentAdj& padj) {
        const Tensor& xv = t.value_of(xin);
        const Tensor& gv = t.value_of(gin);
        Tensor& dx = padj(0);
        Tensor& dgamma = padj(1);
        Tensor& dbeta = padj(2);
        const double hn = static_cast<double>(h);
        for (int64_t r = 0; r < rows; ++r) {
          const double* xr = xv.data() + r * h;
          const double* gr = g.data() + r * h;
          double mu = 0.0;
          for (int64_t j = 0; j < h; ++j) mu += xr[j];
          mu /= hn;
          double var = 0.0;
          for (int64_t j = 0; j < h; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
          }
          var /= hn;
          const double inv = 1.0 / std::sqrt(var + eps);
          // q = g .* gamma; dx = inv*(q - mean(q) - xhat*mean(q.*xhat))
          double mean_q = 0.0, mean_qx = 0.0;
          for (int64_t j = 0; j < h; ++j) {
            const double xhat = (xr[j] - mu) * inv;
            const double q = gr[j] * gv[j];
            mean_q += q;
            mean_qx += q * xhat;
            dgamma[j] += gr[j] * xhat;
            dbeta[j] += gr[j];
          }
          mean_q /= hn;
          mean_qx /= hn;
          double* dr = dx.data() + r * h;
          for (int64_t j = 0; j < h; ++j) {
            const double xhat = (xr[j] - mu) * inv;
            const double q = gr[j] * gv[j];
            dr[j] += inv * (q - mean_q - xhat * mean_qx);
          }
        }
      });
}

Value Tape::masked_cross_entropy(Value logits, std::span<const int32_t> targets,
                                 std::span<const uint8_t> active) {
  check_same_tape(logits);
  const Tensor& tl = logits.tensor();
  require_rank2(tl, "masked_cross_entropy");
  const int64_t rows = tl.dim(0), v = tl.dim(1);
  if (static_cast<int64_t>(targets.size()) != rows || static_cast<int64_t>(active.size()) != rows) {
    throw ShapeError("masked_cross_entropy: expected " + std::to_string(rows) +
                     " targets/active flags");
  }
  std::vector<int32_t> tv(targets.begin(), targets.end());
  std::vector<uint8_t> av(active.begin(), active.end());
  int64_t n_act = 0;
  for (int64_t r = 0; r < rows; ++r) {
    if (!av[static_cast<size_t>(r)]) continue;
    ++n_act;
    const int32_t tgt = tv[static_cast<size_t>(r)];
    if (tgt < 0 || tgt >= v) {
      throw IndexError("masked_cross_entropy: target " + std::to_string(tgt) +
                       " out of vocab " + std::to_string(v) + " at row " + std::to_string(r),
                       tgt);
    }
  }
  if (n_act == 0) throw EmptyLossError("masked_cross_entropy: no active positions");
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    if (!av[static_cast<size_t>(r)]) continue;
    const double* xr = tl.data() + r * v;
    double mx = xr[0];
    for (int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - xr[tv[static_cast<size_t>(r)]];
  }
  loss /= static_cast<double>(n_act);
  const int32_t lin = logits.id_;
  return make(Tensor::scalar(loss), {logits.id_},
              [lin, tv = std::move(tv), av = std::move(av), rows, v,
               n_act](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& xl = t.value_of(lin);
                Tensor& dl = padj(0);
                const double go = g.item() / static_cast<double>(n_act);
                for (int64_t r = 0; r < rows; ++r) {
                  if (!av[static_cast<size_t>(r)]) continue;
                  const double* xr = xl.data() + r * v;
                  double mx = xr[0];
                  for (int64_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
                  double sum = 0.0;
                  for (int64_t j = 0; j < v; ++j) sum += std::exp(xr[j] - mx);
                  double* dr = dl.data() + r * v;
                  for (int64_t j = 0; j < v; ++j) {
                    const double p = std::exp(xr[j] - mx) / sum;
                    dr[j] += go * (p - (j == tv[static_cast<size_t>(r)] ? 1.0 : 0.0));
                  }
                }
              });
}

Value Tape::sum(Value a) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  return make(Tensor::scalar(s), {a.id_},
              [](Tape&, const Tensor& g, const ParentAdj& padj) {
                Tensor& da = padj(0);
                const double go = g.item();
                for (int64_t i = 0; i < da.size(); ++i) da[i] += go;
              });
}

Value Tape::custom_unary(Value a, std::function<double(double)> f,
                         std::function<double(double)> df) {
  check_same_tape(a);
  const Tensor& ta = a.tensor();
  Tensor out = ta;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  const int32_t ain = a.id_;
  return make(std::move(out), {a.id_},
              [ain, df = std::move(df)](Tape& t, const Tensor& g, const ParentAdj& padj) {
                const Tensor& x = t.value_of(ain);
                Tensor& da = padj(0);
                for (int64_t i = 0; i < g.size(); ++i) da[i] += df(x[i]) * g[i];
              });
}

void Tape::backward(Value loss) {
  check_same_tape(loss);
  const Tensor& lt = loss.tensor();
  if (lt.rank() != 0) {
    throw RankError("backward: loss must be scalar, got shape " + lt.shape_str());
  }
  std::vector<Tensor> adj(nodes_.size());
  std::vector<uint8_t> has(nodes_.size(), 0);
  const size_t lid = static_cast<size_t>(loss.id_);
  adj[lid] = Tensor::scalar(1.0);
  has[lid] = 1;
  for (int32_t id = loss.id_; id >= 0; --id) {
    const size_t i = static_cast<size_t>(id);
    if (!has[i]) continue;
    Node& n = nodes_[i];
    if (n.param) {
      n.param->grad.add_(adj[i]);
      continue;
    }
    if (!n.backprop) continue;
    auto padj = [&](size_t pi) -> Tensor& {
      const size_t pid = static_cast<size_t>(n.parents[pi]);
      if (!has[pid]) {
        adj[pid] = Tensor::zeros(nodes_[pid].value.shape());
        has[pid] = 1;
      }
      return adj[pid];
    };
    n.backprop(*this, adj[i], padj);
    adj[i] = Tensor();  // release as we go
  }
}

}  // namespace xdoc
