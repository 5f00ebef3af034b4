#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xdoc/tensor.hpp"

namespace xdoc {

// Parameter group ownership: shared backbone, per-format branch, or the
// tail linears shared between branches in symmetry mode.
enum class ParamGroup { Shared, Doc, Web, AdaptiveShared };

const char* param_group_name(ParamGroup g);

// Named trainable tensor. grad has the same shape as value and accumulates
// across backward() calls until zero_grad().
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::Shared;
  bool no_decay = false;  // LayerNorm scales and all biases skip weight decay
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v, ParamGroup g, bool nd)
      : name(std::move(n)), group(g), no_decay(nd), value(std::move(v)),
        grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

// Owns all Parameters of one model; names are unique, iteration order is
// construction order (checkpoints rely on it being stable).
class ParameterStore {
 public:
  Parameter* add(std::string name, Tensor init, ParamGroup group, bool no_decay = false);
  Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& items() const { return params_; }
  size_t count() const { return params_.size(); }
  int64_t total_size() const;
  int64_t group_size(ParamGroup g) const;
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

// Records which side of its kink every relu pre-activation fell on during a
// forward pass; grad_check compares the patterns of the two perturbed
// evaluations and skips the coordinate when a kink was crossed between them.
struct KinkMonitor {
  double min_abs_preact = std::numeric_limits<double>::infinity();
  std::vector<uint8_t> active_sides;
};

class Tape;

// Handle to a tensor recorded on a tape.
class Value {
 public:
  Value() = default;
  const Tensor& tensor() const;
  const std::vector<int64_t>& shape() const { return tensor().shape(); }
  bool valid() const { return tape_ != nullptr; }
  int32_t id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* t, int32_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int32_t id_ = -1;
};

// Records forward operations and replays them in reverse to accumulate
// exact adjoints into Parameter.grad. One tape per forward pass; a tape
// is mutated by at most one thread.
class Tape {
 public:
  // Tracks a parameter; repeated leaf() calls for the same Parameter
  // return the same node so adjoints from all uses accumulate.
  Value leaf(Parameter& p);
  // Untracked constant input.
  Value input(Tensor t);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value scale(Value a, double s);
  // [r,c] plus a length-c bias per row.
  Value add_bias(Value m, Value bias);
  // Elementwise product with a constant tensor (dropout masks).
  Value mul_elem(Value a, Tensor mask);
  Value relu(Value a);
  Value gelu(Value a);
  Value matmul(Value a, Value b);
  // a[m,k] x b[n,k]^T -> [m,n]
  Value matmul_nt(Value a, Value b);
  Value slice_cols(Value a, int64_t begin, int64_t count);
  Value concat_cols(std::span<const Value> parts);
  Value reshape(Value a, std::vector<int64_t> shape);
  Value gather_rows(Value table, std::span<const int32_t> ids);
  // Softmax over the last dim; mask is row-major over the same shape,
  // nonzero = keep. Masked outputs are exactly 0.
  Value masked_softmax(Value x, std::vector<uint8_t> mask);
  Value layer_norm(Value x, Value gamma, Value beta, double eps);
  // Mean over active rows of -log softmax(logits)[target]. Scalar output.
  Value masked_cross_entropy(Value logits, std::span<const int32_t> targets,
                             std::span<const uint8_t> active);
  Value sum(Value a);
  // Elementwise op with caller-supplied forward/derivative (tests).
  Value custom_unary(Value a, std::function<double(double)> f,
                     std::function<double(double)> df);

  // Reverse sweep from a scalar loss; accumulates into Parameter.grad.
  void backward(Value loss);

  void set_kink_monitor(KinkMonitor* m) { kink_ = m; }
  const Tensor& value_of(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t node_count() const { return nodes_.size(); }

 private:
  // padj(i) returns the adjoint buffer of parent i, allocated on demand.
  using ParentAdj = std::function<Tensor&(size_t)>;
  struct Node {
    Tensor value;
    std::vector<int32_t> parents;
    std::function<void(Tape&, const Tensor& gout, const ParentAdj& padj)> backprop;
    Parameter* param = nullptr;
  };

  int32_t push(Node n);
  Value make(Tensor value, std::vector<int32_t> parents,
             std::function<void(Tape&, const Tensor&, const ParentAdj&)> backprop);
  void check_same_tape(Value v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int32_t> leaf_ids_;
  KinkMonitor* kink_ = nullptr;
};

}  // namespace xdoc
