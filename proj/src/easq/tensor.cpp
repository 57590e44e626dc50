// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "easq/error.hpp"

namespace easq {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  Tensor::BackwardFn backward;
};

namespace {
std::atomic<std::uint64_t> next_node_id{1};
thread_local StopGradReplay* active_replay = nullptr;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  auto node = std::make_shared<Node>();
  const std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw DimensionError("value buffer of length " + std::to_string(values.size()) +
                         " does not match shape " + shape_string(shape));
  }
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->grad.assign(n, 0.0);
  node->requires_grad = requires_grad;
  node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}
}  // namespace

}  // namespace detail

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(detail::new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(detail::new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::make_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                       BackwardFn backward) {
  bool live = false;
  for (const auto& in : inputs) live = live || in.requires_grad();
  auto node = detail::new_node(std::move(shape), std::move(values), live);
  if (live) {
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (in.requires_grad()) node->parents.push_back(in.node_);
    }
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
std::size_t Tensor::cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad; }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
std::uint64_t Tensor::node_id() const { return node_->id; }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::clone(bool requires_grad) const {
  return from(shape(), std::vector<double>(values().begin(), values().end()), requires_grad);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void accumulate(Tensor& t, std::span<const double> g) {
  if (!t.requires_grad()) return;
  auto dst = t.mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor in = x;
  return Tensor::make_op(x.shape(), std::move(out), {x}, [in, deriv](std::span<const double> g) mutable {
    auto xv = in.values();
    auto dst = in.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * deriv(xv[i]);
  });
}

}  // namespace

double softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor affine(const Tensor& weight, const Tensor& x) {
  if (weight.shape().size() != 2 || x.shape().size() != 1 || weight.cols() != x.size()) {
    throw DimensionError("affine: weight " + shape_string(weight.shape()) + " cannot multiply " +
                         shape_string(x.shape()));
  }
  const std::size_t d = weight.rows();
  const std::size_t k = weight.cols();
  auto w = weight.values();
  auto xv = x.values();
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double* wr = w.data() + r * k;
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc += wr[c] * xv[c];
    out[r] = acc;
  }
  Tensor W = weight;
  Tensor X = x;
  return Tensor::make_op({d}, std::move(out), {weight, x}, [W, X, d, k](std::span<const double> g) mutable {
    if (W.requires_grad()) {
      auto gw = W.mutable_grad();
      auto xv = X.values();
      for (std::size_t r = 0; r < d; ++r) {
        if (g[r] == 0.0) continue;
        double* gr = gw.data() + r * k;
        for (std::size_t c = 0; c < k; ++c) gr[c] += g[r] * xv[c];
      }
    }
    if (X.requires_grad()) {
      auto gx = X.mutable_grad();
      auto w = W.values();
      for (std::size_t r = 0; r < d; ++r) {
        if (g[r] == 0.0) continue;
        const double* wr = w.data() + r * k;
        for (std::size_t c = 0; c < k; ++c) gx[c] += wr[c] * g[r];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor A = a, B = b;
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [A, B](std::span<const double> g) mutable {
    accumulate(A, g);
    accumulate(B, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor A = a, B = b;
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [A, B](std::span<const double> g) mutable {
    accumulate(A, g);
    if (B.requires_grad()) {
      auto gb = B.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor A = a, B = b;
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [A, B](std::span<const double> g) mutable {
    if (A.requires_grad()) {
      auto ga = A.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (B.requires_grad()) {
      auto gb = B.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  Tensor A = a;
  return Tensor::make_op(a.shape(), std::move(out), {a}, [A, factor](std::span<const double> g) mutable {
    auto ga = A.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    throw DimensionError("mul_scalar: expected a [1] factor, got " + shape_string(s.shape()));
  }
  const double f = s.item();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * f;
  Tensor A = a, S = s;
  return Tensor::make_op(a.shape(), std::move(out), {a, s}, [A, S](std::span<const double> g) mutable {
    if (A.requires_grad()) {
      const double f = S.item();
      auto ga = A.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f;
    }
    if (S.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      S.mutable_grad()[0] += acc;
    }
  });
}

Tensor mask(const Tensor& a, std::span<const double> keep) {
  if (keep.size() != a.size()) {
    throw DimensionError("mask: length " + std::to_string(keep.size()) + " vs " +
                         shape_string(a.shape()));
  }
  std::vector<double> m(keep.begin(), keep.end());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * m[i];
  Tensor A = a;
  return Tensor::make_op(a.shape(), std::move(out), {a}, [A, m](std::span<const double> g) mutable {
    auto ga = A.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor A = a;
  return Tensor::make_op({1}, {acc}, {a}, [A](std::span<const double> g) mutable {
    auto ga = A.mutable_grad();
    for (auto& v : ga) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  Tensor A = a, B = b;
  return Tensor::make_op({1}, {acc}, {a, b}, [A, B](std::span<const double> g) mutable {
    if (A.requires_grad()) {
      auto ga = A.mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * B[i];
    }
    if (B.requires_grad()) {
      auto gb = B.mutable_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * A[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.shape().size() != 1) {
      throw DimensionError("concat: expected vectors, got " + shape_string(p.shape()));
    }
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t n = out.size();
  std::vector<Tensor> ins = parts;
  return Tensor::make_op({n}, std::move(out), parts, [ins, offsets](std::span<const double> g) mutable {
    for (std::size_t p = 0; p < ins.size(); ++p) {
      if (!ins[p].requires_grad()) continue;
      auto gp = ins[p].mutable_grad();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t length) {
  if (offset + length > a.size()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_string(a.shape()));
  }
  std::vector<double> out(a.values().begin() + offset, a.values().begin() + offset + length);
  Tensor A = a;
  return Tensor::make_op({length}, std::move(out), {a}, [A, offset](std::span<const double> g) mutable {
    auto ga = A.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Tensor row(const Tensor& table, std::size_t index) {
  if (table.shape().size() != 2 || index >= table.rows()) {
    throw DimensionError("row " + std::to_string(index) + " out of range for table " +
                         shape_string(table.shape()));
  }
  const std::size_t d = table.cols();
  std::vector<double> out(table.values().begin() + index * d,
                          table.values().begin() + (index + 1) * d);
  Tensor T = table;
  return Tensor::make_op({d}, std::move(out), {table}, [T, index, d](std::span<const double> g) mutable {
    auto gt = T.mutable_grad();
    for (std::size_t i = 0; i < d; ++i) gt[index * d + i] += g[i];
  });
}

Tensor relu(const Tensor& x) {
  // Subgradient at exactly 0 is 0.
  return unary(
      x, [](double v) { return v < 0.0 ? 0.0 : v; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary(x, softplus_value, sigmoid_value);
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_value, [](double v) {
    const double s = sigmoid_value(v);
    return s * (1.0 - s);
  });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(x);
    case Activation::softplus:
      return softplus(x);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  throw ContractError("unknown activation");
}

Tensor softmax(const Tensor& x) {
  auto xv = x.values();
  const double hi = *std::max_element(xv.begin(), xv.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(xv[i] - hi);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  std::vector<double> probs = out;
  Tensor X = x;
  return Tensor::make_op(x.shape(), std::move(out), {x}, [X, probs](std::span<const double> g) mutable {
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * probs[i];
    auto gx = X.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += probs[i] * (g[i] - inner);
  });
}

Tensor l2_normalize(const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("l2_normalize requires eps > 0");
  double sq = 0.0;
  for (double v : x.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  const bool guarded = norm <= eps;
  const double denom = guarded ? eps : norm;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / denom;
  std::vector<double> y = out;
  Tensor X = x;
  return Tensor::make_op(x.shape(), std::move(out), {x}, [X, y, denom, guarded](std::span<const double> g) mutable {
    auto gx = X.mutable_grad();
    if (guarded) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / denom;
      return;
    }
    double yg = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) yg += y[i] * g[i];
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += (g[i] - y[i] * yg) / denom;
  });
}

StopGradReplay::StopGradReplay(Mode mode) : mode_(mode), previous_(detail::active_replay) {
  detail::active_replay = this;
}

StopGradReplay::~StopGradReplay() { detail::active_replay = previous_; }

void StopGradReplay::set_mode(Mode mode) {
  mode_ = mode;
  cursor_ = 0;
  if (mode == Mode::record) values_.clear();
}

Tensor stop_grad(const Tensor& x) {
  std::vector<double> v(x.values().begin(), x.values().end());
  if (auto* replay = detail::active_replay) {
    if (replay->mode_ == StopGradReplay::Mode::record) {
      replay->values_.push_back(v);
    } else {
      if (replay->cursor_ >= replay->values_.size() ||
          replay->values_[replay->cursor_].size() != v.size()) {
        throw ContractError("stop_grad replay diverged from the recorded graph");
      }
      v = replay->values_[replay->cursor_++];
    }
  }
  return Tensor::from(x.shape(), std::move(v), false);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Children always carry larger ids than their parents, so popping by
  // descending id visits a node only after all of its consumers.
  auto by_id = [](const detail::Node* a, const detail::Node* b) { return a->id < b->id; };
  std::priority_queue<detail::Node*, std::vector<detail::Node*>, decltype(by_id)> frontier(by_id);
  frontier.push(loss.node_.get());
  loss.node_->grad[0] += 1.0;
  std::uint64_t last = 0;
  while (!frontier.empty()) {
    detail::Node* n = frontier.top();
    frontier.pop();
    if (n->id == last) continue;
    last = n->id;
    if (n->backward) n->backward(n->grad);
    for (const auto& p : n->parents) frontier.push(p.get());
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractError("grad_check eps must lie in [1e-7, 1e-3]");
  }
  GradCheckResult result;
  StopGradReplay replay(StopGradReplay::Mode::record);

  zero_grads(params);
  Tensor loss = f();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: f is not finite");
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  replay.set_mode(StopGradReplay::Mode::replay);
  auto evaluate = [&]() {
    replay.set_mode(StopGradReplay::Mode::replay);
    const double v = f().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: f is not finite");
    return v;
  };

  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& a = analytic[p];
    const bool dead = std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
    if (dead) {
      ++result.stopped_parameters;
      continue;
    }
    auto values = params[p].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double plus = evaluate();
      values[i] = original - eps;
      const double minus = evaluate();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(a[i] - numeric) / denom;
      ++result.coordinates_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p;
        result.worst_index = i;
        result.worst_analytic = a[i];
        result.worst_numeric = numeric;
      }
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace easq
