// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal define-by-run reverse-mode differentiation over dense float64
// tensors. Every operation records a node; node ids are allocated from a
// monotonically increasing counter, so creation order is a valid topological
// order and backward() simply replays reachable nodes by descending id.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace easq {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  // Receives the gradient of the node being propagated.
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Records an operation result. `backward` is only kept when at least one
  // input requires a gradient.
  static Tensor make_op(Shape shape, std::vector<double> values,
                        const std::vector<Tensor>& inputs, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  std::uint64_t node_id() const;

  void zero_grad();
  // Deep copy of values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend void backward(const Tensor& loss);

  std::shared_ptr<detail::Node> node_;
};

enum class Activation { relu, softplus, sigmoid };

// W [d x k] times x [k] -> [d].
Tensor affine(const Tensor& weight, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Vector times a shape-[1] tensor.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
// Elementwise product with a constant mask (no gradient into the mask).
Tensor mask(const Tensor& a, std::span<const double> keep);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor concat(const std::vector<Tensor>& parts);
Tensor slice(const Tensor& a, std::size_t offset, std::size_t length);
// Row `index` of a [n x d] table; the gradient is scattered into that row.
Tensor row(const Tensor& table, std::size_t index);

Tensor activation(const Tensor& x, Activation kind);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softmax(const Tensor& x);

// x / max(||x||_2, eps).
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

// Value-identical copy that is a leaf of the graph: nothing upstream of `x`
// receives gradient through the returned tensor.
Tensor stop_grad(const Tensor& x);

// Scalar helpers shared by the ops and the losses.
double softplus_value(double x);
double sigmoid_value(double x);

// Accumulates d(loss)/d(t) into every reachable tensor that requires a
// gradient. `loss` must hold exactly one element.
void backward(const Tensor& loss);

void zero_grads(std::span<Tensor> params);

// Records the values leaving every stop_grad() call during one evaluation and
// replays them during later evaluations, so finite differences see stopped
// branches as constants the same way backward() does.
class StopGradReplay {
 public:
  enum class Mode { record, replay };
  explicit StopGradReplay(Mode mode);
  ~StopGradReplay();
  StopGradReplay(const StopGradReplay&) = delete;
  StopGradReplay& operator=(const StopGradReplay&) = delete;

  void set_mode(Mode mode);
  std::size_t recorded() const { return values_.size(); }

 private:
  friend Tensor stop_grad(const Tensor& x);
  Mode mode_;
  std::vector<std::vector<double>> values_;
  std::size_t cursor_ = 0;
  StopGradReplay* previous_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates_checked = 0;
  // Parameters whose analytic gradient is identically zero; not perturbed.
  std::size_t stopped_parameters = 0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of the analytic gradient of `f` with respect to
// `params`. Relative error uses max(|a|, |n|, 1e-8) as denominator.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                           double eps = 1e-6);

}  // namespace easq
