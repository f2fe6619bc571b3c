// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cvtassd {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

/// One recorded operation in the computation graph. The closure reads the
/// gradient of the op's output and accumulates into the inputs' gradients.
struct GraphNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const float> grad_out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  std::shared_ptr<GraphNode> node;

  /// Gradient buffer, allocated zero-filled on first use.
  std::span<float> grad_buffer();
};

/// Dense row-major float32 tensor handle. Copies share storage; use clone()
/// for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0f); }
  static Tensor scalar(float v) { return Tensor(Shape{1}, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t dim(int axis) const;  // negative axes count from the back
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;
  float at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> grad_mut();
  void zero_grad();

  /// True when this tensor was produced by a recorded op.
  bool has_graph() const;

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// requires_grad leaf; the recorded graph is released afterwards.
  void backward() const;

  Tensor clone() const;   // deep copy of data, no graph, no grad
  Tensor detach() const;  // alias of data without graph (copies)

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

namespace detail {

/// Builds an op result. Records a graph node when grad mode is on and any
/// input requires grad; otherwise the closure is dropped.
Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const float>)> backward);

/// Gradient buffer of an input inside a backward closure, or an empty span
/// when that input does not take gradients.
std::span<float> grad_of(const std::shared_ptr<TensorImpl>& impl);

}  // namespace detail

}  // namespace cvtassd
