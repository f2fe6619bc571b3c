// SPDX-License-Identifier: Apache-2.0
#include "cvtassd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "cvtassd/errors.hpp"

namespace cvtassd {

namespace {
thread_local bool g_grad_enabled = true;
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::span<float> TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad;
}

static void check_shape(const Shape& shape) {
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] <= 0) {
      throw DimensionError("tensor axis " + std::to_string(i) +
                           " has non-positive size in shape " + shape_str(shape));
    }
  }
}

Tensor::Tensor(Shape shape, float fill) : impl_(std::make_shared<TensorImpl>()) {
  check_shape(shape);
  impl_->data.assign(static_cast<size_t>(shape_numel(shape)), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : impl_(std::make_shared<TensorImpl>()) {
  check_shape(shape);
  if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

const Shape& Tensor::shape() const { return impl_->shape; }

int64_t Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(r));
  }
  return impl_->shape[static_cast<size_t>(a)];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->data.size()); }

std::span<float> Tensor::data() { return impl_->data; }
std::span<const float> Tensor::data() const { return impl_->data; }

float Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

float Tensor::at(std::initializer_list<int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) throw DimensionError("index rank mismatch");
  int64_t flat = 0;
  size_t i = 0;
  for (auto v : index) {
    const int64_t d = impl_->shape[i++];
    if (v < 0 || v >= d) throw DimensionError("index out of range");
    flat = flat * d + v;
  }
  return impl_->data[static_cast<size_t>(flat)];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const float> Tensor::grad() const { return impl_->grad; }
std::span<float> Tensor::grad_mut() { return impl_->grad_buffer(); }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

bool Tensor::has_graph() const { return impl_ && impl_->node != nullptr; }

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const { return clone(); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!impl_->node && !impl_->requires_grad) {
    throw UsageError("backward() on a tensor without a recorded graph");
  }

  // Iterative post-order DFS gives a topological order of graph nodes.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (t->node && next < t->node->inputs.size()) {
      TensorImpl* child = t->node->inputs[next++].get();
      if (child->node && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  impl_->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node) continue;
    t->grad_buffer();
    t->node->backward(t->grad);
  }
  // Release the graph: closures hold references to every intermediate.
  for (TensorImpl* t : order) {
    if (!t->node) continue;
    t->node.reset();
    if (t != impl_.get()) {
      t->grad.clear();
      t->grad.shrink_to_fit();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<float> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const float>)> backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = std::make_shared<GraphNode>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

std::span<float> grad_of(const std::shared_ptr<TensorImpl>& impl) {
  if (!impl->requires_grad) return {};
  return impl->grad_buffer();
}

}  // namespace detail

}  // namespace cvtassd
