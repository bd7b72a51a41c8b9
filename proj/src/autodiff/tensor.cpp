// Copyright 2026 The StageFormer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stageformer/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "stageformer/error.hpp"

namespace stageformer::ad {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local int t_no_grad_depth = 0;

NodePtr new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.size() == 2) return s[0];
  if (s.size() <= 1) return 1;
  throw ShapeError("rows: expected a 1-D or 2-D tensor, got " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() == 2) return s[1];
  if (s.size() == 1) return s[0];
  if (s.empty()) return 1;
  throw ShapeError("cols: expected a 1-D or 2-D tensor, got " + shape_str(s));
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  }
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->value.at(r * cols() + c);
}

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (flag && node_->grad.size() != node_->value.size()) {
    node_->grad.assign(node_->value.size(), 0.0);
  }
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value, false); }

bool grad_enabled() { return t_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++t_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --t_no_grad_depth; }

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) {
      if (t.defined() && t.requires_grad()) {
        track = true;
        break;
      }
    }
  }
  NodePtr node = new_node(std::move(shape), std::move(value), false);
  node->op = op;
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !root.requires_grad()) return tape;

  std::unordered_set<const Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  std::vector<NodePtr> ops;
  if (!root.node()->is_leaf()) ops.push_back(root.node());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (const NodePtr& in : n->inputs) {
      if (!in || !in->requires_grad || !seen.insert(in.get()).second) continue;
      if (in->grad.size() != in->value.size()) in->grad.assign(in->value.size(), 0.0);
      if (!in->is_leaf()) ops.push_back(in);
      stack.push_back(in.get());
    }
  }
  // Intermediate grads restart from zero on every replay; leaves accumulate.
  for (const NodePtr& op : ops) op->grad.assign(op->value.size(), 0.0);
  std::sort(ops.begin(), ops.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->sequence < b->sequence; });
  tape.entries_ = std::move(ops);
  return tape;
}

void Tape::backward(const Tensor& root) const {
  if (!root.defined() || !root.requires_grad()) return;
  Node& r = *root.node();
  if (r.grad.size() != r.value.size()) r.grad.assign(r.value.size(), 0.0);
  r.grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node& n = **it;
    n.backward(n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  Tape::record(loss).backward(loss);
}

}  // namespace stageformer::ad
