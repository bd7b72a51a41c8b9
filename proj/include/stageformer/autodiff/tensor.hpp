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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stageformer::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Propagates out.grad into the grads of out.inputs. Only inputs with
// requires_grad set have a grad buffer.
using BackwardFn = std::function<void(Node& out)>;

// One value in the graph. Leaves have no backward function; op results
// that participate in differentiation keep their inputs alive.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t sequence = 0;  // creation order, a valid topological order
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  bool is_leaf() const { return !backward; }
};

// Shared handle to a Node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }
  // 2-D helpers; a 1-D tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  // Writable view. Intended for leaves (parameter updates, finite differences).
  std::span<double> mutable_data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double item() const;
  double at(std::size_t i) const { return node_->value.at(i); }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  void zero_grad();

  // Copy of the values with no graph attachment.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Gradient recording is on by default; a NoGradGuard on the current thread
// turns it off so evaluation builds no graph.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Wraps a freshly computed op output. The result joins the graph only when
// grad mode is on and at least one input requires grad; otherwise inputs and
// the backward function are dropped.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

// Reverse-mode record of every op reachable from a root, in topological
// (creation) order. Rebuilt from the graph on every backward pass.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::span<const NodePtr> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Seeds root.grad with 1 and replays entries in reverse.
  void backward(const Tensor& root) const;

 private:
  std::vector<NodePtr> entries_;
};

// Populates grads of every requires_grad leaf reachable from the scalar
// `loss`. Leaf grads accumulate across calls; call zero_grad between steps.
void backward(const Tensor& loss);

}  // namespace stageformer::ad
