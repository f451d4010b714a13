// Copyright 2026 The Prosodia Authors
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

#include "prosodia/nn/tensor.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <unordered_set>

#include "prosodia/error.hpp"

namespace prosodia::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, " x ")); }

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape.empty()) throw ValidationError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw ValidationError(fmt::format("tensor shape {} has a zero extent", shape_string(shape)));
  }
  if (shape_size(shape) != values.size()) {
    throw ValidationError(
        fmt::format("tensor shape {} needs {} values, got {}", shape_string(shape), shape_size(shape), values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ValidationError(fmt::format("item() on tensor of shape {}", shape_string(shape())));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void Tensor::clear_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

Tensor Tensor::clone() const {
  Tensor t = constant(node_->shape, node_->value);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ValidationError("backward on an undefined tensor");
  if (loss.size() != 1) {
    throw ValidationError(fmt::format("backward needs a scalar loss, got shape {}", shape_string(loss.shape())));
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;
  if (root->consumed) throw ValidationError("double backward through the same graph is not supported");

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->is_leaf) continue;
    if (node->consumed) throw ValidationError("double backward through the same graph is not supported");
    if (node->backward && !node->grad.empty()) node->backward(*node);
    node->consumed = true;
    node->backward = nullptr;
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace prosodia::nn
