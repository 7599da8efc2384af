#include "ctxemo/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace ctxemo::nd {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " +
                            shape_str(node_->shape));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("backward on an undefined tensor");
  if (numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw std::logic_error("backward through a tensor with no recorded history");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    if (!node->grad.empty()) node->backward(*node);
    // Interior gradients are not kept, so a second sweep starts clean.
    node->grad.clear();
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(values), false);
  auto& node = *out.node();
  node.op = op;
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
  if (!any) return out;
  node.requires_grad = true;
  for (auto& p : parents) {
    if (p.defined()) node.parents.push_back(p.node());
  }
  node.backward = std::move(backward);
  return out;
}

}  // namespace detail

}  // namespace ctxemo::nd
