#include "idsr/autodiff/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "idsr/error.hpp"

namespace idsr::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  return from(shape, std::vector<T>(shape.numel(), value), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  require(shape.n > 0 && shape.c > 0 && shape.h > 0 && shape.w > 0, Errc::shape_mismatch,
          "tensor dimensions must be positive, got " + shape.str());
  require(values.size() == shape.numel(), Errc::shape_mismatch,
          "tensor data length does not match shape " + shape.str());
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1, 1, 1, 1}, {value}, requires_grad);
}

template <class T>
T& Tensor<T>::at(int n, int c, int y, int x) {
  const Shape& s = node_->shape;
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

template <class T>
T Tensor<T>::at(int n, int c, int y, int x) const {
  const Shape& s = node_->shape;
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

template <class T>
T Tensor<T>::item() const {
  require(numel() == 1, Errc::shape_mismatch, "item() needs a one-element tensor, got " + shape().str());
  return node_->value[0];
}

template <class T>
void Tensor<T>::zero_grad() {
  if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <class T>
void backward(const Tensor<T>& loss) {
  require(loss.defined() && loss.numel() == 1, Errc::shape_mismatch,
          "backward needs a one-element loss tensor");
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;

  // tape: iterative post-order DFS gives a topological order
  std::vector<Node<T>*> tape;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      tape.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : tape) n->ensure_grad();
  for (Node<T>* n : tape)
    if (n->backward) std::fill(n->grad.begin(), n->grad.end(), T(0));
  root->grad[0] += T(1);
  for (auto it = tape.rbegin(); it != tape.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
    if (any) {
      node->requires_grad = true;
      for (auto& p : parents)
        if (p.defined()) node->parents.push_back(p.node_ptr());
      node->backward = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template Tensor<float> make_result<float>(Shape, std::vector<float>, std::vector<Tensor<float>>,
                                          std::function<void(Node<float>&)>);
template Tensor<double> make_result<double>(Shape, std::vector<double>, std::vector<Tensor<double>>,
                                            std::function<void(Node<double>&)>);

}  // namespace idsr::ad
