// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The lce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lce/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "lce/common/error.hpp"

namespace lce::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? ", " : "") << shape[i];
    os << ')';
    return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled)
{
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard()
{
    g_grad_enabled = previous_;
}

bool grad_enabled()
{
    return g_grad_enabled;
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill)
    : Tensor(shape, std::vector<T>(shape_numel(shape), fill))
{
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
{
    for (auto d : shape)
        if (d == 0)
            throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    if (values.size() != shape_numel(shape))
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    node_ = std::make_shared<detail::Node<T>>();
    node_->shape = std::move(shape);
    node_->value.assign(values.begin(), values.end());
}

template <class T>
Tensor<T> Tensor<T>::randn(Shape shape, Rng& rng, T stddev)
{
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v)
        x = static_cast<T>(rng.normal()) * stddev;
    return Tensor(std::move(shape), std::move(v));
}

template <class T>
Tensor<T> Tensor<T>::uniform(Shape shape, Rng& rng, T lo, T hi)
{
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v)
        x = static_cast<T>(rng.uniform(lo, hi));
    return Tensor(std::move(shape), std::move(v));
}

template <class T>
const Shape& Tensor<T>::shape() const
{
    if (!node_)
        throw UsageError("use of an undefined tensor");
    return node_->shape;
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t i) const
{
    const auto& s = shape();
    if (i >= s.size())
        throw ShapeError("dimension index " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[i];
}

template <class T>
std::size_t Tensor<T>::numel() const
{
    return shape_numel(shape());
}

template <class T>
std::span<const T> Tensor<T>::data() const
{
    shape();
    return node_->value;
}

template <class T>
std::span<T> Tensor<T>::mutable_data()
{
    shape();
    if (!node_->is_leaf())
        throw UsageError("mutable_data() on the output of a tracked op");
    return node_->value;
}

template <class T>
T Tensor<T>::item() const
{
    if (numel() != 1)
        throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

template <class T>
bool Tensor<T>::requires_grad() const
{
    return node_ && node_->requires_grad;
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on)
{
    shape();
    if (!node_->is_leaf())
        throw UsageError("requires_grad can only be set on leaf tensors");
    node_->requires_grad = on;
    return *this;
}

template <class T>
bool Tensor<T>::has_grad() const
{
    return node_ && !node_->grad.empty();
}

template <class T>
std::span<const T> Tensor<T>::grad() const
{
    shape();
    return node_->grad;
}

template <class T>
std::span<T> Tensor<T>::mutable_grad()
{
    shape();
    return node_->grad_buffer();
}

template <class T>
void Tensor<T>::zero_grad()
{
    if (node_ && !node_->grad.empty())
        std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const
{
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = shape();
    n->value = node_->value;
    return from_node(std::move(n));
}

template <class T>
Tensor<T> Tensor<T>::from_node(NodePtr node)
{
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

template <class T>
void Tensor<T>::backward(bool retain_graph) const
{
    using Node = detail::Node<T>;
    if (!node_ || !node_->requires_grad)
        throw UsageError("backward() on a tensor that does not track gradients");
    if (node_->value.size() != 1)
        throw UsageError("backward() requires a scalar, got shape " + shape_str(node_->shape));

    // Iterative post-order DFS; `order` ends up with parents before children.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p && p->requires_grad && visited.insert(p).second)
                stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (!n->is_leaf())
            n->grad.clear();
    if (!node_->is_leaf())
        node_->grad_buffer()[0] = T(1);
    else
        node_->grad_buffer()[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->is_leaf())
            continue;
        if (!n->grad.empty())
            n->backward_fn(*n);
    }

    for (Node* n : order) {
        if (n->is_leaf())
            continue;
        n->grad.clear();
        n->grad.shrink_to_fit();
        if (!retain_graph) {
            // Keep the node marked as non-leaf so a second sweep is refused.
            n->backward_fn = [](Node&) {
                throw UsageError("backward() through a graph that was already freed; pass retain_graph");
            };
            n->parents.clear();
        }
    }
}

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, Buffer<T> value, std::vector<std::shared_ptr<Node<T>>> inputs,
                      std::function<void(Node<T>&)> backward_fn)
{
    if (value.size() != shape_numel(shape))
        throw ShapeError("op produced " + std::to_string(value.size()) + " values for shape " + shape_str(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    auto out = Tensor<T>::from_node(std::move(n));
    if (!grad_enabled())
        return out;
    const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                     [](const auto& n) { return n && n->requires_grad; });
    if (!tracked)
        return out;
    auto& node = *out.node();
    node.requires_grad = true;
    node.parents = std::move(inputs);
    node.backward_fn = std::move(backward_fn);
    return out;
}

template Tensor<float> make_result(Shape, Buffer<float>, std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, Buffer<double>, std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace lce::ad
