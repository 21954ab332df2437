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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "lce/common/rng.hpp"

namespace lce::ad {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned allocator for tensor storage. Vectorized kernels peel
/// loops according to the runtime address, so without a fixed alignment the
/// float summation order (and hence the last bits of a result) would depend
/// on where the heap happened to place a buffer.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the dynamic backward graph. Values are immutable after the
// producing op returns; `grad` is allocated lazily on first accumulation.
template <class T>
struct Node {
    Shape shape;
    Buffer<T> value;
    Buffer<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    Buffer<T>& grad_buffer()
    {
        if (grad.empty())
            grad.assign(value.size(), T(0));
        return grad;
    }
};

}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Dense row-major real tensor with optional reverse-mode tracking.
///
/// A Tensor is a cheap handle; copies alias the same storage. Ops never
/// mutate their inputs. Leaves (tensors not produced by a tracked op) may be
/// written through `mutable_data()`, which is how optimizers update weights.
template <class T>
class Tensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> values);

    static Tensor randn(Shape shape, Rng& rng, T stddev = T(1));
    static Tensor uniform(Shape shape, Rng& rng, T lo, T hi);
    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const;

    std::span<const T> data() const;
    /// Writable view of a leaf's values. Throws UsageError on op outputs.
    std::span<T> mutable_data();
    T item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_grad() const;
    /// Accumulated gradient; empty span when none has been accumulated.
    std::span<const T> grad() const;
    std::span<T> mutable_grad();
    void zero_grad();

    /// A new untracked leaf holding a copy of the values.
    Tensor detach() const;
    /// Deep copy as an untracked leaf; alias of detach() kept for readability.
    Tensor clone() const { return detach(); }

    /// Reverse sweep from this scalar. Leaf gradients accumulate; interior
    /// gradients are reset at the start of every sweep. With
    /// `retain_graph == false` the interior closures are released afterwards
    /// so a second sweep raises UsageError.
    void backward(bool retain_graph = false) const;

    const NodePtr& node() const { return node_; }
    static Tensor from_node(NodePtr node);

private:
    NodePtr node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

namespace detail {

/// Wraps a freshly computed value as an op output, recording the backward
/// closure only when some input is tracked and recording is enabled.
template <class T>
Tensor<T> make_result(Shape shape, Buffer<T> value,
                      std::vector<std::shared_ptr<Node<T>>> inputs,
                      std::function<void(Node<T>&)> backward_fn);

/// Converts between precisions (untracked).
template <class To, class From>
Tensor<To> cast(const Tensor<From>& t)
{
    std::vector<To> v(t.data().begin(), t.data().end());
    return Tensor<To>(t.shape(), std::move(v));
}

}  // namespace detail

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t)
{
    return detail::cast<To>(t);
}

}  // namespace lce::ad
