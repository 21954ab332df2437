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

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "lce/autodiff/tensor.hpp"

namespace lce::ad {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Named trainable parameters plus Adam state. Iteration order is insertion
/// order, which fixes the checkpoint layout and the update order.
template <class T>
class ParamStore {
public:
    /// Registers `value` as a trainable leaf. Names must be unique.
    Tensor<T>& add(const std::string& name, Tensor<T> value);
    Tensor<T>& get(const std::string& name);
    const Tensor<T>& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    /// Total scalar parameter count.
    std::size_t numel() const;

    void zero_grad();
    /// Toggles gradient tracking on every parameter, e.g. to freeze a model
    /// used only as a differentiable map at inference time.
    void set_requires_grad(bool on);
    /// One bias-corrected Adam update. Every parameter must carry a gradient;
    /// a missing one raises UsageError before anything is modified.
    void adam_step(const AdamOptions& opt);

    std::int64_t step() const { return step_; }
    void set_step(std::int64_t s) { step_ = s; }
    /// Moment buffers, allocated on first use; same order as names().
    std::vector<T>& first_moment(const std::string& name);
    std::vector<T>& second_moment(const std::string& name);
    bool has_moments() const { return !m_.empty(); }

    /// Copies values (not gradients or optimizer state) into a new store of
    /// another precision.
    template <class U>
    ParamStore<U> cast() const
    {
        ParamStore<U> out;
        for (const auto& n : names_)
            out.add(n, tensor_cast<U>(get(n)));
        return out;
    }

private:
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
    std::deque<Tensor<T>> params_;  // stable references across add()
    std::vector<std::vector<T>> m_, v_;
    std::int64_t step_ = 0;

    void ensure_moments();
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace lce::ad
