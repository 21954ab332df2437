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

#include "lce/autodiff/param_store.hpp"

#include <cmath>

#include "lce/common/error.hpp"

namespace lce::ad {

template <class T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value)
{
    if (contains(name))
        throw UsageError("duplicate parameter name '" + name + "'");
    if (!value.defined())
        throw UsageError("parameter '" + name + "' is undefined");
    if (has_moments())
        throw UsageError("cannot add parameters after optimizer state exists");
    value.set_requires_grad(true);
    index_[name] = params_.size();
    names_.push_back(name);
    params_.push_back(std::move(value));
    return params_.back();
}

template <class T>
Tensor<T>& ParamStore<T>::get(const std::string& name)
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw UsageError("unknown parameter '" + name + "'");
    return params_[it->second];
}

template <class T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw UsageError("unknown parameter '" + name + "'");
    return params_[it->second];
}

template <class T>
std::size_t ParamStore<T>::numel() const
{
    std::size_t n = 0;
    for (const auto& p : params_)
        n += p.numel();
    return n;
}

template <class T>
void ParamStore<T>::zero_grad()
{
    for (auto& p : params_)
        p.zero_grad();
}

template <class T>
void ParamStore<T>::set_requires_grad(bool on)
{
    for (auto& p : params_)
        p.set_requires_grad(on);
}

template <class T>
void ParamStore<T>::ensure_moments()
{
    if (!m_.empty())
        return;
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), T(0));
        v_.emplace_back(p.numel(), T(0));
    }
}

template <class T>
std::vector<T>& ParamStore<T>::first_moment(const std::string& name)
{
    get(name);
    ensure_moments();
    return m_[index_.at(name)];
}

template <class T>
std::vector<T>& ParamStore<T>::second_moment(const std::string& name)
{
    get(name);
    ensure_moments();
    return v_[index_.at(name)];
}

template <class T>
void ParamStore<T>::adam_step(const AdamOptions& opt)
{
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (!params_[i].has_grad())
            throw UsageError("adam_step: parameter '" + names_[i] + "' has no gradient");
    ensure_moments();
    ++step_;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
    const T step_size = static_cast<T>(opt.lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(opt.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].mutable_data();
        const auto g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            w[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
        }
    }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace lce::ad
