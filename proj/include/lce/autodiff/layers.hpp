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

#include <cmath>
#include <string>

#include "lce/autodiff/param_store.hpp"

// Parameter registration with the usual uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
// initialization. Weights are stored as "<name>.w", biases as "<name>.b".
namespace lce::ad {

template <class T>
void add_uniform(ParamStore<T>& ps, const std::string& name, Shape shape, std::size_t fan_in, Rng& rng)
{
    const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
    ps.add(name, Tensor<T>::uniform(std::move(shape), rng, -bound, bound));
}

/// Conv2d weight (out, in, k, k) + bias (out).
template <class T>
void add_conv(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k, Rng& rng)
{
    add_uniform(ps, name + ".w", {out, in, k, k}, in * k * k, rng);
    add_uniform(ps, name + ".b", {out}, in * k * k, rng);
}

/// ConvTranspose2d weight (in, out, k, k) + bias (out).
template <class T>
void add_conv_transpose(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                        Rng& rng)
{
    add_uniform(ps, name + ".w", {in, out, k, k}, out * k * k, rng);
    add_uniform(ps, name + ".b", {out}, out * k * k, rng);
}

/// Linear weight (out, in) + bias (out).
template <class T>
void add_linear(ParamStore<T>& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
{
    add_uniform(ps, name + ".w", {out, in}, in, rng);
    add_uniform(ps, name + ".b", {out}, in, rng);
}

}  // namespace lce::ad
