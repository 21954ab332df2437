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

#include <cmath>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/ldm/ldm.hpp"

namespace lce::ldm {

DiffusionSchedule make_schedule(int T, double beta_start, double beta_end)
{
    if (T < 1)
        throw ConfigError("schedule needs T >= 1, got " + std::to_string(T));
    if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1))
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
    DiffusionSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    const auto n = static_cast<std::size_t>(T) + 1;
    s.beta.assign(n, 0.0);
    s.alpha.assign(n, 1.0);
    s.alpha_bar.assign(n, 1.0);
    s.beta_tilde.assign(n, 0.0);
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.beta_tilde[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
    }
    return s;
}

namespace {

void check_t(int t, const DiffusionSchedule& s)
{
    if (t < 1 || t > s.T)
        throw DomainError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(s.T));
}

}  // namespace

template <class T>
Diffused<T> forward_diffuse(const ad::Tensor<T>& z0, int t, const DiffusionSchedule& s, Rng& rng)
{
    check_t(t, s);
    auto eps = ad::Tensor<T>::randn(z0.shape(), rng);
    const T a = static_cast<T>(std::sqrt(s.alpha_bar[t]));
    const T b = static_cast<T>(std::sqrt(1.0 - s.alpha_bar[t]));
    return {ad::add(ad::scale(z0, a), ad::scale(eps, b)), eps};
}

template <class T>
ad::Tensor<T> reverse_mean(const ad::Tensor<T>& zt, const ad::Tensor<T>& eps, int t, const DiffusionSchedule& s)
{
    check_t(t, s);
    const T inv = static_cast<T>(1.0 / std::sqrt(s.alpha[t]));
    const T c = static_cast<T>(s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t]));
    return ad::scale(ad::sub(zt, ad::scale(eps, c)), inv);
}

template <class T>
ad::Tensor<T> ancestral_sample(const DiffusionSchedule& s, const EpsFn<T>& eps, ad::Shape shape, Rng& rng,
                               Variance variance)
{
    ad::NoGradGuard no_grad;
    auto z = ad::Tensor<T>::randn(shape, rng);
    for (int t = s.T; t >= 1; --t) {
        z = reverse_mean(z, eps(z, t), t, s);
        if (t > 1) {
            const double var = variance == Variance::BetaTilde ? s.beta_tilde[t] : s.beta[t];
            z = ad::add(z, ad::Tensor<T>::randn(shape, rng, static_cast<T>(std::sqrt(var))));
        }
    }
    return z;
}

template Diffused<float> forward_diffuse(const ad::Tensor<float>&, int, const DiffusionSchedule&, Rng&);
template Diffused<double> forward_diffuse(const ad::Tensor<double>&, int, const DiffusionSchedule&, Rng&);
template ad::Tensor<float> reverse_mean(const ad::Tensor<float>&, const ad::Tensor<float>&, int,
                                        const DiffusionSchedule&);
template ad::Tensor<double> reverse_mean(const ad::Tensor<double>&, const ad::Tensor<double>&, int,
                                         const DiffusionSchedule&);
template ad::Tensor<float> ancestral_sample(const DiffusionSchedule&, const EpsFn<float>&, ad::Shape, Rng&, Variance);
template ad::Tensor<double> ancestral_sample(const DiffusionSchedule&, const EpsFn<double>&, ad::Shape, Rng&,
                                             Variance);

}  // namespace lce::ldm
