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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lce/autodiff/tensor.hpp"
#include "lce/common/rng.hpp"

namespace lce::testing {

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // stencil straddles a kink (see below)
};

/// Central finite differences (f64) on up to `samples` random coordinates
/// across `leaves`, against the reverse-mode gradient of `loss`.
///
/// Each coordinate is differenced with steps h and h/2. The two must agree
/// to 1e-5 relative, otherwise a ReLU kink lies inside the stencil, the
/// function is not differentiable there and the coordinate is skipped
/// (the decision never looks at the analytic gradient). Accepted
/// coordinates use the Richardson value (4 D(h/2) - D(h)) / 3.
///
/// Relative error |a - n| / max(|a|, |n|, floor) where floor is 1e-6 of the
/// largest analytic gradient magnitude, so coordinates whose derivative is
/// numerically zero do not dominate.
inline GradCheckResult grad_check(const std::function<ad::Tensor<double>()>& loss,
                                  std::vector<ad::Tensor<double>> leaves, Rng& rng, std::size_t samples = 100,
                                  double step = 1e-4)
{
    for (auto& l : leaves)
        l.zero_grad();
    loss().backward();
    double gmax = 0;
    for (const auto& l : leaves)
        for (double g : l.grad())
            gmax = std::max(gmax, std::abs(g));
    const double floor = std::max(1e-6 * gmax, 1e-12);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t i = 0; i < leaves.size(); ++i)
        for (std::size_t j = 0; j < leaves[i].numel(); ++j)
            coords.emplace_back(i, j);
    const auto perm = rng.permutation(coords.size());

    GradCheckResult r;
    for (std::size_t k = 0; k < coords.size() && r.checked < samples; ++k) {
        const auto [i, j] = coords[perm[k]];
        auto w = leaves[i].mutable_data();
        const double orig = w[j];
        ad::NoGradGuard no_grad;
        auto central = [&](double h) {
            w[j] = orig + h;
            const double up = loss().item();
            w[j] = orig - h;
            const double down = loss().item();
            w[j] = orig;
            return (up - down) / (2 * h);
        };
        const double d1 = central(step), d2 = central(step / 2);
        if (std::abs(d1 - d2) > 1e-5 * std::max(std::abs(d2), floor)) {
            ++r.skipped;
            continue;
        }
        const double numeric = (4 * d2 - d1) / 3;
        const double analytic = leaves[i].grad()[j];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
        ++r.checked;
    }
    return r;
}

}  // namespace lce::testing
