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

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace lce {

/// splitmix64 mix of (seed, index). Used wherever a stream needs a
/// reproducible child stream (per realization, per epoch, per split).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Explicit random source. Every stochastic operation in the library takes
/// one of these by reference; there is no hidden global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    /// Uniform integer on [lo, hi] inclusive.
    int uniform_int(int lo, int hi);

    double normal();

    /// Circularly-symmetric complex Gaussian CN(0, 1).
    std::complex<double> complex_normal();

    /// Zero-mean Laplace with the given scale parameter.
    double laplace(double scale);

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lce
