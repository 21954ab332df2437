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

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "lce/channels/channels.hpp"

namespace lce::channels {

/// A stack of channel tensors (count, 2, Nr, Nt) in f32, as stored in an
/// "LCE1" file.
struct Dataset {
    std::size_t count = 0, nr = 0, nt = 0;
    std::vector<float> values;
    nlohmann::json generator;  // config echo

    std::size_t sample_size() const { return 2 * nr * nt; }
    ChannelMatrix channel(std::size_t i) const;
    std::vector<ChannelMatrix> channels() const;
    /// Stacks the selected samples into an (n, 2, Nr, Nt) tensor.
    ad::Tensor<float> batch(std::span<const std::size_t> indices) const;
    ad::Tensor<float> all() const;
};

Dataset make_dataset(std::span<const ChannelMatrix> hs, nlohmann::json generator = {});

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

nlohmann::json config_to_json(const ChannelModelConfig& cfg);

enum class Split { Train = 1, Val = 2, Test = 3 };
std::string to_string(Split s);

/// Seed of the realization stream of one split; the three splits never
/// share a realization seed.
std::uint64_t split_seed(std::uint64_t seed, Split s);

/// Generates one split as a dataset (realization i of split s uses
/// derive_seed(split_seed(seed, s), i)).
Dataset generate_split(const ChannelModelConfig& cfg, Split s, std::size_t count, std::uint64_t seed);

/// Writes <dir>/{train,val,test}.lce1. Returns the three paths.
std::array<std::string, 3> gen_dataset(const ChannelModelConfig& cfg, std::array<std::size_t, 3> sizes,
                                       std::uint64_t seed, const std::string& dir);

}  // namespace lce::channels
