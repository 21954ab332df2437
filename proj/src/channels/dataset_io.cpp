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

#include "lce/channels/dataset_io.hpp"

#include <filesystem>

#include "lce/common/error.hpp"
#include "lce/common/framed_file.hpp"

namespace lce::channels {

namespace {
constexpr char kMagic[5] = "LCE1";
}

ChannelMatrix Dataset::channel(std::size_t i) const
{
    if (i >= count)
        throw ShapeError("dataset index " + std::to_string(i) + " out of range");
    const std::size_t per = sample_size();
    ad::Tensor<float> t(ad::Shape{1, 2, nr, nt},
                        std::vector<float>(values.begin() + static_cast<std::ptrdiff_t>(i * per),
                                           values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    return tensor_to_channel(t);
}

std::vector<ChannelMatrix> Dataset::channels() const
{
    return tensor_to_channels(all());
}

ad::Tensor<float> Dataset::batch(std::span<const std::size_t> indices) const
{
    const std::size_t per = sample_size();
    std::vector<float> v(indices.size() * per);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= count)
            throw ShapeError("dataset index " + std::to_string(indices[k]) + " out of range");
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(indices[k] * per), per,
                    v.begin() + static_cast<std::ptrdiff_t>(k * per));
    }
    return ad::Tensor<float>(ad::Shape{indices.size(), 2, nr, nt}, std::move(v));
}

ad::Tensor<float> Dataset::all() const
{
    return ad::Tensor<float>(ad::Shape{count, 2, nr, nt}, values);
}

Dataset make_dataset(std::span<const ChannelMatrix> hs, nlohmann::json generator)
{
    const auto t = channels_to_tensor<float>(hs);
    Dataset ds;
    ds.count = t.dim(0);
    ds.nr = t.dim(2);
    ds.nt = t.dim(3);
    ds.values.assign(t.data().begin(), t.data().end());
    ds.generator = std::move(generator);
    return ds;
}

void write_dataset(const std::string& path, const Dataset& ds)
{
    nlohmann::json header{{"format", "LCE1"},
                          {"version", 1},
                          {"dims", {ds.count, 2, ds.nr, ds.nt}},
                          {"dtype", "f32le"},
                          {"layout", "row-major (count, re/im, rx, tx)"},
                          {"generator", ds.generator.is_null() ? nlohmann::json::object() : ds.generator}};
    write_framed(path, kMagic, std::move(header), ds.values);
}

Dataset read_dataset(const std::string& path)
{
    FramedFile f = read_framed(path, kMagic);
    if (f.header.value("dtype", "") != "f32le")
        throw IoError("'" + path + "': unsupported dtype");
    const auto dims = f.header.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 4 || dims[1] != 2)
        throw IoError("'" + path + "': dims must be (count, 2, Nr, Nt)");
    Dataset ds;
    ds.count = dims[0];
    ds.nr = dims[2];
    ds.nt = dims[3];
    if (f.payload.size() != ds.count * ds.sample_size())
        throw IoError("'" + path + "': payload size does not match dims");
    ds.values = std::move(f.payload);
    ds.generator = f.header.value("generator", nlohmann::json::object());
    return ds;
}

nlohmann::json config_to_json(const ChannelModelConfig& cfg)
{
    return {{"nt", cfg.nt},
            {"nr", cfg.nr},
            {"n_clusters", cfg.n_clusters},
            {"rays_per_cluster", cfg.rays_per_cluster},
            {"angle_spread_deg", cfg.angle_spread_deg},
            {"seed", cfg.seed},
            {"profile", to_string(cfg.profile)},
            {"geometry", cfg.geometry == Geometry::Fixed ? "fixed" : "per_realization"}};
}

std::string to_string(Split s)
{
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

std::uint64_t split_seed(std::uint64_t seed, Split s)
{
    return derive_seed(seed, 0x73706c00ULL + static_cast<std::uint64_t>(s));
}

Dataset generate_split(const ChannelModelConfig& cfg, Split s, std::size_t count, std::uint64_t seed)
{
    if (count == 0)
        throw ConfigError("split '" + to_string(s) + "' must hold at least one realization");
    const auto hs = generate_channels(cfg, count, split_seed(seed, s));
    auto echo = config_to_json(cfg);
    echo["split"] = to_string(s);
    echo["split_seed"] = seed;
    return make_dataset(hs, std::move(echo));
}

std::array<std::string, 3> gen_dataset(const ChannelModelConfig& cfg, std::array<std::size_t, 3> sizes,
                                       std::uint64_t seed, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    std::array<std::string, 3> paths;
    const Split splits[3] = {Split::Train, Split::Val, Split::Test};
    for (int i = 0; i < 3; ++i) {
        paths[i] = (std::filesystem::path(dir) / (to_string(splits[i]) + ".lce1")).string();
        write_dataset(paths[i], generate_split(cfg, splits[i], sizes[i], seed));
    }
    return paths;
}

}  // namespace lce::channels
