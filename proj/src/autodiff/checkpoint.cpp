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

#include "lce/autodiff/checkpoint.hpp"

#include <fstream>

#include "lce/common/error.hpp"
#include "lce/common/framed_file.hpp"

namespace lce::ad {

namespace {

constexpr char kMagic[5] = "LCEW";
const std::string kFirst = "adam.m/";
const std::string kSecond = "adam.v/";

struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
};

std::vector<Entry> entries_of(const nlohmann::json& header, std::size_t payload_size, const std::string& path)
{
    std::vector<Entry> out;
    std::size_t offset = 0;
    for (const auto& t : header.at("tensors")) {
        if (t.value("dtype", "") != "f32le")
            throw IoError("'" + path + "': unsupported dtype for " + t.value("name", "?"));
        Entry e{t.at("name").get<std::string>(), t.at("shape").get<Shape>(), offset};
        offset += shape_numel(e.shape);
        out.push_back(std::move(e));
    }
    if (offset != payload_size)
        throw IoError("'" + path + "': header describes " + std::to_string(offset) + " values, payload has " +
                      std::to_string(payload_size));
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, ParamStore<float>& store, const nlohmann::json& meta)
{
    nlohmann::json tensors = nlohmann::json::array();
    std::vector<float> payload;
    auto push = [&](const std::string& name, const Shape& shape, std::span<const float> values) {
        tensors.push_back({{"name", name}, {"shape", shape}, {"dtype", "f32le"}});
        payload.insert(payload.end(), values.begin(), values.end());
    };
    for (const auto& n : store.names())
        push(n, store.get(n).shape(), store.get(n).data());
    if (store.has_moments())
        for (const auto& n : store.names()) {
            push(kFirst + n, store.get(n).shape(), store.first_moment(n));
            push(kSecond + n, store.get(n).shape(), store.second_moment(n));
        }
    nlohmann::json header{{"format", "LCEW"}, {"version", 1}, {"step", store.step()}, {"tensors", tensors},
                          {"meta", meta.is_null() ? nlohmann::json::object() : meta}};
    write_framed(path, kMagic, std::move(header), payload);
}

nlohmann::json load_checkpoint(const std::string& path, ParamStore<float>& store)
{
    const FramedFile f = read_framed(path, kMagic);
    const auto entries = entries_of(f.header, f.payload.size(), path);
    std::size_t loaded = 0;
    bool moments = false;
    for (const auto& e : entries) {
        std::string base = e.name;
        std::vector<float>* target = nullptr;
        if (e.name.rfind(kFirst, 0) == 0) {
            base = e.name.substr(kFirst.size());
            target = &store.first_moment(base);
            moments = true;
        } else if (e.name.rfind(kSecond, 0) == 0) {
            base = e.name.substr(kSecond.size());
            target = &store.second_moment(base);
            moments = true;
        }
        if (!store.contains(base))
            throw IoError("'" + path + "': unexpected tensor '" + e.name + "'");
        auto& p = store.get(base);
        if (p.shape() != e.shape)
            throw IoError("'" + path + "': tensor '" + e.name + "' has shape " + shape_str(e.shape) +
                          ", model expects " + shape_str(p.shape()));
        const auto* src = f.payload.data() + e.offset;
        if (target) {
            std::copy_n(src, target->size(), target->begin());
        } else {
            auto dst = p.mutable_data();
            std::copy_n(src, dst.size(), dst.begin());
            ++loaded;
        }
    }
    if (loaded != store.size())
        throw IoError("'" + path + "': holds " + std::to_string(loaded) + " of " + std::to_string(store.size()) +
                      " model tensors");
    store.set_step(moments ? f.header.value("step", std::int64_t{0}) : 0);
    return f.header.value("meta", nlohmann::json::object());
}

ParamStore<float> read_checkpoint(const std::string& path)
{
    const FramedFile f = read_framed(path, kMagic);
    ParamStore<float> store;
    for (const auto& e : entries_of(f.header, f.payload.size(), path)) {
        if (e.name.rfind("adam.", 0) == 0)
            continue;
        const auto* src = f.payload.data() + e.offset;
        store.add(e.name, Tensor<float>(e.shape, std::vector<float>(src, src + shape_numel(e.shape))));
    }
    return store;
}

void write_sidecar(const std::string& checkpoint_path, const nlohmann::json& j)
{
    const auto path = checkpoint_path + ".json";
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out)
        throw IoError("write to '" + path + "' failed");
}

nlohmann::json read_sidecar(const std::string& checkpoint_path)
{
    const auto path = checkpoint_path + ".json";
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open sidecar '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

}  // namespace lce::ad
