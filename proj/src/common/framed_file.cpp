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

#include "lce/common/framed_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "lce/common/error.hpp"

namespace lce {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

void write_framed(const std::string& path, const char (&magic)[5], nlohmann::json header,
                  std::span<const float> payload)
{
    header["payload_count"] = payload.size();
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    const auto len = static_cast<std::uint32_t>(text.size());
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out)
        throw IoError("write to '" + path + "' failed");
}

FramedFile read_framed(const std::string& path, const char (&magic)[5])
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    char got[4];
    std::uint32_t len = 0;
    in.read(got, 4);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(got, magic, 4) != 0)
        throw IoError("'" + path + "' is not a " + std::string(magic) + " file");
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in)
        throw IoError("'" + path + "': truncated header");
    FramedFile f;
    try {
        f.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "': malformed header: " + e.what());
    }
    const auto count = f.header.value("payload_count", std::size_t{0});
    f.payload.resize(count);
    in.read(reinterpret_cast<char*>(f.payload.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in)
        throw IoError("'" + path + "': truncated payload");
    return f;
}

}  // namespace lce
