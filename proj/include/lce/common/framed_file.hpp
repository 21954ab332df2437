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

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace lce {

/// Shared container for the binary formats: 4 magic bytes, a little-endian
/// u32 header length, a UTF-8 JSON header, then a raw little-endian f32
/// payload. The header must say how many payload values follow
/// (`payload_count`); it is added automatically on write.
struct FramedFile {
    nlohmann::json header;
    std::vector<float> payload;
};

void write_framed(const std::string& path, const char (&magic)[5], nlohmann::json header,
                  std::span<const float> payload);
/// Throws IoError on a missing file, wrong magic, or truncated payload.
FramedFile read_framed(const std::string& path, const char (&magic)[5]);

}  // namespace lce
