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

#include <string>

#include <json.hpp>

#include "lce/autodiff/param_store.hpp"

namespace lce::ad {

/// Writes an "LCEW" checkpoint: header lists (name, shape, dtype) per tensor
/// and the optimizer step; Adam moments, when present, are stored as extra
/// tensors "adam.m/<name>" and "adam.v/<name>". `meta` is copied into the
/// header under "meta".
void save_checkpoint(const std::string& path, ParamStore<float>& store, const nlohmann::json& meta = {});

/// Loads values (and optimizer state, if stored) into a store that already
/// holds parameters of the same names and shapes. Returns the header "meta".
nlohmann::json load_checkpoint(const std::string& path, ParamStore<float>& store);

/// Parameter tensors of a checkpoint without a prebuilt store (optimizer
/// state skipped).
ParamStore<float> read_checkpoint(const std::string& path);

/// JSON sidecar stored next to a checkpoint as `<path>.json`.
void write_sidecar(const std::string& checkpoint_path, const nlohmann::json& j);
nlohmann::json read_sidecar(const std::string& checkpoint_path);

}  // namespace lce::ad
