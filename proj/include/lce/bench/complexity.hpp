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

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "lce/ldm/ldm.hpp"
#include "lce/vae/vae.hpp"

namespace lce::bench {

/// One layer of the analytic cost model. A multiply-accumulate counts as
/// 2 FLOPs; bias additions count 1 FLOP per output element; activations and
/// residual additions are not counted.
struct LayerCost {
    std::string name;
    std::size_t params = 0;
    double flops = 0;  // one forward pass, one sample
};

struct ComponentCost {
    std::vector<LayerCost> layers;
    std::size_t params() const;
    double flops() const;
};

/// Parameter counts and per-inference FLOPs of PSLD-CE for one sample.
///
/// A guided step runs the denoiser, decoder and encoder mean path forward
/// once, then back-propagates twice (likelihood term through decoder and
/// denoiser; gluing term through encoder, decoder and denoiser), each
/// backward pass costed at 2x the forward of the networks it traverses.
/// The total is t_steps guided steps plus the final decode.
struct ComplexityReport {
    ComponentCost encoder;       // trunk + both heads (params); mean path (flops)
    ComponentCost decoder;
    ComponentCost denoiser;
    int t_steps = 0;

    std::size_t vae_params() const { return encoder.params() + decoder.params(); }
    std::size_t total_params() const { return vae_params() + denoiser.params(); }
    double encoder_flops() const;  // excludes the log-variance head
    double decoder_flops() const { return decoder.flops(); }
    double denoiser_step_flops() const { return denoiser.flops(); }
    double guided_step_flops() const;
    double total_flops() const;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// Analytic report from configurations alone.
ComplexityReport estimate_flops(const vae::VaeConfig& v, const ldm::DenoiserConfig& d, int t_steps = 0);

/// Report for trained checkpoints. Parameter counts come from the stored
/// tensors; throws Error if they disagree with the analytic model.
ComplexityReport count_params(const vae::TrainedVae& v, const ldm::TrainedDenoiser& d, int t_steps = 0);

}  // namespace lce::bench
