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

// Training drivers shared by the CLI and the acceptance harness. Every
// stage reads its settings from one Config; missing keys take the profile
// defaults below.

#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>

#include "lce/bench/config.hpp"
#include "lce/channels/dataset_io.hpp"
#include "lce/ldm/ldm.hpp"
#include "lce/vae/vae.hpp"

namespace lce::bench {

/// [data] section: nt, nr, n_clusters, rays_per_cluster, angle_spread_deg,
/// geometry (fixed | per_realization), geometry_seed, seed, n_train, n_val,
/// n_test, dir.
struct DataSettings {
    channels::ChannelModelConfig channel;
    std::array<std::size_t, 3> sizes{};  // train, val, test
    std::uint64_t seed = 0;
    std::string dir = "data";
};

/// Full: (10000, 1000, 1000). Small: (2000, 200, 200).
std::array<std::size_t, 3> default_split_sizes(channels::Profile p);

channels::Profile config_profile(const Config& cfg);
DataSettings data_settings(const Config& cfg);

/// [vae] section: latent_channels, downsample, w1, w2, kl_weight, lr,
/// batch_size, epochs, init_seed; plus `seed` (training shuffles/noise) and
/// `out`. nt / nr always follow the data section.
vae::VaeConfig vae_settings(const Config& cfg);
std::uint64_t vae_train_seed(const Config& cfg);

/// [ldm] section: width, n_resblocks, time_embed_dim, steps (T; the beta
/// endpoints follow DenoiserConfig::set_steps unless beta_start / beta_end
/// are given), lr, batch_size, epochs, init_seed, variance (beta_tilde |
/// beta), seed, out. The latent shape is taken from `vae`. Small profile
/// defaults to T = 200, Full to T = 1000.
ldm::DenoiserConfig denoiser_settings(const Config& cfg, const vae::VaeConfig& vae);
std::uint64_t ldm_train_seed(const Config& cfg);

/// Paths of the three split files under `dir`.
std::string split_path(const std::string& dir, channels::Split s);

/// Reads a split, turning a missing file into an error that names the
/// command producing it.
channels::Dataset load_split(const std::string& dir, channels::Split s);

struct LatentSet {
    ad::Tensor<float> latents;  // (N, C', h, w), divided by latent_scale
    double latent_scale = 1;    // global std of the raw encoder means
};

/// Encoder means of every sample (data scaled by 1/data_scale), standardized.
LatentSet encode_latents(const vae::TrainedVae& v, const channels::Dataset& ds, std::size_t chunk = 256);

/// Trains on <dir>/train.lce1 (validating on val.lce1), saves to `out` and
/// logs one line per epoch to `log`.
vae::TrainedVae run_train_vae(const Config& cfg, const std::string& out, std::ostream& log);

/// Trains the denoiser on the latents of the frozen VAE at `vae_path`.
ldm::TrainedDenoiser run_train_ldm(const Config& cfg, const std::string& vae_path, const std::string& out,
                                   std::ostream& log);

/// Loaders with the same "run this first" errors as load_split.
vae::TrainedVae load_vae_checkpoint(const std::string& path);
ldm::TrainedDenoiser load_denoiser_checkpoint(const std::string& path);

}  // namespace lce::bench
