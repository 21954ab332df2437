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

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lce/autodiff/param_store.hpp"
#include "lce/channels/channels.hpp"
#include "lce/channels/dataset_io.hpp"

namespace lce::vae {

struct VaeConfig {
    int nr = 16;
    int nt = 64;
    int latent_channels = 8;
    int downsample = 4;  // f: 2 or 4 (number of stride-2 encoder convs = log2 f)
    int w1 = 32;
    int w2 = 64;
    double kl_weight = 1e-7;
    double lr = 1e-3;
    int batch_size = 16;
    int epochs = 30;
    std::uint64_t init_seed = 1;

    /// Full: (2, 16, 64), f = 4. Small: (2, 4, 16), f = 2.
    static VaeConfig for_profile(channels::Profile p);
    void validate() const;
    ad::Shape in_shape() const;
    ad::Shape latent_shape() const;
    double compression_ratio() const;

    nlohmann::json to_json() const;
    static VaeConfig from_json(const nlohmann::json& j);
};

template <class T>
struct VaePosterior {
    ad::Tensor<T> mu;
    ad::Tensor<T> logvar;
};

/// Convolutional VAE: two downsampling convs, two residual blocks and 1x1
/// mean / log-variance heads; the decoder mirrors it with transposed convs.
/// Inputs may be (2, Nr, Nt) or batched (N, 2, Nr, Nt); latents likewise.
template <class T>
class Vae {
public:
    Vae(const VaeConfig& cfg, Rng& init_rng);
    /// Adopts existing parameters; names and shapes must match the config.
    Vae(const VaeConfig& cfg, ad::ParamStore<T> params);

    VaePosterior<T> encode(const ad::Tensor<T>& x) const;
    /// Mean head only (skips the log-variance conv).
    ad::Tensor<T> encode_mean(const ad::Tensor<T>& x) const;
    ad::Tensor<T> decode(const ad::Tensor<T>& z) const;

    const VaeConfig& config() const { return cfg_; }
    ad::ParamStore<T>& params() { return params_; }
    const ad::ParamStore<T>& params() const { return params_; }

private:
    VaeConfig cfg_;
    ad::ParamStore<T> params_;

    ad::Tensor<T> trunk(const ad::Tensor<T>& x) const;
    const ad::Tensor<T>& p(const std::string& name) const { return params_.get(name); }
};

extern template class Vae<float>;
extern template class Vae<double>;

/// Z = mu + exp(logvar / 2) * eps, eps ~ N(0, I).
template <class T>
ad::Tensor<T> reparameterize(const VaePosterior<T>& post, Rng& rng);

/// 1/2 sum(mu^2 + exp(logvar) - 1 - logvar).
template <class T>
ad::Tensor<T> kl_divergence(const VaePosterior<T>& post);

/// Sum of squared reconstruction errors + lambda * KL.
template <class T>
ad::Tensor<T> vae_loss(const ad::Tensor<T>& x, const ad::Tensor<T>& recon, const VaePosterior<T>& post,
                       double kl_weight);

// -- training ------------------------------------------------------------------

struct VaeEpochRecord {
    int epoch = 0;
    double train_loss = 0;  // per sample
    double val_nmse_db = 0;
};

struct TrainedVae {
    Vae<float> model;
    double data_scale = 1;  // global RMS of the training tensors
    std::vector<VaeEpochRecord> curve;
};

/// Adam on vae_loss over the RMS-normalized training set with cosine
/// learning-rate decay. `val` may be empty (count == 0) to skip validation.
TrainedVae train_vae(const channels::Dataset& train, const channels::Dataset& val, const VaeConfig& cfg, Rng& rng,
                     const std::function<void(const VaeEpochRecord&)>& on_epoch = {});

/// Reconstruction NMSE (dB) of decode(encode-mean) on a dataset.
double reconstruction_nmse_db(const Vae<float>& vae, double data_scale, const channels::Dataset& ds);

/// Root-mean-square of every value in the dataset.
double dataset_rms(const channels::Dataset& ds);

// -- persistence ----------------------------------------------------------------

/// Writes `<path>` (LCEW) and `<path>.json` (config + data scale).
void save_vae(const std::string& path, TrainedVae& vae);
TrainedVae load_vae(const std::string& path);

}  // namespace lce::vae
