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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lce/autodiff/param_store.hpp"

namespace lce::ldm {

/// Linear-beta DDPM schedule. Arrays are 1-indexed by t (index 0 holds the
/// t = 0 conventions: alpha_bar[0] = 1, beta[0] = beta_tilde[0] = 0).
struct DiffusionSchedule {
    int T = 0;
    double beta_start = 0, beta_end = 0;
    std::vector<double> beta, alpha, alpha_bar, beta_tilde;
};

/// Throws ConfigError unless 0 < beta_start <= beta_end < 1 and T >= 1.
DiffusionSchedule make_schedule(int T, double beta_start, double beta_end);

enum class Variance { BetaTilde, Beta };

struct DenoiserConfig {
    std::size_t latent_channels = 8, latent_h = 4, latent_w = 16;
    std::size_t width = 12;
    std::size_t n_resblocks = 2;
    std::size_t time_embed_dim = 32;
    int T = 1000;
    double beta_start = 1e-4, beta_end = 0.02;
    double lr = 2e-3;
    int batch_size = 64;
    int epochs = 300;
    std::uint64_t init_seed = 2;
    Variance variance = Variance::BetaTilde;

    ad::Shape latent_shape() const { return {latent_channels, latent_h, latent_w}; }
    DiffusionSchedule schedule() const { return make_schedule(T, beta_start, beta_end); }
    void validate() const;
    /// Sets T and scales the default beta endpoints by 1000 / T so that
    /// alpha_bar[T] stays near the T = 1000 value.
    void set_steps(int steps);

    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j);
};

/// Sinusoidal embedding of integer timesteps: [sin(t w_k), cos(t w_k)],
/// w_k = 10000^(-k / (dim/2)). Returns (N, dim).
template <class T>
ad::Tensor<T> timestep_embedding(std::span<const int> t, std::size_t dim);

/// Time-conditioned CNN eps_theta(z_t, t): conv3x3 (C' -> width) plus a
/// per-sample channel bias from the time embedding, ReLU, residual blocks,
/// conv3x3 (width -> C').
template <class T>
class Denoiser {
public:
    Denoiser(const DenoiserConfig& cfg, Rng& init_rng);
    Denoiser(const DenoiserConfig& cfg, ad::ParamStore<T> params);

    /// z (N, C', h, w) or (C', h, w); one timestep per sample.
    ad::Tensor<T> forward(const ad::Tensor<T>& z, std::span<const int> t) const;
    ad::Tensor<T> forward(const ad::Tensor<T>& z, int t) const;

    const DenoiserConfig& config() const { return cfg_; }
    ad::ParamStore<T>& params() { return params_; }
    const ad::ParamStore<T>& params() const { return params_; }

private:
    DenoiserConfig cfg_;
    ad::ParamStore<T> params_;
};

extern template class Denoiser<float>;
extern template class Denoiser<double>;

/// A noise-prediction function, so samplers can run with stub denoisers.
template <class T>
using EpsFn = std::function<ad::Tensor<T>(const ad::Tensor<T>& z, int t)>;

template <class T>
EpsFn<T> eps_fn(const Denoiser<T>& d)
{
    return [&d](const ad::Tensor<T>& z, int t) { return d.forward(z, t); };
}

template <class T>
struct Diffused {
    ad::Tensor<T> zt;
    ad::Tensor<T> eps;
};

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps. Throws DomainError for t
/// outside 1..T.
template <class T>
Diffused<T> forward_diffuse(const ad::Tensor<T>& z0, int t, const DiffusionSchedule& s, Rng& rng);

/// Deterministic reverse mean 1/sqrt(alpha_t) (z_t - beta_t / sqrt(1 - abar_t) eps).
template <class T>
ad::Tensor<T> reverse_mean(const ad::Tensor<T>& zt, const ad::Tensor<T>& eps, int t, const DiffusionSchedule& s);

/// Ancestral sampling from z_T ~ N(0, I) with sigma_t^2 = beta_tilde_t (or
/// beta_t) and no noise at t = 1. `shape` includes the batch axis.
template <class T>
ad::Tensor<T> ancestral_sample(const DiffusionSchedule& s, const EpsFn<T>& eps, ad::Shape shape, Rng& rng,
                               Variance variance = Variance::BetaTilde);

// -- training ------------------------------------------------------------------

struct LdmEpochRecord {
    int epoch = 0;
    double loss = 0;  // mean squared eps error per element
};

struct TrainedDenoiser {
    Denoiser<float> model;
    double latent_scale = 1;  // std of the VAE latents the model was trained on
    int epochs_done = 0;
    std::vector<LdmEpochRecord> curve;
};

/// Epsilon-prediction training on standardized latents (N, C', h, w),
/// already divided by `latent_scale`; t uniform on 1..T. Epoch e draws its
/// batches and noise from derive_seed(seed, e), so a run can be stopped after
/// `stop_after` epochs, checkpointed, and resumed bit-identically. The cosine
/// learning-rate schedule always spans cfg.epochs.
TrainedDenoiser train_ldm(const ad::Tensor<float>& latents, double latent_scale, const DenoiserConfig& cfg,
                          std::uint64_t seed, const std::function<void(const LdmEpochRecord&)>& on_epoch = {},
                          int stop_after = -1);

/// Runs epochs den.epochs_done + 1 .. until_epoch.
void continue_training(TrainedDenoiser& den, const ad::Tensor<float>& latents, std::uint64_t seed, int until_epoch,
                       const std::function<void(const LdmEpochRecord&)>& on_epoch = {});

void save_denoiser(const std::string& path, TrainedDenoiser& den);
TrainedDenoiser load_denoiser(const std::string& path);

}  // namespace lce::ldm
