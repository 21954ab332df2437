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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "lce/autodiff/tensor.hpp"
#include "lce/channels/channels.hpp"
#include "lce/ldm/ldm.hpp"
#include "lce/vae/vae.hpp"

namespace lce::psld {

struct PsldConfig {
    /// Likelihood step size. With `normalize` the gradient of ||r||^2 is
    /// divided by ||r|| per chain, so eta is dimensionless.
    double eta = 12.0;
    /// Gluing step size; eta / 4 when unset.
    std::optional<double> gamma;
    /// Number of reverse steps; 0 means the full schedule.
    int t_steps = 0;
    std::uint64_t seed = 0;
    bool normalize = true;
    /// Treat eps_theta as a constant inside the Tweedie estimate.
    bool stop_gradient = false;
    /// Independent chains averaged per observation.
    int k_samples = 1;
    /// Chains propagated together; only affects memory, not the estimate's
    /// mathematical value.
    int chunk = 256;

    double gamma_value() const { return gamma ? *gamma : eta / 4.0; }
    void validate() const;
};

/// Per-step diagnostics, averaged over chains.
struct StepRecord {
    int t = 0;
    double residual = 0;          // ||Y - X D(Z0_hat)||_F
    double gluing_residual = 0;   // ||Z0_hat - E(glue)||_F
    double likelihood_step = 0;   // ||Z'' - Z'||_F
    double gluing_step = 0;       // ||Z_{t-1} - Z''||_F
};

struct GuidanceTrace {
    std::vector<StepRecord> steps;
    void write_csv(std::ostream& os) const;
};

/// The three networks as plain maps, so the sampler can run against the
/// trained models or against hand-written stubs.
template <class T>
struct LatentModels {
    ldm::EpsFn<T> eps;
    std::function<ad::Tensor<T>(const ad::Tensor<T>&)> decode;
    std::function<ad::Tensor<T>(const ad::Tensor<T>&)> encode_mean;
    ad::Shape latent_shape;  // (C', h, w)
    double latent_scale = 1;  // decode(z * scale); encode(.) / scale
    double data_scale = 1;    // channel tensors are divided by this
};

/// Owns frozen (non-trainable) copies of a trained VAE and denoiser.
class FrozenModels {
public:
    FrozenModels(const vae::TrainedVae& v, const ldm::TrainedDenoiser& d);
    LatentModels<float> models() const;
    const ldm::DiffusionSchedule& schedule() const { return sched_; }

private:
    std::unique_ptr<vae::Vae<float>> vae_;
    std::unique_ptr<ldm::Denoiser<float>> den_;
    ldm::DiffusionSchedule sched_;
    double latent_scale_, data_scale_;
};

/// Observations in the (2, Nr, Np) tensor layout, i.e. Y^T planes divided by
/// the data scale, plus the pilot matrix they were taken with.
template <class T>
struct Measurement {
    channels::CMat x;   // (Np, Nt)
    ad::Tensor<T> y;    // (N, 2, Nr, Np)
    std::size_t count() const { return y.dim(0); }
};

template <class T>
Measurement<T> make_measurement(std::span<const channels::Observation> obs, const channels::PilotMatrix& x,
                                double data_scale);

/// Tweedie estimate (zt - sqrt(1 - abar_t) eps) / sqrt(abar_t); tracks
/// gradients through both arguments.
template <class T>
ad::Tensor<T> tweedie_z0(const ad::Tensor<T>& zt, const ad::Tensor<T>& eps, int t, const ldm::DiffusionSchedule& s);

template <class T>
ad::Tensor<T> tweedie_z0(const ad::Tensor<T>& zt, int t, const ldm::DiffusionSchedule& s, const ldm::EpsFn<T>& eps);

/// Deterministic DDPM mean step (zt - (1 - alpha_t)/sqrt(1 - abar_t) eps) / sqrt(alpha_t).
template <class T>
ad::Tensor<T> prior_step(const ad::Tensor<T>& zt, int t, const ldm::DiffusionSchedule& s, const ldm::EpsFn<T>& eps);

/// Z' - eta (1 - alpha_t)/sqrt(alpha_t) grad_{zt} ||Y - X D(Z0_hat(zt))||^2,
/// per chain (divided by the residual norm when normalizing).
template <class T>
ad::Tensor<T> likelihood_step(const ad::Tensor<T>& z_prime, const ad::Tensor<T>& zt, int t,
                              const Measurement<T>& m, const LatentModels<T>& models,
                              const ldm::DiffusionSchedule& s, double eta, const PsldConfig& opt);

/// Z'' - gamma (1 - alpha_t)/sqrt(alpha_t) grad_{zt} ||Z0_hat - E(glue)||^2
/// with glue = X^H Y + (I - X^H X) D(Z0_hat).
template <class T>
ad::Tensor<T> gluing_step(const ad::Tensor<T>& z_dprime, const ad::Tensor<T>& zt, int t, const Measurement<T>& m,
                          const LatentModels<T>& models, const ldm::DiffusionSchedule& s, double gamma,
                          const PsldConfig& opt);

/// One full reverse step (prior, likelihood, gluing) sharing a single forward
/// pass; equal to composing the three functions above.
template <class T>
ad::Tensor<T> guided_step(const ad::Tensor<T>& zt, int t, const Measurement<T>& m, const LatentModels<T>& models,
                          const ldm::DiffusionSchedule& s, const PsldConfig& cfg, StepRecord* record = nullptr);

/// Runs the guided chain from z_T for t = T_steps..1 and returns Z_0.
template <class T>
ad::Tensor<T> run_chain(ad::Tensor<T> z, const Measurement<T>& m, const LatentModels<T>& models,
                        const ldm::DiffusionSchedule& s, const PsldConfig& cfg, GuidanceTrace* trace = nullptr);

struct PsldResult {
    std::vector<channels::ChannelMatrix> estimates;
    GuidanceTrace trace;
};

/// Estimates one channel per observation: Z_T ~ N(0, I) from Rng(cfg.seed),
/// guided chain, H_hat = D(Z_0) * data_scale (averaged over k_samples chains).
PsldResult psld_ce_estimate(std::span<const channels::Observation> obs, const channels::PilotMatrix& x,
                            const LatentModels<float>& models, const ldm::DiffusionSchedule& s,
                            const PsldConfig& cfg);

}  // namespace lce::psld
