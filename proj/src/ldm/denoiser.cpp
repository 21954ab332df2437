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

#include <cmath>

#include "lce/autodiff/layers.hpp"
#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/ldm/ldm.hpp"

namespace lce::ldm {

using ad::Tensor;

void DenoiserConfig::validate() const
{
    if (latent_channels < 1 || latent_h < 1 || latent_w < 1)
        throw ConfigError("denoiser latent shape must be positive");
    if (width < latent_channels)
        throw ConfigError("denoiser width must be >= latent channels");
    if (time_embed_dim < 2 || time_embed_dim % 2)
        throw ConfigError("time_embed_dim must be even and >= 2");
    if (T < 10)
        throw ConfigError("denoiser needs T >= 10, got " + std::to_string(T));
    make_schedule(T, beta_start, beta_end);
    if (lr <= 0 || batch_size < 1 || epochs < 0)
        throw ConfigError("denoiser training needs lr > 0, batch_size >= 1, epochs >= 0");
}

void DenoiserConfig::set_steps(int steps)
{
    T = steps;
    beta_start = 1e-4 * 1000.0 / steps;
    beta_end = 0.02 * 1000.0 / steps;
}

nlohmann::json DenoiserConfig::to_json() const
{
    return {{"latent_shape", latent_shape()},
            {"width", width},
            {"n_resblocks", n_resblocks},
            {"time_embed_dim", time_embed_dim},
            {"T", T},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"lr", lr},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"init_seed", init_seed},
            {"variance", variance == Variance::BetaTilde ? "beta_tilde" : "beta"}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j)
{
    DenoiserConfig c;
    const auto shape = j.at("latent_shape").get<ad::Shape>();
    if (shape.size() != 3)
        throw ConfigError("latent_shape must have three entries");
    c.latent_channels = shape[0];
    c.latent_h = shape[1];
    c.latent_w = shape[2];
    c.width = j.at("width");
    c.n_resblocks = j.at("n_resblocks");
    c.time_embed_dim = j.at("time_embed_dim");
    c.T = j.at("T");
    c.beta_start = j.at("beta_start");
    c.beta_end = j.at("beta_end");
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.variance = j.value("variance", "beta_tilde") == "beta" ? Variance::Beta : Variance::BetaTilde;
    c.validate();
    return c;
}

template <class T>
Tensor<T> timestep_embedding(std::span<const int> t, std::size_t dim)
{
    const std::size_t half = dim / 2;
    std::vector<T> v(t.size() * dim);
    for (std::size_t n = 0; n < t.size(); ++n)
        for (std::size_t k = 0; k < half; ++k) {
            const double w = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
            const double a = t[n] * w;
            v[n * dim + k] = static_cast<T>(std::sin(a));
            v[n * dim + half + k] = static_cast<T>(std::cos(a));
        }
    return Tensor<T>(ad::Shape{t.size(), dim}, std::move(v));
}

namespace {

std::string res_name(std::size_t i)
{
    return "res" + std::to_string(i + 1);
}

template <class T>
ad::ParamStore<T> init_params(const DenoiserConfig& cfg, Rng& rng)
{
    cfg.validate();
    ad::ParamStore<T> ps;
    ad::add_conv(ps, "conv_in", cfg.latent_channels, cfg.width, 3, rng);
    ad::add_linear(ps, "temb1", cfg.time_embed_dim, cfg.time_embed_dim, rng);
    ad::add_linear(ps, "temb2", cfg.time_embed_dim, cfg.width, rng);
    for (std::size_t i = 0; i < cfg.n_resblocks; ++i)
        ad::add_conv(ps, res_name(i), cfg.width, cfg.width, 3, rng);
    ad::add_conv(ps, "conv_out", cfg.width, cfg.latent_channels, 3, rng);
    return ps;
}

}  // namespace

template <class T>
Denoiser<T>::Denoiser(const DenoiserConfig& cfg, Rng& init_rng) : cfg_(cfg), params_(init_params<T>(cfg, init_rng))
{
}

template <class T>
Denoiser<T>::Denoiser(const DenoiserConfig& cfg, ad::ParamStore<T> params) : cfg_(cfg), params_(std::move(params))
{
    Rng dummy(0);
    const auto ref = init_params<T>(cfg, dummy);
    if (ref.size() != params_.size())
        throw ConfigError("denoiser parameter set does not match the config");
    for (const auto& n : ref.names())
        if (!params_.contains(n) || params_.get(n).shape() != ref.get(n).shape())
            throw ConfigError("denoiser parameter '" + n + "' missing or mis-shaped");
}

template <class T>
Tensor<T> Denoiser<T>::forward(const Tensor<T>& z, std::span<const int> t) const
{
    const auto want = cfg_.latent_shape();
    const bool batched = z.rank() == 4;
    if (!(batched && std::equal(want.begin(), want.end(), z.shape().begin() + 1)) && z.shape() != want)
        throw ShapeError("denoiser: expected latent " + ad::shape_str(want) + ", got " + ad::shape_str(z.shape()));
    const auto x = batched ? z : ad::reshape(z, ad::Shape{1, want[0], want[1], want[2]});
    if (t.size() != x.dim(0))
        throw ShapeError("denoiser: " + std::to_string(t.size()) + " timesteps for batch " +
                         std::to_string(x.dim(0)));
    const auto& p = params_;
    auto emb = timestep_embedding<T>(t, cfg_.time_embed_dim);
    emb = ad::linear(ad::relu(ad::linear(emb, p.get("temb1.w"), p.get("temb1.b"))), p.get("temb2.w"),
                     p.get("temb2.b"));
    auto h = ad::conv2d(x, p.get("conv_in.w"), p.get("conv_in.b"), {1, 1});
    h = ad::relu(ad::add_channel_bias(h, emb));
    for (std::size_t i = 0; i < cfg_.n_resblocks; ++i)
        h = ad::residual_block(h, p.get(res_name(i) + ".w"), p.get(res_name(i) + ".b"));
    auto out = ad::conv2d(h, p.get("conv_out.w"), p.get("conv_out.b"), {1, 1});
    return batched ? out : ad::reshape(out, want);
}

template <class T>
Tensor<T> Denoiser<T>::forward(const Tensor<T>& z, int t) const
{
    const std::vector<int> ts(z.rank() == 4 ? z.dim(0) : 1, t);
    return forward(z, ts);
}

template class Denoiser<float>;
template class Denoiser<double>;
template Tensor<float> timestep_embedding(std::span<const int>, std::size_t);
template Tensor<double> timestep_embedding(std::span<const int>, std::size_t);

}  // namespace lce::ldm
