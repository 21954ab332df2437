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

#include "lce/vae/vae.hpp"

#include <cmath>

#include "lce/autodiff/layers.hpp"
#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"

namespace lce::vae {

using ad::Shape;
using ad::Tensor;

VaeConfig VaeConfig::for_profile(channels::Profile p)
{
    VaeConfig c;
    if (p == channels::Profile::Small) {
        c.nr = 4;
        c.nt = 16;
        c.downsample = 2;
    }
    return c;
}

void VaeConfig::validate() const
{
    if (downsample != 2 && downsample != 4)
        throw ConfigError("VAE downsample factor must be 2 or 4, got " + std::to_string(downsample));
    if (nr <= 0 || nt <= 0 || nr % downsample || nt % downsample)
        throw ConfigError("VAE input (" + std::to_string(nr) + ", " + std::to_string(nt) +
                          ") is not divisible by the downsample factor");
    if (latent_channels < 1 || w1 < 1 || w2 < 1)
        throw ConfigError("VAE widths must be positive");
    if (kl_weight < 0)
        throw ConfigError("kl_weight must be >= 0");
    if (lr <= 0 || batch_size < 1 || epochs < 0)
        throw ConfigError("VAE training needs lr > 0, batch_size >= 1, epochs >= 0");
}

Shape VaeConfig::in_shape() const
{
    return {2, static_cast<std::size_t>(nr), static_cast<std::size_t>(nt)};
}

Shape VaeConfig::latent_shape() const
{
    return {static_cast<std::size_t>(latent_channels), static_cast<std::size_t>(nr / downsample),
            static_cast<std::size_t>(nt / downsample)};
}

double VaeConfig::compression_ratio() const
{
    return (2.0 * nr * nt) / (static_cast<double>(latent_channels) * nr * nt / (downsample * downsample));
}

nlohmann::json VaeConfig::to_json() const
{
    return {{"nr", nr},         {"nt", nt}, {"latent_channels", latent_channels}, {"downsample", downsample},
            {"w1", w1},         {"w2", w2}, {"kl_weight", kl_weight},             {"lr", lr},
            {"batch_size", batch_size}, {"epochs", epochs}, {"init_seed", init_seed}};
}

VaeConfig VaeConfig::from_json(const nlohmann::json& j)
{
    VaeConfig c;
    c.nr = j.at("nr");
    c.nt = j.at("nt");
    c.latent_channels = j.at("latent_channels");
    c.downsample = j.at("downsample");
    c.w1 = j.at("w1");
    c.w2 = j.at("w2");
    c.kl_weight = j.value("kl_weight", c.kl_weight);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.validate();
    return c;
}

namespace {

template <class T>
ad::ParamStore<T> init_params(const VaeConfig& cfg, Rng& rng)
{
    cfg.validate();
    const auto w1 = static_cast<std::size_t>(cfg.w1), w2 = static_cast<std::size_t>(cfg.w2);
    const auto c = static_cast<std::size_t>(cfg.latent_channels);
    ad::ParamStore<T> ps;
    ad::add_conv(ps, "enc.down1", 2, w1, 3, rng);
    ad::add_conv(ps, "enc.down2", w1, w2, 3, rng);
    ad::add_conv(ps, "enc.res1", w2, w2, 3, rng);
    ad::add_conv(ps, "enc.res2", w2, w2, 3, rng);
    ad::add_conv(ps, "enc.mu", w2, c, 1, rng);
    ad::add_conv(ps, "enc.logvar", w2, c, 1, rng);
    ad::add_conv(ps, "dec.in", c, w2, 1, rng);
    ad::add_conv(ps, "dec.res1", w2, w2, 3, rng);
    ad::add_conv(ps, "dec.res2", w2, w2, 3, rng);
    ad::add_conv_transpose(ps, "dec.up1", w2, w1, 3, rng);
    ad::add_conv_transpose(ps, "dec.up2", w1, 2, 3, rng);
    return ps;
}

void check_trailing(const Shape& got, const Shape& want, const char* what)
{
    const bool ok = (got.size() == want.size() && got == want) ||
                    (got.size() == want.size() + 1 && std::equal(want.begin(), want.end(), got.begin() + 1));
    if (!ok)
        throw ShapeError(std::string(what) + ": expected " + ad::shape_str(want) + " or batched, got " +
                         ad::shape_str(got));
}

}  // namespace

template <class T>
Vae<T>::Vae(const VaeConfig& cfg, Rng& init_rng) : cfg_(cfg), params_(init_params<T>(cfg, init_rng))
{
}

template <class T>
Vae<T>::Vae(const VaeConfig& cfg, ad::ParamStore<T> params) : cfg_(cfg), params_(std::move(params))
{
    Rng dummy(0);
    const auto ref = init_params<T>(cfg, dummy);
    for (const auto& n : ref.names()) {
        if (!params_.contains(n))
            throw ConfigError("VAE parameters lack '" + n + "'");
        if (params_.get(n).shape() != ref.get(n).shape())
            throw ConfigError("VAE parameter '" + n + "' has shape " + ad::shape_str(params_.get(n).shape()) +
                              ", config expects " + ad::shape_str(ref.get(n).shape()));
    }
    if (params_.size() != ref.size())
        throw ConfigError("VAE parameter set has unexpected entries");
}

template <class T>
Tensor<T> Vae<T>::trunk(const Tensor<T>& x) const
{
    check_trailing(x.shape(), cfg_.in_shape(), "VAE encode");
    const int s2 = cfg_.downsample == 4 ? 2 : 1;
    auto h = ad::relu(ad::conv2d(x, p("enc.down1.w"), p("enc.down1.b"), {2, 1}));
    h = ad::relu(ad::conv2d(h, p("enc.down2.w"), p("enc.down2.b"), {s2, 1}));
    h = ad::residual_block(h, p("enc.res1.w"), p("enc.res1.b"));
    return ad::residual_block(h, p("enc.res2.w"), p("enc.res2.b"));
}

template <class T>
VaePosterior<T> Vae<T>::encode(const Tensor<T>& x) const
{
    const auto h = trunk(x);
    VaePosterior<T> post;
    post.mu = ad::conv2d(h, p("enc.mu.w"), p("enc.mu.b"));
    post.logvar = ad::clamp(ad::conv2d(h, p("enc.logvar.w"), p("enc.logvar.b")), T(-30), T(20));
    return post;
}

template <class T>
Tensor<T> Vae<T>::encode_mean(const Tensor<T>& x) const
{
    return ad::conv2d(trunk(x), p("enc.mu.w"), p("enc.mu.b"));
}

template <class T>
Tensor<T> Vae<T>::decode(const Tensor<T>& z) const
{
    check_trailing(z.shape(), cfg_.latent_shape(), "VAE decode");
    const bool f4 = cfg_.downsample == 4;
    auto h = ad::relu(ad::conv2d(z, p("dec.in.w"), p("dec.in.b")));
    h = ad::residual_block(h, p("dec.res1.w"), p("dec.res1.b"));
    h = ad::residual_block(h, p("dec.res2.w"), p("dec.res2.b"));
    h = ad::relu(ad::conv_transpose2d(h, p("dec.up1.w"), p("dec.up1.b"), {f4 ? 2 : 1, 1, f4 ? 1 : 0}));
    return ad::conv_transpose2d(h, p("dec.up2.w"), p("dec.up2.b"), {2, 1, 1});
}

template class Vae<float>;
template class Vae<double>;

template <class T>
Tensor<T> reparameterize(const VaePosterior<T>& post, Rng& rng)
{
    const auto eps = Tensor<T>::randn(post.mu.shape(), rng);
    return ad::add(post.mu, ad::mul(ad::exp(ad::scale(post.logvar, T(0.5))), eps));
}

template <class T>
Tensor<T> kl_divergence(const VaePosterior<T>& post)
{
    // 1/2 (sum mu^2 + sum exp(lv) - sum lv) - n/2
    auto s = ad::sub(ad::add(ad::sum_squares(post.mu), ad::sum(ad::exp(post.logvar))), ad::sum(post.logvar));
    return ad::add_scalar(ad::scale(s, T(0.5)), T(-0.5) * static_cast<T>(post.mu.numel()));
}

template <class T>
Tensor<T> vae_loss(const Tensor<T>& x, const Tensor<T>& recon, const VaePosterior<T>& post, double kl_weight)
{
    auto rec = ad::sum_squares(ad::sub(recon, x));
    if (kl_weight == 0)
        return rec;
    return ad::add(rec, ad::scale(kl_divergence(post), static_cast<T>(kl_weight)));
}

template Tensor<float> reparameterize(const VaePosterior<float>&, Rng&);
template Tensor<double> reparameterize(const VaePosterior<double>&, Rng&);
template Tensor<float> kl_divergence(const VaePosterior<float>&);
template Tensor<double> kl_divergence(const VaePosterior<double>&);
template Tensor<float> vae_loss(const Tensor<float>&, const Tensor<float>&, const VaePosterior<float>&, double);
template Tensor<double> vae_loss(const Tensor<double>&, const Tensor<double>&, const VaePosterior<double>&, double);

}  // namespace lce::vae
