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

#include "lce/bench/complexity.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "lce/common/error.hpp"

namespace lce::bench {

std::size_t ComponentCost::params() const
{
    std::size_t n = 0;
    for (const auto& l : layers)
        n += l.params;
    return n;
}

double ComponentCost::flops() const
{
    double f = 0;
    for (const auto& l : layers)
        f += l.flops;
    return f;
}

namespace {

struct Hw {
    std::size_t h, w;
    double n() const { return static_cast<double>(h * w); }
};

Hw conv_out(Hw in, int k, int stride, int pad)
{
    return {(in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1};
}

Hw convt_out(Hw in, int k, int stride, int pad, int out_pad)
{
    return {(in.h - 1) * stride - 2 * pad + k + out_pad, (in.w - 1) * stride - 2 * pad + k + out_pad};
}

LayerCost conv(const std::string& name, std::size_t cin, std::size_t cout, int k, Hw out)
{
    const double kk = static_cast<double>(k * k);
    return {name, cout * cin * k * k + cout, out.n() * cout * (2.0 * cin * kk + 1.0)};
}

LayerCost convt(const std::string& name, std::size_t cin, std::size_t cout, int k, Hw in, Hw out)
{
    const double kk = static_cast<double>(k * k);
    return {name, cin * cout * k * k + cout, 2.0 * in.n() * cin * cout * kk + out.n() * cout};
}

LayerCost linear(const std::string& name, std::size_t in, std::size_t out)
{
    return {name, out * in + out, static_cast<double>(out) * (2.0 * in + 1.0)};
}

}  // namespace

double ComplexityReport::encoder_flops() const
{
    double f = 0;
    for (const auto& l : encoder.layers)
        if (l.name != "enc.logvar")
            f += l.flops;
    return f;
}

double ComplexityReport::guided_step_flops() const
{
    const double den = denoiser_step_flops(), dec = decoder_flops(), enc = encoder_flops();
    const double forward = den + dec + enc;
    const double likelihood_bwd = 2.0 * (dec + den);
    const double gluing_bwd = 2.0 * (enc + dec + den);
    return forward + likelihood_bwd + gluing_bwd;
}

double ComplexityReport::total_flops() const
{
    return t_steps * guided_step_flops() + decoder_flops();
}

ComplexityReport estimate_flops(const vae::VaeConfig& v, const ldm::DenoiserConfig& d, int t_steps)
{
    v.validate();
    d.validate();
    ComplexityReport r;
    r.t_steps = t_steps > 0 ? t_steps : d.T;
    const auto w1 = static_cast<std::size_t>(v.w1), w2 = static_cast<std::size_t>(v.w2);
    const auto c = static_cast<std::size_t>(v.latent_channels);
    const bool f4 = v.downsample == 4;

    const Hw in{static_cast<std::size_t>(v.nr), static_cast<std::size_t>(v.nt)};
    const Hw h1 = conv_out(in, 3, 2, 1);
    const Hw h2 = conv_out(h1, 3, f4 ? 2 : 1, 1);
    auto& e = r.encoder.layers;
    e.push_back(conv("enc.down1", 2, w1, 3, h1));
    e.push_back(conv("enc.down2", w1, w2, 3, h2));
    e.push_back(conv("enc.res1", w2, w2, 3, h2));
    e.push_back(conv("enc.res2", w2, w2, 3, h2));
    e.push_back(conv("enc.mu", w2, c, 1, h2));
    e.push_back(conv("enc.logvar", w2, c, 1, h2));

    auto& dl = r.decoder.layers;
    const Hw u1 = convt_out(h2, 3, f4 ? 2 : 1, 1, f4 ? 1 : 0);
    const Hw u2 = convt_out(u1, 3, 2, 1, 1);
    dl.push_back(conv("dec.in", c, w2, 1, h2));
    dl.push_back(conv("dec.res1", w2, w2, 3, h2));
    dl.push_back(conv("dec.res2", w2, w2, 3, h2));
    dl.push_back(convt("dec.up1", w2, w1, 3, h2, u1));
    dl.push_back(convt("dec.up2", w1, 2, 3, u1, u2));

    auto& dn = r.denoiser.layers;
    const Hw lat{d.latent_h, d.latent_w};
    dn.push_back(linear("temb1", d.time_embed_dim, d.time_embed_dim));
    dn.push_back(linear("temb2", d.time_embed_dim, d.width));
    auto in_conv = conv("conv_in", d.latent_channels, d.width, 3, lat);
    in_conv.flops += lat.n() * static_cast<double>(d.width);  // time-embedding channel bias
    dn.push_back(in_conv);
    for (std::size_t i = 0; i < d.n_resblocks; ++i)
        dn.push_back(conv("res" + std::to_string(i + 1), d.width, d.width, 3, lat));
    dn.push_back(conv("conv_out", d.width, d.latent_channels, 3, lat));
    return r;
}

namespace {

template <class Store>
void check_component(const Store& ps, const ComponentCost& cost, const std::string& what)
{
    const auto& names = ps.names();
    for (const auto& l : cost.layers) {
        std::size_t n = 0;
        for (const char* suffix : {".w", ".b"}) {
            const auto name = l.name + suffix;
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw ConfigError(what + ": checkpoint lacks '" + name + "'");
            n += ps.get(name).numel();
        }
        if (n != l.params)
            throw ConfigError(what + ": layer " + l.name + " has " + std::to_string(n) + " parameters, model says " +
                              std::to_string(l.params));
    }
}

}  // namespace

ComplexityReport count_params(const vae::TrainedVae& v, const ldm::TrainedDenoiser& d, int t_steps)
{
    auto r = estimate_flops(v.model.config(), d.model.config(), t_steps);
    check_component(v.model.params(), r.encoder, "VAE encoder");
    check_component(v.model.params(), r.decoder, "VAE decoder");
    check_component(d.model.params(), r.denoiser, "denoiser");
    // Every stored tensor must be covered by the model above.
    if (v.model.params().numel() != r.vae_params())
        throw ConfigError("VAE checkpoint holds " + std::to_string(v.model.params().numel()) +
                          " parameters, model accounts for " + std::to_string(r.vae_params()));
    if (d.model.params().numel() != r.denoiser.params())
        throw ConfigError("denoiser checkpoint holds " + std::to_string(d.model.params().numel()) +
                          " parameters, model accounts for " + std::to_string(r.denoiser.params()));
    return r;
}

nlohmann::json ComplexityReport::to_json() const
{
    auto component = [](const ComponentCost& c) {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : c.layers)
            layers.push_back({{"name", l.name}, {"params", l.params}, {"flops", l.flops}});
        return nlohmann::json{{"params", c.params()}, {"flops", c.flops()}, {"layers", layers}};
    };
    return {{"convention", "MAC = 2 FLOPs, bias add = 1 FLOP; backward = 2x forward of traversed networks"},
            {"encoder", component(encoder)},
            {"decoder", component(decoder)},
            {"denoiser", component(denoiser)},
            {"params", {{"vae", vae_params()}, {"denoiser", denoiser.params()}, {"total", total_params()}}},
            {"flops",
             {{"encoder_pass", encoder_flops()},
              {"decoder_pass", decoder_flops()},
              {"denoiser_step", denoiser_step_flops()},
              {"guided_step", guided_step_flops()},
              {"t_steps", t_steps},
              {"total", total_flops()}}}};
}

std::string ComplexityReport::to_text() const
{
    std::ostringstream os;
    char buf[160];
    os << "# FLOPs: MAC = 2, bias add = 1; backward passes costed at 2x forward\n";
    auto block = [&](const char* title, const ComponentCost& c) {
        os << title << "\n";
        for (const auto& l : c.layers) {
            std::snprintf(buf, sizeof buf, "  %-12s %10zu params %14.0f flops\n", l.name.c_str(), l.params, l.flops);
            os << buf;
        }
    };
    block("encoder", encoder);
    block("decoder", decoder);
    block("denoiser", denoiser);
    std::snprintf(buf, sizeof buf, "params: vae %zu, denoiser %zu, total %zu (%.3f M)\n", vae_params(),
                  denoiser.params(), total_params(), total_params() / 1e6);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "flops: encoder %.4g, decoder %.4g, denoiser/step %.4g (%.2f%% of decoder), guided step %.4g\n",
                  encoder_flops(), decoder_flops(), denoiser_step_flops(),
                  100.0 * denoiser_step_flops() / decoder_flops(), guided_step_flops());
    os << buf;
    std::snprintf(buf, sizeof buf, "total for T = %d: %.4f GFLOPs\n", t_steps, total_flops() / 1e9);
    os << buf;
    return os.str();
}

}  // namespace lce::bench
