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

#include <algorithm>
#include <iomanip>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/psld/psld.hpp"

namespace lce::psld {

using ad::Tensor;

void PsldConfig::validate() const
{
    if (!(eta >= 0))
        throw ConfigError("psld: eta must be >= 0");
    if (!(gamma_value() >= 0))
        throw ConfigError("psld: gamma must be >= 0");
    if (t_steps < 0)
        throw ConfigError("psld: t_steps must be >= 0");
    if (k_samples < 1)
        throw ConfigError("psld: k_samples must be >= 1");
    if (chunk < 1)
        throw ConfigError("psld: chunk must be >= 1");
}

void GuidanceTrace::write_csv(std::ostream& os) const
{
    os << "t,residual,gluing_residual,likelihood_step,gluing_step\n" << std::setprecision(9);
    for (const auto& r : steps)
        os << r.t << ',' << r.residual << ',' << r.gluing_residual << ',' << r.likelihood_step << ','
           << r.gluing_step << '\n';
}

FrozenModels::FrozenModels(const vae::TrainedVae& v, const ldm::TrainedDenoiser& d)
    : vae_(std::make_unique<vae::Vae<float>>(v.model.config(), v.model.params().cast<float>())),
      den_(std::make_unique<ldm::Denoiser<float>>(d.model.config(), d.model.params().cast<float>())),
      sched_(d.model.config().schedule()),
      latent_scale_(d.latent_scale),
      data_scale_(v.data_scale)
{
    if (vae_->config().latent_shape() != den_->config().latent_shape())
        throw ConfigError("VAE latent shape " + ad::shape_str(vae_->config().latent_shape()) +
                          " does not match the denoiser's " + ad::shape_str(den_->config().latent_shape()));
    vae_->params().set_requires_grad(false);
    den_->params().set_requires_grad(false);
}

LatentModels<float> FrozenModels::models() const
{
    LatentModels<float> m;
    const auto* den = den_.get();
    const auto* vae = vae_.get();
    m.eps = [den](const Tensor<float>& z, int t) { return den->forward(z, t); };
    m.decode = [vae](const Tensor<float>& z) { return vae->decode(z); };
    m.encode_mean = [vae](const Tensor<float>& x) { return vae->encode_mean(x); };
    m.latent_shape = den->config().latent_shape();
    m.latent_scale = latent_scale_;
    m.data_scale = data_scale_;
    return m;
}

template <class T>
Measurement<T> make_measurement(std::span<const channels::Observation> obs, const channels::PilotMatrix& x,
                                double data_scale)
{
    if (obs.empty())
        throw ShapeError("make_measurement: no observations");
    const auto np = static_cast<std::size_t>(x.np());
    const auto nr = static_cast<std::size_t>(obs[0].y.cols());
    std::vector<T> v(obs.size() * 2 * nr * np);
    for (std::size_t n = 0; n < obs.size(); ++n) {
        const auto& y = obs[n].y;
        if (static_cast<std::size_t>(y.rows()) != np || static_cast<std::size_t>(y.cols()) != nr)
            throw ShapeError("observation " + std::to_string(n) + " is " + std::to_string(y.rows()) + "x" +
                             std::to_string(y.cols()) + ", expected " + std::to_string(np) + "x" +
                             std::to_string(nr));
        T* re = v.data() + n * 2 * nr * np;
        T* im = re + nr * np;
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t p = 0; p < np; ++p) {
                re[r * np + p] = static_cast<T>(y(p, r).real() / data_scale);
                im[r * np + p] = static_cast<T>(y(p, r).imag() / data_scale);
            }
    }
    return Measurement<T>{x.data, Tensor<T>({obs.size(), 2, nr, np}, std::move(v))};
}

template Measurement<float> make_measurement(std::span<const channels::Observation>, const channels::PilotMatrix&,
                                             double);
template Measurement<double> make_measurement(std::span<const channels::Observation>, const channels::PilotMatrix&,
                                              double);

namespace {

// Rows [b0, b1) along the leading axis.
template <class T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t b0, std::size_t b1)
{
    const std::size_t per = a.numel() / a.dim(0);
    auto shape = a.shape();
    shape[0] = b1 - b0;
    const auto d = a.data();
    return Tensor<T>(shape, std::vector<T>(d.begin() + b0 * per, d.begin() + b1 * per));
}

// Repeats every row k times: row n*k + j = row n.
template <class T>
Tensor<T> repeat_rows(const Tensor<T>& a, std::size_t k)
{
    if (k == 1)
        return a;
    const std::size_t n = a.dim(0), per = a.numel() / n;
    auto shape = a.shape();
    shape[0] = n * k;
    const auto d = a.data();
    std::vector<T> v;
    v.reserve(n * k * per);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            v.insert(v.end(), d.begin() + i * per, d.begin() + (i + 1) * per);
    return Tensor<T>(shape, std::move(v));
}

}  // namespace

PsldResult psld_ce_estimate(std::span<const channels::Observation> obs, const channels::PilotMatrix& x,
                            const LatentModels<float>& models, const ldm::DiffusionSchedule& s,
                            const PsldConfig& cfg)
{
    cfg.validate();
    const auto meas = make_measurement<float>(obs, x, models.data_scale);
    const std::size_t n = obs.size(), k = static_cast<std::size_t>(cfg.k_samples), chains = n * k;
    const auto y_all = repeat_rows(meas.y, k);

    ad::Shape zshape{chains};
    zshape.insert(zshape.end(), models.latent_shape.begin(), models.latent_shape.end());
    Rng rng(cfg.seed);
    const auto z_all = Tensor<float>::randn(zshape, rng);

    PsldResult out;
    std::vector<channels::ChannelMatrix> decoded;
    decoded.reserve(chains);
    const std::size_t chunk = static_cast<std::size_t>(cfg.chunk);
    for (std::size_t b0 = 0; b0 < chains; b0 += chunk) {
        const std::size_t b1 = std::min(chains, b0 + chunk);
        const Measurement<float> m{meas.x, slice_rows(y_all, b0, b1)};
        GuidanceTrace trace;
        const auto z0 = run_chain(slice_rows(z_all, b0, b1), m, models, s, cfg, &trace);

        // Chain-weighted running mean of the per-chunk traces.
        const double w = static_cast<double>(b1 - b0) / static_cast<double>(chains);
        if (out.trace.steps.empty())
            out.trace.steps.assign(trace.steps.size(), StepRecord{});
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            auto& acc = out.trace.steps[i];
            const auto& r = trace.steps[i];
            acc.t = r.t;
            acc.residual += w * r.residual;
            acc.gluing_residual += w * r.gluing_residual;
            acc.likelihood_step += w * r.likelihood_step;
            acc.gluing_step += w * r.gluing_step;
        }

        ad::NoGradGuard no_grad;
        const auto h = ad::scale(models.decode(ad::scale(z0, static_cast<float>(models.latent_scale))),
                                 static_cast<float>(models.data_scale));
        for (auto& c : channels::tensor_to_channels(h))
            decoded.push_back(std::move(c));
    }

    out.estimates.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        channels::ChannelMatrix h = decoded[i * k];
        for (std::size_t j = 1; j < k; ++j)
            h.data += decoded[i * k + j].data;
        h.data /= static_cast<double>(k);
        h.seed = 0;
        h.n_clusters = 0;
        out.estimates.push_back(std::move(h));
    }
    return out;
}

}  // namespace lce::psld
