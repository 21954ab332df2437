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
#include <numbers>

#include "lce/autodiff/checkpoint.hpp"
#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/ldm/ldm.hpp"

namespace lce::ldm {

using ad::Tensor;

namespace {

void check_latents(const Tensor<float>& latents, const DenoiserConfig& cfg)
{
    const auto want = cfg.latent_shape();
    if (latents.rank() != 4 || !std::equal(want.begin(), want.end(), latents.shape().begin() + 1))
        throw ConfigError("latent dataset " + ad::shape_str(latents.shape()) + " does not match denoiser latent " +
                          ad::shape_str(want));
}

}  // namespace

void continue_training(TrainedDenoiser& den, const Tensor<float>& latents, std::uint64_t seed, int until_epoch,
                       const std::function<void(const LdmEpochRecord&)>& on_epoch)
{
    const auto& cfg = den.model.config();
    check_latents(latents, cfg);
    const auto sched = cfg.schedule();
    const std::size_t n = latents.dim(0);
    const std::size_t per = latents.numel() / n;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const double total_steps = static_cast<double>((n + bs - 1) / bs) * cfg.epochs;
    auto& ps = den.model.params();
    ad::AdamOptions opt;
    const auto src = latents.data();

    for (int epoch = den.epochs_done + 1; epoch <= until_epoch; ++epoch) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
        const auto perm = rng.permutation(n);
        double loss_sum = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t m = std::min(n, start + bs) - start;
            std::vector<float> z0(m * per);
            std::vector<int> ts(m);
            for (std::size_t k = 0; k < m; ++k) {
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(perm[start + k] * per), per,
                            z0.begin() + static_cast<std::ptrdiff_t>(k * per));
                ts[k] = rng.uniform_int(1, cfg.T);
            }
            auto eps = Tensor<float>::randn(ad::Shape{m, latents.dim(1), latents.dim(2), latents.dim(3)}, rng);
            std::vector<float> zt(m * per);
            for (std::size_t k = 0; k < m; ++k) {
                const auto a = static_cast<float>(std::sqrt(sched.alpha_bar[ts[k]]));
                const auto b = static_cast<float>(std::sqrt(1.0 - sched.alpha_bar[ts[k]]));
                for (std::size_t j = 0; j < per; ++j)
                    zt[k * per + j] = a * z0[k * per + j] + b * eps.data()[k * per + j];
            }
            const auto loss = ad::mse(den.model.forward(Tensor<float>(eps.shape(), std::move(zt)), ts), eps);
            ps.zero_grad();
            loss.backward();
            opt.lr = cfg.lr * 0.5 *
                     (1.0 + std::cos(std::numbers::pi * static_cast<double>(ps.step()) / std::max(total_steps, 1.0)));
            ps.adam_step(opt);
            loss_sum += loss.item() * static_cast<double>(m);
        }
        den.epochs_done = epoch;
        LdmEpochRecord rec{epoch, loss_sum / static_cast<double>(n)};
        den.curve.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }
}

TrainedDenoiser train_ldm(const Tensor<float>& latents, double latent_scale, const DenoiserConfig& cfg,
                          std::uint64_t seed, const std::function<void(const LdmEpochRecord&)>& on_epoch,
                          int stop_after)
{
    cfg.validate();
    check_latents(latents, cfg);
    Rng init(cfg.init_seed);
    TrainedDenoiser den{Denoiser<float>(cfg, init), latent_scale, 0, {}};
    continue_training(den, latents, seed, stop_after < 0 ? cfg.epochs : std::min(stop_after, cfg.epochs), on_epoch);
    return den;
}

void save_denoiser(const std::string& path, TrainedDenoiser& den)
{
    ad::save_checkpoint(path, den.model.params(), {{"kind", "denoiser"}, {"latent_scale", den.latent_scale}});
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& r : den.curve)
        curve.push_back({{"epoch", r.epoch}, {"loss", r.loss}});
    ad::write_sidecar(path, {{"kind", "denoiser"},
                             {"config", den.model.config().to_json()},
                             {"latent_scale", den.latent_scale},
                             {"epochs_done", den.epochs_done},
                             {"param_count", den.model.params().numel()},
                             {"curve", curve}});
}

TrainedDenoiser load_denoiser(const std::string& path)
{
    const auto side = ad::read_sidecar(path);
    if (side.value("kind", "") != "denoiser")
        throw IoError("'" + path + "' is not a denoiser checkpoint");
    const auto cfg = DenoiserConfig::from_json(side.at("config"));
    Rng dummy(0);
    Denoiser<float> model(cfg, dummy);
    ad::load_checkpoint(path, model.params());
    TrainedDenoiser out{std::move(model), side.at("latent_scale").get<double>(), side.value("epochs_done", 0), {}};
    for (const auto& r : side.value("curve", nlohmann::json::array()))
        out.curve.push_back({r.at("epoch"), r.at("loss")});
    return out;
}

}  // namespace lce::ldm
