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
#include "lce/vae/vae.hpp"

namespace lce::vae {

using ad::Tensor;

namespace {

constexpr std::size_t kEvalBatch = 256;

Tensor<float> scaled(Tensor<float> t, double s)
{
    return ad::scale(t, static_cast<float>(s));
}

}  // namespace

double dataset_rms(const channels::Dataset& ds)
{
    if (ds.values.empty())
        throw ConfigError("empty dataset");
    double s = 0;
    for (float v : ds.values)
        s += static_cast<double>(v) * v;
    return std::sqrt(s / static_cast<double>(ds.values.size()));
}

double reconstruction_nmse_db(const Vae<float>& vae, double data_scale, const channels::Dataset& ds)
{
    ad::NoGradGuard no_grad;
    double err = 0, ref = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.count; start += kEvalBatch) {
        idx.clear();
        for (std::size_t i = start; i < std::min(ds.count, start + kEvalBatch); ++i)
            idx.push_back(i);
        const auto x = scaled(ds.batch(idx), 1.0 / data_scale);
        const auto r = vae.decode(vae.encode_mean(x));
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const double d = static_cast<double>(r.data()[i]) - x.data()[i];
            err += d * d;
            ref += static_cast<double>(x.data()[i]) * x.data()[i];
        }
    }
    if (ref == 0)
        throw DomainError("reconstruction_nmse_db: all-zero dataset");
    return 10.0 * std::log10(err / ref);
}

TrainedVae train_vae(const channels::Dataset& train, const channels::Dataset& val, const VaeConfig& cfg, Rng& rng,
                     const std::function<void(const VaeEpochRecord&)>& on_epoch)
{
    cfg.validate();
    if (train.count == 0)
        throw ConfigError("train_vae: empty training set");
    if (train.nr != static_cast<std::size_t>(cfg.nr) || train.nt != static_cast<std::size_t>(cfg.nt))
        throw ConfigError("train_vae: dataset is (" + std::to_string(train.nr) + ", " + std::to_string(train.nt) +
                          "), config expects (" + std::to_string(cfg.nr) + ", " + std::to_string(cfg.nt) + ")");
    Rng init(cfg.init_seed);
    TrainedVae out{Vae<float>(cfg, init), dataset_rms(train), {}};
    auto& ps = out.model.params();

    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t steps_per_epoch = (train.count + bs - 1) / bs;
    const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
    ad::AdamOptions opt;
    std::size_t step = 0;
    std::vector<std::size_t> idx;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto perm = rng.permutation(train.count);
        double loss_sum = 0;
        for (std::size_t start = 0; start < train.count; start += bs, ++step) {
            idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                       perm.begin() + static_cast<std::ptrdiff_t>(std::min(train.count, start + bs)));
            const auto x = scaled(train.batch(idx), 1.0 / out.data_scale);
            const auto post = out.model.encode(x);
            const auto recon = out.model.decode(reparameterize(post, rng));
            const auto loss = vae_loss(x, recon, post, cfg.kl_weight);
            ps.zero_grad();
            loss.backward();
            opt.lr = cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
            ps.adam_step(opt);
            loss_sum += loss.item();
        }
        VaeEpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.count);
        rec.val_nmse_db = val.count ? reconstruction_nmse_db(out.model, out.data_scale, val) : 0.0;
        out.curve.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }
    return out;
}

void save_vae(const std::string& path, TrainedVae& vae)
{
    nlohmann::json meta{{"kind", "vae"}, {"data_scale", vae.data_scale}};
    ad::save_checkpoint(path, vae.model.params(), meta);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& r : vae.curve)
        curve.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_nmse_db", r.val_nmse_db}});
    ad::write_sidecar(path, {{"kind", "vae"},
                             {"config", vae.model.config().to_json()},
                             {"data_scale", vae.data_scale},
                             {"param_count", vae.model.params().numel()},
                             {"curve", curve}});
}

TrainedVae load_vae(const std::string& path)
{
    const auto side = ad::read_sidecar(path);
    if (side.value("kind", "") != "vae")
        throw IoError("'" + path + "' is not a VAE checkpoint");
    const auto cfg = VaeConfig::from_json(side.at("config"));
    Rng dummy(0);
    Vae<float> model(cfg, dummy);
    ad::load_checkpoint(path, model.params());
    TrainedVae out{std::move(model), side.at("data_scale").get<double>(), {}};
    for (const auto& r : side.value("curve", nlohmann::json::array()))
        out.curve.push_back({r.at("epoch"), r.at("train_loss"), r.at("val_nmse_db")});
    return out;
}

}  // namespace lce::vae
