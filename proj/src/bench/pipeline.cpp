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

#include "lce/bench/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lce/autodiff/ops.hpp"
#include "lce/common/error.hpp"
#include "lce/common/rng.hpp"

namespace lce::bench {

namespace fs = std::filesystem;

std::array<std::size_t, 3> default_split_sizes(channels::Profile p)
{
    if (p == channels::Profile::Small)
        return {2000, 200, 200};
    return {10000, 1000, 1000};
}

channels::Profile config_profile(const Config& cfg)
{
    return channels::parse_profile(cfg.get_string("profile", "small"));
}

namespace {

int as_int(long long v, const char* what)
{
    if (v < 0 || v > (1LL << 30))
        throw ConfigError(std::string(what) + " out of range: " + std::to_string(v));
    return static_cast<int>(v);
}

}  // namespace

DataSettings data_settings(const Config& cfg)
{
    cfg.check_section("data", {"nt", "nr", "n_clusters", "rays_per_cluster", "angle_spread_deg", "geometry",
                               "geometry_seed", "seed", "n_train", "n_val", "n_test", "dir"});
    const auto profile = config_profile(cfg);
    DataSettings d;
    auto& c = d.channel;
    c = channels::ChannelModelConfig::for_profile(profile);
    c.nt = as_int(cfg.get_int("data.nt", c.nt), "data.nt");
    c.nr = as_int(cfg.get_int("data.nr", c.nr), "data.nr");
    c.n_clusters = as_int(cfg.get_int("data.n_clusters", c.n_clusters), "data.n_clusters");
    c.rays_per_cluster = as_int(cfg.get_int("data.rays_per_cluster", c.rays_per_cluster), "data.rays_per_cluster");
    c.angle_spread_deg = cfg.get_double("data.angle_spread_deg", c.angle_spread_deg);
    c.seed = static_cast<std::uint64_t>(cfg.get_int("data.geometry_seed", static_cast<long long>(c.seed)));
    const auto geom = cfg.get_string("data.geometry", "fixed");
    if (geom == "fixed")
        c.geometry = channels::Geometry::Fixed;
    else if (geom == "per_realization")
        c.geometry = channels::Geometry::PerRealization;
    else
        throw ConfigError("data.geometry must be 'fixed' or 'per_realization', got '" + geom + "'");
    c.validate();

    d.sizes = default_split_sizes(profile);
    const char* keys[3] = {"data.n_train", "data.n_val", "data.n_test"};
    for (int i = 0; i < 3; ++i)
        d.sizes[i] = static_cast<std::size_t>(as_int(cfg.get_int(keys[i], static_cast<long long>(d.sizes[i])), keys[i]));
    d.seed = static_cast<std::uint64_t>(cfg.get_int("data.seed", 0));
    d.dir = cfg.get_string("data.dir", "data");
    return d;
}

vae::VaeConfig vae_settings(const Config& cfg)
{
    cfg.check_section("vae", {"latent_channels", "downsample", "w1", "w2", "kl_weight", "lr", "batch_size", "epochs",
                              "init_seed", "seed", "out"});
    const auto data = data_settings(cfg);
    auto v = vae::VaeConfig::for_profile(config_profile(cfg));
    v.nt = data.channel.nt;
    v.nr = data.channel.nr;
    v.latent_channels = as_int(cfg.get_int("vae.latent_channels", v.latent_channels), "vae.latent_channels");
    v.downsample = as_int(cfg.get_int("vae.downsample", v.downsample), "vae.downsample");
    v.w1 = as_int(cfg.get_int("vae.w1", v.w1), "vae.w1");
    v.w2 = as_int(cfg.get_int("vae.w2", v.w2), "vae.w2");
    v.kl_weight = cfg.get_double("vae.kl_weight", v.kl_weight);
    v.lr = cfg.get_double("vae.lr", v.lr);
    v.batch_size = as_int(cfg.get_int("vae.batch_size", v.batch_size), "vae.batch_size");
    v.epochs = as_int(cfg.get_int("vae.epochs", v.epochs), "vae.epochs");
    v.init_seed = static_cast<std::uint64_t>(cfg.get_int("vae.init_seed", static_cast<long long>(v.init_seed)));
    v.validate();
    return v;
}

std::uint64_t vae_train_seed(const Config& cfg)
{
    return static_cast<std::uint64_t>(cfg.get_int("vae.seed", 0));
}

ldm::DenoiserConfig denoiser_settings(const Config& cfg, const vae::VaeConfig& vae)
{
    cfg.check_section("ldm", {"width", "n_resblocks", "time_embed_dim", "steps", "beta_start", "beta_end", "lr",
                              "batch_size", "epochs", "init_seed", "variance", "seed", "out"});
    ldm::DenoiserConfig d;
    const auto ls = vae.latent_shape();
    d.latent_channels = ls[0];
    d.latent_h = ls[1];
    d.latent_w = ls[2];
    d.width = static_cast<std::size_t>(as_int(cfg.get_int("ldm.width", static_cast<long long>(d.width)), "ldm.width"));
    d.n_resblocks = static_cast<std::size_t>(
        as_int(cfg.get_int("ldm.n_resblocks", static_cast<long long>(d.n_resblocks)), "ldm.n_resblocks"));
    d.time_embed_dim = static_cast<std::size_t>(
        as_int(cfg.get_int("ldm.time_embed_dim", static_cast<long long>(d.time_embed_dim)), "ldm.time_embed_dim"));
    const int default_steps = config_profile(cfg) == channels::Profile::Small ? 200 : 1000;
    d.set_steps(as_int(cfg.get_int("ldm.steps", default_steps), "ldm.steps"));
    d.beta_start = cfg.get_double("ldm.beta_start", d.beta_start);
    d.beta_end = cfg.get_double("ldm.beta_end", d.beta_end);
    d.lr = cfg.get_double("ldm.lr", d.lr);
    d.batch_size = as_int(cfg.get_int("ldm.batch_size", d.batch_size), "ldm.batch_size");
    d.epochs = as_int(cfg.get_int("ldm.epochs", d.epochs), "ldm.epochs");
    d.init_seed = static_cast<std::uint64_t>(cfg.get_int("ldm.init_seed", static_cast<long long>(d.init_seed)));
    const auto var = cfg.get_string("ldm.variance", "beta_tilde");
    if (var == "beta_tilde")
        d.variance = ldm::Variance::BetaTilde;
    else if (var == "beta")
        d.variance = ldm::Variance::Beta;
    else
        throw ConfigError("ldm.variance must be 'beta_tilde' or 'beta', got '" + var + "'");
    d.validate();
    return d;
}

std::uint64_t ldm_train_seed(const Config& cfg)
{
    return static_cast<std::uint64_t>(cfg.get_int("ldm.seed", 0));
}

std::string split_path(const std::string& dir, channels::Split s)
{
    return (fs::path(dir) / (channels::to_string(s) + ".lce1")).string();
}

channels::Dataset load_split(const std::string& dir, channels::Split s)
{
    const auto path = split_path(dir, s);
    if (!fs::exists(path))
        throw IoError("dataset '" + path + "' not found; create it with `lce gen-data --out " + dir + "`");
    return channels::read_dataset(path);
}

vae::TrainedVae load_vae_checkpoint(const std::string& path)
{
    if (!fs::exists(path))
        throw IoError("VAE checkpoint '" + path + "' not found; train it with `lce train-vae --out " + path + "`");
    return vae::load_vae(path);
}

ldm::TrainedDenoiser load_denoiser_checkpoint(const std::string& path)
{
    if (!fs::exists(path))
        throw IoError("denoiser checkpoint '" + path + "' not found; train it with `lce train-ldm --out " + path +
                      "`");
    return ldm::load_denoiser(path);
}

LatentSet encode_latents(const vae::TrainedVae& v, const channels::Dataset& ds, std::size_t chunk)
{
    if (ds.count == 0)
        throw ConfigError("encode_latents: empty dataset");
    ad::NoGradGuard guard;
    const auto ls = v.model.config().latent_shape();
    const std::size_t per = ls[0] * ls[1] * ls[2];
    std::vector<float> all(ds.count * per);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.count; start += chunk) {
        const std::size_t n = std::min(chunk, ds.count - start);
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = start + i;
        const auto x = ad::scale(ds.batch(idx), static_cast<float>(1.0 / v.data_scale));
        const auto mu = v.model.encode_mean(x);
        std::copy(mu.data().begin(), mu.data().end(), all.begin() + static_cast<std::ptrdiff_t>(start * per));
    }
    double sum = 0, sq = 0;
    for (float f : all) {
        sum += f;
        sq += static_cast<double>(f) * f;
    }
    const double n = static_cast<double>(all.size());
    const double mean = sum / n;
    LatentSet out;
    out.latent_scale = std::sqrt(std::max(sq / n - mean * mean, 1e-30));
    const auto inv = static_cast<float>(1.0 / out.latent_scale);
    for (auto& f : all)
        f *= inv;
    out.latents = ad::Tensor<float>({ds.count, ls[0], ls[1], ls[2]}, std::move(all));
    return out;
}

namespace {

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void ensure_parent(const std::string& path)
{
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty())
        fs::create_directories(parent);
}

}  // namespace

vae::TrainedVae run_train_vae(const Config& cfg, const std::string& out, std::ostream& log)
{
    const auto data = data_settings(cfg);
    const auto vcfg = vae_settings(cfg);
    const auto train = load_split(data.dir, channels::Split::Train);
    const auto val = load_split(data.dir, channels::Split::Val);
    Rng rng(vae_train_seed(cfg));
    log << "train-vae: " << train.count << " samples, " << vcfg.epochs << " epochs, latent "
        << vcfg.latent_channels << "x" << vcfg.latent_shape()[1] << "x" << vcfg.latent_shape()[2] << "\n";
    auto trained = vae::train_vae(train, val, vcfg, rng, [&](const vae::VaeEpochRecord& r) {
        log << "epoch " << r.epoch << " loss " << fmt("%.6g", r.train_loss) << " val_nmse_db "
            << fmt("%.3f", r.val_nmse_db) << "\n"
            << std::flush;
    });
    ensure_parent(out);
    vae::save_vae(out, trained);
    return trained;
}

ldm::TrainedDenoiser run_train_ldm(const Config& cfg, const std::string& vae_path, const std::string& out,
                                   std::ostream& log)
{
    const auto data = data_settings(cfg);
    const auto v = load_vae_checkpoint(vae_path);
    const auto dcfg = denoiser_settings(cfg, v.model.config());
    const auto train = load_split(data.dir, channels::Split::Train);
    const auto lat = encode_latents(v, train);
    log << "train-ldm: " << train.count << " latents, latent_scale " << fmt("%.6g", lat.latent_scale) << ", T "
        << dcfg.T << ", " << dcfg.epochs << " epochs\n";
    const int every = std::max(1, dcfg.epochs / 20);
    auto den = ldm::train_ldm(lat.latents, lat.latent_scale, dcfg, ldm_train_seed(cfg), [&](const ldm::LdmEpochRecord& r) {
        if (r.epoch % every == 0 || r.epoch == 1 || r.epoch == dcfg.epochs)
            log << "epoch " << r.epoch << " loss " << fmt("%.6g", r.loss) << "\n" << std::flush;
    });
    ensure_parent(out);
    ldm::save_denoiser(out, den);
    return den;
}

}  // namespace lce::bench
