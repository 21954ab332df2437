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

// lce: dataset generation, training, estimation and benchmarking.
//
//   lce gen-data   --profile small --out data
//   lce train-vae  --profile small --out models/vae.lcew
//   lce train-ldm  --profile small --vae models/vae.lcew --out models/denoiser.lcew
//   lce bench      --config bench.cfg --out results.csv
//   lce estimate   --method psld_ce --snr 10 --n 20
//   lce complexity --profile full

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>
#ifdef LCE_HAVE_OPENMP
#include <omp.h>
#endif

#include "lce/bench/complexity.hpp"
#include "lce/bench/config.hpp"
#include "lce/bench/experiment.hpp"
#include "lce/bench/pipeline.hpp"
#include "lce/common/error.hpp"
#include "lce/common/rng.hpp"

using namespace lce;
using namespace lce::bench;

namespace {

/// Intra-op threads from LCE_THREADS; serial by default.
void apply_thread_limit()
{
    int n = 1;
    if (const char* env = std::getenv("LCE_THREADS")) {
        n = std::atoi(env);
        if (n < 1)
            throw ConfigError("LCE_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    Eigen::setNbThreads(n);
#ifdef LCE_HAVE_OPENMP
    omp_set_num_threads(n);
#endif
}

struct Common {
    std::string config;
    std::optional<std::string> profile;
    std::optional<long long> seed;
    std::optional<std::string> out;
    std::optional<std::string> data;

    void add(CLI::App* app, const std::string& out_help)
    {
        app->add_option("--config", config, "key = value config file");
        app->add_option("--profile", profile, "full | small")->check(CLI::IsMember({"full", "small"}));
        app->add_option("--seed", seed, "seed of this stage's random streams");
        app->add_option("--out", out, out_help);
    }

    /// Loads the config file and applies the flag overrides; `seed_key`
    /// receives --seed.
    Config load(const std::string& seed_key) const
    {
        Config cfg = config.empty() ? Config{} : Config::load(config);
        if (profile)
            cfg.set("profile", *profile);
        if (seed)
            cfg.set(seed_key, std::to_string(*seed));
        if (data)
            cfg.set("data.dir", *data);
        return cfg;
    }
};

std::string stage_out(const Config& cfg, const std::optional<std::string>& flag, const std::string& key,
                      const std::string& fallback)
{
    return flag ? *flag : cfg.get_string(key, fallback);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"PSLD-CE: MIMO channel estimation with a latent diffusion prior"};
    app.require_subcommand(1);

    Common gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "write train/val/test channel datasets");
    gen.add(gen_cmd, "output directory");

    Common tv;
    std::optional<int> tv_epochs;
    auto* tv_cmd = app.add_subcommand("train-vae", "train the VAE");
    tv.add(tv_cmd, "checkpoint path");
    tv_cmd->add_option("--data", tv.data, "dataset directory");
    tv_cmd->add_option("--epochs", tv_epochs, "training epochs");

    Common tl;
    std::optional<int> tl_epochs;
    std::optional<std::string> tl_vae;
    auto* tl_cmd = app.add_subcommand("train-ldm", "train the latent denoiser on a frozen VAE");
    tl.add(tl_cmd, "checkpoint path");
    tl_cmd->add_option("--data", tl.data, "dataset directory");
    tl_cmd->add_option("--vae", tl_vae, "VAE checkpoint");
    tl_cmd->add_option("--epochs", tl_epochs, "training epochs");

    Common es;
    std::optional<std::string> es_vae, es_den, es_pilots, es_trace;
    std::string es_method = "psld_ce";
    double es_snr = 10;
    std::optional<int> es_np, es_n;
    std::optional<double> es_eta;
    auto* es_cmd = app.add_subcommand("estimate", "estimate test-split channels with one method at one SNR");
    es.add(es_cmd, "write the estimates as an LCE1 dataset");
    es_cmd->add_option("--data", es.data, "dataset directory");
    es_cmd->add_option("--vae", es_vae, "VAE checkpoint");
    es_cmd->add_option("--denoiser", es_den, "denoiser checkpoint");
    es_cmd->add_option("--method", es_method, "ls | lmmse | omp | fista | psld_ce");
    es_cmd->add_option("--pilots", es_pilots, "qpsk | dft")->check(CLI::IsMember({"qpsk", "dft"}));
    es_cmd->add_option("--np", es_np, "pilot length");
    es_cmd->add_option("--snr", es_snr, "SNR in dB");
    es_cmd->add_option("--n", es_n, "number of test channels");
    es_cmd->add_option("--eta", es_eta, "PSLD likelihood step size");
    es_cmd->add_option("--trace", es_trace, "write the PSLD guidance trace CSV");

    Common bn;
    std::optional<std::string> bn_vae, bn_den;
    bool bn_no_timing = false;
    auto* bn_cmd = app.add_subcommand("bench", "SNR sweep over the configured methods; writes a CSV");
    bn.add(bn_cmd, "CSV path");
    bn_cmd->add_option("--data", bn.data, "dataset directory");
    bn_cmd->add_option("--vae", bn_vae, "VAE checkpoint");
    bn_cmd->add_option("--denoiser", bn_den, "denoiser checkpoint");
    bn_cmd->add_flag("--no-timing", bn_no_timing, "write time_ms = 0 (byte-stable output)");

    Common cx;
    std::optional<std::string> cx_vae, cx_den;
    std::optional<int> cx_steps;
    bool cx_json = false;
    auto* cx_cmd = app.add_subcommand("complexity", "parameter counts and inference FLOPs");
    cx.add(cx_cmd, "write the report here instead of stdout");
    cx_cmd->add_option("--vae", cx_vae, "count from this VAE checkpoint (with --denoiser)");
    cx_cmd->add_option("--denoiser", cx_den, "count from this denoiser checkpoint (with --vae)");
    cx_cmd->add_option("--steps", cx_steps, "reverse steps T");
    cx_cmd->add_flag("--json", cx_json, "JSON output");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_thread_limit();

        if (*gen_cmd) {
            auto cfg = gen.load("data.seed");
            if (gen.out)
                cfg.set("data.dir", *gen.out);
            const auto d = data_settings(cfg);
            const auto paths = channels::gen_dataset(d.channel, d.sizes, d.seed, d.dir);
            for (std::size_t i = 0; i < 3; ++i)
                std::cout << paths[i] << ": " << d.sizes[i] << " channels\n";
        } else if (*tv_cmd) {
            auto cfg = tv.load("vae.seed");
            if (tv_epochs)
                cfg.set("vae.epochs", std::to_string(*tv_epochs));
            const auto out = stage_out(cfg, tv.out, "vae.out", "models/vae.lcew");
            const auto trained = run_train_vae(cfg, out, std::cout);
            const auto test = load_split(data_settings(cfg).dir, channels::Split::Test);
            std::cout << "test reconstruction NMSE " << vae::reconstruction_nmse_db(trained.model, trained.data_scale, test)
                      << " dB; wrote " << out << "\n";
        } else if (*tl_cmd) {
            auto cfg = tl.load("ldm.seed");
            if (tl_epochs)
                cfg.set("ldm.epochs", std::to_string(*tl_epochs));
            const auto vae_path = tl_vae ? *tl_vae : cfg.get_string("vae.out", "models/vae.lcew");
            const auto out = stage_out(cfg, tl.out, "ldm.out", "models/denoiser.lcew");
            run_train_ldm(cfg, vae_path, out, std::cout);
            std::cout << "wrote " << out << "\n";
        } else if (*es_cmd) {
            auto cfg = es.load("bench.seed");
            if (es_vae)
                cfg.set("bench.vae", *es_vae);
            if (es_den)
                cfg.set("bench.denoiser", *es_den);
            if (es_pilots)
                cfg.set("bench.pilot_kind", *es_pilots);
            if (es_np)
                cfg.set("bench.np", std::to_string(*es_np));
            if (es_n)
                cfg.set("bench.n_test", std::to_string(*es_n));
            if (es_eta)
                cfg.set("psld.eta", std::to_string(*es_eta));
            auto ec = ExperimentConfig::from_config(cfg);
            const auto method = parse_method(es_method);
            Workspace ws(ec);
            const auto& test = ws.test();
            if (test.count < ec.n_test)
                throw ConfigError("test split has only " + std::to_string(test.count) + " channels");
            std::vector<channels::ChannelMatrix> hs;
            for (std::size_t i = 0; i < ec.n_test; ++i)
                hs.push_back(test.channel(i));
            const int nt = static_cast<int>(test.nt);
            Rng prng(pilot_seed(ec.seed));
            const auto x = channels::make_pilots(ec.pilot_kind, ec.pilots_for(nt), nt, prng);
            const auto obs = make_observations(hs, x, es_snr, test_noise_seed(ec.seed, 0));
            const auto res = run_method(method, ws, ec, x, obs, es_snr, 0);
            std::cout << to_string(method) << " " << channels::to_string(ec.pilot_kind) << " Np=" << x.np()
                      << " SNR " << es_snr << " dB: NMSE " << channels::nmse_db(hs, res.estimates) << " dB over "
                      << hs.size() << " channels, " << res.time_ms << " ms/estimate\n";
            if (es.out) {
                channels::write_dataset(*es.out, channels::make_dataset(res.estimates, {{"method", es_method},
                                                                                       {"snr_db", es_snr}}));
                std::cout << "wrote " << *es.out << "\n";
            }
            if (es_trace) {
                std::ofstream tf(*es_trace);
                if (!tf)
                    throw IoError("cannot write '" + *es_trace + "'");
                res.trace.write_csv(tf);
            }
        } else if (*bn_cmd) {
            auto cfg = bn.load("bench.seed");
            if (bn.out)
                cfg.set("bench.output", *bn.out);
            if (bn_vae)
                cfg.set("bench.vae", *bn_vae);
            if (bn_den)
                cfg.set("bench.denoiser", *bn_den);
            if (bn_no_timing)
                cfg.set("bench.timing", "false");
            auto ec = ExperimentConfig::from_config(cfg);
            if (ec.output.empty())
                ec.output = "results.csv";
            run_experiment(ec, &std::cerr);
            std::cerr << "wrote " << ec.output << "\n";
        } else if (*cx_cmd) {
            auto cfg = cx.load("unused.seed");
            if ((cx_vae.has_value()) != (cx_den.has_value()))
                throw UsageError("--vae and --denoiser must be given together");
            ComplexityReport rep;
            const int steps = cx_steps.value_or(0);
            if (cx_vae) {
                rep = count_params(load_vae_checkpoint(*cx_vae), load_denoiser_checkpoint(*cx_den), steps);
            } else {
                const auto v = vae_settings(cfg);
                rep = estimate_flops(v, denoiser_settings(cfg, v), steps);
            }
            const std::string text = cx_json ? rep.to_json().dump(2) + "\n" : rep.to_text();
            if (cx.out) {
                std::ofstream f(*cx.out);
                if (!f)
                    throw IoError("cannot write '" + *cx.out + "'");
                f << text;
            } else {
                std::cout << text;
            }
        }
    } catch (const lce::Error& e) {
        std::cerr << "lce: error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
