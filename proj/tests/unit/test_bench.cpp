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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lce/bench/complexity.hpp"
#include "lce/bench/config.hpp"
#include "lce/bench/experiment.hpp"
#include "lce/bench/pipeline.hpp"
#include "lce/common/error.hpp"

using namespace lce;
using namespace lce::bench;
namespace fs = std::filesystem;

namespace {

Config parse(const std::string& text)
{
    std::istringstream in(text);
    return Config::parse(in, "test.cfg");
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// A throwaway Small-profile dataset directory.
std::string small_data(const std::string& name)
{
    const auto dir = (fs::temp_directory_path() / ("lce_bench_" + name)).string();
    fs::remove_all(dir);
    auto cfg = channels::ChannelModelConfig::for_profile(channels::Profile::Small);
    channels::gen_dataset(cfg, {64, 16, 24}, 9, dir);
    return dir;
}

}  // namespace

TEST_CASE("config reader: sections, comments, lists and typed getters")
{
    const auto cfg = parse("profile = full  # top level\n\n[bench]\nsnr_db = 0, 10 ,20\nmethods = ls,omp\n"
                           "n_test = 12\ntiming = off\n[psld]\neta = 2.5\n");
    CHECK(cfg.get_string("profile", "") == "full");
    CHECK(cfg.get_doubles("bench.snr_db", {}) == std::vector<double>{0, 10, 20});
    CHECK(cfg.get_list("bench.methods", {}) == std::vector<std::string>{"ls", "omp"});
    CHECK(cfg.get_int("bench.n_test", 0) == 12);
    CHECK_FALSE(cfg.get_bool("bench.timing", true));
    CHECK(cfg.get_double("psld.eta", 0) == 2.5);
    CHECK(cfg.get_int("bench.missing", 7) == 7);
    CHECK(std::isinf(parse("x = inf\n").get_double("x", 0)));

    CHECK_THROWS_AS(parse("[bench\n"), ConfigError);
    CHECK_THROWS_AS(parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("n = 1.5\n").get_int("n", 0), ConfigError);
    CHECK_THROWS_AS(parse("b = maybe\n").get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(parse("[bench]\nsnr = 0\n").check_section("bench", {"snr_db"}), ConfigError);
    try {
        parse("\n[s]\nk = x\n").get_double("s.k", 0);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("test.cfg:3") != std::string::npos);
    }
}

TEST_CASE("experiment config parsing and validation")
{
    const auto e = ExperimentConfig::from_config(
        parse("[bench]\npilot_kind = dft\nsnr_db = 5\nmethods = ls, psld_ce\nseed = 4\n[psld]\neta = 3\n"));
    CHECK(e.pilot_kind == channels::PilotKind::DftUnitary);
    CHECK(e.pilots_for(16) == 16);
    CHECK(e.methods == std::vector<Method>{Method::Ls, Method::PsldCe});
    CHECK(e.psld.eta == 3);
    CHECK(e.psld.gamma_value() == doctest::Approx(0.75));
    CHECK(ExperimentConfig::from_config(parse("")).pilots_for(16) == 10);  // QPSK default ratio 0.6

    CHECK_THROWS_AS(ExperimentConfig::from_config(parse("[bench]\nmethods = ls, amp\n")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_config(parse("[bench]\nsnr_db =\n")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_config(parse("[bench]\nn_test = 0\n")), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_config(parse("[psld]\nstep = 1\n")), ConfigError);
    for (auto m : {Method::Ls, Method::Lmmse, Method::Omp, Method::Fista, Method::PsldCe})
        CHECK(parse_method(to_string(m)) == m);
}

TEST_CASE("profile settings follow the data section")
{
    const auto small = parse("profile = small\n");
    CHECK(data_settings(small).sizes == std::array<std::size_t, 3>{2000, 200, 200});
    const auto v = vae_settings(small);
    CHECK(v.nt == 16);
    CHECK(denoiser_settings(small, v).T == 200);
    const auto full = parse("profile = full\n[data]\nn_train = 10\n");
    CHECK(data_settings(full).sizes == std::array<std::size_t, 3>{10, 1000, 1000});
    CHECK(denoiser_settings(full, vae_settings(full)).T == 1000);
    CHECK_THROWS_AS(data_settings(parse("[data]\ngeometry = random\n")), ConfigError);
    CHECK_THROWS_AS(vae_settings(parse("[vae]\ndownsample = 3\n")), ConfigError);
}

TEST_CASE("CSV schema is stable")
{
    ResultTable t;
    t.rows.push_back({Method::PsldCe, 10, 10, channels::PilotKind::QpskRandom, -12.34567, 1.5, 3});
    t.rows.push_back({Method::Ls, channels::kInfiniteSnr, 16, channels::PilotKind::DftUnitary, -300, 0, 3});
    std::ostringstream os;
    t.write_csv(os);
    CHECK(os.str() == "method,snr_db,np,pilot_kind,nmse_db,time_ms,seed\n"
                      "psld_ce,10,10,qpsk,-12.3457,1.500,3\n"
                      "ls,inf,16,dft,-300.0000,0.000,3\n");
    CHECK(t.at(Method::PsldCe, 10).np == 10);
    CHECK_THROWS_AS(t.at(Method::Omp, 10), UsageError);
}

TEST_CASE("complexity: totals are sums of parts and match the tensors")
{
    const auto full = parse("profile = full\n");
    const auto v = vae_settings(full);
    const auto d = denoiser_settings(full, v);
    const auto r = estimate_flops(v, d);
    CHECK(r.t_steps == 1000);
    CHECK(r.total_params() == r.encoder.params() + r.decoder.params() + r.denoiser.params());
    CHECK(r.total_params() >= 100000);
    CHECK(r.total_params() <= 300000);
    CHECK(r.denoiser_step_flops() <= 1e7);
    CHECK(r.denoiser_step_flops() < 0.05 * r.decoder_flops());
    CHECK(r.total_flops() == doctest::Approx(1000 * r.guided_step_flops() + r.decoder_flops()));

    Rng rng(1);
    vae::TrainedVae tv{vae::Vae<float>(v, rng), 1.0, {}};
    ldm::TrainedDenoiser td{ldm::Denoiser<float>(d, rng), 1.0, 0, {}};
    CHECK(count_params(tv, td).total_params() == tv.model.params().numel() + td.model.params().numel());

    // Resblock cost is quadratic in width.
    auto d2 = d;
    d2.width *= 2;
    auto res_flops = [](const ComplexityReport& rep) {
        for (const auto& l : rep.denoiser.layers)
            if (l.name == "res1")
                return l.flops;
        return 0.0;
    };
    CHECK(res_flops(estimate_flops(v, d2)) / res_flops(r) == doctest::Approx(4.0).epsilon(0.01));
    CHECK(r.to_json()["params"]["total"] == r.total_params());
}

TEST_CASE("experiment: LS rows, row count, determinism and missing inputs")
{
    const auto dir = small_data("exp");
    ExperimentConfig e;
    e.data_dir = dir;
    e.pilot_kind = channels::PilotKind::DftUnitary;
    e.np_ratio = 1;
    e.snr_db = {channels::kInfiniteSnr, 10};
    e.methods = {Method::Ls, Method::Lmmse, Method::Omp, Method::Fista};
    e.n_test = 20;
    e.n_val = 8;
    e.fista_iters = 20;
    e.timing = false;
    e.output = (fs::path(dir) / "out" / "r.csv").string();
    const auto t = run_experiment(e);
    CHECK(t.rows.size() == 8);
    CHECK(t.at(Method::Ls, channels::kInfiniteSnr).nmse_db < -200);
    CHECK(t.at(Method::Lmmse, 10).nmse_db < t.at(Method::Ls, 10).nmse_db);
    const auto first = read_file(e.output);
    run_experiment(e);
    CHECK(read_file(e.output) == first);

    e.methods = {Method::PsldCe};
    e.vae_path = dir + "/nope.lcew";
    try {
        run_experiment(e);
        FAIL("expected an error");
    } catch (const IoError& err) {
        CHECK(std::string(err.what()).find("lce train-vae") != std::string::npos);
    }
    e.n_test = 1000;
    CHECK_THROWS_AS(run_experiment(e), ConfigError);
    e.data_dir = dir + "/missing";
    try {
        run_experiment(e);
        FAIL("expected an error");
    } catch (const IoError& err) {
        CHECK(std::string(err.what()).find("lce gen-data") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("latents are standardized encoder means")
{
    const auto dir = small_data("lat");
    const auto train = channels::read_dataset(split_path(dir, channels::Split::Train));
    Rng rng(2);
    vae::TrainedVae tv{vae::Vae<float>(vae::VaeConfig::for_profile(channels::Profile::Small), rng), 1.7, {}};
    const auto lat = encode_latents(tv, train, 10);
    CHECK(lat.latents.shape() == ad::Shape{64, 8, 2, 8});
    double sum = 0, sq = 0;
    for (float f : lat.latents.data()) {
        sum += f;
        sq += double(f) * f;
    }
    const double n = double(lat.latents.numel()), mean = sum / n;
    CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(1e-4));
    fs::remove_all(dir);
}
